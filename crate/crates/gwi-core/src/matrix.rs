//! Dense nonnegative mean matrices, the l1/operator norms, the spectral
//! radius via the Gelfand sequence, and the contraction power.
//!
//! Vectors are row vectors multiplied from the left, so the operator norm
//! is the maximum absolute row sum.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Offspring mean matrix: entry (i, j) is the mean number of type-j
/// children of a type-i parent.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrix {
    d: usize,
    entries: Vec<f64>, // row-major
}

/// Spectral information of a mean matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    /// Spectral radius estimate (Gelfand limit of ||M^k||^(1/k)).
    pub rho: f64,
    pub rho_tolerance: f64,
    /// Smallest power with ||M^r|| < 1 (1 when not subcritical, unused then).
    pub r: u32,
    /// rho + tol < 1, classified conservatively.
    pub subcritical: bool,
}

impl MeanMatrix {
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        if entries.len() != d * d {
            return Err(Error::InvalidParameter("matrix entries must be d*d".into()));
        }
        if entries.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite and nonnegative".into(),
            ));
        }
        Ok(MeanMatrix { d, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::InvalidParameter("matrix rows must have length d".into()));
            }
            entries.extend_from_slice(row);
        }
        Self::new(d, entries)
    }

    pub fn zero(d: usize) -> Self {
        MeanMatrix { d, entries: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zero(d);
        for i in 0..d {
            m.entries[i * d + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn matmul(&self, other: &MeanMatrix) -> MeanMatrix {
        debug_assert_eq!(self.d, other.d);
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * other.entries[k * d + j];
                }
            }
        }
        MeanMatrix { d, entries: out }
    }

    pub fn scale(&self, s: f64) -> MeanMatrix {
        MeanMatrix {
            d: self.d,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    /// M^k by repeated multiplication. Fine for the small k used here;
    /// callers that need large powers go through the log-scaled path.
    pub fn pow(&self, k: u32) -> MeanMatrix {
        let mut acc = MeanMatrix::identity(self.d);
        for _ in 0..k {
            acc = acc.matmul(self);
        }
        acc
    }

    /// Maximum absolute row sum (operator norm for the row-vector convention).
    pub fn operator_norm(&self) -> f64 {
        self.row_sums().into_iter().fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.row(i).iter().sum()).collect()
    }
}

/// Sum of absolute components.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| math::abs(*x)).sum()
}

/// v M^k with the row-vector convention; k = 0 returns v.
pub fn row_apply(v: &[f64], m: &MeanMatrix, k: u32) -> Vec<f64> {
    debug_assert_eq!(v.len(), m.dim());
    let d = m.dim();
    let mut cur = v.to_vec();
    for _ in 0..k {
        let mut next = vec![0.0; d];
        for (i, &vi) in cur.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for j in 0..d {
                next[j] += vi * m.get(i, j);
            }
        }
        cur = next;
    }
    cur
}

/// Spectral radius via the Gelfand sequence ||M^(2^t)||^(1/2^t) with
/// repeated squaring. Powers are renormalized to norm 1 after every
/// squaring and the scale is tracked on the log scale, so nothing under-
/// or overflows even for powers like 2^50.
pub fn spectral_radius(m: &MeanMatrix, tol: f64) -> SpectralInfo {
    assert!(tol > 0.0, "tolerance must be positive");
    let norm0 = m.operator_norm();
    if norm0 == 0.0 {
        return SpectralInfo { rho: 0.0, rho_tolerance: tol, r: 1, subcritical: true };
    }

    // a = M^(2^t) / exp(log_scale), normalized so ||a|| = 1.
    let mut a = m.scale(1.0 / norm0);
    let mut log_gelfand = math::ln(norm0); // log ||M^(2^t)|| / 2^t
    let mut rho = math::exp(log_gelfand);
    let mut prev_ratio_est: Option<f64> = None;

    for t in 0..60u32 {
        let sq = a.matmul(&a);
        let n = sq.operator_norm();
        if n == 0.0 {
            // Nilpotent: every eigenvalue is zero.
            rho = 0.0;
            break;
        }
        let half = 1.0 / (1u64 << (t + 1)) as f64;
        // Ratio estimate ||M^(2k)|| / ||M^k|| ~ rho^k, k = 2^t.
        let ratio_est = math::exp(log_gelfand + math::ln(n) * 2.0 * half);
        log_gelfand += math::ln(n) * half;
        a = sq.scale(1.0 / n);

        rho = ratio_est;
        if let Some(prev) = prev_ratio_est {
            if math::abs(ratio_est - prev) < 0.5 * tol {
                break;
            }
        }
        prev_ratio_est = Some(ratio_est);
    }

    // The Gelfand terms are upper bounds; never report above the last one.
    let upper = math::exp(log_gelfand);
    if rho > upper {
        rho = upper;
    }
    if rho < 0.0 {
        rho = 0.0;
    }

    let subcritical = rho + tol < 1.0;
    let r = if subcritical {
        contraction_power(m, 4096).unwrap_or(1)
    } else {
        1
    };
    SpectralInfo { rho, rho_tolerance: tol, r, subcritical }
}

/// Smallest r <= max_r with ||M^r|| < 1. Uses log-scaled powers so
/// near-critical matrices with large ||M|| cannot overflow.
pub fn contraction_power(m: &MeanMatrix, max_r: u64) -> Result<u32> {
    let mut p = MeanMatrix::identity(m.dim());
    let mut log_scale = 0.0f64;
    for r in 1..=max_r {
        p = p.matmul(m);
        let n = p.operator_norm();
        if n == 0.0 {
            return Ok(r as u32);
        }
        log_scale += math::ln(n);
        if log_scale < 0.0 {
            return Ok(r as u32);
        }
        p = p.scale(1.0 / n);
    }
    Err(Error::NotFoundWithinBudget { budget: max_r })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> MeanMatrix {
        MeanMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(l1_norm(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(l1_norm(&[1.0, -2.0, 3.0]), 6.0);
        assert_eq!(l1_norm(&[0.5, 0.5]), 1.0);
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(mat(&[&[0.2, 0.3], &[0.4, 0.1]]).operator_norm(), 0.5);
        assert_eq!(MeanMatrix::identity(2).operator_norm(), 1.0);
        assert_eq!(mat(&[&[0.0, 2.0], &[0.05, 0.0]]).operator_norm(), 2.0);
    }

    #[test]
    fn spectral_radius_diagonal() {
        let info = spectral_radius(&mat(&[&[0.5, 0.0], &[0.0, 0.3]]), 1e-9);
        assert!((info.rho - 0.5).abs() < 1e-9);
        assert!(info.subcritical);
        assert_eq!(info.r, 1);
    }

    #[test]
    fn spectral_radius_periodic() {
        // Characteristic polynomial lambda^2 = 0.16.
        let info = spectral_radius(&mat(&[&[0.0, 0.8], &[0.2, 0.0]]), 1e-9);
        assert!((info.rho - 0.4).abs() < 1e-8, "rho = {}", info.rho);
    }

    #[test]
    fn spectral_radius_norm_above_one() {
        // lambda^2 = 0.1, so rho = sqrt(0.1) ~ 0.3162 although ||M|| = 2.
        let info = spectral_radius(&mat(&[&[0.0, 2.0], &[0.05, 0.0]]), 1e-9);
        assert!((info.rho - 0.1f64.sqrt()).abs() < 1e-8, "rho = {}", info.rho);
        assert!(info.subcritical);
        assert_eq!(info.r, 2);
    }

    #[test]
    fn spectral_radius_zero_and_supercritical() {
        let info = spectral_radius(&MeanMatrix::zero(3), 1e-9);
        assert_eq!(info.rho, 0.0);
        assert!(info.subcritical);

        let info = spectral_radius(&mat(&[&[1.1]]), 1e-9);
        assert!((info.rho - 1.1).abs() < 1e-8);
        assert!(!info.subcritical);
    }

    #[test]
    fn contraction_power_examples() {
        assert_eq!(contraction_power(&mat(&[&[0.2, 0.3], &[0.4, 0.1]]), 16).unwrap(), 1);
        assert_eq!(contraction_power(&mat(&[&[0.0, 2.0], &[0.05, 0.0]]), 16).unwrap(), 2);
        assert_eq!(contraction_power(&mat(&[&[0.99, 0.0], &[0.0, 0.99]]), 16).unwrap(), 1);
        assert!(matches!(
            contraction_power(&mat(&[&[1.0]]), 16),
            Err(Error::NotFoundWithinBudget { .. })
        ));
    }

    #[test]
    fn row_apply_examples() {
        let m = mat(&[&[0.5, 0.2], &[0.0, 0.3]]);
        assert_eq!(row_apply(&[1.0, 0.0], &m, 1), vec![0.5, 0.2]);
        assert_eq!(row_apply(&[0.7, 1.3], &m, 0), vec![0.7, 1.3]);
        let diag = mat(&[&[0.5, 0.0], &[0.0, 0.5]]);
        let v = row_apply(&[1.0, 1.0], &diag, 3);
        assert!((v[0] - 0.125).abs() < 1e-15 && (v[1] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gelfand_terms_dominate_rho() {
        // ||M^k||^(1/k) >= rho for every k.
        let m = mat(&[&[0.1, 0.7], &[0.3, 0.2]]);
        let rho = spectral_radius(&m, 1e-9).rho;
        for k in 1..=12u32 {
            let g = m.pow(k).operator_norm().powf(1.0 / k as f64);
            assert!(g >= rho - 1e-9, "k={k}: {g} < {rho}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_matrix() -> impl Strategy<Value = MeanMatrix> {
            (1usize..=4).prop_flat_map(|d| {
                proptest::collection::vec(0.0f64..1.2, d * d)
                    .prop_map(move |entries| MeanMatrix::new(d, entries).unwrap())
            })
        }

        proptest! {
            #[test]
            fn submultiplicative(m in small_matrix(), a in 1u32..=8, b in 1u32..=8) {
                let lhs = m.pow(a + b).operator_norm();
                let rhs = m.pow(a).operator_norm() * m.pow(b).operator_norm();
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
            }

            #[test]
            fn row_apply_composes(m in small_matrix(), a in 0u32..=6, b in 0u32..=6) {
                let v: Vec<f64> = (0..m.dim()).map(|i| 1.0 + i as f64).collect();
                let direct = row_apply(&v, &m, a + b);
                let staged = row_apply(&row_apply(&v, &m, a), &m, b);
                for (x, y) in direct.iter().zip(staged.iter()) {
                    let scale = x.abs().max(y.abs()).max(1e-300);
                    prop_assert!((x - y).abs() / scale < 1e-12);
                }
            }

            #[test]
            fn contraction_power_verifies(m in small_matrix()) {
                let info = spectral_radius(&m, 1e-9);
                if info.subcritical {
                    if let Ok(r) = contraction_power(&m, 4096) {
                        if r <= 64 {
                            prop_assert!(m.pow(r).operator_norm() < 1.0);
                        }
                    }
                }
            }
        }
    }
}
