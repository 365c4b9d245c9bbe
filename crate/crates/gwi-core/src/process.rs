//! The branching simulation core: one-step branching (theta), the chain
//! with immigration, branching without immigration, stationary sampling by
//! forward simulation, and an exhaustive-convolution PMF oracle for small
//! finite models.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::laws::{MomentValue, OffspringSpec, VectorLaw};
use crate::math;
use crate::matrix::{self, l1_norm, MeanMatrix, SpectralInfo};
use crate::rng::RngCore;

/// Total-population guard; a subcritical model that trips this was
/// misconfigured (or not subcritical after all).
pub const EXPLOSION_GUARD: u64 = 1 << 48;

/// Population state: a d-vector of nonnegative individual counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PopulationVec {
    counts: Vec<u64>,
}

impl PopulationVec {
    pub fn new(counts: Vec<u64>) -> Self {
        PopulationVec { counts }
    }

    pub fn zero(d: usize) -> Self {
        PopulationVec { counts: vec![0; d] }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Total population (the l1 norm).
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

impl From<Vec<u64>> for PopulationVec {
    fn from(counts: Vec<u64>) -> Self {
        PopulationVec { counts }
    }
}

/// A trajectory of the chain, X_0 = 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub generations: Vec<PopulationVec>,
}

/// Full model: offspring laws per type, immigration law, and the cached
/// mean matrix and spectral information. Immutable after construction and
/// safe to share across workers.
#[derive(Debug, Clone)]
pub struct GwiModel {
    d: usize,
    offspring: OffspringSpec,
    immigration: VectorLaw,
    mean_matrix: MeanMatrix,
    spectral: SpectralInfo,
}

impl GwiModel {
    pub fn new(offspring: OffspringSpec, immigration: VectorLaw) -> Result<Self> {
        let d = offspring.dim();
        immigration.validate(d)?;
        let mean_matrix = offspring.mean_matrix()?;
        let spectral = matrix::spectral_radius(&mean_matrix, 1e-9);
        Ok(GwiModel { d, offspring, immigration, mean_matrix, spectral })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn offspring(&self) -> &OffspringSpec {
        &self.offspring
    }

    pub fn immigration(&self) -> &VectorLaw {
        &self.immigration
    }

    pub fn mean_matrix(&self) -> &MeanMatrix {
        &self.mean_matrix
    }

    pub fn spectral(&self) -> &SpectralInfo {
        &self.spectral
    }

    pub fn require_subcritical(&self) -> Result<()> {
        if self.spectral.subcritical {
            Ok(())
        } else {
            Err(Error::NotSubcritical { rho: self.spectral.rho })
        }
    }

    /// Immigration mean vector, or None if any component is infinite.
    pub fn immigration_mean(&self) -> Option<Vec<f64>> {
        self.immigration
            .mean_vector()
            .into_iter()
            .map(|m| m.finite())
            .collect()
    }
}

/// One branching step applied to a population vector: every individual of
/// every type draws an independent offspring vector; no immigration.
/// The zero vector maps to the zero vector.
pub fn apply_theta(
    model: &GwiModel,
    k: &PopulationVec,
    rng: &mut impl RngCore,
) -> Result<PopulationVec> {
    let d = model.dim();
    debug_assert_eq!(k.dim(), d);
    let mut next = vec![0u64; d];
    let mut total: u64 = 0;
    for (j, &count) in k.counts().iter().enumerate() {
        let law = model.offspring().law(j);
        for _ in 0..count {
            let child = law.sample(rng);
            for (slot, c) in next.iter_mut().zip(child.iter()) {
                *slot += c;
                total = total.saturating_add(*c);
            }
            if total > EXPLOSION_GUARD {
                return Err(Error::ExplosionGuard { total: total as u128 });
            }
        }
    }
    Ok(PopulationVec::new(next))
}

/// One generation of the chain: branching plus a fresh immigrant batch.
pub fn step(model: &GwiModel, x: &PopulationVec, rng: &mut impl RngCore) -> Result<PopulationVec> {
    let branched = apply_theta(model, x, rng)?;
    let immigrants = model.immigration().sample(rng);
    let mut counts = branched.counts.clone();
    let mut total: u64 = 0;
    for (slot, b) in counts.iter_mut().zip(immigrants.iter()) {
        *slot += b;
        total = total.saturating_add(*slot);
    }
    if total > EXPLOSION_GUARD {
        return Err(Error::ExplosionGuard { total: total as u128 });
    }
    Ok(PopulationVec::new(counts))
}

/// Simulate X_0 = 0, X_1, ..., X_n.
pub fn simulate_trajectory(
    model: &GwiModel,
    n_gens: u32,
    rng: &mut impl RngCore,
) -> Result<Trajectory> {
    assert!(n_gens >= 1);
    let mut generations = Vec::with_capacity(n_gens as usize + 1);
    let mut x = PopulationVec::zero(model.dim());
    generations.push(x.clone());
    for _ in 0..n_gens {
        x = step(model, &x, rng)?;
        generations.push(x.clone());
    }
    Ok(Trajectory { generations })
}

/// k generations of branching without immigration starting from `init`;
/// k = 0 returns `init` unchanged.
pub fn branch_no_immigration(
    model: &GwiModel,
    init: &PopulationVec,
    k: u32,
    rng: &mut impl RngCore,
) -> Result<PopulationVec> {
    let mut x = init.clone();
    for _ in 0..k {
        if x.is_zero() {
            return Ok(x); // absorbing
        }
        x = apply_theta(model, &x, rng)?;
    }
    Ok(x)
}

/// Number of forward generations N such that X_N approximates the
/// stationary law: the omitted series tail is below eps in the sense of
/// the mean (finite-mean immigration) or of the alpha-moment geometric
/// bound (infinite-mean immigration, alpha_hint < 1).
pub fn stationary_depth(model: &GwiModel, alpha_hint: f64, eps: f64) -> Result<u32> {
    model.require_subcritical()?;
    assert!(eps > 0.0);
    let m = model.mean_matrix();

    if let Some(mean_b) = model.immigration_mean() {
        // sum_{i>=N} ||E[B] M^i|| <= (sum of r consecutive block norms) / (1 - q).
        let r = model.spectral.r;
        let q = m.pow(r).operator_norm();
        debug_assert!(q < 1.0);
        if l1_norm(&mean_b) == 0.0 {
            return Ok(1);
        }
        let mut v = mean_b;
        let mut n: u32 = 1;
        // Walk the exact series; the block sum is a rigorous tail bound.
        loop {
            let mut block = 0.0;
            let mut w = v.clone();
            for _ in 0..r {
                block += l1_norm(&w);
                w = matrix::row_apply(&w, m, 1);
            }
            if block / (1.0 - q) <= eps {
                return Ok(n);
            }
            v = matrix::row_apply(&v, m, 1);
            n += 1;
            if n > 1_000_000 {
                return Err(Error::TruncationUnbounded);
            }
        }
    }

    // Infinite-mean immigration: geometric alpha-moment bound with the
    // inflated spectral radius rho + (1 - rho)/4.
    if alpha_hint >= 1.0 {
        return Err(Error::TruncationUnbounded);
    }
    let b_alpha = match model.immigration().alpha_moment(alpha_hint)? {
        MomentValue::Finite(x) => x,
        MomentValue::Infinite => return Err(Error::TruncationUnbounded),
    };
    if b_alpha == 0.0 {
        return Ok(1);
    }
    let rho = model.spectral.rho;
    let delta = (1.0 - rho) / 4.0;
    let g = math::pow(rho + delta, alpha_hint);
    if g <= 0.0 {
        return Ok(1);
    }
    // g^N * b_alpha / (1 - g) <= eps.
    let n = math::ln(eps * (1.0 - g) / b_alpha) / math::ln(g);
    Ok((math::floor(n) as i64).max(0) as u32 + 1)
}

/// Draw one sample distributed (up to the eps truncation) as the
/// stationary vector Y, by forward simulation of the chain.
pub fn sample_stationary(
    model: &GwiModel,
    alpha_hint: f64,
    eps: f64,
    rng: &mut impl RngCore,
) -> Result<PopulationVec> {
    let depth = stationary_depth(model, alpha_hint, eps)?;
    sample_stationary_at_depth(model, depth, rng)
}

/// Forward-simulate exactly `depth` generations from zero and return X_depth.
pub fn sample_stationary_at_depth(
    model: &GwiModel,
    depth: u32,
    rng: &mut impl RngCore,
) -> Result<PopulationVec> {
    let mut x = PopulationVec::zero(model.dim());
    for _ in 0..depth {
        x = step(model, &x, rng)?;
    }
    Ok(x)
}

type VecPmf = BTreeMap<Vec<u64>, f64>;

/// Exact distribution of X_n by exhaustive convolution, for small models
/// with finite-support laws. Intended as a brute-force oracle: d <= 2,
/// n <= 4, support bounded per component by `support_cap`.
pub fn exact_generation_pmf(
    model: &GwiModel,
    n: u32,
    support_cap: u64,
) -> Result<Vec<(Vec<u64>, f64)>> {
    if model.dim() > 2 {
        return Err(Error::UnsupportedLaw("exact pmf oracle supports d <= 2".into()));
    }
    if n > 4 {
        return Err(Error::UnsupportedLaw("exact pmf oracle supports n <= 4".into()));
    }
    let immigration_pmf = vec_law_pmf(model.immigration(), support_cap)?;
    let offspring_pmf: Vec<VecPmf> = (0..model.dim())
        .map(|j| vec_law_pmf(model.offspring().law(j), support_cap))
        .collect::<Result<_>>()?;

    let d = model.dim();
    let mut current: VecPmf = BTreeMap::new();
    current.insert(vec![0; d], 1.0);

    for _ in 0..n {
        let mut next: VecPmf = BTreeMap::new();
        for (state, p) in &current {
            // Distribution of theta applied to this state.
            let mut branched: VecPmf = BTreeMap::new();
            branched.insert(vec![0; d], 1.0);
            for (j, &count) in state.iter().enumerate() {
                for _ in 0..count {
                    branched = convolve(&branched, &offspring_pmf[j], support_cap)?;
                }
            }
            let with_imm = convolve(&branched, &immigration_pmf, support_cap)?;
            for (v, q) in with_imm {
                *next.entry(v).or_insert(0.0) += p * q;
            }
        }
        current = next;
        let mass: f64 = current.values().sum();
        if math::abs(mass - 1.0) > 1e-10 {
            return Err(Error::SupportCapExceeded { cap: support_cap });
        }
    }
    Ok(current.into_iter().collect())
}

fn vec_law_pmf(law: &VectorLaw, cap: u64) -> Result<VecPmf> {
    let mut pmf: VecPmf = BTreeMap::new();
    for (v, p) in law.support_pmf()? {
        if v.iter().any(|&x| x > cap) {
            return Err(Error::SupportCapExceeded { cap });
        }
        *pmf.entry(v).or_insert(0.0) += p;
    }
    Ok(pmf)
}

fn convolve(a: &VecPmf, b: &VecPmf, cap: u64) -> Result<VecPmf> {
    let mut out: VecPmf = BTreeMap::new();
    for (va, pa) in a {
        for (vb, pb) in b {
            let sum: Vec<u64> = va.iter().zip(vb.iter()).map(|(x, y)| x + y).collect();
            if sum.iter().any(|&x| x > cap) {
                return Err(Error::SupportCapExceeded { cap });
            }
            *out.entry(sum).or_insert(0.0) += pa * pb;
        }
    }
    Ok(out)
}
