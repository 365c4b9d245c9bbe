//! Nonnegative-integer offspring and immigration laws.
//!
//! Scalar families cover the usual light-tailed laws plus a discrete Pareto
//! parameterized by its tail exponent, P(X >= n) = n^(-beta) for n >= 1, so
//! the order-alpha moment is finite exactly when alpha < beta. Moments are
//! exact where a closed form exists and otherwise computed by adaptive
//! truncated summation with a certified tail bound.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::MeanMatrix;
use crate::rng::{uniform_open01, RngCore};

/// Relative tail tolerance for adaptive moment summation.
const MOMENT_REL_TOL: f64 = 1e-9;
/// Term budget for adaptive summation.
const MOMENT_TERM_BUDGET: u64 = 10_000_000;

/// A moment that is either a finite nonnegative real or infinite.
/// Infinity is a first-class flag, never an overflowed float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentValue {
    Finite(f64),
    Infinite,
}

impl MomentValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, MomentValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            MomentValue::Finite(x) => Some(*x),
            MomentValue::Infinite => None,
        }
    }
}

/// Scalar law on the nonnegative integers.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarLaw {
    Deterministic(u64),
    Bernoulli(f64),
    Binomial { n: u64, p: f64 },
    Poisson(f64),
    /// Success probability `p`, support {0, 1, 2, ...}, mean (1-p)/p.
    Geometric(f64),
    /// Tail exponent `beta`: P(X >= n) = n^(-beta) for integer n >= 1.
    DiscretePareto(f64),
    FinitePmf(Vec<(u64, f64)>),
}

impl ScalarLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(String::from(msg)));
        match self {
            ScalarLaw::Deterministic(_) => Ok(()),
            ScalarLaw::Bernoulli(p) => {
                if !(0.0..=1.0).contains(p) {
                    return bad("bernoulli p must be in [0,1]");
                }
                Ok(())
            }
            ScalarLaw::Binomial { n, p } => {
                if !(0.0..=1.0).contains(p) {
                    return bad("binomial p must be in [0,1]");
                }
                if *n > 1_000_000 {
                    return bad("binomial n must be <= 1e6");
                }
                Ok(())
            }
            ScalarLaw::Poisson(lambda) => {
                if !lambda.is_finite() || *lambda < 0.0 || *lambda > 500.0 {
                    return bad("poisson lambda must be in [0, 500]");
                }
                Ok(())
            }
            ScalarLaw::Geometric(p) => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return bad("geometric p must be in (0,1]");
                }
                Ok(())
            }
            ScalarLaw::DiscretePareto(beta) => {
                if !(*beta > 0.0) || !beta.is_finite() {
                    return bad("discrete pareto beta must be > 0");
                }
                Ok(())
            }
            ScalarLaw::FinitePmf(table) => {
                if table.is_empty() {
                    return bad("finite pmf must be nonempty");
                }
                let mut total = 0.0;
                for (_, p) in table {
                    if !(*p >= 0.0) || !p.is_finite() {
                        return bad("finite pmf probabilities must be nonnegative");
                    }
                    total += p;
                }
                if math::abs(total - 1.0) > 1e-12 {
                    return bad("finite pmf must sum to 1 within 1e-12");
                }
                Ok(())
            }
        }
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> u64 {
        match self {
            ScalarLaw::Deterministic(c) => *c,
            ScalarLaw::Bernoulli(p) => {
                if uniform_open01(rng) < *p {
                    1
                } else {
                    0
                }
            }
            ScalarLaw::Binomial { n, p } => {
                let mut count = 0;
                for _ in 0..*n {
                    if uniform_open01(rng) < *p {
                        count += 1;
                    }
                }
                count
            }
            ScalarLaw::Poisson(lambda) => sample_poisson(*lambda, rng),
            ScalarLaw::Geometric(p) => {
                if *p >= 1.0 {
                    return 0;
                }
                let u = uniform_open01(rng);
                // P(X >= n) = (1-p)^n.
                let x = math::floor(math::ln(u) / math::ln(1.0 - *p));
                saturate_u64(x)
            }
            ScalarLaw::DiscretePareto(beta) => pareto_from_uniform(*beta, uniform_open01(rng)),
            ScalarLaw::FinitePmf(table) => {
                let u = uniform_open01(rng);
                let mut acc = 0.0;
                for (v, p) in table {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                table.last().map(|(v, _)| *v).unwrap_or(0)
            }
        }
    }

    pub fn mean(&self) -> MomentValue {
        match self {
            ScalarLaw::Deterministic(c) => MomentValue::Finite(*c as f64),
            ScalarLaw::Bernoulli(p) => MomentValue::Finite(*p),
            ScalarLaw::Binomial { n, p } => MomentValue::Finite(*n as f64 * p),
            ScalarLaw::Poisson(lambda) => MomentValue::Finite(*lambda),
            ScalarLaw::Geometric(p) => MomentValue::Finite((1.0 - p) / p),
            ScalarLaw::DiscretePareto(beta) => {
                if *beta <= 1.0 {
                    MomentValue::Infinite
                } else {
                    // E X = sum_{n>=1} P(X >= n) = zeta(beta).
                    MomentValue::Finite(pareto_alpha_sum(*beta, 1.0, 1))
                }
            }
            ScalarLaw::FinitePmf(table) => {
                MomentValue::Finite(table.iter().map(|(v, p)| *v as f64 * p).sum())
            }
        }
    }

    /// P(X >= n).
    pub fn tail(&self, n: u64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self {
            ScalarLaw::Deterministic(c) => {
                if n <= *c {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarLaw::Bernoulli(p) => {
                if n == 1 {
                    *p
                } else {
                    0.0
                }
            }
            ScalarLaw::Binomial { n: trials, p } => {
                if n > *trials {
                    return 0.0;
                }
                let mut total = 0.0;
                for j in n..=*trials {
                    total += binomial_pmf(*trials, *p, j);
                }
                total.min(1.0)
            }
            ScalarLaw::Poisson(lambda) => {
                if *lambda == 0.0 {
                    return 0.0;
                }
                // Upward summation from n avoids cancellation in 1 - CDF.
                let mut pmf = poisson_pmf(*lambda, n);
                let mut total = 0.0;
                let mut j = n;
                loop {
                    total += pmf;
                    let ratio = lambda / (j + 1) as f64;
                    if ratio < 0.5 && pmf < 1e-18 * total.max(1e-300) {
                        total += pmf * ratio / (1.0 - ratio);
                        break;
                    }
                    pmf *= ratio;
                    j += 1;
                    if j > n + 10_000_000 {
                        break;
                    }
                }
                total.min(1.0)
            }
            ScalarLaw::Geometric(p) => math::pow(1.0 - p, n as f64),
            ScalarLaw::DiscretePareto(beta) => math::pow(n as f64, -beta),
            ScalarLaw::FinitePmf(table) => {
                table.iter().filter(|(v, _)| *v >= n).map(|(_, p)| p).sum()
            }
        }
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(
            self,
            ScalarLaw::Deterministic(_)
                | ScalarLaw::Bernoulli(_)
                | ScalarLaw::Binomial { .. }
                | ScalarLaw::FinitePmf(_)
        )
    }

    /// Exact PMF for finite-support laws.
    pub fn support_pmf(&self) -> Result<Vec<(u64, f64)>> {
        match self {
            ScalarLaw::Deterministic(c) => Ok(vec![(*c, 1.0)]),
            ScalarLaw::Bernoulli(p) => Ok(vec![(0, 1.0 - p), (1, *p)]),
            ScalarLaw::Binomial { n, p } => {
                Ok((0..=*n).map(|j| (j, binomial_pmf(*n, *p, j))).collect())
            }
            ScalarLaw::FinitePmf(table) => Ok(table.clone()),
            other => Err(Error::UnsupportedLaw(alloc::format!(
                "{other:?} does not have finite support"
            ))),
        }
    }

    /// P(X > 0).
    pub fn positive_prob(&self) -> f64 {
        1.0 - match self {
            ScalarLaw::Deterministic(c) => {
                if *c == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarLaw::Bernoulli(p) => 1.0 - p,
            ScalarLaw::Binomial { n, p } => math::pow(1.0 - p, *n as f64),
            ScalarLaw::Poisson(lambda) => math::exp(-lambda),
            ScalarLaw::Geometric(p) => *p,
            ScalarLaw::DiscretePareto(_) => 0.0, // support starts at 1
            ScalarLaw::FinitePmf(table) => {
                table.iter().filter(|(v, _)| *v == 0).map(|(_, p)| p).sum()
            }
        }
    }

    /// Whether E X^alpha is finite (analytic criterion per family).
    pub fn moment_is_finite(&self, alpha: f64) -> bool {
        match self {
            ScalarLaw::DiscretePareto(beta) => alpha < *beta,
            _ => true,
        }
    }

    /// E X^alpha for alpha > 0: exact for finite support, certified adaptive
    /// summation otherwise. Returned finite values carry a relative tail
    /// error below 1e-9 and never undershoot the true moment's partial sums.
    pub fn moment(&self, alpha: f64) -> Result<MomentValue> {
        assert!(alpha > 0.0, "moment order must be positive");
        if !self.moment_is_finite(alpha) {
            return Ok(MomentValue::Infinite);
        }
        let value = match self {
            ScalarLaw::Deterministic(c) => math::pow(*c as f64, alpha),
            ScalarLaw::Bernoulli(p) => *p,
            ScalarLaw::Binomial { n, p } => (1..=*n)
                .map(|j| binomial_pmf(*n, *p, j) * math::pow(j as f64, alpha))
                .sum(),
            ScalarLaw::FinitePmf(table) => table
                .iter()
                .map(|(v, p)| p * math::pow(*v as f64, alpha))
                .sum(),
            ScalarLaw::Poisson(lambda) => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    light_alpha_sum(poisson_pmf(*lambda, 1), 1, alpha, |n| {
                        lambda / (n + 1) as f64
                    })?
                }
            }
            ScalarLaw::Geometric(p) => {
                if *p >= 1.0 {
                    0.0
                } else {
                    let q = 1.0 - p;
                    light_alpha_sum(p * q, 1, alpha, |_| q)?
                }
            }
            ScalarLaw::DiscretePareto(beta) => pareto_alpha_sum(*beta, alpha, 1),
        };
        Ok(MomentValue::Finite(value))
    }

    /// Sum of pmf(n) * n^alpha over n >= from (from >= 1); used for tail
    /// remainders of sums of independent components.
    fn tail_alpha_sum(&self, alpha: f64, from: u64) -> Result<f64> {
        debug_assert!(from >= 1);
        match self {
            ScalarLaw::Deterministic(c) => Ok(if *c >= from {
                math::pow(*c as f64, alpha)
            } else {
                0.0
            }),
            ScalarLaw::Bernoulli(p) => Ok(if from <= 1 { *p } else { 0.0 }),
            ScalarLaw::Binomial { n, p } => Ok((from..=*n)
                .map(|j| binomial_pmf(*n, *p, j) * math::pow(j as f64, alpha))
                .sum()),
            ScalarLaw::FinitePmf(table) => Ok(table
                .iter()
                .filter(|(v, _)| *v >= from)
                .map(|(v, p)| p * math::pow(*v as f64, alpha))
                .sum()),
            ScalarLaw::Poisson(lambda) => {
                if *lambda == 0.0 {
                    return Ok(0.0);
                }
                light_alpha_sum(poisson_pmf(*lambda, from), from, alpha, |n| {
                    lambda / (n + 1) as f64
                })
            }
            ScalarLaw::Geometric(p) => {
                if *p >= 1.0 {
                    return Ok(0.0);
                }
                let q = 1.0 - p;
                light_alpha_sum(p * math::pow(q, from as f64), from, alpha, |_| q)
            }
            ScalarLaw::DiscretePareto(beta) => {
                if alpha >= *beta {
                    return Err(Error::TruncationBudgetExceeded);
                }
                Ok(pareto_alpha_sum(*beta, alpha, from))
            }
        }
    }

    /// First three cumulants (mean, variance, third central moment) when
    /// finite and computable in closed form (or by certified summation).
    pub fn cumulants3(&self) -> Option<(f64, f64, f64)> {
        match self {
            ScalarLaw::Deterministic(c) => Some((*c as f64, 0.0, 0.0)),
            ScalarLaw::Bernoulli(p) => {
                let q = 1.0 - p;
                Some((*p, p * q, p * q * (1.0 - 2.0 * p)))
            }
            ScalarLaw::Binomial { n, p } => {
                let q = 1.0 - p;
                let nf = *n as f64;
                Some((nf * p, nf * p * q, nf * p * q * (1.0 - 2.0 * p)))
            }
            ScalarLaw::Poisson(lambda) => Some((*lambda, *lambda, *lambda)),
            ScalarLaw::Geometric(p) => {
                let q = 1.0 - p;
                Some((q / p, q / (p * p), q * (1.0 + q) / (p * p * p)))
            }
            ScalarLaw::DiscretePareto(beta) => {
                if *beta <= 3.0 {
                    return None;
                }
                let m1 = pareto_alpha_sum(*beta, 1.0, 1);
                let m2 = pareto_alpha_sum(*beta, 2.0, 1);
                let m3 = pareto_alpha_sum(*beta, 3.0, 1);
                Some(raw_to_cumulants(m1, m2, m3))
            }
            ScalarLaw::FinitePmf(table) => {
                let raw = |r: f64| -> f64 {
                    table
                        .iter()
                        .map(|(v, p)| p * math::pow(*v as f64, r))
                        .sum()
                };
                Some(raw_to_cumulants(raw(1.0), raw(2.0), raw(3.0)))
            }
        }
    }
}

fn raw_to_cumulants(m1: f64, m2: f64, m3: f64) -> (f64, f64, f64) {
    let k2 = m2 - m1 * m1;
    let k3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
    (m1, k2.max(0.0), k3)
}

fn saturate_u64(x: f64) -> u64 {
    if x >= 9.007_199_254_740_992e15 {
        1u64 << 53
    } else if x <= 0.0 {
        0
    } else {
        x as u64
    }
}

/// Exact inversion: X = floor(u^(-1/beta)) gives P(X >= n) = n^(-beta).
pub(crate) fn pareto_from_uniform(beta: f64, u: f64) -> u64 {
    saturate_u64(math::floor(math::pow(u, -1.0 / beta)))
}

fn sample_poisson(lambda: f64, rng: &mut impl RngCore) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    // Knuth's product method; lambda is validated <= 500 so exp(-lambda)
    // stays well above the subnormal range.
    let threshold = math::exp(-lambda);
    let mut k = 0u64;
    let mut prod = 1.0f64;
    loop {
        prod *= uniform_open01(rng);
        if prod <= threshold {
            return k;
        }
        k += 1;
    }
}

fn binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_choose = libm::lgamma(n as f64 + 1.0)
        - libm::lgamma(k as f64 + 1.0)
        - libm::lgamma((n - k) as f64 + 1.0);
    math::exp(ln_choose + k as f64 * math::ln(p) + (n - k) as f64 * math::ln(1.0 - p))
}

fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    math::exp(k as f64 * math::ln(lambda) - lambda - libm::lgamma(k as f64 + 1.0))
}

/// Sum of pmf(n) * n^alpha for a light-tailed pmf given by its value at
/// `start` and the successive-ratio function pmf(n+1)/pmf(n). Terminates by
/// geometric tail closure once the combined term ratio is safely below 1.
fn light_alpha_sum(
    pmf_start: f64,
    start: u64,
    alpha: f64,
    pmf_ratio: impl Fn(u64) -> f64,
) -> Result<f64> {
    let mut acc = 0.0f64;
    let mut pmf = pmf_start;
    let mut n = start;
    let mut terms = 0u64;
    loop {
        let term = pmf * math::pow(n as f64, alpha);
        acc += term;
        let r = pmf_ratio(n) * math::pow(1.0 + 1.0 / n as f64, alpha);
        if r < 0.9 && term <= MOMENT_REL_TOL * 1e-6 * acc.max(1e-300) {
            acc += term * r / (1.0 - r);
            return Ok(acc);
        }
        pmf *= pmf_ratio(n);
        n += 1;
        terms += 1;
        if terms > MOMENT_TERM_BUDGET {
            return Err(Error::TruncationBudgetExceeded);
        }
    }
}

/// Sum over n >= from of pmf(n) * n^alpha for the discrete Pareto law,
/// pmf(n) = n^(-beta) - (n+1)^(-beta). Requires alpha < beta. Sums terms
/// explicitly to a fixed depth and closes the tail with a Hurwitz-zeta
/// expansion, keeping the result accurate to well below 1e-9 relative.
fn pareto_alpha_sum(beta: f64, alpha: f64, from: u64) -> f64 {
    debug_assert!(alpha < beta);
    let cutoff = (from + 65_536).max(65_536);
    let mut acc = 0.0f64;
    let mut n = from;
    while n < cutoff {
        let nf = n as f64;
        // n^(-beta) - (n+1)^(-beta), evaluated without cancellation.
        let pmf = math::pow(nf, -beta) * (-math::expm1(-beta * math::ln_1p(1.0 / nf)));
        acc += pmf * math::pow(nf, alpha);
        n += 1;
    }
    // pmf(n) n^alpha = beta n^(a-1) - beta(beta+1)/2 n^(a-2)
    //                  + beta(beta+1)(beta+2)/6 n^(a-3) - ... with a = alpha - beta.
    let c1 = beta;
    let c2 = beta * (beta + 1.0) / 2.0;
    let c3 = beta * (beta + 1.0) * (beta + 2.0) / 6.0;
    acc += c1 * zeta_tail(beta + 1.0 - alpha, cutoff as f64)
        - c2 * zeta_tail(beta + 2.0 - alpha, cutoff as f64)
        + c3 * zeta_tail(beta + 3.0 - alpha, cutoff as f64);
    acc
}

/// Sum over n >= a of n^(-s) for s > 1, by Euler-Maclaurin.
fn zeta_tail(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0);
    math::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * math::pow(a, -s)
        + s * math::pow(a, -s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * math::pow(a, -s - 3.0) / 720.0
}

/// Law of a d-dimensional nonnegative-integer random vector.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorLaw {
    IndependentComponents(Vec<ScalarLaw>),
    JointPmf(Vec<(Vec<u64>, f64)>),
}

impl VectorLaw {
    pub fn dim(&self) -> usize {
        match self {
            VectorLaw::IndependentComponents(laws) => laws.len(),
            VectorLaw::JointPmf(rows) => rows.first().map(|(v, _)| v.len()).unwrap_or(0),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            VectorLaw::IndependentComponents(laws) => {
                if laws.len() != d {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "vector law has {} components, model dimension is {d}",
                        laws.len()
                    )));
                }
                for law in laws {
                    law.validate()?;
                }
                Ok(())
            }
            VectorLaw::JointPmf(rows) => {
                if rows.is_empty() {
                    return Err(Error::InvalidParameter("joint pmf must be nonempty".into()));
                }
                let mut total = 0.0;
                for (v, p) in rows {
                    if v.len() != d {
                        return Err(Error::InvalidParameter(alloc::format!(
                            "joint pmf row has dimension {}, model dimension is {d}",
                            v.len()
                        )));
                    }
                    if !(*p >= 0.0) || !p.is_finite() {
                        return Err(Error::InvalidParameter(
                            "joint pmf probabilities must be nonnegative".into(),
                        ));
                    }
                    total += p;
                }
                if math::abs(total - 1.0) > 1e-12 {
                    return Err(Error::InvalidParameter(
                        "joint pmf must sum to 1 within 1e-12".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> Vec<u64> {
        match self {
            VectorLaw::IndependentComponents(laws) => {
                laws.iter().map(|law| law.sample(rng)).collect()
            }
            VectorLaw::JointPmf(rows) => {
                let u = uniform_open01(rng);
                let mut acc = 0.0;
                for (v, p) in rows {
                    acc += p;
                    if u < acc {
                        return v.clone();
                    }
                }
                rows.last().map(|(v, _)| v.clone()).unwrap_or_default()
            }
        }
    }

    /// Componentwise means; Infinite flags where the analytic criterion
    /// says the mean does not exist.
    pub fn mean_vector(&self) -> Vec<MomentValue> {
        match self {
            VectorLaw::IndependentComponents(laws) => laws.iter().map(|l| l.mean()).collect(),
            VectorLaw::JointPmf(rows) => {
                let d = self.dim();
                let mut means = vec![0.0; d];
                for (v, p) in rows {
                    for (m, x) in means.iter_mut().zip(v.iter()) {
                        *m += p * *x as f64;
                    }
                }
                means.into_iter().map(MomentValue::Finite).collect()
            }
        }
    }

    /// Whether E||V||^alpha is finite.
    pub fn alpha_moment_is_finite(&self, alpha: f64) -> bool {
        match self {
            VectorLaw::IndependentComponents(laws) => {
                laws.iter().all(|l| l.moment_is_finite(alpha))
            }
            VectorLaw::JointPmf(_) => true,
        }
    }

    /// E||V||^alpha with the l1 norm. Exact for finite support; adaptive
    /// truncated summation with a certified relative tail bound of 1e-9
    /// otherwise. Finite results are upper estimates (partial sum plus the
    /// certified tail bound), so they are safe to use in upper-bound
    /// certificates.
    pub fn alpha_moment(&self, alpha: f64) -> Result<MomentValue> {
        assert!(alpha > 0.0);
        if !self.alpha_moment_is_finite(alpha) {
            return Ok(MomentValue::Infinite);
        }
        match self {
            VectorLaw::JointPmf(rows) => {
                let v: f64 = rows
                    .iter()
                    .map(|(v, p)| {
                        let norm: u64 = v.iter().sum();
                        p * math::pow(norm as f64, alpha)
                    })
                    .sum();
                Ok(MomentValue::Finite(v))
            }
            VectorLaw::IndependentComponents(laws) => {
                if laws.len() == 1 {
                    return laws[0].moment(alpha);
                }
                if laws.iter().all(|l| l.is_finite_support()) {
                    let pmf = self.support_pmf()?;
                    let v: f64 = pmf
                        .iter()
                        .map(|(v, p)| {
                            let norm: u64 = v.iter().sum();
                            p * math::pow(norm as f64, alpha)
                        })
                        .sum();
                    return Ok(MomentValue::Finite(v));
                }
                independent_sum_alpha_moment(laws, alpha)
            }
        }
    }

    /// Cumulants (k1, k2, k3) of ||V||, when finite and computable.
    pub fn norm_cumulants3(&self) -> Option<(f64, f64, f64)> {
        match self {
            VectorLaw::IndependentComponents(laws) => {
                let mut k = (0.0, 0.0, 0.0);
                for law in laws {
                    let (a, b, c) = law.cumulants3()?;
                    k = (k.0 + a, k.1 + b, k.2 + c);
                }
                Some(k)
            }
            VectorLaw::JointPmf(rows) => {
                let raw = |r: f64| -> f64 {
                    rows.iter()
                        .map(|(v, p)| {
                            let norm: u64 = v.iter().sum();
                            p * math::pow(norm as f64, r)
                        })
                        .sum()
                };
                Some(raw_to_cumulants(raw(1.0), raw(2.0), raw(3.0)))
            }
        }
    }

    pub fn is_finite_support(&self) -> bool {
        match self {
            VectorLaw::IndependentComponents(laws) => {
                laws.iter().all(|l| l.is_finite_support())
            }
            VectorLaw::JointPmf(_) => true,
        }
    }

    /// Exact joint PMF for finite-support laws.
    pub fn support_pmf(&self) -> Result<Vec<(Vec<u64>, f64)>> {
        match self {
            VectorLaw::JointPmf(rows) => Ok(rows.clone()),
            VectorLaw::IndependentComponents(laws) => {
                let mut acc: Vec<(Vec<u64>, f64)> = vec![(Vec::new(), 1.0)];
                for law in laws {
                    let pmf = law.support_pmf()?;
                    let mut next = Vec::with_capacity(acc.len() * pmf.len());
                    for (prefix, p0) in &acc {
                        for (v, p) in &pmf {
                            if *p == 0.0 {
                                continue;
                            }
                            let mut w = prefix.clone();
                            w.push(*v);
                            next.push((w, p0 * p));
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
        }
    }

    /// Whether component j is positive with positive probability.
    pub fn component_can_be_positive(&self, j: usize) -> bool {
        match self {
            VectorLaw::IndependentComponents(laws) => laws[j].positive_prob() > 0.0,
            VectorLaw::JointPmf(rows) => rows.iter().any(|(v, p)| *p > 0.0 && v[j] > 0),
        }
    }

    /// Law of ||V|| as a finite PMF, for finite-support laws.
    pub fn norm_pmf(&self) -> Result<Vec<(u64, f64)>> {
        let joint = self.support_pmf()?;
        let mut map: alloc::collections::BTreeMap<u64, f64> = alloc::collections::BTreeMap::new();
        for (v, p) in joint {
            *map.entry(v.iter().sum()).or_insert(0.0) += p;
        }
        Ok(map.into_iter().collect())
    }
}

/// E(X_1 + ... + X_d)^alpha for independent components with at least one
/// infinite-support law. The head E[S^alpha; all X_j <= N] is computed by
/// exact convolution of truncated pmfs; the tail is bounded by
/// E[S^alpha; some X_j > N] <= c_d * sum_j' ( E[X_j'^alpha; X_j' > N]
///   + sum_{j != j'} E X_j^alpha P(X_j' > N) ),  c_d = d^(alpha-1) v 1.
fn independent_sum_alpha_moment(laws: &[ScalarLaw], alpha: f64) -> Result<MomentValue> {
    let d = laws.len();
    let c_d = if alpha > 1.0 {
        math::pow(d as f64, alpha - 1.0)
    } else {
        1.0
    };
    let moments: Vec<f64> = laws
        .iter()
        .map(|l| l.moment(alpha).map(|m| m.finite().unwrap()))
        .collect::<Result<_>>()?;

    let mut cap: u64 = 1024;
    loop {
        // Exact head by convolution of pmfs truncated at cap.
        let mut conv: Vec<f64> = vec![1.0];
        for law in laws {
            let pmf = truncated_pmf(law, cap);
            let mut next = vec![0.0f64; conv.len() + pmf.len() - 1];
            for (i, &a) in conv.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, &b) in pmf.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            conv = next;
        }
        let head: f64 = conv
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, p)| p * math::pow(n as f64, alpha))
            .sum();

        // Certified tail bound.
        let mut tail_bound = 0.0f64;
        for (jp, law_jp) in laws.iter().enumerate() {
            let own = law_jp.tail_alpha_sum(alpha, cap + 1)?;
            let cross: f64 = moments
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != jp)
                .map(|(_, m)| m * law_jp.tail(cap + 1))
                .sum();
            tail_bound += c_d * (own + cross);
        }

        if tail_bound <= MOMENT_REL_TOL * head.max(1e-300) || (head == 0.0 && tail_bound == 0.0) {
            return Ok(MomentValue::Finite(head + tail_bound));
        }
        if cap as u128 * d as u128 > MOMENT_TERM_BUDGET as u128 {
            return Err(Error::TruncationBudgetExceeded);
        }
        cap *= 4;
    }
}

fn truncated_pmf(law: &ScalarLaw, cap: u64) -> Vec<f64> {
    match law.support_pmf() {
        Ok(table) => {
            let max = table.iter().map(|(v, _)| *v).max().unwrap_or(0).min(cap);
            let mut pmf = vec![0.0; (max + 1) as usize];
            for (v, p) in table {
                if v <= cap {
                    pmf[v as usize] += p;
                }
            }
            pmf
        }
        Err(_) => {
            let mut pmf = Vec::with_capacity((cap + 1) as usize);
            for n in 0..=cap {
                pmf.push(law.tail(n) - law.tail(n + 1));
            }
            pmf
        }
    }
}

/// Offspring law per parent type: entry j is the law of the offspring
/// vector of one type-j individual.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringSpec {
    per_type: Vec<VectorLaw>,
}

impl OffspringSpec {
    pub fn new(per_type: Vec<VectorLaw>) -> Result<Self> {
        let d = per_type.len();
        if d == 0 {
            return Err(Error::InvalidParameter("offspring spec must have d >= 1".into()));
        }
        for law in &per_type {
            law.validate(d)?;
        }
        Ok(OffspringSpec { per_type })
    }

    pub fn dim(&self) -> usize {
        self.per_type.len()
    }

    pub fn law(&self, parent_type: usize) -> &VectorLaw {
        &self.per_type[parent_type]
    }

    pub fn laws(&self) -> &[VectorLaw] {
        &self.per_type
    }

    /// Offspring mean matrix; errors if any component mean is infinite.
    pub fn mean_matrix(&self) -> Result<MeanMatrix> {
        let d = self.dim();
        let mut entries = Vec::with_capacity(d * d);
        for (i, law) in self.per_type.iter().enumerate() {
            for (j, m) in law.mean_vector().into_iter().enumerate() {
                match m {
                    MomentValue::Finite(x) => entries.push(x),
                    MomentValue::Infinite => {
                        return Err(Error::InfiniteOffspringMean {
                            parent_type: i,
                            component: j,
                        })
                    }
                }
            }
        }
        MeanMatrix::new(d, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn pareto_inversion_example() {
        // u = 0.25, beta = 0.5: floor(0.25^(-2)) = 16.
        assert_eq!(pareto_from_uniform(0.5, 0.25), 16);
    }

    #[test]
    fn point_mass_samples() {
        let mut r = rng::stream(1, 0);
        let law = VectorLaw::IndependentComponents(vec![
            ScalarLaw::Deterministic(1),
            ScalarLaw::Deterministic(1),
        ]);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut r), vec![1, 1]);
        }
        let joint = VectorLaw::JointPmf(vec![(vec![0, 0], 1.0)]);
        assert_eq!(joint.sample(&mut r), vec![0, 0]);
    }

    #[test]
    fn mean_vector_examples() {
        let law = VectorLaw::IndependentComponents(vec![
            ScalarLaw::Poisson(0.3),
            ScalarLaw::Poisson(0.2),
        ]);
        let m = law.mean_vector();
        assert_eq!(m[0], MomentValue::Finite(0.3));
        assert_eq!(m[1], MomentValue::Finite(0.2));

        assert_eq!(ScalarLaw::DiscretePareto(0.5).mean(), MomentValue::Infinite);

        let joint = VectorLaw::JointPmf(vec![(vec![1, 2], 0.5), (vec![0, 0], 0.5)]);
        let m = joint.mean_vector();
        assert_eq!(m[0], MomentValue::Finite(0.5));
        assert_eq!(m[1], MomentValue::Finite(1.0));
    }

    #[test]
    fn alpha_moment_examples() {
        let det = VectorLaw::IndependentComponents(vec![
            ScalarLaw::Deterministic(1),
            ScalarLaw::Deterministic(1),
        ]);
        assert_eq!(det.alpha_moment(2.0).unwrap(), MomentValue::Finite(4.0));

        let pareto = VectorLaw::IndependentComponents(vec![ScalarLaw::DiscretePareto(1.5)]);
        assert_eq!(pareto.alpha_moment(2.0).unwrap(), MomentValue::Infinite);

        let pmf = VectorLaw::IndependentComponents(vec![ScalarLaw::FinitePmf(vec![
            (0, 0.5),
            (2, 0.5),
        ])]);
        assert_eq!(pmf.alpha_moment(1.0).unwrap(), MomentValue::Finite(1.0));
    }

    #[test]
    fn pareto_mean_matches_zeta() {
        // E X = zeta(beta); zeta(2) = pi^2 / 6.
        let m = ScalarLaw::DiscretePareto(2.0).mean().finite().unwrap();
        let zeta2 = core::f64::consts::PI * core::f64::consts::PI / 6.0;
        assert!((m - zeta2).abs() < 1e-9 * zeta2, "{m} vs {zeta2}");
    }

    #[test]
    fn pareto_moment_matches_brute_force() {
        let law = ScalarLaw::DiscretePareto(2.5);
        let got = law.moment(0.5).unwrap().finite().unwrap();
        let mut brute = 0.0;
        for n in 1u64..1_000_000 {
            let nf = n as f64;
            let pmf = nf.powf(-2.5) - (nf + 1.0).powf(-2.5);
            brute += pmf * nf.sqrt();
        }
        assert!((got - brute).abs() < 1e-8 * brute, "{got} vs {brute}");
    }

    #[test]
    fn poisson_moment_matches_closed_form() {
        // E X^2 = lambda + lambda^2 for Poisson.
        let law = ScalarLaw::Poisson(1.7);
        let got = law.moment(2.0).unwrap().finite().unwrap();
        let want = 1.7 + 1.7 * 1.7;
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }

    #[test]
    fn geometric_moment_matches_closed_form() {
        // Var = q/p^2, mean = q/p, so E X^2 = q/p^2 + (q/p)^2.
        let p = 0.4f64;
        let q = 1.0 - p;
        let got = ScalarLaw::Geometric(p).moment(2.0).unwrap().finite().unwrap();
        let want = q / (p * p) + (q / p) * (q / p);
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }

    #[test]
    fn independent_sum_moment_matches_closed_form() {
        // X ~ Poisson(0.6), Y ~ Geometric(0.5): E(X+Y)^2 via additivity of
        // cumulants: mean 0.6 + 1, var 0.6 + 2.
        let law = VectorLaw::IndependentComponents(vec![
            ScalarLaw::Poisson(0.6),
            ScalarLaw::Geometric(0.5),
        ]);
        let got = law.alpha_moment(2.0).unwrap().finite().unwrap();
        let mean = 0.6 + 1.0;
        let var = 0.6 + 2.0;
        let want = var + mean * mean;
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn moment_classification_is_alpha_less_than_beta() {
        for beta in [0.5, 1.0, 1.5, 2.5] {
            let law = ScalarLaw::DiscretePareto(beta);
            for alpha in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
                assert_eq!(law.moment_is_finite(alpha), alpha < beta);
            }
        }
    }

    #[test]
    fn sampler_means_within_4_se() {
        let cases: Vec<(ScalarLaw, f64)> = vec![
            (ScalarLaw::Bernoulli(0.3), 0.3),
            (ScalarLaw::Binomial { n: 5, p: 0.4 }, 2.0),
            (ScalarLaw::Poisson(1.3), 1.3),
            (ScalarLaw::Geometric(0.6), 0.4 / 0.6),
            (
                ScalarLaw::FinitePmf(vec![(0, 0.25), (1, 0.5), (3, 0.25)]),
                1.25,
            ),
        ];
        for (idx, (law, want)) in cases.iter().enumerate() {
            let mut r = rng::stream(100, idx as u64);
            let mut acc = crate::stats::RunningMoments::new();
            for _ in 0..100_000 {
                acc.push(law.sample(&mut r) as f64);
            }
            let se = acc.stderr().max(1e-12);
            assert!(
                (acc.mean() - want).abs() <= 4.0 * se,
                "{law:?}: {} vs {want} (se {se})",
                acc.mean()
            );
        }
    }

    #[test]
    fn pareto_tail_within_4_se() {
        let beta = 1.2;
        let law = ScalarLaw::DiscretePareto(beta);
        let mut r = rng::stream(200, 0);
        let n_samples = 100_000u64;
        let draws: Vec<u64> = (0..n_samples).map(|_| law.sample(&mut r)).collect();
        for n in [1u64, 2, 4, 8, 16] {
            let want = (n as f64).powf(-beta);
            let hits = draws.iter().filter(|&&x| x >= n).count() as f64;
            let p_hat = hits / n_samples as f64;
            let se = (want * (1.0 - want) / n_samples as f64).sqrt().max(1e-12);
            assert!(
                (p_hat - want).abs() <= 4.0 * se,
                "n={n}: {p_hat} vs {want} (se {se})"
            );
        }
    }

    #[test]
    fn mean_matrix_examples() {
        let spec = OffspringSpec::new(vec![
            VectorLaw::IndependentComponents(vec![
                ScalarLaw::Poisson(0.3),
                ScalarLaw::Poisson(0.2),
            ]),
            VectorLaw::IndependentComponents(vec![
                ScalarLaw::Bernoulli(0.1),
                // Geometric with mean 0.4: (1-p)/p = 0.4 -> p = 1/1.4.
                ScalarLaw::Geometric(1.0 / 1.4),
            ]),
        ])
        .unwrap();
        let m = spec.mean_matrix().unwrap();
        assert!((m.get(0, 0) - 0.3).abs() < 1e-12);
        assert!((m.get(0, 1) - 0.2).abs() < 1e-12);
        assert!((m.get(1, 0) - 0.1).abs() < 1e-12);
        assert!((m.get(1, 1) - 0.4).abs() < 1e-12);

        let zero = OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
            ScalarLaw::Deterministic(0),
        ])])
        .unwrap();
        assert_eq!(zero.mean_matrix().unwrap().get(0, 0), 0.0);

        let heavy = OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
            ScalarLaw::DiscretePareto(0.5),
        ])])
        .unwrap();
        assert!(matches!(
            heavy.mean_matrix(),
            Err(Error::InfiniteOffspringMean { .. })
        ));
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ScalarLaw::Bernoulli(1.5).validate().is_err());
        assert!(ScalarLaw::Geometric(0.0).validate().is_err());
        assert!(ScalarLaw::DiscretePareto(0.0).validate().is_err());
        assert!(ScalarLaw::FinitePmf(vec![(0, 0.5), (1, 0.6)]).validate().is_err());
        let joint = VectorLaw::JointPmf(vec![(vec![1], 1.0)]);
        assert!(joint.validate(2).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn finite_pmf_moment_is_brute_force(
                entries in proptest::collection::vec((0u64..20, 0.01f64..1.0), 1..6),
                alpha in 0.3f64..3.0,
            ) {
                let total: f64 = entries.iter().map(|(_, w)| w).sum();
                let mut table: Vec<(u64, f64)> = entries
                    .iter()
                    .map(|(v, w)| (*v, w / total))
                    .collect();
                // Renormalize exactly enough for validation.
                let sum: f64 = table.iter().map(|(_, p)| p).sum();
                table.last_mut().unwrap().1 += 1.0 - sum;
                let law = ScalarLaw::FinitePmf(table.clone());
                let got = law.moment(alpha).unwrap().finite().unwrap();
                let brute: f64 = table
                    .iter()
                    .map(|(v, p)| p * (*v as f64).powf(alpha))
                    .sum();
                prop_assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));
            }

            #[test]
            fn joint_pmf_alpha_moment_is_brute_force(
                rows in proptest::collection::vec(
                    (proptest::collection::vec(0u64..5, 2), 0.01f64..1.0), 1..5),
                alpha in 0.3f64..3.0,
            ) {
                let total: f64 = rows.iter().map(|(_, w)| w).sum();
                let mut table: Vec<(Vec<u64>, f64)> = rows
                    .iter()
                    .map(|(v, w)| (v.clone(), w / total))
                    .collect();
                let sum: f64 = table.iter().map(|(_, p)| p).sum();
                table.last_mut().unwrap().1 += 1.0 - sum;
                let law = VectorLaw::JointPmf(table.clone());
                let got = law.alpha_moment(alpha).unwrap().finite().unwrap();
                let brute: f64 = table
                    .iter()
                    .map(|(v, p)| {
                        let norm: u64 = v.iter().sum();
                        p * (norm as f64).powf(alpha)
                    })
                    .sum();
                prop_assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));
            }
        }
    }
}
