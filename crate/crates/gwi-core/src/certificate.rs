//! Explicit-constant pipeline: row sums, the k0'/c0/k0/c1 chain, and the
//! assembled upper-bound certificate for M_alpha(k) and E||Y||^alpha.
//!
//! Constants come out exact when closed-form cumulants are available
//! (alpha in {1,2,3} without the r-step reduction; alpha = 1 always);
//! otherwise they are one-sided upper confidence bounds and the
//! certificate is statistical, which the confidence note spells out.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::laws::MomentValue;
use crate::math;
use crate::matrix::{l1_norm, row_apply, MeanMatrix};
use crate::process::{self, GwiModel, PopulationVec};
use crate::rng::RngCore;
use crate::stats::{normal_quantile, RunningMoments};

pub const DEFAULT_CONFIDENCE: f64 = 0.999;
pub const DEFAULT_K_MAX_CHECK: u32 = 200;
pub const LATTICE_BUDGET: u64 = 1_000_000;
const SERIES_GUARD: u32 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMode {
    Exact,
    MonteCarloUpperCb,
}

/// Sampling budgets for the Monte Carlo parts of the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct Budgets {
    pub n_samples: u64,
    /// Largest k at which the S_k/k moment condition is checked.
    pub k_max_check: u32,
    /// One-sided confidence level for Monte Carlo upper bounds.
    pub confidence: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            n_samples: 20_000,
            k_max_check: DEFAULT_K_MAX_CHECK,
            confidence: DEFAULT_CONFIDENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProofConstants {
    pub alpha: f64,
    /// Row sums of the effective mean matrix (M^r under reduction).
    pub mu_j: Vec<f64>,
    pub mu_bar: f64,
    pub k0_prime: u32,
    pub c0: f64,
    pub k0: u64,
    pub c1: f64,
    pub mu: f64,
    /// Contraction power actually used; 1 when ||M|| < 1.
    pub r: u32,
    pub estimation_mode: EstimationMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub constants: ProofConstants,
    /// Bound on E||B||^alpha, standing in for M_alpha(0).
    pub m_alpha_0_bound: f64,
    /// B(k) for k = 0.. up to series convergence.
    pub per_k_bound: Vec<f64>,
    pub y_moment_bound: f64,
    /// Smallest nu with B(k) <= B(0) nu^k over the computed range.
    pub nu_hat: f64,
    pub confidence_note: String,
}

/// mu_j = sum_l m_{j,l}.
pub fn row_sums(m: &MeanMatrix) -> Vec<f64> {
    m.row_sums()
}

/// Effective estimation context after sampling every r-th generation:
/// single-ancestor draws become ||Pi_r o e_j|| and the mean matrix M^r.
pub struct ReductionContext<'a> {
    model: &'a GwiModel,
    pub r: u32,
    pub mean_matrix: MeanMatrix,
}

pub fn r_step_reduction(model: &GwiModel, r: u32) -> ReductionContext<'_> {
    assert!(r >= 1);
    ReductionContext {
        model,
        r,
        mean_matrix: model.mean_matrix().pow(r),
    }
}

impl ReductionContext<'_> {
    /// One draw of ||Pi_r o e_j||: total progeny of a single type-j
    /// ancestor after r generations (plain ||A_j|| when r = 1).
    pub fn draw_norm(&self, j: usize, rng: &mut impl RngCore) -> Result<u64> {
        if self.r == 1 {
            let child = self.model.offspring().law(j).sample(rng);
            return Ok(child.iter().sum());
        }
        let mut e = vec![0u64; self.model.dim()];
        e[j] = 1;
        let out =
            process::branch_no_immigration(self.model, &PopulationVec::new(e), self.r, rng)?;
        Ok(out.total())
    }

    /// Cumulants of a single norm draw, when they exist in closed form
    /// (never under reduction — the r-step law has no closed form here).
    fn norm_cumulants(&self, j: usize) -> Option<(f64, f64, f64)> {
        if self.r == 1 {
            self.model.offspring().law(j).norm_cumulants3()
        } else {
            None
        }
    }
}

/// Per-type evaluator of E(S_{k;j}/k)^alpha, exact or Monte Carlo.
enum SEval {
    /// alpha in {1,2,3}; per-type cumulants of one norm draw.
    Exact { alpha_i: u32, cum: Vec<(f64, f64, f64)> },
    /// moments[j][k-1] accumulates (S_k/k)^alpha; z is the one-sided
    /// normal quantile for the upper confidence bound.
    Mc { moments: Vec<Vec<RunningMoments>>, z: f64 },
}

/// E(S_k/k)^alpha from cumulants of a single draw: S_k/k has cumulants
/// (kappa1, kappa2/k, kappa3/k^2).
fn exact_sk(alpha_i: u32, (k1, k2, k3): (f64, f64, f64), x: f64) -> f64 {
    match alpha_i {
        1 => k1,
        2 => k1 * k1 + k2 * x,
        3 => k1 * k1 * k1 + 3.0 * k1 * k2 * x + k3 * x * x,
        _ => unreachable!(),
    }
}

/// sup over x in (0, x_hi] of the exact_sk polynomial — covers every
/// integer k >= 1/x_hi at once, so exact mode verifies the moment
/// condition for all k analytically, not just up to a cutoff.
fn exact_sk_sup(alpha_i: u32, cum: (f64, f64, f64), x_hi: f64) -> f64 {
    let (k1, k2, k3) = cum;
    let mut sup = exact_sk(alpha_i, cum, x_hi).max(exact_sk(alpha_i, cum, 0.0));
    if alpha_i == 3 && k3 < 0.0 {
        // Downward parabola: interior vertex can dominate the endpoints.
        let x_star = -3.0 * k1 * k2 / (2.0 * k3);
        if x_star > 0.0 && x_star < x_hi {
            sup = sup.max(exact_sk(alpha_i, cum, x_star));
        }
    }
    sup
}

fn build_s_eval(
    ctx: &ReductionContext<'_>,
    alpha: f64,
    budgets: &Budgets,
    rng: &mut impl RngCore,
) -> Result<SEval> {
    let d = ctx.model.dim();
    if alpha == 1.0 {
        // Exact regardless of reduction: the mean of an average is the
        // effective row sum.
        let cum = ctx
            .mean_matrix
            .row_sums()
            .into_iter()
            .map(|mu| (mu, 0.0, 0.0))
            .collect();
        return Ok(SEval::Exact { alpha_i: 1, cum });
    }
    if (alpha == 2.0 || alpha == 3.0) && ctx.r == 1 {
        let cums: Option<Vec<_>> = (0..d).map(|j| ctx.norm_cumulants(j)).collect();
        if let Some(cum) = cums {
            return Ok(SEval::Exact { alpha_i: alpha as u32, cum });
        }
    }

    let k_max = budgets.k_max_check as usize;
    let mut moments = vec![vec![RunningMoments::new(); k_max]; d];
    for j in 0..d {
        for _ in 0..budgets.n_samples {
            let mut s = 0u64;
            for k in 1..=k_max {
                s += ctx.draw_norm(j, rng)?;
                moments[j][k - 1].push(math::pow(s as f64 / k as f64, alpha));
            }
        }
    }
    Ok(SEval::Mc { moments, z: normal_quantile(budgets.confidence) })
}

impl SEval {
    fn is_exact(&self) -> bool {
        matches!(self, SEval::Exact { .. })
    }

    /// Exact value or upper confidence bound of E(S_{k;j}/k)^alpha.
    fn value(&self, j: usize, k: u32) -> f64 {
        match self {
            SEval::Exact { alpha_i, cum } => exact_sk(*alpha_i, cum[j], 1.0 / k as f64),
            SEval::Mc { moments, z } => {
                let m = &moments[j][k as usize - 1];
                m.mean() + z * m.stderr()
            }
        }
    }

    /// Supremum of the values over all k >= k_lo (analytic in exact
    /// mode; up to the checked k_max in Monte Carlo mode).
    fn sup_from(&self, j: usize, k_lo: u32) -> f64 {
        match self {
            SEval::Exact { alpha_i, cum } => exact_sk_sup(*alpha_i, cum[j], 1.0 / k_lo as f64),
            SEval::Mc { moments, .. } => {
                let mut sup = 0.0f64;
                for k in k_lo as usize..=moments[j].len() {
                    sup = sup.max(self.value(j, k as u32));
                }
                sup
            }
        }
    }

    fn k_max(&self) -> u32 {
        match self {
            SEval::Exact { .. } => u32::MAX,
            SEval::Mc { moments, .. } => moments[0].len() as u32,
        }
    }
}

/// Exact value or upper confidence bound of E(S_{k;j}/k)^alpha, where
/// S_{k;j} sums k independent copies of ||A_j||.
pub fn estimate_sk_moment(
    model: &GwiModel,
    j: usize,
    k: u32,
    alpha: f64,
    n_samples: u64,
    confidence: f64,
    rng: &mut impl RngCore,
) -> Result<f64> {
    assert!(k >= 1 && alpha >= 1.0);
    let ctx = r_step_reduction(model, 1);
    let budgets = Budgets { n_samples, k_max_check: k, confidence };
    let eval = build_s_eval(&ctx, alpha, &budgets, rng)?;
    Ok(eval.value(j, k))
}

fn find_k0_prime_inner(eval: &SEval, d: usize, mu_bar: f64, k_max: u32) -> Result<u32> {
    let scan_max = k_max.min(eval.k_max());
    for k0p in 1..=scan_max {
        if (0..d).all(|j| eval.sup_from(j, k0p) < mu_bar) {
            return Ok(k0p);
        }
    }
    Err(Error::NotFoundWithinBudget { budget: k_max as u64 })
}

/// Smallest k0' with E(S_{k;j}/k)^alpha < mu_bar for all j and all
/// k >= k0' (verified analytically in exact mode, up to K_max otherwise).
pub fn find_k0_prime(
    model: &GwiModel,
    alpha: f64,
    mu_bar: f64,
    k_max: u32,
    n_samples: u64,
    rng: &mut impl RngCore,
) -> Result<u32> {
    let mu_max = max_of(&model.mean_matrix().row_sums());
    if !(mu_bar > mu_max && mu_bar < 1.0) {
        return Err(Error::InvalidParameter(
            "mu_bar must lie strictly between the largest row sum and 1".into(),
        ));
    }
    let ctx = r_step_reduction(model, 1);
    let budgets = Budgets { n_samples, k_max_check: k_max, ..Budgets::default() };
    let eval = build_s_eval(&ctx, alpha, &budgets, rng)?;
    find_k0_prime_inner(&eval, model.dim(), mu_bar, k_max)
}

fn compute_c0_inner(eval: &SEval, d: usize, k0_prime: u32) -> f64 {
    let mut c0 = 0.0f64;
    for j in 0..d {
        for k in 1..k0_prime {
            c0 = c0.max(eval.value(j, k));
        }
    }
    c0
}

/// max over j and k < k0' of E(S_{k;j}/k)^alpha; 0 when k0' = 1.
pub fn compute_c0(
    model: &GwiModel,
    alpha: f64,
    k0_prime: u32,
    n_samples: u64,
    rng: &mut impl RngCore,
) -> Result<f64> {
    assert!(k0_prime >= 1);
    if k0_prime == 1 {
        return Ok(0.0);
    }
    let ctx = r_step_reduction(model, 1);
    let budgets = Budgets {
        n_samples,
        k_max_check: k0_prime - 1,
        ..Budgets::default()
    };
    let eval = build_s_eval(&ctx, alpha, &budgets, rng)?;
    Ok(compute_c0_inner(&eval, model.dim(), k0_prime))
}

/// Number of lattice points k in N^d with 1 <= ||k|| <= s, i.e.
/// C(s + d, d) - 1, saturating at u64::MAX.
fn lattice_size(s: u64, d: usize) -> u64 {
    let mut binom: u128 = 1;
    for i in 1..=d as u128 {
        binom = binom.saturating_mul(s as u128 + i) / i;
        if binom > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    (binom - 1).min(u64::MAX as u128) as u64
}

fn enumerate_lattice(s: u64, d: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; d];
    fn rec(out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, pos: usize, left: u64) {
        if pos == cur.len() - 1 {
            for v in 0..=left {
                cur[pos] = v;
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(out, cur, pos + 1, left - v);
        }
    }
    rec(&mut out, &mut cur, 0, s);
    out.retain(|k| k.iter().any(|&v| v > 0));
    out
}

/// E||theta o k||^alpha = E(sum_j S_{k_j;j})^alpha from per-type
/// cumulants of one norm draw (cumulants add over independent sums).
fn exact_theta_moment(alpha_i: u32, cum: &[(f64, f64, f64)], k: &[u64]) -> f64 {
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    for (j, &(k1, k2, k3)) in cum.iter().enumerate() {
        let kj = k[j] as f64;
        t1 += kj * k1;
        t2 += kj * k2;
        t3 += kj * k3;
    }
    match alpha_i {
        1 => t1,
        2 => t1 * t1 + t2,
        3 => t1 * t1 * t1 + 3.0 * t1 * t2 + t3,
        _ => unreachable!(),
    }
}

fn compute_c1(
    ctx: &ReductionContext<'_>,
    eval_exact_cum: Option<(u32, &[(f64, f64, f64)])>,
    alpha: f64,
    k0: u64,
    budgets: &Budgets,
    rng: &mut impl RngCore,
) -> Result<f64> {
    if k0 <= 1 {
        return Ok(0.0);
    }
    let d = ctx.model.dim();
    let s = k0 - 1;
    let size = lattice_size(s, d);
    if size > LATTICE_BUDGET {
        return Err(Error::CombinatorialBudgetExceeded { k0, lattice_size: size });
    }
    let points = enumerate_lattice(s, d);

    if let Some((alpha_i, cum)) = eval_exact_cum {
        let mut c1 = 0.0f64;
        for k in &points {
            c1 = c1.max(exact_theta_moment(alpha_i, cum, k));
        }
        return Ok(c1);
    }

    // Monte Carlo: per replication draw one cumulative pool per type and
    // evaluate every lattice point against it; estimates share draws
    // across points but each is unbiased, and the max of upper bounds
    // is an upper bound on the max.
    let mut moments = vec![RunningMoments::new(); points.len()];
    let mut pools = vec![vec![0u64; s as usize + 1]; d];
    for _ in 0..budgets.n_samples {
        for (j, pool) in pools.iter_mut().enumerate() {
            let mut acc = 0u64;
            for t in 1..=s as usize {
                acc += ctx.draw_norm(j, rng)?;
                pool[t] = acc;
            }
        }
        for (p, k) in points.iter().enumerate() {
            let total: u64 = k.iter().enumerate().map(|(j, &kj)| pools[j][kj as usize]).sum();
            moments[p].push(math::pow(total as f64, alpha));
        }
    }
    let z = normal_quantile(budgets.confidence);
    Ok(moments
        .iter()
        .map(|m| m.mean() + z * m.stderr())
        .fold(0.0f64, f64::max))
}

/// k0 = floor(2 k0' c0 d / (1 - mu_bar)) + 1 and the lattice maximum c1.
pub fn compute_k0_and_c1(
    model: &GwiModel,
    alpha: f64,
    k0_prime: u32,
    c0: f64,
    mu_bar: f64,
    n_samples: u64,
    rng: &mut impl RngCore,
) -> Result<(u64, f64)> {
    let d = model.dim();
    let raw = 2.0 * k0_prime as f64 * c0 * d as f64 / (1.0 - mu_bar);
    if !(raw >= 0.0) || raw > 1e15 {
        return Err(Error::InvalidParameter("k0 threshold is not a sane finite value".into()));
    }
    let k0 = math::floor(raw) as u64 + 1;
    let ctx = r_step_reduction(model, 1);
    let budgets = Budgets { n_samples, ..Budgets::default() };
    let exact_cum: Option<Vec<(f64, f64, f64)>> = if alpha == 1.0 {
        Some(
            model
                .mean_matrix()
                .row_sums()
                .into_iter()
                .map(|mu| (mu, 0.0, 0.0))
                .collect(),
        )
    } else if alpha == 2.0 || alpha == 3.0 {
        (0..d).map(|j| ctx.norm_cumulants(j)).collect()
    } else {
        None
    };
    let c1 = compute_c1(
        &ctx,
        exact_cum.as_deref().map(|c| (alpha as u32, c)),
        alpha,
        k0,
        &budgets,
        rng,
    )?;
    Ok((k0, c1))
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0f64, f64::max)
}

fn immigration_alpha_bound(model: &GwiModel, alpha: f64) -> Result<f64> {
    match model.immigration().alpha_moment(alpha)? {
        MomentValue::Finite(v) => Ok(v),
        MomentValue::Infinite => Err(Error::InfiniteImmigrationAlphaMoment),
    }
}

/// Upper confidence bound on M_alpha(i) = E||Pi_i o B||^alpha for the
/// residue base points of the r-step reduction (i >= 1).
fn residue_base_ucb(
    model: &GwiModel,
    alpha: f64,
    i: u32,
    budgets: &Budgets,
    rng: &mut impl RngCore,
) -> Result<f64> {
    let mut acc = RunningMoments::new();
    for _ in 0..budgets.n_samples {
        let init = PopulationVec::new(model.immigration().sample(rng));
        let out = process::branch_no_immigration(model, &init, i, rng)?;
        acc.push(math::pow(out.total() as f64, alpha));
    }
    Ok(acc.mean() + normal_quantile(budgets.confidence) * acc.stderr())
}

/// Certificate for alpha >= 1 (r-step reduction applied automatically
/// when ||M|| >= 1). mu_bar defaults to the midpoint of
/// (max effective row sum, 1).
pub fn build_certificate_alpha_ge_1(
    model: &GwiModel,
    alpha: f64,
    mu_bar: Option<f64>,
    budgets: &Budgets,
    rng: &mut impl RngCore,
) -> Result<Certificate> {
    if alpha < 1.0 {
        return Err(Error::InvalidParameter("this branch requires alpha >= 1".into()));
    }
    model.require_subcritical()?;
    let r = model.spectral().r;
    let ctx = r_step_reduction(model, r);
    let d = model.dim();

    let mu_j = ctx.mean_matrix.row_sums();
    let mu_max = max_of(&mu_j);
    let mu_bar = mu_bar.unwrap_or((mu_max + 1.0) / 2.0);
    if !(mu_bar > mu_max && mu_bar < 1.0) {
        return Err(Error::InvalidParameter(
            "mu_bar must lie strictly between the largest effective row sum and 1".into(),
        ));
    }

    let eval = build_s_eval(&ctx, alpha, budgets, rng)?;
    let k0_prime = find_k0_prime_inner(&eval, d, mu_bar, budgets.k_max_check)?;
    let c0 = compute_c0_inner(&eval, d, k0_prime);
    let raw = 2.0 * k0_prime as f64 * c0 * d as f64 / (1.0 - mu_bar);
    if !(raw >= 0.0) || raw > 1e15 {
        return Err(Error::InvalidParameter("k0 threshold is not a sane finite value".into()));
    }
    let k0 = math::floor(raw) as u64 + 1;
    let exact_cum: Option<Vec<(f64, f64, f64)>> = match &eval {
        SEval::Exact { cum, .. } => Some(cum.clone()),
        SEval::Mc { .. } => None,
    };
    let c1 = compute_c1(
        &ctx,
        exact_cum.as_deref().map(|c| (alpha as u32, c)),
        alpha,
        k0,
        budgets,
        rng,
    )?;
    let mu = (1.0 + mu_bar) / 2.0;

    // Base bounds per residue class: B(i) for i = 0..r, where B(0) uses
    // the exact E||B||^alpha and deeper residues a Monte Carlo UCB.
    let b0 = immigration_alpha_bound(model, alpha)?;
    let mut base = vec![b0];
    for i in 1..r {
        base.push(residue_base_ucb(model, alpha, i, budgets, rng)?);
    }
    let residue_mc = r > 1;

    let mean_b = model.immigration_mean().ok_or(Error::InfiniteImmigrationMean)?;

    // Interleaved bound sequence: B(r k + i) follows the recursion
    // B_i(k) = mu B_i(k-1) + c1 M1(r(k-1) + i) with M1(n) = ||E[B] M^n||
    // exact; this equals the unrolled geometric form.
    let inv_alpha = 1.0 / alpha;
    let mut per_k = base.clone();
    let mut prev_block = base;
    let mut m1_row = mean_b.clone();
    let mut total: f64 = per_k.iter().map(|b| math::pow(*b, inv_alpha)).sum();
    let mut prev_block_sum = total;
    let mut tail_ratio = mu;
    loop {
        let mut block = Vec::with_capacity(r as usize);
        let mut block_sum = 0.0;
        for i in 0..r as usize {
            let m1 = l1_norm(&row_apply(&m1_row, model.mean_matrix(), i as u32));
            let b = mu * prev_block[i] + c1 * m1;
            block_sum += math::pow(b, inv_alpha);
            block.push(b);
        }
        m1_row = row_apply(&m1_row, model.mean_matrix(), r);
        total += block_sum;
        per_k.extend_from_slice(&block);
        let blocks_done = per_k.len() as u64 / r as u64;
        if prev_block_sum > 0.0 {
            tail_ratio = block_sum / prev_block_sum;
        }
        prev_block_sum = block_sum;
        prev_block = block;
        if blocks_done > k0 + 2
            && per_k.len() >= 256
            && (block_sum <= 1e-14 * total || total == 0.0)
        {
            break;
        }
        if per_k.len() as u32 > SERIES_GUARD {
            return Err(Error::TruncationBudgetExceeded);
        }
    }
    // Geometric closure of the neglected tail.
    let q = tail_ratio.max(math::pow(mu, inv_alpha)).min(1.0 - 1e-9);
    let y_root = total + prev_block_sum * q / (1.0 - q);
    let y_moment_bound = math::pow(y_root, alpha);

    let nu_hat = if per_k[0] > 0.0 {
        per_k
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, b)| math::pow(b / per_k[0], 1.0 / n as f64))
            .fold(0.0f64, f64::max)
    } else {
        mu
    };

    let exact = eval.is_exact() && !residue_mc;
    let confidence_note = if exact {
        String::from(
            "all constants computed exactly (closed-form cumulants); \
             numeric moment sums carry relative tail error below 1e-9; \
             the Y bound uses the Minkowski-form summation (sum of B(k)^(1/alpha), raised to alpha)",
        )
    } else {
        format!(
            "Monte Carlo constants are one-sided upper confidence bounds at level {}; \
             the S_k/k moment condition was verified for k <= {} only (asymptotic beyond); \
             this certificate is statistical, not a proof; \
             the Y bound uses the Minkowski-form summation (sum of B(k)^(1/alpha), raised to alpha)",
            budgets.confidence, budgets.k_max_check
        )
    };

    Ok(Certificate {
        constants: ProofConstants {
            alpha,
            mu_j,
            mu_bar,
            k0_prime,
            c0,
            k0,
            c1,
            mu,
            r,
            estimation_mode: if exact {
                EstimationMode::Exact
            } else {
                EstimationMode::MonteCarloUpperCb
            },
        },
        m_alpha_0_bound: b0,
        per_k_bound: per_k,
        y_moment_bound,
        nu_hat,
        confidence_note,
    })
}

/// Certificate for 0 < alpha < 1: M_alpha(k) <= (max_j mu_j)^(alpha k)
/// E||B||^alpha and the geometric sum closes the Y bound. Uses the
/// contraction factor mu^alpha (the derivable constant) rather than mu.
pub fn build_certificate_alpha_lt_1(model: &GwiModel, alpha: f64) -> Result<Certificate> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter("this branch requires 0 < alpha < 1".into()));
    }
    model.require_subcritical()?;
    let b0 = immigration_alpha_bound(model, alpha)?;
    let r = model.spectral().r;
    let mu_full = max_of(&model.mean_matrix().row_sums());
    let ctx = r_step_reduction(model, r);
    let mu_j = ctx.mean_matrix.row_sums();
    let mu_red = max_of(&mu_j);
    let rate = math::pow(mu_red, alpha);

    // Residue i picks up (mu_full^alpha)^i from the un-reduced steps;
    // trivial when r = 1.
    let mut residue_factor = vec![1.0f64];
    for _ in 1..r {
        residue_factor.push(residue_factor.last().unwrap() * math::pow(mu_full, alpha));
    }
    let residue_sum: f64 = residue_factor.iter().sum();
    let y_moment_bound = b0 * residue_sum / (1.0 - rate);

    let mut per_k = Vec::new();
    let mut block_scale = b0;
    'outer: for _ in 0..SERIES_GUARD {
        for f in &residue_factor {
            per_k.push(block_scale * f);
        }
        block_scale *= rate;
        if per_k.len() >= 256 && (block_scale <= 1e-14 * b0.max(1e-300) || b0 == 0.0) {
            break 'outer;
        }
    }

    let nu_hat = if r == 1 { rate } else { math::pow(rate, 1.0 / r as f64) };
    Ok(Certificate {
        constants: ProofConstants {
            alpha,
            mu_j,
            mu_bar: rate,
            k0_prime: 0,
            c0: 0.0,
            k0: 0,
            c1: 0.0,
            mu: rate,
            r,
            estimation_mode: EstimationMode::Exact,
        },
        m_alpha_0_bound: b0,
        per_k_bound: per_k,
        y_moment_bound,
        nu_hat,
        confidence_note: String::from(
            "exact certificate; uses the contraction factor mu^alpha (the constant the \
             subadditivity chain actually yields) in place of mu",
        ),
    })
}
