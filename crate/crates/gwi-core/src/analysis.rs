//! Empirical moment machinery: decay of the alpha-moment sequence
//! M_alpha(k), geometric-rate fitting, exact stationary means, Hill tail
//! diagnostics, and the analytic finite/infinite moment classifier.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{self, l1_norm};
use crate::process::{self, GwiModel, PopulationVec};
use crate::rng::RngCore;
use crate::stats::RunningMoments;

/// One estimated point of the decay sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub k: u32,
    pub m_hat: f64,
    pub stderr: f64,
}

/// Monte Carlo decay estimates together with the fitted geometric rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    pub alpha: f64,
    /// Strictly positive points used in the fit, ks strictly increasing.
    pub points: Vec<DecayPoint>,
    /// ks whose estimate was exactly zero (all paths extinct), dropped
    /// from the log fit.
    pub dropped_zero_ks: Vec<u32>,
    pub n_samples: u64,
    /// exp(slope) of the least-squares fit of log m_hat against k.
    pub fitted_rate: f64,
    /// Normal-approximation band for the rate.
    pub rate_ci: (f64, f64),
    pub fit_r2: f64,
}

/// Hill tail-index estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub order_stats_used: usize,
    pub hill_estimate: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentClassification {
    Finite,
    Infinite,
    Unknown,
}

/// Outcome of the analytic moment-existence check: E||Y||^alpha is finite
/// when every offspring law has a finite moment of order max(alpha, 1) and
/// the immigration law has a finite moment of order alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub alpha: f64,
    pub classification: MomentClassification,
    pub offspring_condition_holds: bool,
    pub immigration_condition_holds: bool,
    pub every_type_immigrates: bool,
    pub empirical_estimate: Option<(f64, f64)>,
}

/// Monte Carlo estimate of M_alpha(k) = E||Pi_k o B||^alpha: each sample
/// starts a branching process (no immigration) from a fresh immigration
/// draw and runs it k generations.
pub fn estimate_mk(
    model: &GwiModel,
    alpha: f64,
    k: u32,
    n_samples: u64,
    rng: &mut impl RngCore,
) -> Result<(f64, f64)> {
    model.require_subcritical()?;
    assert!(n_samples >= 100);
    let mut acc = RunningMoments::new();
    for _ in 0..n_samples {
        let init = PopulationVec::new(model.immigration().sample(rng));
        let out = process::branch_no_immigration(model, &init, k, rng)?;
        acc.push(math::pow(out.total() as f64, alpha));
    }
    Ok((acc.mean(), acc.stderr()))
}

/// One sample path of the decay sequence: ||Pi_k o B|| for k = 0..=k_max
/// along a single branching trajectory started from one immigration draw.
/// Estimates built from these paths are correlated across k but unbiased
/// at every k, which is all the log fit needs.
pub fn mk_sample_path(model: &GwiModel, k_max: u32, rng: &mut impl RngCore) -> Result<Vec<u64>> {
    let mut norms = Vec::with_capacity(k_max as usize + 1);
    let mut x = PopulationVec::new(model.immigration().sample(rng));
    norms.push(x.total());
    for _ in 0..k_max {
        if x.is_zero() {
            norms.push(0);
            continue;
        }
        x = process::apply_theta(model, &x, rng)?;
        norms.push(x.total());
    }
    Ok(norms)
}

/// Least-squares fit of log m_hat against k. Zero entries are dropped and
/// recorded; at least four strictly positive entries are required.
pub fn fit_decay_rate(
    alpha: f64,
    estimates: &[DecayPoint],
    n_samples: u64,
) -> Result<DecayEstimate> {
    let mut points: Vec<DecayPoint> = Vec::new();
    let mut dropped = Vec::new();
    for p in estimates {
        if p.m_hat > 0.0 {
            points.push(*p);
        } else {
            dropped.push(p.k);
        }
    }
    if points.len() < 4 {
        return Err(Error::InsufficientPositivePoints { available: points.len() });
    }

    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| math::ln(p.m_hat)).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPositivePoints { available: 1 });
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let fit_r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    let slope_se = if points.len() > 2 {
        math::sqrt(ss_res / (n - 2.0) / sxx)
    } else {
        0.0
    };
    let fitted_rate = math::exp(slope);
    Ok(DecayEstimate {
        alpha,
        points,
        dropped_zero_ks: dropped,
        n_samples,
        fitted_rate,
        rate_ci: (
            math::exp(slope - 1.96 * slope_se),
            math::exp(slope + 1.96 * slope_se),
        ),
        fit_r2,
    })
}

/// Exact stationary mean E[B] (I - M)^(-1), summed as the geometric series
/// sum E[B] M^i until increments fall below 1e-12 relative.
pub fn stationary_mean_exact(model: &GwiModel) -> Result<Vec<f64>> {
    model.require_subcritical()?;
    let mean_b = model.immigration_mean().ok_or(Error::InfiniteImmigrationMean)?;
    let m = model.mean_matrix();
    let mut acc = mean_b.clone();
    let mut v = mean_b;
    for _ in 0..1_000_000u32 {
        v = matrix::row_apply(&v, m, 1);
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
        if l1_norm(&v) <= 1e-12 * l1_norm(&acc).max(1e-300) {
            return Ok(acc);
        }
    }
    // Subcriticality guarantees geometric convergence long before this.
    Err(Error::TruncationBudgetExceeded)
}

/// Mean and standard error of ||x||^alpha over the samples.
pub fn empirical_alpha_moment(samples: &[PopulationVec], alpha: f64) -> (f64, f64) {
    let mut acc = RunningMoments::new();
    for s in samples {
        acc.push(math::pow(s.total() as f64, alpha));
    }
    (acc.mean(), acc.stderr())
}

/// Hill estimator of the tail index over the k largest order statistics,
/// k = ceil(k_frac * n); CI is the normal approximation beta(1 +- 1.96/sqrt k).
pub fn hill_estimator(norms: &[f64], k_frac: f64) -> Result<TailEstimate> {
    if norms.len() < 100 {
        return Err(Error::InvalidParameter(
            "hill estimator needs at least 100 samples".into(),
        ));
    }
    if !(0.0 < k_frac && k_frac < 1.0) {
        return Err(Error::InvalidParameter("k_frac must be in (0,1)".into()));
    }
    let n = norms.len();
    let k = ((k_frac * n as f64) + 0.999_999_999_999).max(1.0) as usize;
    if k < 10 {
        return Err(Error::InvalidParameter(
            "k = ceil(k_frac * n) must be at least 10".into(),
        ));
    }
    if k + 1 > n {
        return Err(Error::InvalidParameter("k must be below the sample count".into()));
    }
    let mut sorted = norms.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let threshold = sorted[k];
    if threshold <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    let sum_log: f64 = sorted[..k].iter().map(|x| math::ln(x / threshold)).sum();
    if sum_log <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    let beta_hat = k as f64 / sum_log;
    let half = 1.96 / math::sqrt(k as f64);
    Ok(TailEstimate {
        order_stats_used: k,
        hill_estimate: beta_hat,
        ci: (beta_hat * (1.0 - half), beta_hat * (1.0 + half)),
    })
}

/// Analytic finite/infinite classification of E||Y||^alpha per the moment
/// existence conditions. Infinite is reported only when the immigration
/// condition fails and every type immigrates with positive probability;
/// otherwise failures classify as Unknown.
pub fn classify_moment(model: &GwiModel, alpha: f64) -> Result<MomentReport> {
    model.require_subcritical()?;
    let order = alpha.max(1.0);
    let offspring_ok = model
        .offspring()
        .laws()
        .iter()
        .all(|law| law.alpha_moment_is_finite(order));
    let immigration_ok = model.immigration().alpha_moment_is_finite(alpha);
    let every_type = (0..model.dim())
        .all(|j| model.immigration().component_can_be_positive(j));

    let classification = if offspring_ok && immigration_ok {
        MomentClassification::Finite
    } else if !immigration_ok && every_type {
        MomentClassification::Infinite
    } else {
        MomentClassification::Unknown
    };
    Ok(MomentReport {
        alpha,
        classification,
        offspring_condition_holds: offspring_ok,
        immigration_condition_holds: immigration_ok,
        every_type_immigrates: every_type,
        empirical_estimate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{OffspringSpec, ScalarLaw, VectorLaw};
    use crate::rng;

    fn single_type_model(m: f64, immigration: ScalarLaw) -> GwiModel {
        GwiModel::new(
            OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
                ScalarLaw::Bernoulli(m),
            ])])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![immigration]),
        )
        .unwrap()
    }

    fn two_type_model() -> GwiModel {
        // M = [[0.5, 0.2], [0, 0.3]], E B = (1, 0).
        GwiModel::new(
            OffspringSpec::new(vec![
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Poisson(0.5),
                    ScalarLaw::Poisson(0.2),
                ]),
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Deterministic(0),
                    ScalarLaw::Poisson(0.3),
                ]),
            ])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![
                ScalarLaw::Poisson(1.0),
                ScalarLaw::Deterministic(0),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn mk_at_zero_is_immigration_moment() {
        let model = GwiModel::new(
            OffspringSpec::new(vec![
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Bernoulli(0.2),
                    ScalarLaw::Bernoulli(0.2),
                ]),
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Bernoulli(0.2),
                    ScalarLaw::Bernoulli(0.2),
                ]),
            ])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![
                ScalarLaw::Deterministic(1),
                ScalarLaw::Deterministic(1),
            ]),
        )
        .unwrap();
        let mut r = rng::stream(20, 0);
        let (mean, se) = estimate_mk(&model, 2.0, 0, 1000, &mut r).unwrap();
        assert_eq!(mean, 4.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn mk_dead_offspring_is_zero() {
        let model = GwiModel::new(
            OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
                ScalarLaw::Deterministic(0),
            ])])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![ScalarLaw::Poisson(2.0)]),
        )
        .unwrap();
        let mut r = rng::stream(21, 0);
        for k in 1..=3 {
            let (mean, se) = estimate_mk(&model, 1.5, k, 500, &mut r).unwrap();
            assert_eq!(mean, 0.0);
            assert_eq!(se, 0.0);
        }
    }

    #[test]
    fn mk_alpha_one_matches_exact_series() {
        let model = two_type_model();
        let mean_b = model.immigration_mean().unwrap();
        let mut r = rng::stream(22, 0);
        for k in [0u32, 1, 2, 4, 6, 8] {
            let exact = l1_norm(&matrix::row_apply(&mean_b, model.mean_matrix(), k));
            let (mean, se) = estimate_mk(&model, 1.0, k, 40_000, &mut r).unwrap();
            assert!(
                (mean - exact).abs() <= 4.0 * se.max(1e-12),
                "k={k}: {mean} vs {exact} (se {se})"
            );
        }
    }

    #[test]
    fn fit_exact_geometric_series() {
        let points: Vec<DecayPoint> = (0..10)
            .map(|k| DecayPoint { k, m_hat: 0.5f64.powi(k as i32), stderr: 0.0 })
            .collect();
        let fit = fit_decay_rate(1.0, &points, 1000).unwrap();
        assert!((fit.fitted_rate - 0.5).abs() < 1e-12);
        assert!((fit.fit_r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_constant_series_rate_one() {
        let points: Vec<DecayPoint> = (0..8)
            .map(|k| DecayPoint { k, m_hat: 3.0, stderr: 0.0 })
            .collect();
        let fit = fit_decay_rate(1.0, &points, 1000).unwrap();
        assert!((fit.fitted_rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_drops_zeros_and_errors_when_sparse() {
        let mut points: Vec<DecayPoint> = (0..6)
            .map(|k| DecayPoint { k, m_hat: 0.7f64.powi(k as i32), stderr: 0.0 })
            .collect();
        points.push(DecayPoint { k: 6, m_hat: 0.0, stderr: 0.0 });
        let fit = fit_decay_rate(1.0, &points, 100).unwrap();
        assert_eq!(fit.dropped_zero_ks, vec![6]);

        let zeros: Vec<DecayPoint> = (0..6)
            .map(|k| DecayPoint { k, m_hat: if k < 3 { 1.0 } else { 0.0 }, stderr: 0.0 })
            .collect();
        assert!(matches!(
            fit_decay_rate(1.0, &zeros, 100),
            Err(Error::InsufficientPositivePoints { available: 3 })
        ));
    }

    #[test]
    fn fit_on_exact_alpha_one_series_recovers_rho() {
        // Three reference models, k from the contraction power to 25.
        let models = [
            single_type_model(0.5, ScalarLaw::Poisson(1.0)),
            two_type_model(),
            GwiModel::new(
                OffspringSpec::new(vec![
                    VectorLaw::IndependentComponents(vec![
                        ScalarLaw::Deterministic(0),
                        ScalarLaw::Poisson(2.0),
                    ]),
                    VectorLaw::IndependentComponents(vec![
                        ScalarLaw::Bernoulli(0.05),
                        ScalarLaw::Deterministic(0),
                    ]),
                ])
                .unwrap(),
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Poisson(1.0),
                    ScalarLaw::Deterministic(0),
                ]),
            )
            .unwrap(),
        ];
        for model in &models {
            let rho = model.spectral().rho;
            let r = model.spectral().r;
            let mean_b = model.immigration_mean().unwrap();
            let points: Vec<DecayPoint> = (r..=25)
                .map(|k| DecayPoint {
                    k,
                    m_hat: l1_norm(&matrix::row_apply(&mean_b, model.mean_matrix(), k)),
                    stderr: 0.0,
                })
                .collect();
            let fit = fit_decay_rate(1.0, &points, 0).unwrap();
            assert!(
                (fit.fitted_rate - rho).abs() <= 0.05,
                "rate {} vs rho {rho}",
                fit.fitted_rate
            );
        }
    }

    #[test]
    fn stationary_mean_exact_examples() {
        let single = single_type_model(0.5, ScalarLaw::Poisson(1.0));
        let m = stationary_mean_exact(&single).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-10);

        let two = two_type_model();
        let m = stationary_mean_exact(&two).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-10);
        assert!((m[1] - 4.0 / 7.0).abs() < 1e-10);

        let dead = GwiModel::new(
            OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
                ScalarLaw::Bernoulli(0.5),
            ])])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![ScalarLaw::Deterministic(0)]),
        )
        .unwrap();
        assert_eq!(stationary_mean_exact(&dead).unwrap(), vec![0.0]);
    }

    #[test]
    fn stationary_mean_requires_finite_immigration_mean() {
        let heavy = single_type_model(0.5, ScalarLaw::DiscretePareto(0.8));
        assert!(matches!(
            stationary_mean_exact(&heavy),
            Err(Error::InfiniteImmigrationMean)
        ));
    }

    #[test]
    fn empirical_moment_examples() {
        let ones = vec![PopulationVec::new(vec![1, 1]); 50];
        assert_eq!(empirical_alpha_moment(&ones, 2.0), (4.0, 0.0));
        let zeros = vec![PopulationVec::zero(2); 50];
        assert_eq!(empirical_alpha_moment(&zeros, 2.0), (0.0, 0.0));
    }

    #[test]
    fn hill_on_exact_pareto() {
        // Continuous Pareto x = u^(-1/beta), beta = 1.5.
        let beta = 1.5;
        let mut r = rng::stream(23, 0);
        let norms: Vec<f64> = (0..100_000)
            .map(|_| rng::uniform_open01(&mut r).powf(-1.0 / beta))
            .collect();
        let est = hill_estimator(&norms, 0.01).unwrap();
        assert!(
            est.hill_estimate > 1.35 && est.hill_estimate < 1.65,
            "hill {}",
            est.hill_estimate
        );
        assert!(est.ci.0 < beta && beta < est.ci.1);
    }

    #[test]
    fn hill_degenerate_sample() {
        let norms = vec![5.0; 5000];
        assert!(matches!(hill_estimator(&norms, 0.01), Err(Error::DegenerateSample)));
    }

    #[test]
    fn hill_light_tail_grows_with_fixed_order_count() {
        // Exponential norms: with a fixed number of order statistics the
        // estimate keeps drifting up as n grows (no stabilization).
        let mut r = rng::stream(24, 0);
        let all: Vec<f64> = (0..100_000)
            .map(|_| -rng::uniform_open01(&mut r).ln())
            .collect();
        let k = 200.0;
        let small = hill_estimator(&all[..10_000], k / 10_000.0).unwrap();
        let large = hill_estimator(&all, k / 100_000.0).unwrap();
        assert!(
            large.hill_estimate > small.hill_estimate,
            "{} vs {}",
            large.hill_estimate,
            small.hill_estimate
        );
    }

    #[test]
    fn classify_moment_examples() {
        let light = single_type_model(0.5, ScalarLaw::Poisson(1.0));
        for alpha in [0.5, 1.0, 2.0, 3.0] {
            let rep = classify_moment(&light, alpha).unwrap();
            assert_eq!(rep.classification, MomentClassification::Finite);
        }

        let heavy = GwiModel::new(
            OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
                ScalarLaw::Poisson(0.5),
            ])])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![ScalarLaw::DiscretePareto(1.5)]),
        )
        .unwrap();
        assert_eq!(
            classify_moment(&heavy, 2.0).unwrap().classification,
            MomentClassification::Infinite
        );
        assert_eq!(
            classify_moment(&heavy, 1.0).unwrap().classification,
            MomentClassification::Finite
        );
    }

    #[test]
    fn classify_unknown_when_a_type_never_immigrates() {
        // Heavy immigration in type 1 only; type 2 never immigrates.
        let model = GwiModel::new(
            OffspringSpec::new(vec![
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Bernoulli(0.2),
                    ScalarLaw::Bernoulli(0.2),
                ]),
                VectorLaw::IndependentComponents(vec![
                    ScalarLaw::Bernoulli(0.2),
                    ScalarLaw::Bernoulli(0.2),
                ]),
            ])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![
                ScalarLaw::DiscretePareto(1.5),
                ScalarLaw::Deterministic(0),
            ]),
        )
        .unwrap();
        let rep = classify_moment(&model, 2.0).unwrap();
        assert_eq!(rep.classification, MomentClassification::Unknown);
        assert!(!rep.every_type_immigrates);
    }

    #[test]
    fn classification_is_monotone_in_alpha() {
        let model = GwiModel::new(
            OffspringSpec::new(vec![VectorLaw::IndependentComponents(vec![
                ScalarLaw::Poisson(0.4),
            ])])
            .unwrap(),
            VectorLaw::IndependentComponents(vec![ScalarLaw::DiscretePareto(1.7)]),
        )
        .unwrap();
        let alphas = [0.25, 0.5, 1.0, 1.5, 1.69, 1.7, 2.0, 3.0];
        let classes: Vec<_> = alphas
            .iter()
            .map(|&a| classify_moment(&model, a).unwrap().classification)
            .collect();
        for (i, ci) in classes.iter().enumerate() {
            for cj in classes.iter().skip(i + 1) {
                if *cj == MomentClassification::Finite {
                    assert_eq!(*ci, MomentClassification::Finite);
                }
            }
        }
    }
}
