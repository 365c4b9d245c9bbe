//! Subcommand implementations. Each builds the model from the config,
//! runs its Monte Carlo through the deterministic chunked scheduler,
//! and emits a ResultTable (plus a text report for certify).

use gwi_core::stats::RunningMoments;
use gwi_core::{analysis, certificate, matrix, process, rng, Error, GwiModel};

use crate::config::ExperimentConfig;
use crate::parallel::{self, run_chunked};
use crate::table::{fmt_f64, Cell, ResultTable};
use crate::CliError;

pub struct CmdOutput {
    pub table: ResultTable,
    pub report: Option<String>,
}

fn core_err(e: Error) -> CliError {
    match e {
        Error::InvalidParameter(_) => CliError::config(format!("{e}")),
        other => CliError::runtime(format!("{other}")),
    }
}

fn build(cfg: &ExperimentConfig) -> Result<GwiModel, CliError> {
    cfg.build_model().map_err(CliError::config)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let model = build(cfg)?;
    let d = model.dim();
    let gens = cfg.k_max;
    let rows_per = gens as usize + 1;

    let parts = run_chunked(cfg.seed, parallel::BASE_SIMULATE, cfg.samples, |len, rng| {
        let mut grid = vec![RunningMoments::new(); rows_per * d];
        let mut zeros = vec![0u64; rows_per];
        for _ in 0..len {
            let traj = process::simulate_trajectory(&model, gens, rng)?;
            for (g, pop) in traj.generations.iter().enumerate() {
                for (j, &c) in pop.counts().iter().enumerate() {
                    grid[g * d + j].push(c as f64);
                }
                if pop.is_zero() {
                    zeros[g] += 1;
                }
            }
        }
        Ok((grid, zeros))
    })
    .map_err(core_err)?;

    let mut grid = vec![RunningMoments::new(); rows_per * d];
    let mut zeros = vec![0u64; rows_per];
    for (g, z) in &parts {
        for (acc, p) in grid.iter_mut().zip(g.iter()) {
            *acc = acc.merge(p);
        }
        for (acc, p) in zeros.iter_mut().zip(z.iter()) {
            *acc += p;
        }
    }

    let mut columns = vec!["generation".to_string()];
    for j in 0..d {
        columns.push(format!("mean_{j}"));
    }
    for j in 0..d {
        columns.push(format!("var_{j}"));
    }
    columns.push("extinct_fraction".to_string());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ResultTable::new(&cols);
    for g in 0..rows_per {
        let mut row = vec![Cell::UInt(g as u64)];
        for j in 0..d {
            row.push(Cell::Num(grid[g * d + j].mean()));
        }
        for j in 0..d {
            row.push(Cell::Num(grid[g * d + j].variance()));
        }
        row.push(Cell::Num(zeros[g] as f64 / cfg.samples as f64));
        table.push(row);
    }
    Ok(CmdOutput { table, report: None })
}

fn min_alpha(cfg: &ExperimentConfig) -> f64 {
    cfg.alphas.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn stationary(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let model = build(cfg)?;
    let d = model.dim();
    let n_alphas = cfg.alphas.len();
    let depth = process::stationary_depth(&model, min_alpha(cfg), cfg.eps).map_err(core_err)?;

    let parts = run_chunked(cfg.seed, parallel::BASE_STATIONARY, cfg.samples, |len, rng| {
        let mut type_m = vec![RunningMoments::new(); d];
        let mut alpha_m = vec![RunningMoments::new(); n_alphas];
        for _ in 0..len {
            let y = process::sample_stationary_at_depth(&model, depth, rng)?;
            for (j, &c) in y.counts().iter().enumerate() {
                type_m[j].push(c as f64);
            }
            let norm = y.total() as f64;
            for (ai, a) in cfg.alphas.iter().enumerate() {
                alpha_m[ai].push(norm.powf(*a));
            }
        }
        Ok((type_m, alpha_m))
    })
    .map_err(core_err)?;

    let mut type_m = vec![RunningMoments::new(); d];
    let mut alpha_full = vec![RunningMoments::new(); n_alphas];
    let mut alpha_half = vec![RunningMoments::new(); n_alphas];
    let half_chunks = parts.len().div_ceil(2);
    for (ci, (tm, am)) in parts.iter().enumerate() {
        for (acc, p) in type_m.iter_mut().zip(tm.iter()) {
            *acc = acc.merge(p);
        }
        for (acc, p) in alpha_full.iter_mut().zip(am.iter()) {
            *acc = acc.merge(p);
        }
        if ci < half_chunks {
            for (acc, p) in alpha_half.iter_mut().zip(am.iter()) {
                *acc = acc.merge(p);
            }
        }
    }

    let exact_mean = match analysis::stationary_mean_exact(&model) {
        Ok(v) => Some(v),
        Err(Error::InfiniteImmigrationMean) => None,
        Err(e) => return Err(core_err(e)),
    };

    let mut columns = vec![
        "alpha".to_string(),
        "moment".to_string(),
        "stderr".to_string(),
        "nonconvergent".to_string(),
    ];
    for j in 0..d {
        columns.push(format!("mean_{j}"));
    }
    for j in 0..d {
        columns.push(format!("exact_mean_{j}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ResultTable::new(&cols);
    for (ai, a) in cfg.alphas.iter().enumerate() {
        let full = &alpha_full[ai];
        let half = &alpha_half[ai];
        // Instability diagnostic: the half-sample and full-sample
        // estimates disagree far beyond the full-sample noise level.
        let nonconvergent =
            full.stderr() > 0.0 && (full.mean() - half.mean()).abs() > 10.0 * full.stderr();
        let mut row = vec![
            Cell::Num(*a),
            Cell::Num(full.mean()),
            Cell::Num(full.stderr()),
            Cell::Bool(nonconvergent),
        ];
        for j in 0..d {
            row.push(Cell::Num(type_m[j].mean()));
        }
        for j in 0..d {
            row.push(match &exact_mean {
                Some(v) => Cell::Num(v[j]),
                None => Cell::Missing,
            });
        }
        table.push(row);
    }
    Ok(CmdOutput { table, report: None })
}

/// M_alpha(k) estimates for all (alpha, k) from shared branching paths.
fn decay_grid(
    cfg: &ExperimentConfig,
    model: &GwiModel,
    stream_base: u64,
) -> Result<Vec<Vec<RunningMoments>>, CliError> {
    let n_alphas = cfg.alphas.len();
    let k_rows = cfg.k_max as usize + 1;
    let parts = run_chunked(cfg.seed, stream_base, cfg.samples, |len, rng| {
        let mut grid = vec![vec![RunningMoments::new(); k_rows]; n_alphas];
        for _ in 0..len {
            let norms = analysis::mk_sample_path(model, cfg.k_max, rng)?;
            for (ai, a) in cfg.alphas.iter().enumerate() {
                for (k, &x) in norms.iter().enumerate() {
                    grid[ai][k].push((x as f64).powf(*a));
                }
            }
        }
        Ok(grid)
    })
    .map_err(core_err)?;

    let mut grid = vec![vec![RunningMoments::new(); k_rows]; n_alphas];
    for part in &parts {
        for (ga, pa) in grid.iter_mut().zip(part.iter()) {
            for (acc, p) in ga.iter_mut().zip(pa.iter()) {
                *acc = acc.merge(p);
            }
        }
    }
    Ok(grid)
}

pub fn decay(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let model = build(cfg)?;
    model.require_subcritical().map_err(core_err)?;
    let grid = decay_grid(cfg, &model, parallel::BASE_DECAY)?;
    let r = model.spectral().r;

    let mut table = ResultTable::new(&[
        "alpha",
        "k",
        "m_hat",
        "stderr",
        "kind",
        "fitted_rate",
        "rate_lo",
        "rate_hi",
        "fit_r2",
    ]);
    for (ai, a) in cfg.alphas.iter().enumerate() {
        for k in 0..=cfg.k_max as usize {
            let m = &grid[ai][k];
            table.push(vec![
                Cell::Num(*a),
                Cell::UInt(k as u64),
                Cell::Num(m.mean()),
                Cell::Num(m.stderr()),
                Cell::Str("point".into()),
                Cell::Missing,
                Cell::Missing,
                Cell::Missing,
                Cell::Missing,
            ]);
        }
        // Geometric fit over k >= r (transients below the contraction
        // power are excluded).
        let points: Vec<analysis::DecayPoint> = (r..=cfg.k_max)
            .map(|k| analysis::DecayPoint {
                k,
                m_hat: grid[ai][k as usize].mean(),
                stderr: grid[ai][k as usize].stderr(),
            })
            .collect();
        let fit_cells = match analysis::fit_decay_rate(*a, &points, cfg.samples) {
            Ok(fit) => [
                Cell::Num(fit.fitted_rate),
                Cell::Num(fit.rate_ci.0),
                Cell::Num(fit.rate_ci.1),
                Cell::Num(fit.fit_r2),
            ],
            Err(_) => [Cell::Missing, Cell::Missing, Cell::Missing, Cell::Missing],
        };
        let mut row = vec![
            Cell::Num(*a),
            Cell::Missing,
            Cell::Missing,
            Cell::Missing,
            Cell::Str("fit".into()),
        ];
        row.extend(fit_cells);
        table.push(row);
    }
    Ok(CmdOutput { table, report: None })
}

fn matrix_rows(m: &matrix::MeanMatrix) -> String {
    (0..m.dim())
        .map(|i| {
            let cells: Vec<String> = m.row(i).iter().map(|&x| fmt_f64(x)).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn certify(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let model = build(cfg)?;
    model.require_subcritical().map_err(core_err)?;
    let grid = decay_grid(cfg, &model, parallel::BASE_CERTIFY_EST)?;

    let mut table = ResultTable::new(&["alpha", "k", "bound", "m_hat", "stderr", "sound"]);
    let mut report = String::new();
    for (ai, a) in cfg.alphas.iter().enumerate() {
        let cert = if *a < 1.0 {
            certificate::build_certificate_alpha_lt_1(&model, *a)
        } else {
            let budgets = certificate::Budgets {
                n_samples: cfg.samples,
                k_max_check: certificate::DEFAULT_K_MAX_CHECK,
                confidence: cfg.confidence,
            };
            let mut rng = rng::stream(cfg.seed, parallel::BASE_CERTIFY_CONST + ai as u64);
            certificate::build_certificate_alpha_ge_1(&model, *a, cfg.mu_bar, &budgets, &mut rng)
        }
        .map_err(|e| match e {
            Error::CombinatorialBudgetExceeded { k0, lattice_size } => CliError::runtime(format!(
                "certificate lattice for alpha = {a} is too large \
                 (k0 = {k0}, {lattice_size} points); raise mu_bar to shrink k0"
            )),
            Error::NotFoundWithinBudget { budget } => CliError::runtime(format!(
                "no k0' found up to {budget} for alpha = {a}; \
                 raise mu_bar or the sample budget"
            )),
            other => core_err(other),
        })?;

        let c = &cert.constants;
        let branch = if *a < 1.0 {
            "alpha < 1 (Jensen/subadditivity)".to_string()
        } else if c.r > 1 {
            format!("alpha >= 1 with r-step reduction (r = {})", c.r)
        } else {
            "alpha >= 1".to_string()
        };
        report.push_str(&format!("== certificate: alpha = {} ==\n", fmt_f64(*a)));
        report.push_str(&format!("branch: {branch}\n"));
        report.push_str(&format!(
            "estimation mode: {}\n",
            match c.estimation_mode {
                certificate::EstimationMode::Exact => "exact",
                certificate::EstimationMode::MonteCarloUpperCb =>
                    "Monte Carlo upper confidence bounds",
            }
        ));
        let mu_js: Vec<String> = c.mu_j.iter().map(|&x| fmt_f64(x)).collect();
        report.push_str(&format!("effective row sums mu_j: {}\n", mu_js.join(", ")));
        if c.r > 1 {
            let reduced = model.mean_matrix().pow(c.r);
            report.push_str(&format!(
                "reduced mean matrix M^{}: {}\n",
                c.r,
                matrix_rows(&reduced)
            ));
        }
        report.push_str(&format!(
            "mu_bar = {}, k0' = {}, c0 = {}, k0 = {}, c1 = {}, mu = {}\n",
            fmt_f64(c.mu_bar),
            c.k0_prime,
            fmt_f64(c.c0),
            c.k0,
            fmt_f64(c.c1),
            fmt_f64(c.mu)
        ));
        report.push_str(&format!(
            "M_alpha(0) bound = {}\n",
            fmt_f64(cert.m_alpha_0_bound)
        ));
        report.push_str(&format!(
            "Y moment bound: E||Y||^alpha <= {}\n",
            fmt_f64(cert.y_moment_bound)
        ));
        report.push_str(&format!(
            "decay envelope: B(k) <= B(0) * nu^k with nu = {}\n",
            fmt_f64(cert.nu_hat)
        ));
        report.push_str(&format!("note: {}\n\n", cert.confidence_note));

        for k in 0..=cfg.k_max as usize {
            let m = &grid[ai][k];
            let (bound_cell, sound_cell) = match cert.per_k_bound.get(k) {
                Some(&b) => (
                    Cell::Num(b),
                    Cell::Bool(b >= m.mean() - 3.0 * m.stderr()),
                ),
                None => (Cell::Missing, Cell::Missing),
            };
            table.push(vec![
                Cell::Num(*a),
                Cell::UInt(k as u64),
                bound_cell,
                Cell::Num(m.mean()),
                Cell::Num(m.stderr()),
                sound_cell,
            ]);
        }
    }
    Ok(CmdOutput { table, report: Some(report) })
}

pub fn tail(cfg: &ExperimentConfig) -> Result<CmdOutput, CliError> {
    let model = build(cfg)?;
    let depth = process::stationary_depth(&model, min_alpha(cfg), cfg.eps).map_err(core_err)?;

    let parts = run_chunked(cfg.seed, parallel::BASE_TAIL, cfg.samples, |len, rng| {
        let mut norms = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let y = process::sample_stationary_at_depth(&model, depth, rng)?;
            norms.push(y.total() as f64);
        }
        Ok(norms)
    })
    .map_err(core_err)?;
    let norms: Vec<f64> = parts.into_iter().flatten().collect();

    let mut table = ResultTable::new(&[
        "k_frac",
        "k",
        "beta_hat",
        "ci_lo",
        "ci_hi",
        "n",
        "light_tailed",
    ]);
    for kf in &cfg.k_fracs {
        let full = analysis::hill_estimator(&norms, *kf).map_err(core_err)?;
        // Two-scale comparison with the same order-statistic count: a
        // genuinely heavy tail gives a stable beta_hat, a light tail
        // drifts upward as n grows.
        let half_n = norms.len() / 2;
        let light = if half_n >= 100 {
            let kf_half = full.order_stats_used as f64 / half_n as f64;
            match analysis::hill_estimator(&norms[..half_n], kf_half) {
                Ok(half) => {
                    let drift = full.hill_estimate - half.hill_estimate;
                    let scale = 2.0 * full.hill_estimate
                        / (full.order_stats_used as f64).sqrt();
                    Cell::Bool(drift > scale)
                }
                Err(_) => Cell::Missing,
            }
        } else {
            Cell::Missing
        };
        table.push(vec![
            Cell::Num(*kf),
            Cell::UInt(full.order_stats_used as u64),
            Cell::Num(full.hill_estimate),
            Cell::Num(full.ci.0),
            Cell::Num(full.ci.1),
            Cell::UInt(norms.len() as u64),
            light,
        ]);
    }
    Ok(CmdOutput { table, report: None })
}
