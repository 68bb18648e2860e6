//! The five benchmark experiments. Each returns fixed-schema CSV rows, one
//! summary line per config point, and built-in checks that `--assert` gates
//! the exit code on.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use nalgebra::DVector;
use rand::Rng;

use lapd::diagnostics::{
    bootstrap_cov_se, iteration_bound, iterations_to_epsilon, kl_bound, mean_and_covariance,
    BoundCase,
};
use lapd::sampler::{run_chains, run_lapd, run_sgld, Recorder};
use lapd::{
    empirical_w2_sq_1d, find_mode, gaussian_posterior, quadrature_posterior_1d,
    run_moment_recursion, sg_variance_at_mode, ActivationFamily, Likelihood, Prior,
    PriorDiffusion, RidgeSeparable, StepSchedule,
};

use crate::config::{csv_schema, Resolved};
use crate::data;

/// One built-in assertion evaluated by the experiment.
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

/// Everything one experiment run produces.
pub struct ExperimentOutput {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summaries: Vec<String>,
    pub checks: Vec<Check>,
}

/// Dispatches on the resolved experiment name.
pub fn run(cfg: &Resolved) -> Result<ExperimentOutput> {
    match cfg.experiment {
        "gaussian-rate" => gaussian_rate(cfg),
        "dim-sweep" => dim_sweep(cfg),
        "lipschitz-1d" => lipschitz_1d(cfg),
        "sgld-batch" => sgld_batch(cfg),
        "oracle-vs-sampler" => oracle_vs_sampler(cfg),
        other => bail!("unknown experiment `{other}`"),
    }
}

/// Shortest round-trip decimal rendering (the `Display` contract for floats).
fn fmt(v: f64) -> String {
    format!("{v}")
}

fn columns(experiment: &str) -> Vec<&'static str> {
    csv_schema(experiment)
        .expect("every experiment has a CSV schema")
        .iter()
        .map(|(col, _)| *col)
        .collect()
}

fn synthetic_likelihood(
    cfg: &Resolved,
    salt: u64,
    d: usize,
    n: usize,
    r_z: f64,
) -> Result<Likelihood> {
    let seed = cfg.get_u64("seed")?;
    let mut rng = data::aux_rng(seed, salt, data::DATA_STREAM);
    let (z, targets) = data::synthetic_ridge(d, n, r_z, &mut rng)?;
    Ok(Likelihood::ridge_separable(z, ActivationFamily::HalfSquaredError, targets)?)
}

/// Builds the ridge model from the `dataset` key when set, from the
/// synthetic generator otherwise.
fn ridge_likelihood(cfg: &Resolved, salt: u64) -> Result<Likelihood> {
    let dataset = cfg.get_str("dataset")?;
    if dataset.is_empty() {
        synthetic_likelihood(
            cfg,
            salt,
            cfg.get_usize("d")?,
            cfg.get_usize("n")?,
            cfg.get_f64("r_z")?,
        )
    } else {
        let (z, targets) = data::load_dataset(Path::new(dataset))?;
        Ok(Likelihood::ridge_separable(z, ActivationFamily::HalfSquaredError, targets)?)
    }
}

fn schedule_from(cfg: &Resolved, m: f64, auto_eta0: f64) -> Result<StepSchedule> {
    let tau = cfg.get_f64("tau")?;
    let eta0 = cfg.get_f64_auto("eta_tilde_0", || auto_eta0)?;
    Ok(StepSchedule::new(tau, eta0, m)?)
}

/// The smooth-case guarantee constants for a half-squared-error ridge model.
fn smooth_case(likelihood: &Likelihood, model: &RidgeSeparable, m: f64, beta: f64) -> BoundCase {
    BoundCase::Smooth {
        l: model.per_datum_smoothness(),
        trace_h_sq: model.hessian_trace_sq(),
        u0: likelihood.value(&DVector::zeros(model.dim())) / beta,
        m,
    }
}

fn gaussian_rate(cfg: &Resolved) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let m = cfg.get_f64("m")?;
    let beta = cfg.get_f64("beta")?;
    let t_max = cfg.get_u64("T")?;
    let likelihood = ridge_likelihood(cfg, 0)?;
    let model = likelihood.ridge().expect("ridge-separable likelihood");
    let quad = model.quadratic_view().expect("half-squared-error ridge is quadratic");
    let schedule = schedule_from(cfg, m, 1.0 / (4.0 * model.per_datum_smoothness()))?;

    let report = run_moment_recursion(&quad, m, beta, &schedule, t_max, &[])?;
    let mut rows = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let idx = (t - 1) as usize;
        rows.push(vec![
            t.to_string(),
            fmt(schedule.step_size(t)),
            fmt(report.kl[idx]),
            fmt(report.weighted_kl[idx]),
        ]);
    }

    let case = smooth_case(&likelihood, model, m, beta);
    let mut violations = 0u64;
    let mut worst_ratio = 0.0f64;
    for t in 1..=t_max {
        let bound = kl_bound(&case, t)?;
        let value = report.weighted_kl[(t - 1) as usize];
        if value > bound {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(value / bound);
    }
    let mut checks = vec![Check::new(
        "weighted KL never exceeds the closed-form guarantee",
        violations == 0,
        format!("{violations} violation(s) over {t_max} horizons; max value/bound ratio {worst_ratio:.4}"),
    )];
    if t_max >= 4000 {
        let early = report.weighted_kl[249];
        let late = report.weighted_kl[3999];
        let limit = 0.25 * early * 1.25;
        checks.push(Check::new(
            "weighted KL quarters from horizon 250 to 4000 (25% slack)",
            late <= limit,
            format!("value {late} vs limit {limit}"),
        ));
    } else {
        checks.push(Check::new(
            "weighted KL quarters from horizon 250 to 4000 (25% slack)",
            false,
            format!("needs T >= 4000, configured T={t_max}"),
        ));
    }

    let summary = format!(
        "gaussian-rate: d={} n={} T={t_max} kl(T)={} weighted_kl(T)={} [{:.2}s]",
        model.dim(),
        model.n_data(),
        fmt(*report.kl.last().expect("T >= 1")),
        fmt(*report.weighted_kl.last().expect("T >= 1")),
        start.elapsed().as_secs_f64(),
    );
    Ok(ExperimentOutput { columns: columns("gaussian-rate"), rows, summaries: vec![summary], checks })
}

fn dim_sweep(cfg: &Resolved) -> Result<ExperimentOutput> {
    let m = cfg.get_f64("m")?;
    let beta = cfg.get_f64("beta")?;
    let epsilon = cfg.get_f64("epsilon")?;
    let dims = cfg.get_list_usize("d")?;
    let n = cfg.get_usize("n")?;
    let r_z = cfg.get_f64("r_z")?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut reached = Vec::new();
    let mut within_bound = true;
    for (i, &d) in dims.iter().enumerate() {
        let point_start = Instant::now();
        let likelihood = synthetic_likelihood(cfg, i as u64, d, n, r_z)?;
        let model = likelihood.ridge().expect("ridge-separable likelihood");
        let quad = model.quadratic_view().expect("half-squared-error ridge is quadratic");
        let schedule = schedule_from(cfg, m, 1.0 / (4.0 * model.per_datum_smoothness()))?;
        let case = smooth_case(&likelihood, model, m, beta);
        let bound = iteration_bound(&case, epsilon)?;
        let horizon = (bound.ceil() as u64).max(1);
        let report = run_moment_recursion(&quad, m, beta, &schedule, horizon, &[])?;
        let t_star = iterations_to_epsilon(&report.weighted_kl, epsilon)?;
        if let Some(t_star) = t_star {
            within_bound &= t_star as f64 <= bound;
        }
        rows.push(vec![d.to_string(), t_star.unwrap_or(0).to_string(), fmt(bound)]);
        summaries.push(format!(
            "dim-sweep d={d}: t_star={} bound_t={} [{:.2}s]",
            t_star.map_or_else(|| "never".to_string(), |t| t.to_string()),
            fmt(bound),
            point_start.elapsed().as_secs_f64(),
        ));
        reached.push(t_star);
    }

    let all_reached = reached.iter().all(Option::is_some);
    let mut checks = vec![Check::new(
        "every dimension reaches epsilon within its iteration bound",
        all_reached && within_bound,
        format!("t_star per dimension: {:?}", reached),
    )];
    if reached.len() >= 2 {
        let stars: Vec<u64> = reached.iter().flatten().copied().collect();
        if stars.len() == reached.len() {
            let lo = *stars.iter().min().expect("nonempty") as f64;
            let hi = *stars.iter().max().expect("nonempty") as f64;
            let factor = hi / lo;
            checks.push(Check::new(
                "iterations to epsilon vary by a factor below 2 across dimensions",
                factor < 2.0,
                format!("spread {}..{} (factor {factor:.3})", lo, hi),
            ));
        } else {
            checks.push(Check::new(
                "iterations to epsilon vary by a factor below 2 across dimensions",
                false,
                "some dimensions never reached epsilon".to_string(),
            ));
        }
    }
    Ok(ExperimentOutput { columns: columns("dim-sweep"), rows, summaries, checks })
}

fn lipschitz_1d(cfg: &Resolved) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let g_scale = cfg.get_f64("G")?;
    let center = cfg.get_f64("c")?;
    let m = cfg.get_f64("m")?;
    let beta = cfg.get_f64("beta")?;
    let t_max = cfg.get_u64("T")?;
    let horizons = cfg.get_list_u64("horizons")?;
    for &h in &horizons {
        if h == 0 || h > t_max {
            bail!("horizon {h} is outside 1..=T (T={t_max})");
        }
    }
    let chains = cfg.get_u64("chains")?;
    let grid_points = cfg.get_usize("grid_points")?;
    let half_width = cfg.get_f64("grid_half_width")?;
    let seed = cfg.get_u64("seed")?;

    let likelihood = Likelihood::scaled_abs(
        DVector::from_element(1, g_scale),
        DVector::from_element(1, center),
    )?;
    let prior = Prior::isotropic(m)?;
    let diffusion = PriorDiffusion::new(prior.clone(), beta)?;
    let schedule = schedule_from(cfg, m, 1.0 / m)?;

    let trajectories = run_chains(chains, seed, |_, mut noise, _| {
        run_lapd(&likelihood, &diffusion, &schedule, t_max, &Recorder::Full, &mut noise)
    })?;

    let mode = find_mode(&likelihood, &prior)?[0];
    let grid = quadrature_posterior_1d(
        |w| g_scale * (w - center).abs(),
        |w| 0.5 * m * w * w,
        beta,
        mode,
        half_width,
        grid_points,
    )?;

    let mut rows = Vec::with_capacity(horizons.len());
    let mut w2_values = Vec::with_capacity(horizons.len());
    for &h in &horizons {
        let count = (chains * h) as usize;
        let mut values = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for traj in &trajectories {
            for t in 1..=h {
                values.push(traj.sample(t)?[0]);
                weights.push(schedule.raw_weight(t));
            }
        }
        let w2 = empirical_w2_sq_1d(&values, Some(&weights), |p| grid.quantile(p))?;
        let kl_limit = kl_bound(&BoundCase::Lipschitz { g: g_scale, beta, m }, h)?;
        rows.push(vec![h.to_string(), fmt(w2), fmt(kl_limit), fmt(2.0 * beta / m * kl_limit)]);
        w2_values.push(w2);
    }

    let mut checks = Vec::new();
    if horizons.len() >= 2 {
        let first = w2_values[0];
        let last = *w2_values.last().expect("nonempty");
        let limit = (0.25 * first * 1.5).max(0.02);
        checks.push(Check::new(
            format!(
                "pooled W2² at horizon {} is below max(0.02, ¼·(value at {})·1.5)",
                horizons.last().expect("nonempty"),
                horizons[0]
            ),
            last <= limit,
            format!("value {last} vs limit {limit}"),
        ));
    }
    let summary = format!(
        "lipschitz-1d: chains={chains} T={t_max} w2_sq={} posterior mean={} var={} [{:.2}s]",
        w2_values.last().map(|v| fmt(*v)).unwrap_or_default(),
        fmt(grid.mean()),
        fmt(grid.variance()),
        start.elapsed().as_secs_f64(),
    );
    Ok(ExperimentOutput { columns: columns("lipschitz-1d"), rows, summaries: vec![summary], checks })
}

fn sgld_batch(cfg: &Resolved) -> Result<ExperimentOutput> {
    let likelihood = ridge_likelihood(cfg, 0)?;
    let model = likelihood.ridge().expect("ridge-separable likelihood");
    let (d, n) = (model.dim(), model.n_data());
    let m = cfg.get_f64("m")?;
    let beta = cfg.get_f64_auto("beta", || 1.0 / n as f64)?;
    let t_max = cfg.get_u64("T")?;
    let chains = cfg.get_u64("chains")?;
    let noise_draws = cfg.get_usize("noise_draws")?;
    let batches = cfg.get_list_usize("batches")?;
    let seed = cfg.get_u64("seed")?;

    let prior = Prior::isotropic(m)?;
    let diffusion = PriorDiffusion::new(prior.clone(), beta)?;
    let schedule = schedule_from(cfg, m, 1.0 / (4.0 * model.per_datum_smoothness()))?;
    let quad = model.quadratic_view().expect("half-squared-error ridge is quadratic");
    let posterior = gaussian_posterior(&quad, m, beta)?;
    let mu_star = posterior.mean().clone();
    let w_star = find_mode(&likelihood, &prior)?;
    let b_sq = sg_variance_at_mode(&likelihood, &w_star)?.b_sq;
    let full_grad = model.grad(&w_star);

    let mut rows = Vec::with_capacity(batches.len());
    let mut summaries = Vec::with_capacity(batches.len());
    let mut checks = Vec::new();
    for (i, &batch) in batches.iter().enumerate() {
        if batch == 0 {
            bail!("batch sizes must be at least 1");
        }
        let point_start = Instant::now();
        let per_chain = run_chains(chains, seed, |_, mut noise, mut batch_rng| {
            run_sgld(
                &likelihood,
                &diffusion,
                &schedule,
                t_max,
                batch,
                &Recorder::SummaryOnly,
                &mut noise,
                &mut batch_rng,
            )
            .map(|traj| traj.weighted_mean())
        })?;
        let (est, cov) = mean_and_covariance(&per_chain)?;
        let k = chains as f64;
        let mut max_dev_se = 0.0f64;
        for j in 0..d {
            let se = (cov[(j, j)].max(0.0) / k).sqrt();
            let dev = (est[j] - mu_star[j]).abs();
            let units = if se > 0.0 {
                dev / se
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            max_dev_se = max_dev_se.max(units);
        }

        let mut rng = data::aux_rng(seed, i as u64, data::NOISE_STREAM);
        let mut indices = vec![0usize; batch];
        let mut acc = 0.0;
        for _ in 0..noise_draws {
            for slot in indices.iter_mut() {
                *slot = rng.random_range(0..n);
            }
            let delta = model.minibatch_grad(&w_star, &indices) - &full_grad;
            acc += delta.norm_squared();
        }
        let measured = acc / noise_draws as f64;
        let predicted = b_sq / batch as f64;
        let ratio = measured / predicted;

        rows.push(vec![
            batch.to_string(),
            fmt(max_dev_se),
            fmt(measured),
            fmt(predicted),
            fmt(ratio),
        ]);
        checks.push(Check::new(
            format!("batch {batch}: weighted mean within 5 SE of the posterior mean"),
            max_dev_se <= 5.0,
            format!("worst coordinate deviation {max_dev_se:.3} SE"),
        ));
        checks.push(Check::new(
            format!("batch {batch}: gradient noise within 10% of b²/|S|"),
            (ratio - 1.0).abs() <= 0.10,
            format!("measured {measured} vs predicted {predicted} (ratio {ratio:.4})"),
        ));
        summaries.push(format!(
            "sgld-batch batch={batch}: chains={chains} T={t_max} max_dev={max_dev_se:.3}SE noise_ratio={ratio:.4} [{:.2}s]",
            point_start.elapsed().as_secs_f64(),
        ));
    }
    Ok(ExperimentOutput { columns: columns("sgld-batch"), rows, summaries, checks })
}

fn oracle_vs_sampler(cfg: &Resolved) -> Result<ExperimentOutput> {
    let likelihood = ridge_likelihood(cfg, 0)?;
    let model = likelihood.ridge().expect("ridge-separable likelihood");
    let d = model.dim();
    let m = cfg.get_f64("m")?;
    let beta = cfg.get_f64("beta")?;
    let t_max = cfg.get_u64("T")?;
    let chains = cfg.get_u64("chains")?;
    let replicates = cfg.get_usize("bootstrap_replicates")?;
    let seed = cfg.get_u64("seed")?;
    let mut checkpoints = cfg.get_list_u64("checkpoints")?;
    checkpoints.sort_unstable();
    checkpoints.dedup();
    for &t in &checkpoints {
        if t == 0 || t > t_max {
            bail!("checkpoint {t} is outside 1..=T (T={t_max})");
        }
    }
    if checkpoints.is_empty() {
        bail!("at least one checkpoint is required");
    }

    let quad = model.quadratic_view().expect("half-squared-error ridge is quadratic");
    let prior = Prior::isotropic(m)?;
    let diffusion = PriorDiffusion::new(prior, beta)?;
    let schedule = schedule_from(cfg, m, 1.0 / (4.0 * model.per_datum_smoothness()))?;

    let report = run_moment_recursion(&quad, m, beta, &schedule, t_max, &checkpoints)?;
    let recorder = Recorder::Checkpoints(checkpoints.clone());
    let per_chain: Vec<Vec<DVector<f64>>> = run_chains(chains, seed, |_, mut noise, _| {
        run_lapd(&likelihood, &diffusion, &schedule, t_max, &recorder, &mut noise)
            .map(|traj| traj.checkpoints().iter().map(|(_, w)| w.clone()).collect())
    })?;

    let mut boot_rng = data::aux_rng(seed, 0, data::BOOTSTRAP_STREAM);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut checks = Vec::new();
    for (ci, cp) in report.checkpoints.iter().enumerate() {
        let point_start = Instant::now();
        let states: Vec<DVector<f64>> = per_chain.iter().map(|s| s[ci].clone()).collect();
        let (emp_mean, emp_cov) = mean_and_covariance(&states)?;
        let boot_se = bootstrap_cov_se(&states, replicates, &mut boot_rng)?;
        let oracle_mean = cp.moments.mean();
        let oracle_cov = cp.moments.cov().to_dense();
        let k = states.len() as f64;

        let dev_units = |dev: f64, se: f64| {
            if se > 0.0 {
                dev / se
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let mut max_mean_dev = 0.0f64;
        for i in 0..d {
            let se = (emp_cov[(i, i)].max(0.0) / k).sqrt();
            max_mean_dev = max_mean_dev.max(dev_units((emp_mean[i] - oracle_mean[i]).abs(), se));
            rows.push(vec![
                cp.t.to_string(),
                "mean".to_string(),
                i.to_string(),
                i.to_string(),
                fmt(oracle_mean[i]),
                fmt(emp_mean[i]),
                fmt(se),
            ]);
        }
        let mut max_cov_dev = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let se = boot_se[(i, j)];
                max_cov_dev =
                    max_cov_dev.max(dev_units((emp_cov[(i, j)] - oracle_cov[(i, j)]).abs(), se));
                rows.push(vec![
                    cp.t.to_string(),
                    "cov".to_string(),
                    i.to_string(),
                    j.to_string(),
                    fmt(oracle_cov[(i, j)]),
                    fmt(emp_cov[(i, j)]),
                    fmt(se),
                ]);
            }
        }
        checks.push(Check::new(
            format!("t={}: empirical means within 5 SE of the recursion", cp.t),
            max_mean_dev <= 5.0,
            format!("worst deviation {max_mean_dev:.3} SE"),
        ));
        checks.push(Check::new(
            format!("t={}: empirical covariances within 5 bootstrap SE of the recursion", cp.t),
            max_cov_dev <= 5.0,
            format!("worst deviation {max_cov_dev:.3} SE"),
        ));
        summaries.push(format!(
            "oracle-vs-sampler t={}: chains={chains} mean_dev={max_mean_dev:.3}SE cov_dev={max_cov_dev:.3}SE [{:.2}s]",
            cp.t,
            point_start.elapsed().as_secs_f64(),
        ));
    }
    Ok(ExperimentOutput { columns: columns("oracle-vs-sampler"), rows, summaries, checks })
}
