//! Weighted trajectory estimators, empirical moments, and bound evaluation.
//!
//! The convergence guarantees are statements about the weighted average of
//! the recorded iterate laws. This module turns trajectories into estimates
//! under that weighted law, materializes weighted sample pools for distance
//! estimation, evaluates the closed-form bounds, and converts bound or oracle
//! KL series into iteration counts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, KahanAccumulator};
use crate::sampler::Trajectory;

/// Statistic evaluated at each recorded iterate by [`weighted_estimate`].
pub enum Statistic<'a> {
    /// The iterate itself (vector-valued mean).
    Mean,
    /// Coordinate-wise second moment `w_j²`.
    SecondMoment,
    /// A user scalar probe; the estimate is a length-1 vector.
    Probe(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl Statistic<'_> {
    fn output_dim(&self, dim: usize) -> usize {
        match self {
            Statistic::Mean | Statistic::SecondMoment => dim,
            Statistic::Probe(_) => 1,
        }
    }

    fn eval_into(&self, w: &[f64], out: &mut DVector<f64>) {
        match self {
            Statistic::Mean => {
                for (o, v) in out.iter_mut().zip(w.iter()) {
                    *o += v;
                }
            }
            Statistic::SecondMoment => {
                for (o, v) in out.iter_mut().zip(w.iter()) {
                    *o += v * v;
                }
            }
            Statistic::Probe(f) => out[0] += f(w),
        }
    }
}

fn validate_ensemble(ensemble: &[Trajectory]) -> Result<(usize, u64)> {
    let first = ensemble.first().ok_or(Error::EmptySamples)?;
    let (dim, steps) = (first.dim(), first.steps());
    for traj in ensemble {
        if traj.dim() != dim || traj.steps() != steps {
            return Err(Error::DimensionMismatch(
                "all chains must share dimension and horizon".into(),
            ));
        }
    }
    Ok((dim, steps))
}

fn validate_weights(weights: &[f64], steps: u64) -> Result<f64> {
    if weights.len() as u64 != steps {
        return Err(Error::WeightMismatch { weights: weights.len(), steps: steps as usize });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let total = kahan_sum(weights.iter().copied());
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidParameter("weights must have positive total".into()));
    }
    Ok(total)
}

/// Estimate of `statistic` under the weighted-average law of the recorded
/// iterates: `Σ_t weight_t · (ensemble average of statistic at w̃_t)`,
/// normalized by the weight total at the end. Scaling every weight by a
/// power of two leaves the result bit-identical; general rescalings agree to
/// rounding error.
pub fn weighted_estimate(
    ensemble: &[Trajectory],
    weights: &[f64],
    statistic: &Statistic<'_>,
) -> Result<DVector<f64>> {
    let (dim, steps) = validate_ensemble(ensemble)?;
    let total = validate_weights(weights, steps)?;
    let flats: Vec<&[f64]> =
        ensemble.iter().map(|t| t.samples_flat()).collect::<Result<_>>()?;
    let out_dim = statistic.output_dim(dim);
    let chains = ensemble.len() as f64;
    let mut numerator = DVector::zeros(out_dim);
    let mut slot = DVector::zeros(out_dim);
    for (t_idx, &w_t) in weights.iter().enumerate() {
        slot.fill(0.0);
        for flat in &flats {
            let row = &flat[t_idx * dim..(t_idx + 1) * dim];
            statistic.eval_into(row, &mut slot);
        }
        numerator.axpy(w_t / chains, &slot, 1.0);
    }
    Ok(numerator / total)
}

/// Materializes `pool` draws from the weighted-average law by resampling
/// (iteration, chain) pairs: the iteration with probability proportional to
/// its weight, the chain uniformly. Returns the draws flattened row-major
/// (`pool x dim`).
pub fn pooled_weighted_samples(
    ensemble: &[Trajectory],
    weights: &[f64],
    pool: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (dim, steps) = validate_ensemble(ensemble)?;
    let total = validate_weights(weights, steps)?;
    // Fail fast when any chain lacks full storage.
    for traj in ensemble {
        traj.samples_flat()?;
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = KahanAccumulator::default();
    for &w in weights {
        acc.add(w);
        cumulative.push(acc.value());
    }
    let mut out = Vec::with_capacity(pool * dim);
    for _ in 0..pool {
        let u = rng.random::<f64>() * total;
        let t_idx = cumulative.partition_point(|c| *c <= u).min(weights.len() - 1);
        let chain = rng.random_range(0..ensemble.len());
        let row = ensemble[chain].sample(t_idx as u64 + 1)?;
        out.extend_from_slice(row);
    }
    Ok(out)
}

/// Sample mean and unbiased sample covariance (denominator `K - 1`) of an
/// ensemble of state vectors.
pub fn mean_and_covariance(states: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let first = states.first().ok_or(Error::EmptySamples)?;
    let dim = first.len();
    if states.iter().any(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch("states differ in length".into()));
    }
    let k = states.len() as f64;
    let mut mean = DVector::zeros(dim);
    for s in states {
        mean += s;
    }
    mean /= k;
    let mut cov = DMatrix::zeros(dim, dim);
    if states.len() > 1 {
        let mut centered = DVector::zeros(dim);
        for s in states {
            centered.copy_from(s);
            centered -= &mean;
            cov.ger(1.0, &centered, &centered, 1.0);
        }
        cov /= k - 1.0;
    }
    Ok((mean, cov))
}

/// Entry-wise bootstrap standard errors of the sample covariance: resamples
/// the ensemble with replacement `replicates` times and reports the standard
/// deviation of each covariance entry across replicates.
pub fn bootstrap_cov_se(
    states: &[DVector<f64>],
    replicates: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let first = states.first().ok_or(Error::EmptySamples)?;
    let dim = first.len();
    if states.len() < 2 || replicates < 2 {
        return Err(Error::InvalidParameter(
            "bootstrap needs at least 2 states and 2 replicates".into(),
        ));
    }
    let mut sum: DMatrix<f64> = DMatrix::zeros(dim, dim);
    let mut sum_sq: DMatrix<f64> = DMatrix::zeros(dim, dim);
    let mut resampled: Vec<DVector<f64>> = Vec::with_capacity(states.len());
    for _ in 0..replicates {
        resampled.clear();
        for _ in 0..states.len() {
            resampled.push(states[rng.random_range(0..states.len())].clone());
        }
        let (_, cov) = mean_and_covariance(&resampled)?;
        for i in 0..dim {
            for j in 0..dim {
                sum[(i, j)] += cov[(i, j)];
                sum_sq[(i, j)] += cov[(i, j)] * cov[(i, j)];
            }
        }
    }
    let r = replicates as f64;
    let mut se = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mean = sum[(i, j)] / r;
            let var = (sum_sq[(i, j)] / r - mean * mean).max(0.0);
            se[(i, j)] = (var * r / (r - 1.0)).sqrt();
        }
    }
    Ok(se)
}

/// Which convergence guarantee to evaluate, with its constants.
#[derive(Clone, Copy, Debug)]
pub enum BoundCase {
    /// `G`-Lipschitz likelihood (covers the streaming minibatch variant with
    /// `G` the per-datum Lipschitz bound): weighted KL at horizon `T` is at
    /// most `5 G² / (β m T)`.
    Lipschitz { g: f64, beta: f64, m: f64 },
    /// `L`-smooth likelihood with curvature bound `H`: weighted KL at
    /// horizon `T` is at most
    /// `(64 L²/(m² T(T+1)) + 16/(T+1)) · (8 trace(H²)/m² + 2 U(0))`,
    /// with `U(0)` the potential at the origin divided by `β`.
    Smooth { l: f64, trace_h_sq: f64, u0: f64, m: f64 },
    /// Minibatch smooth case, order-level: iterations to `ε` scale as
    /// `constant · max(L_ℓ trace(H)/(m² ε), U(0)/ε, (n/|S|) b²/(m ε))`.
    /// The constant is a convention (default [`SGLD_BOUND_CONSTANT`]), not a
    /// derived value; only scaling across configs is meaningful.
    SgldSmooth {
        l_datum: f64,
        trace_h: f64,
        u0: f64,
        m: f64,
        n: usize,
        batch: usize,
        b_sq: f64,
        constant: f64,
    },
}

/// Default order-level constant for [`BoundCase::SgldSmooth`].
pub const SGLD_BOUND_CONSTANT: f64 = 64.0;

fn check_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// The guaranteed upper bound on the weighted KL at horizon `t`.
/// The minibatch smooth case has no closed KL form (order-level iterations
/// only) and is unsupported here.
pub fn kl_bound(case: &BoundCase, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let t = t as f64;
    match case {
        BoundCase::Lipschitz { g, beta, m } => {
            check_positive(&[("G", *g), ("beta", *beta), ("m", *m)])?;
            Ok(5.0 * g * g / (beta * m * t))
        }
        BoundCase::Smooth { l, trace_h_sq, u0, m } => {
            check_positive(&[("L", *l), ("m", *m)])?;
            if *trace_h_sq < 0.0 || *u0 < 0.0 {
                return Err(Error::InvalidParameter(
                    "trace(H²) and U(0) must be non-negative".into(),
                ));
            }
            let scale = 8.0 * trace_h_sq / (m * m) + 2.0 * u0;
            Ok((64.0 * l * l / (m * m * t * (t + 1.0)) + 16.0 / (t + 1.0)) * scale)
        }
        BoundCase::SgldSmooth { .. } => Err(Error::Unsupported(
            "the minibatch smooth guarantee is order-level; use iteration_bound".into(),
        )),
    }
}

/// Iterations guaranteed to reach weighted KL at most `epsilon`.
pub fn iteration_bound(case: &BoundCase, epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    match case {
        BoundCase::Lipschitz { g, beta, m } => {
            check_positive(&[("G", *g), ("beta", *beta), ("m", *m)])?;
            Ok(5.0 * g * g / (beta * m * epsilon))
        }
        BoundCase::Smooth { trace_h_sq, u0, m, .. } => {
            check_positive(&[("m", *m)])?;
            if *trace_h_sq < 0.0 || *u0 < 0.0 {
                return Err(Error::InvalidParameter(
                    "trace(H²) and U(0) must be non-negative".into(),
                ));
            }
            Ok(64.0 * (8.0 * trace_h_sq / (m * m * epsilon)).max(2.0 * u0 / epsilon))
        }
        BoundCase::SgldSmooth { l_datum, trace_h, u0, m, n, batch, b_sq, constant } => {
            check_positive(&[("L_datum", *l_datum), ("m", *m), ("constant", *constant)])?;
            if *trace_h < 0.0 || *u0 < 0.0 || *b_sq < 0.0 {
                return Err(Error::InvalidParameter(
                    "trace(H), U(0), and b² must be non-negative".into(),
                ));
            }
            if *n == 0 || *batch == 0 {
                return Err(Error::InvalidParameter(
                    "dataset and batch sizes must be at least 1".into(),
                ));
            }
            let gradient_term = l_datum * trace_h / (m * m * epsilon);
            let potential_term = u0 / epsilon;
            let noise_term = (*n as f64 / *batch as f64) * b_sq / (m * epsilon);
            Ok(constant * gradient_term.max(potential_term).max(noise_term))
        }
    }
}

/// Smallest 1-based horizon `T` whose entry satisfies `series[T-1] <= epsilon`,
/// or `None` when the series never reaches it.
pub fn iterations_to_epsilon(series: &[f64], epsilon: f64) -> Result<Option<u64>> {
    if series.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be finite, got {epsilon}")));
    }
    Ok(series
        .iter()
        .position(|v| *v <= epsilon)
        .map(|idx| idx as u64 + 1))
}
