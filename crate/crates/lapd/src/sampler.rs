//! Chain execution for the full-gradient and minibatch algorithms.
//!
//! Each iteration first diffuses the state along the prior flow for the
//! scheduled duration and then takes a gradient step on the likelihood; the
//! recorded iterates are the post-diffusion states `w̃_t`, which are what the
//! convergence guarantees are about, and the run's returned sample is `w̃_T`.
//! Chains are deterministic given (seed, config): each one owns two fixed
//! ChaCha streams, one for diffusion noise and one for minibatch indices, so
//! the minibatch variant consumes exactly the same noise sequence as the
//! full-gradient one.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Likelihood, Prior};
use crate::prior_diffusion::PriorDiffusion;
use crate::schedule::StepSchedule;

/// Hard cap on the number of scalar entries the full-storage recorder may
/// hold; larger runs must use checkpoint or summary recording.
pub const MAX_STORED_ENTRIES: u64 = 10_000_000;

/// What a chain records while running.
#[derive(Clone, Debug)]
pub enum Recorder {
    /// Every post-diffusion iterate, flattened; requires
    /// `dim * steps <= MAX_STORED_ENTRIES`.
    Full,
    /// Post-diffusion iterates at the listed iterations only (1-based).
    Checkpoints(Vec<u64>),
    /// No stored samples; only the streaming weighted-average summary.
    SummaryOnly,
}

/// Durations used at one iteration: the diffusion time and the gradient step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMeta {
    pub eta: f64,
    pub eta_tilde: f64,
}

#[derive(Clone, Debug)]
enum SampleStore {
    Full(Vec<f64>),
    Checkpoints(Vec<(u64, DVector<f64>)>),
    None,
}

/// Output of one chain: recorded iterates, per-step durations, a streaming
/// weighted-average accumulator, and the returned sample `w̃_T`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    beta: f64,
    step_meta: Vec<StepMeta>,
    store: SampleStore,
    weighted_sum: DVector<f64>,
    weight_total: f64,
    final_sample: DVector<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of iterations run (`T`).
    pub fn steps(&self) -> u64 {
        self.step_meta.len() as u64
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn step_meta(&self) -> &[StepMeta] {
        &self.step_meta
    }

    /// The algorithm's returned sample, the post-diffusion iterate `w̃_T`.
    pub fn final_sample(&self) -> &DVector<f64> {
        &self.final_sample
    }

    /// The recorded iterate `w̃_t` (1-based). Errors when `t` was not
    /// recorded or the trajectory is streaming-only.
    pub fn sample(&self, t: u64) -> Result<&[f64]> {
        if t < 1 || t > self.steps() {
            return Err(Error::InvalidParameter(format!(
                "iteration {t} outside the run horizon 1..={}",
                self.steps()
            )));
        }
        match &self.store {
            SampleStore::Full(flat) => {
                let start = (t - 1) as usize * self.dim;
                Ok(&flat[start..start + self.dim])
            }
            SampleStore::Checkpoints(list) => list
                .binary_search_by_key(&t, |entry| entry.0)
                .map(|i| list[i].1.as_slice())
                .map_err(|_| Error::EmptySamples),
            SampleStore::None => Err(Error::EmptySamples),
        }
    }

    /// All stored iterates as one flat row-major block (`steps x dim`), when
    /// full recording was requested.
    pub fn samples_flat(&self) -> Result<&[f64]> {
        match &self.store {
            SampleStore::Full(flat) => Ok(flat),
            _ => Err(Error::EmptySamples),
        }
    }

    /// Recorded checkpoints in increasing iteration order.
    pub fn checkpoints(&self) -> &[(u64, DVector<f64>)] {
        match &self.store {
            SampleStore::Checkpoints(list) => list,
            _ => &[],
        }
    }

    /// Streaming weighted average of the recorded iterates under the
    /// schedule's trajectory weights (available for every recorder).
    pub fn weighted_mean(&self) -> DVector<f64> {
        &self.weighted_sum / self.weight_total
    }

    /// Numerator and denominator of [`Trajectory::weighted_mean`], for
    /// associative merging across chains.
    pub fn weighted_sum_parts(&self) -> (&DVector<f64>, f64) {
        (&self.weighted_sum, self.weight_total)
    }
}

/// Draws `w₀ ~ N(0, (beta/m) I)`, the exact stationary law of the prior flow.
/// Only purely Gaussian priors support exact initialization.
pub fn init_from_prior<R: Rng + ?Sized>(
    prior: &Prior,
    beta: f64,
    dim: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {beta}")));
    }
    if !prior.accepts_dim(dim) {
        return Err(Error::DimensionMismatch(format!(
            "prior does not accept dimension {dim}"
        )));
    }
    if !prior.is_purely_gaussian() {
        return Err(Error::Unsupported(
            "exact initialization is only available for Gaussian priors".into(),
        ));
    }
    let sd = (beta / prior.m()).sqrt();
    Ok(DVector::from_fn(dim, |_, _| sd * rng.sample::<f64, _>(rand_distr::StandardNormal)))
}

/// Runs one full-gradient chain for `t_max` iterations.
///
/// Starts from an exact prior draw when the prior is purely Gaussian and from
/// the origin otherwise (no exact sampler exists for the non-Gaussian case).
pub fn run_lapd(
    likelihood: &Likelihood,
    diffusion: &PriorDiffusion,
    schedule: &StepSchedule,
    t_max: u64,
    recorder: &Recorder,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    run_chain(likelihood, diffusion, schedule, t_max, recorder, None, rng)
}

/// Runs one minibatch chain: the gradient step averages per-datum gradients
/// over `batch_size` indices drawn i.i.d. with replacement from the dataset
/// (`batch_rng` is a stream separate from the diffusion noise, so the noise
/// sequence matches [`run_lapd`] exactly for equal seeds).
pub fn run_sgld(
    likelihood: &Likelihood,
    diffusion: &PriorDiffusion,
    schedule: &StepSchedule,
    t_max: u64,
    batch_size: usize,
    recorder: &Recorder,
    rng: &mut ChaCha8Rng,
    batch_rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    if likelihood.ridge().is_none() {
        return Err(Error::MissingDataset);
    }
    run_chain(
        likelihood,
        diffusion,
        schedule,
        t_max,
        recorder,
        Some((batch_size, batch_rng)),
        rng,
    )
}

fn run_chain(
    likelihood: &Likelihood,
    diffusion: &PriorDiffusion,
    schedule: &StepSchedule,
    t_max: u64,
    recorder: &Recorder,
    mut batch: Option<(usize, &mut ChaCha8Rng)>,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("the horizon must be at least 1".into()));
    }
    let dim = likelihood.dim();
    if !diffusion.prior().accepts_dim(dim) {
        return Err(Error::DimensionMismatch(format!(
            "likelihood dimension {dim} does not match the prior"
        )));
    }
    if schedule.m() != diffusion.prior().m() {
        return Err(Error::InvalidSchedule(format!(
            "schedule curvature {} does not match prior curvature {}",
            schedule.m(),
            diffusion.prior().m()
        )));
    }
    let wanted: Vec<u64> = match recorder {
        Recorder::Checkpoints(list) => {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.iter().any(|&t| t < 1 || t > t_max) {
                return Err(Error::InvalidParameter(format!(
                    "checkpoints must lie in 1..={t_max}"
                )));
            }
            sorted
        }
        _ => Vec::new(),
    };
    let mut store = match recorder {
        Recorder::Full => {
            let entries = dim as u64 * t_max;
            if entries > MAX_STORED_ENTRIES {
                return Err(Error::InvalidParameter(format!(
                    "full recording of {entries} entries exceeds the cap of \
                     {MAX_STORED_ENTRIES}; use checkpoint or summary recording"
                )));
            }
            SampleStore::Full(Vec::with_capacity(entries as usize))
        }
        Recorder::Checkpoints(_) => SampleStore::Checkpoints(Vec::with_capacity(wanted.len())),
        Recorder::SummaryOnly => SampleStore::None,
    };

    let mut w = if diffusion.prior().is_purely_gaussian() {
        init_from_prior(diffusion.prior(), diffusion.beta(), dim, rng)?
    } else {
        DVector::zeros(dim)
    };

    let mut step_meta = Vec::with_capacity(t_max as usize);
    let mut weighted_sum = DVector::zeros(dim);
    let mut final_sample = DVector::zeros(dim);
    let mut batch_indices: Vec<usize> = match &batch {
        Some((size, _)) => vec![0; *size],
        None => Vec::new(),
    };

    for t in 1..=t_max {
        let eta = schedule.diffusion_time(t);
        let eta_tilde = schedule.step_size(t);
        diffusion.advance(&mut w, eta, rng)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t as usize });
        }
        match &mut store {
            SampleStore::Full(flat) => flat.extend_from_slice(w.as_slice()),
            SampleStore::Checkpoints(list) => {
                if wanted.binary_search(&t).is_ok() {
                    list.push((t, w.clone()));
                }
            }
            SampleStore::None => {}
        }
        weighted_sum.axpy(schedule.raw_weight(t), &w, 1.0);
        step_meta.push(StepMeta { eta, eta_tilde });
        if t == t_max {
            final_sample.copy_from(&w);
        }

        let grad = match &mut batch {
            Some((size, batch_rng)) => {
                // `ridge()` presence was checked by run_sgld.
                let ridge = likelihood.ridge().expect("minibatch run requires a dataset");
                let n = ridge.n_data();
                for slot in batch_indices.iter_mut().take(*size) {
                    *slot = batch_rng.random_range(0..n);
                }
                ridge.minibatch_grad(&w, &batch_indices)
            }
            None => likelihood.grad(&w),
        };
        w.axpy(-eta_tilde, &grad, 1.0);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t as usize });
        }
    }

    Ok(Trajectory {
        dim,
        beta: diffusion.beta(),
        step_meta,
        store,
        weighted_sum,
        weight_total: schedule.raw_weight_total(t_max as usize),
        final_sample,
    })
}

/// The two RNG streams of chain `chain_index`: (diffusion noise, minibatch
/// indices). Seeds derive from `seed_base + chain_index` through the
/// generator's splittable seeding, and the two streams never overlap.
pub fn chain_rngs(seed_base: u64, chain_index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let seed = seed_base.wrapping_add(chain_index);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(0);
    let mut batch = ChaCha8Rng::seed_from_u64(seed);
    batch.set_stream(1);
    (noise, batch)
}

/// Runs `chains` independent replicas in parallel (within the ambient rayon
/// pool) and returns their results in chain order. The closure receives
/// `(chain_index, noise_rng, batch_rng)`.
pub fn run_chains<R, F>(chains: u64, seed_base: u64, run: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64, ChaCha8Rng, ChaCha8Rng) -> Result<R> + Sync,
{
    let count = usize::try_from(chains)
        .map_err(|_| Error::InvalidParameter(format!("chain count {chains} is out of range")))?;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let (noise, batch) = chain_rngs(seed_base, k as u64);
            run(k as u64, noise, batch)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActivationFamily, QuadraticForm};
    use crate::linalg::SymmetricMatrix;
    use nalgebra::DMatrix;

    fn quad_likelihood(dim: usize) -> Likelihood {
        let a = SymmetricMatrix::scaled_identity(dim, 1.0);
        let b = DVector::from_element(dim, 0.5);
        Likelihood::quadratic(QuadraticForm::new(a, b, 0.0).unwrap()).unwrap()
    }

    fn gaussian_diffusion(m: f64, beta: f64) -> PriorDiffusion {
        PriorDiffusion::new(Prior::isotropic(m).unwrap(), beta).unwrap()
    }

    #[test]
    fn determinism_is_bitwise() {
        let likelihood = quad_likelihood(3);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let run = || {
            let (mut noise, _) = chain_rngs(7, 0);
            run_lapd(&likelihood, &diffusion, &schedule, 50, &Recorder::Full, &mut noise).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.samples_flat().unwrap(), b.samples_flat().unwrap());
        assert_eq!(a.final_sample(), b.final_sample());
        assert_eq!(a.step_meta(), b.step_meta());
    }

    #[test]
    fn zero_likelihood_sgld_matches_lapd_bitwise() {
        // A dataset of all-zero features has identically zero per-datum
        // gradients, so the minibatch run must reproduce the full-gradient
        // run on the zero likelihood exactly: the batch draws come from a
        // separate stream and never disturb the noise sequence.
        let dim = 2;
        let zero = Likelihood::zero(dim);
        let ridge = Likelihood::ridge_separable(
            DMatrix::zeros(dim, 4),
            ActivationFamily::HalfSquaredError,
            vec![0.0; 4],
        )
        .unwrap();
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise_a, _) = chain_rngs(11, 3);
        let lapd =
            run_lapd(&zero, &diffusion, &schedule, 40, &Recorder::Full, &mut noise_a).unwrap();
        let (mut noise_b, mut batch_b) = chain_rngs(11, 3);
        let sgld = run_sgld(
            &ridge,
            &diffusion,
            &schedule,
            40,
            3,
            &Recorder::Full,
            &mut noise_b,
            &mut batch_b,
        )
        .unwrap();
        assert_eq!(lapd.samples_flat().unwrap(), sgld.samples_flat().unwrap());
        assert_eq!(lapd.final_sample(), sgld.final_sample());
    }

    #[test]
    fn single_datum_sgld_reduces_to_lapd() {
        let z = DMatrix::from_column_slice(2, 1, &[0.6, -0.8]);
        let ridge = Likelihood::ridge_separable(
            z,
            ActivationFamily::HalfSquaredError,
            vec![1.0],
        )
        .unwrap();
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise_a, _) = chain_rngs(5, 0);
        let lapd =
            run_lapd(&ridge, &diffusion, &schedule, 60, &Recorder::Full, &mut noise_a).unwrap();
        // Batch size 1: the single-term batch mean is bitwise the full
        // gradient of a one-datum dataset.
        let (mut noise_b, mut batch_b) = chain_rngs(5, 0);
        let sgld = run_sgld(
            &ridge,
            &diffusion,
            &schedule,
            60,
            1,
            &Recorder::Full,
            &mut noise_b,
            &mut batch_b,
        )
        .unwrap();
        assert_eq!(lapd.samples_flat().unwrap(), sgld.samples_flat().unwrap());
        // Larger batches average identical terms; equality up to rounding.
        let (mut noise_c, mut batch_c) = chain_rngs(5, 0);
        let sgld3 = run_sgld(
            &ridge,
            &diffusion,
            &schedule,
            60,
            3,
            &Recorder::Full,
            &mut noise_c,
            &mut batch_c,
        )
        .unwrap();
        for (a, b) in lapd
            .samples_flat()
            .unwrap()
            .iter()
            .zip(sgld3.samples_flat().unwrap().iter())
        {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_dataset_full_batch_matches_lapd() {
        // n identical data points, batch n: the minibatch mean equals the
        // full gradient up to summation order.
        let n = 4;
        let z = DMatrix::from_fn(2, n, |r, _| if r == 0 { 0.6 } else { -0.8 });
        let ridge = Likelihood::ridge_separable(
            z,
            ActivationFamily::HalfSquaredError,
            vec![1.0; n],
        )
        .unwrap();
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise_a, _) = chain_rngs(9, 2);
        let lapd =
            run_lapd(&ridge, &diffusion, &schedule, 50, &Recorder::Full, &mut noise_a).unwrap();
        let (mut noise_b, mut batch_b) = chain_rngs(9, 2);
        let sgld = run_sgld(
            &ridge,
            &diffusion,
            &schedule,
            50,
            n,
            &Recorder::Full,
            &mut noise_b,
            &mut batch_b,
        )
        .unwrap();
        for (a, b) in lapd
            .samples_flat()
            .unwrap()
            .iter()
            .zip(sgld.samples_flat().unwrap().iter())
        {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn final_sample_is_the_post_diffusion_iterate() {
        let likelihood = quad_likelihood(2);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise, _) = chain_rngs(13, 0);
        let traj =
            run_lapd(&likelihood, &diffusion, &schedule, 25, &Recorder::Full, &mut noise).unwrap();
        assert_eq!(traj.final_sample().as_slice(), traj.sample(25).unwrap());
        // The likelihood gradient is nonzero a.s., so the post-gradient state
        // would differ; equality certifies the returned sample is w̃_T.
        let w_tilde = DVector::from_column_slice(traj.sample(25).unwrap());
        let grad = likelihood.grad(&w_tilde);
        assert!(grad.norm() > 0.0);
    }

    #[test]
    fn single_step_run_has_length_one() {
        let likelihood = quad_likelihood(2);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise, _) = chain_rngs(17, 0);
        let traj =
            run_lapd(&likelihood, &diffusion, &schedule, 1, &Recorder::Full, &mut noise).unwrap();
        assert_eq!(traj.steps(), 1);
        assert_eq!(traj.step_meta().len(), 1);
        let meta = traj.step_meta()[0];
        assert_eq!(meta.eta_tilde, schedule.step_size(1));
        assert_eq!(meta.eta, schedule.diffusion_time(1));
        assert_eq!(traj.sample(1).unwrap(), traj.final_sample().as_slice());
    }

    #[test]
    fn checkpoint_recorder_matches_full_storage() {
        let likelihood = quad_likelihood(3);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise_a, _) = chain_rngs(19, 1);
        let full =
            run_lapd(&likelihood, &diffusion, &schedule, 30, &Recorder::Full, &mut noise_a)
                .unwrap();
        let (mut noise_b, _) = chain_rngs(19, 1);
        let partial = run_lapd(
            &likelihood,
            &diffusion,
            &schedule,
            30,
            &Recorder::Checkpoints(vec![10, 1, 30, 10]),
            &mut noise_b,
        )
        .unwrap();
        for &t in &[1u64, 10, 30] {
            assert_eq!(full.sample(t).unwrap(), partial.sample(t).unwrap(), "t = {t}");
        }
        assert!(matches!(partial.sample(2), Err(Error::EmptySamples)));
        assert_eq!(partial.checkpoints().len(), 3);
    }

    #[test]
    fn summary_recorder_matches_recomputed_weighted_mean() {
        let likelihood = quad_likelihood(2);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let t_max = 40;
        let (mut noise_a, _) = chain_rngs(23, 0);
        let summary = run_lapd(
            &likelihood,
            &diffusion,
            &schedule,
            t_max,
            &Recorder::SummaryOnly,
            &mut noise_a,
        )
        .unwrap();
        assert!(matches!(summary.samples_flat(), Err(Error::EmptySamples)));
        let (mut noise_b, _) = chain_rngs(23, 0);
        let full = run_lapd(
            &likelihood,
            &diffusion,
            &schedule,
            t_max,
            &Recorder::Full,
            &mut noise_b,
        )
        .unwrap();
        let weights = schedule.weights(t_max as usize).unwrap();
        let mut manual = DVector::zeros(2);
        for t in 1..=t_max {
            let w = DVector::from_column_slice(full.sample(t).unwrap());
            manual.axpy(weights[(t - 1) as usize], &w, 1.0);
        }
        let mean = summary.weighted_mean();
        assert!((&mean - &manual).norm() <= 1e-13 * manual.norm().max(1.0));
        assert_eq!(mean, full.weighted_mean());
    }

    #[test]
    fn init_from_prior_has_the_right_moments() {
        let prior = Prior::isotropic(4.0).unwrap();
        let (mut rng, _) = chain_rngs(29, 0);
        let n = 100_000;
        let dim = 3;
        let mut sums = DVector::zeros(dim);
        let mut cross = DMatrix::zeros(dim, dim);
        for _ in 0..n {
            let w = init_from_prior(&prior, 1.0, dim, &mut rng).unwrap();
            sums += &w;
            cross.ger(1.0, &w, &w, 1.0);
        }
        let mean = sums / n as f64;
        // Variance beta/m = 0.25 per coordinate, covariance diagonal.
        for j in 0..dim {
            assert!(mean[j].abs() < 5.0 * (0.25f64 / n as f64).sqrt(), "mean {}", mean[j]);
            let var = cross[(j, j)] / n as f64 - mean[j] * mean[j];
            assert!((var - 0.25).abs() < 0.02 * 0.25, "var {var}");
        }
        let cov_01 = cross[(0, 1)] / n as f64 - mean[0] * mean[1];
        assert!(cov_01.abs() < 5.0 * 0.25 / (n as f64).sqrt(), "cov {cov_01}");
        // beta = 1/n scaling.
        let prior_unit = Prior::isotropic(1.0).unwrap();
        let mut acc = 0.0;
        for _ in 0..n {
            let w = init_from_prior(&prior_unit, 0.01, 1, &mut rng).unwrap();
            acc += w[0] * w[0];
        }
        let var = acc / n as f64;
        assert!((var - 0.01).abs() < 0.02 * 0.01, "var {var}");
    }

    #[test]
    fn init_from_prior_rejects_non_gaussian() {
        let prior = Prior::separable(1.0, DVector::from_vec(vec![0.5, 0.0])).unwrap();
        let (mut rng, _) = chain_rngs(31, 0);
        assert!(matches!(
            init_from_prior(&prior, 1.0, 2, &mut rng),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            init_from_prior(&prior, 1.0, 3, &mut rng),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn storage_cap_is_enforced_before_running() {
        let likelihood = quad_likelihood(2);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise, _) = chain_rngs(37, 0);
        let err = run_lapd(
            &likelihood,
            &diffusion,
            &schedule,
            MAX_STORED_ENTRIES,
            &Recorder::Full,
            &mut noise,
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn config_mismatches_are_rejected() {
        let likelihood = quad_likelihood(2);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(2.0).unwrap();
        let (mut noise, mut batch) = chain_rngs(41, 0);
        assert!(matches!(
            run_lapd(&likelihood, &diffusion, &schedule, 5, &Recorder::Full, &mut noise),
            Err(Error::InvalidSchedule(_))
        ));
        let ok_schedule = StepSchedule::lipschitz(1.0).unwrap();
        assert!(matches!(
            run_lapd(&likelihood, &diffusion, &ok_schedule, 0, &Recorder::Full, &mut noise),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            run_lapd(
                &likelihood,
                &diffusion,
                &ok_schedule,
                5,
                &Recorder::Checkpoints(vec![6]),
                &mut noise
            ),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            run_sgld(
                &likelihood,
                &diffusion,
                &ok_schedule,
                5,
                0,
                &Recorder::Full,
                &mut noise,
                &mut batch
            ),
            Err(Error::InvalidParameter(_))
        ));
        // Quadratic likelihood has no per-datum oracle.
        assert!(matches!(
            run_sgld(
                &likelihood,
                &diffusion,
                &ok_schedule,
                5,
                1,
                &Recorder::Full,
                &mut noise,
                &mut batch
            ),
            Err(Error::MissingDataset)
        ));
    }

    #[test]
    fn ensemble_is_ordered_and_reproducible() {
        let likelihood = quad_likelihood(2);
        let diffusion = gaussian_diffusion(1.0, 1.0);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let run_all = || {
            run_chains(8, 101, |_, mut noise, _| {
                run_lapd(&likelihood, &diffusion, &schedule, 10, &Recorder::SummaryOnly, &mut noise)
                    .map(|traj| traj.final_sample().clone())
            })
            .unwrap()
        };
        let a = run_all();
        let b = run_all();
        assert_eq!(a, b);
        // Distinct chains see distinct noise.
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn elastic_net_prior_runs_numerically_from_origin() {
        let prior = Prior::separable(1.0, DVector::from_vec(vec![0.3, 0.3])).unwrap();
        let diffusion = PriorDiffusion::new(prior, 1.0).unwrap();
        let likelihood = quad_likelihood(2);
        let schedule = StepSchedule::lipschitz(1.0).unwrap();
        let (mut noise, _) = chain_rngs(43, 0);
        let traj =
            run_lapd(&likelihood, &diffusion, &schedule, 20, &Recorder::Full, &mut noise).unwrap();
        assert_eq!(traj.steps(), 20);
        assert!(traj.final_sample().iter().all(|v| v.is_finite()));
    }
}
