//! Exact and quadrature-based ground truth.
//!
//! For quadratic likelihoods with Gaussian priors every law the sampler
//! produces is Gaussian, so both algorithm steps become affine maps on
//! (mean, covariance). [`run_moment_recursion`] propagates these moments
//! exactly (O(d) per iteration in the curvature eigenbasis) and reports the
//! per-iterate KL to the true posterior together with the weighted trajectory
//! KL that the convergence statements bound. One-dimensional non-smooth
//! targets get a brute-force quadrature posterior with CDF and quantile
//! oracles, against which pooled sampler output is scored by an empirical
//! 1-D Wasserstein-2 estimate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, KahanAccumulator, SymmetricMatrix};
use crate::model::QuadraticForm;
use crate::prior_diffusion::ou_coefficients;
use crate::schedule::StepSchedule;

/// Largest dimension accepted by the dense Bures–Wasserstein path.
pub const W2_DENSE_DIM_CAP: usize = 512;

/// Relative eigenvalue floor used inside matrix square roots.
const SQRT_EIG_FLOOR: f64 = 1e-12;

/// Minimum number of quadrature grid points.
const GRID_MIN_POINTS: usize = 4;

/// Mean and covariance of a Gaussian law. Covariances must be symmetric
/// positive semidefinite; operations that need strict positive definiteness
/// (KL) report singularity themselves.
#[derive(Clone, Debug)]
pub struct GaussianMoments {
    mean: DVector<f64>,
    cov: SymmetricMatrix,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, cov: SymmetricMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mean has non-finite entries".into()));
        }
        let (eigvals, _) = cov.eigen_decompose();
        let scale = eigvals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if eigvals.iter().any(|v| *v < -1e-12 * scale) {
            return Err(Error::InvalidParameter(
                "covariance has a negative eigenvalue".into(),
            ));
        }
        Ok(GaussianMoments { mean, cov })
    }

    /// `N(0, var I)` in the given dimension.
    pub fn isotropic(dim: usize, var: f64) -> Result<Self> {
        if !(var.is_finite() && var >= 0.0) {
            return Err(Error::InvalidParameter(format!("variance must be >= 0, got {var}")));
        }
        GaussianMoments::new(DVector::zeros(dim), SymmetricMatrix::scaled_identity(dim, var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymmetricMatrix {
        &self.cov
    }
}

/// The true posterior `p* = N((A+mI)^{-1} b, beta (A+mI)^{-1})` of a
/// quadratic likelihood under the isotropic Gaussian prior.
pub fn gaussian_posterior(quad: &QuadraticForm, m: f64, beta: f64) -> Result<GaussianMoments> {
    if !(m.is_finite() && m > 0.0) || !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "posterior needs m > 0 and beta > 0, got m = {m}, beta = {beta}"
        )));
    }
    match quad.curvature() {
        SymmetricMatrix::Diagonal(d) => {
            let mean = DVector::from_iterator(
                d.len(),
                quad.linear().iter().zip(d.iter()).map(|(b, lam)| b / (lam + m)),
            );
            let var = DVector::from_iterator(d.len(), d.iter().map(|lam| beta / (lam + m)));
            GaussianMoments::new(mean, SymmetricMatrix::Diagonal(var))
        }
        SymmetricMatrix::Dense(a) => {
            let mut shifted = a.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += m;
            }
            let chol = nalgebra::Cholesky::new(shifted).ok_or(Error::SingularCovariance)?;
            let mean = chol.solve(quad.linear());
            let mut cov = chol.inverse() * beta;
            for i in 0..cov.nrows() {
                for j in (i + 1)..cov.ncols() {
                    let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                    cov[(i, j)] = s;
                    cov[(j, i)] = s;
                }
            }
            GaussianMoments::new(mean, SymmetricMatrix::from_dense(cov)?)
        }
    }
}

/// Exact moment map of the prior-diffusion step of duration `eta`:
/// `mean <- e^{-m eta} mean`, `cov <- e^{-2 m eta} cov + ((1-e^{-2 m eta}) beta/m) I`.
pub fn ou_moment_step(gm: &GaussianMoments, m: f64, beta: f64, eta: f64) -> Result<GaussianMoments> {
    let co = ou_coefficients(m, beta, eta)?;
    let decay_sq = co.decay * co.decay;
    let mean = &gm.mean * co.decay;
    let cov = match &gm.cov {
        SymmetricMatrix::Diagonal(d) => {
            SymmetricMatrix::Diagonal(d.map(|v| decay_sq * v + co.variance))
        }
        SymmetricMatrix::Dense(c) => {
            let mut out = c * decay_sq;
            for i in 0..out.nrows() {
                out[(i, i)] += co.variance;
            }
            SymmetricMatrix::Dense(out)
        }
    };
    GaussianMoments::new(mean, cov)
}

/// Exact moment map of the gradient step `w <- w - eta_tilde (A w - b)`:
/// with `M = I - eta_tilde A`, `mean <- M mean + eta_tilde b`, `cov <- M cov M`.
pub fn grad_moment_step(
    gm: &GaussianMoments,
    a: &SymmetricMatrix,
    b: &DVector<f64>,
    eta_tilde: f64,
) -> Result<GaussianMoments> {
    if a.dim() != gm.dim() || b.len() != gm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "gradient map of dimension {} applied to moments of dimension {}",
            a.dim(),
            gm.dim()
        )));
    }
    if !eta_tilde.is_finite() || eta_tilde < 0.0 {
        return Err(Error::InvalidParameter(format!("step size must be >= 0, got {eta_tilde}")));
    }
    match (a, &gm.cov) {
        (SymmetricMatrix::Diagonal(lam), SymmetricMatrix::Diagonal(v)) => {
            let mean = DVector::from_iterator(
                gm.dim(),
                gm.mean
                    .iter()
                    .zip(lam.iter())
                    .zip(b.iter())
                    .map(|((mu, l), bi)| (1.0 - eta_tilde * l) * mu + eta_tilde * bi),
            );
            let cov = DVector::from_iterator(
                gm.dim(),
                v.iter().zip(lam.iter()).map(|(vi, l)| {
                    let g = 1.0 - eta_tilde * l;
                    g * g * vi
                }),
            );
            GaussianMoments::new(mean, SymmetricMatrix::Diagonal(cov))
        }
        _ => {
            let a_dense = a.to_dense();
            let mut map = DMatrix::identity(gm.dim(), gm.dim());
            map -= a_dense * eta_tilde;
            let mean = &map * &gm.mean + b * eta_tilde;
            let mut cov = &map * gm.cov.to_dense() * map.transpose();
            for i in 0..cov.nrows() {
                for j in (i + 1)..cov.ncols() {
                    let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                    cov[(i, j)] = s;
                    cov[(j, i)] = s;
                }
            }
            GaussianMoments::new(mean, SymmetricMatrix::from_dense(cov)?)
        }
    }
}

/// Closed-form `KL(p || q)` between Gaussians. The diagonal fast path and the
/// dense path agree to 1e-12.
pub fn gaussian_kl(p: &GaussianMoments, q: &GaussianMoments) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "KL between dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    match (&p.cov, &q.cov) {
        (SymmetricMatrix::Diagonal(vp), SymmetricMatrix::Diagonal(vq)) => {
            if vp.iter().any(|v| *v <= 0.0) || vq.iter().any(|v| *v <= 0.0) {
                return Err(Error::SingularCovariance);
            }
            let terms = (0..p.dim()).map(|j| {
                let dm = q.mean[j] - p.mean[j];
                0.5 * (vp[j] / vq[j] + dm * dm / vq[j] - 1.0 + (vq[j] / vp[j]).ln())
            });
            Ok(kahan_sum(terms))
        }
        _ => {
            let d = p.dim();
            let sp = p.cov.to_dense();
            let sq = q.cov.to_dense();
            let chol_q = nalgebra::Cholesky::new(sq).ok_or(Error::SingularCovariance)?;
            let chol_p = nalgebra::Cholesky::new(sp.clone()).ok_or(Error::SingularCovariance)?;
            let log_det_q: f64 = 2.0 * chol_q.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let log_det_p: f64 = 2.0 * chol_p.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let trace_term = chol_q.solve(&sp).trace();
            let dm = &q.mean - &p.mean;
            let maha = dm.dot(&chol_q.solve(&dm.clone_owned()));
            Ok(0.5 * (trace_term + maha - d as f64 + log_det_q - log_det_p))
        }
    }
}

/// Squared Bures–Wasserstein distance between Gaussians:
/// `‖mu_p - mu_q‖² + trace(S_p + S_q - 2 (S_q^{1/2} S_p S_q^{1/2})^{1/2})`.
/// In 1-D this reduces to `(mu_p-mu_q)² + (sd_p-sd_q)²`. The dense path is
/// capped at dimension 512; the diagonal path has no cap.
pub fn gaussian_w2_sq(p: &GaussianMoments, q: &GaussianMoments) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "W2 between dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    let mean_term = (&p.mean - &q.mean).norm_squared();
    match (&p.cov, &q.cov) {
        (SymmetricMatrix::Diagonal(vp), SymmetricMatrix::Diagonal(vq)) => {
            let terms = (0..p.dim()).map(|j| {
                let ds = vp[j].max(0.0).sqrt() - vq[j].max(0.0).sqrt();
                ds * ds
            });
            Ok(mean_term + kahan_sum(terms))
        }
        _ => {
            if p.dim() > W2_DENSE_DIM_CAP {
                return Err(Error::DimensionCap { dim: p.dim(), cap: W2_DENSE_DIM_CAP });
            }
            let sp = p.cov.to_dense();
            let sq = q.cov.to_dense();
            let sqrt_q = symmetric_sqrt(&sq);
            let inner = &sqrt_q * &sp * &sqrt_q;
            let cross = trace_of_symmetric_sqrt(&inner);
            let bures = (sp.trace() + sq.trace() - 2.0 * cross).max(0.0);
            Ok(mean_term + bures)
        }
    }
}

fn symmetric_sqrt(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = mat.clone().symmetric_eigen();
    let floor = SQRT_EIG_FLOOR * mat.trace().abs().max(f64::MIN_POSITIVE);
    let roots = eig.eigenvalues.map(|v| v.max(floor).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn trace_of_symmetric_sqrt(mat: &DMatrix<f64>) -> f64 {
    // The product S_q^{1/2} S_p S_q^{1/2} is symmetric in exact arithmetic;
    // symmetrise before decomposing to shed rounding noise.
    let n = mat.nrows();
    let mut sym = mat.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (sym[(i, j)] + sym[(j, i)]);
            sym[(i, j)] = s;
            sym[(j, i)] = s;
        }
    }
    let eig = sym.symmetric_eigen();
    kahan_sum(eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()))
}

/// Exact `E_{p*} ‖∇f‖²` for a quadratic likelihood under the Gaussian
/// posterior: `m² ‖w*‖² + beta · trace(A² (A+mI)^{-1})`.
pub fn expected_grad_norm_sq(quad: &QuadraticForm, m: f64, beta: f64) -> Result<f64> {
    if !(m.is_finite() && m > 0.0) || !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "expectation needs m > 0 and beta > 0, got m = {m}, beta = {beta}"
        )));
    }
    let (eigvals, basis) = quad.curvature().eigen_decompose();
    let b_rot = match &basis {
        Some(q) => q.tr_mul(quad.linear()),
        None => quad.linear().clone(),
    };
    let mode_norm_sq = kahan_sum(
        b_rot.iter().zip(eigvals.iter()).map(|(b, lam)| {
            let mu = b / (lam + m);
            mu * mu
        }),
    );
    let trace_term = kahan_sum(eigvals.iter().map(|lam| lam * lam / (lam + m)));
    Ok(m * m * mode_norm_sq + beta * trace_term)
}

/// The gradient-moment bound `16 (beta/m) trace(H²) + 2 m² ‖w*‖²` that
/// [`expected_grad_norm_sq`] must never exceed.
pub fn grad_norm_sq_bound(trace_h_sq: f64, m: f64, beta: f64, w_star_norm_sq: f64) -> f64 {
    16.0 * (beta / m) * trace_h_sq + 2.0 * m * m * w_star_norm_sq
}

/// Per-step output of the moment recursion at a requested checkpoint.
#[derive(Clone, Debug)]
pub struct MomentCheckpoint {
    pub t: u64,
    pub moments: GaussianMoments,
}

/// Full report of [`run_moment_recursion`].
#[derive(Clone, Debug)]
pub struct MomentRecursionReport {
    /// `kl[t-1] = KL(law(w̃_t) || p*)` for `t = 1..=t_max`.
    pub kl: Vec<f64>,
    /// `weighted_kl[t-1]` = the weighted trajectory KL at horizon `t`,
    /// i.e. `Σ_{s<=t} weight_s^{(t)} · kl[s-1]` with horizon-`t` weights.
    pub weighted_kl: Vec<f64>,
    /// Exact laws of `w̃_t` at the requested checkpoints.
    pub checkpoints: Vec<MomentCheckpoint>,
}

/// Propagates the exact Gaussian law of the iterates through `t_max` steps of
/// the algorithm (diffusion of duration `eta_t`, then gradient step
/// `eta_tilde_t`), recording the law of the *post-diffusion* iterate `w̃_t`
/// that the convergence statements bound.
///
/// The initial law is the prior `N(0, (beta/m) I)`. Runs per coordinate in
/// the curvature eigenbasis, so the per-step cost is O(d) after one
/// eigendecomposition.
pub fn run_moment_recursion(
    quad: &QuadraticForm,
    m: f64,
    beta: f64,
    schedule: &StepSchedule,
    t_max: u64,
    checkpoints: &[u64],
) -> Result<MomentRecursionReport> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if schedule.m() != m {
        return Err(Error::InvalidSchedule(format!(
            "schedule curvature {} does not match prior curvature {m}",
            schedule.m()
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {beta}")));
    }
    let dim = quad.dim();
    let (eigvals, basis) = quad.curvature().eigen_decompose();
    let eig_scale = eigvals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if eigvals.iter().any(|v| *v < -1e-10 * eig_scale) {
        return Err(Error::InvalidParameter("curvature has a negative eigenvalue".into()));
    }
    let b_rot = match &basis {
        Some(q) => q.tr_mul(quad.linear()),
        None => quad.linear().clone(),
    };
    // Posterior in the eigenbasis.
    let post_mean: Vec<f64> =
        b_rot.iter().zip(eigvals.iter()).map(|(b, lam)| b / (lam + m)).collect();
    let post_var: Vec<f64> = eigvals.iter().map(|lam| beta / (lam + m)).collect();

    // Current law of w_{t-1} in the eigenbasis (diagonal covariance).
    let mut mu: Vec<f64> = vec![0.0; dim];
    let mut var: Vec<f64> = vec![beta / m; dim];

    let mut kl = Vec::with_capacity(t_max as usize);
    let mut weighted_kl = Vec::with_capacity(t_max as usize);
    let mut checkpoint_out = Vec::with_capacity(checkpoints.len());
    let mut weighted_acc = KahanAccumulator::default();

    for t in 1..=t_max {
        // Diffusion of duration eta_t; the recorded law.
        let eta = schedule.diffusion_time(t);
        let co = ou_coefficients(m, beta, eta)?;
        let decay_sq = co.decay * co.decay;
        for j in 0..dim {
            mu[j] *= co.decay;
            var[j] = decay_sq * var[j] + co.variance;
        }

        let kl_t = kahan_sum((0..dim).map(|j| {
            let dm = mu[j] - post_mean[j];
            0.5 * (var[j] / post_var[j] + dm * dm / post_var[j] - 1.0
                + (post_var[j] / var[j]).ln())
        }));
        if !kl_t.is_finite() {
            return Err(Error::NonFiniteState { t: t as usize });
        }
        kl.push(kl_t);
        weighted_acc.add(schedule.raw_weight(t) * kl_t);
        weighted_kl.push(weighted_acc.value() / schedule.raw_weight_total(t as usize));

        if checkpoints.contains(&t) {
            checkpoint_out.push(MomentCheckpoint {
                t,
                moments: materialize(&mu, &var, &basis)?,
            });
        }

        // Gradient step with eta_tilde_t.
        let eta_tilde = schedule.step_size(t);
        for j in 0..dim {
            let g = 1.0 - eta_tilde * eigvals[j];
            mu[j] = g * mu[j] + eta_tilde * b_rot[j];
            var[j] = g * g * var[j];
        }
    }

    Ok(MomentRecursionReport { kl, weighted_kl, checkpoints: checkpoint_out })
}

fn materialize(
    mu: &[f64],
    var: &[f64],
    basis: &Option<DMatrix<f64>>,
) -> Result<GaussianMoments> {
    let dim = mu.len();
    match basis {
        None => GaussianMoments::new(
            DVector::from_column_slice(mu),
            SymmetricMatrix::Diagonal(DVector::from_column_slice(var)),
        ),
        Some(q) => {
            let mean = q * DVector::from_column_slice(mu);
            let mut cov = q * DMatrix::from_diagonal(&DVector::from_column_slice(var)) * q.transpose();
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                    cov[(i, j)] = s;
                    cov[(j, i)] = s;
                }
            }
            GaussianMoments::new(mean, SymmetricMatrix::from_dense(cov)?)
        }
    }
}

/// A 1-D posterior on a uniform grid: normalized density, CDF, and a
/// monotone-interpolated quantile function.
#[derive(Clone, Debug)]
pub struct GridPosterior1D {
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

/// Brute-force quadrature posterior `p(w) ∝ exp(-(f(w)+g(w))/beta)` on a
/// uniform grid of `points` abscissae spanning `center ± half_width`.
pub fn quadrature_posterior_1d(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    beta: f64,
    center: f64,
    half_width: f64,
    points: usize,
) -> Result<GridPosterior1D> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {beta}")));
    }
    if !(half_width.is_finite() && half_width > 0.0) || !center.is_finite() {
        return Err(Error::InvalidParameter("grid placement must be finite with positive width".into()));
    }
    if points < GRID_MIN_POINTS {
        return Err(Error::GridTooCoarse { points, min: GRID_MIN_POINTS });
    }
    let h = 2.0 * half_width / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| center - half_width + i as f64 * h).collect();
    let potential: Vec<f64> = grid.iter().map(|&x| (f(x) + g(x)) / beta).collect();
    let u_min = potential.iter().copied().fold(f64::INFINITY, f64::min);
    if !u_min.is_finite() {
        return Err(Error::GridUnderflow);
    }
    let mut density: Vec<f64> = potential.iter().map(|u| (-(u - u_min)).exp()).collect();
    let mass = trapezoid(&density, h);
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::GridUnderflow);
    }
    for d in density.iter_mut() {
        *d /= mass;
    }
    let mut cdf = Vec::with_capacity(points);
    let mut acc = KahanAccumulator::default();
    cdf.push(0.0);
    for i in 1..points {
        acc.add(0.5 * h * (density[i - 1] + density[i]));
        cdf.push(acc.value());
    }
    let total = cdf[points - 1];
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::GridUnderflow);
    }
    for c in cdf.iter_mut() {
        *c = (*c / total).clamp(0.0, 1.0);
    }
    Ok(GridPosterior1D { grid, density, cdf })
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let inner = kahan_sum(values[1..values.len() - 1].iter().copied());
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

impl GridPosterior1D {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// CDF value at `x` by linear interpolation (0 left of the grid, 1 right
    /// of it).
    pub fn cdf_at(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let h = self.grid[1] - self.grid[0];
        let idx = (((x - self.grid[0]) / h) as usize).min(n - 2);
        let frac = (x - self.grid[idx]) / h;
        self.cdf[idx] + frac * (self.cdf[idx + 1] - self.cdf[idx])
    }

    /// Quantile (inverse CDF) by monotone piecewise-linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.grid.len();
        if u <= 0.0 {
            return self.grid[0];
        }
        if u >= 1.0 {
            return self.grid[n - 1];
        }
        // Binary search for the first index with cdf >= u.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let span = self.cdf[hi] - self.cdf[lo];
        if span <= 0.0 {
            return self.grid[lo];
        }
        let frac = (u - self.cdf[lo]) / span;
        self.grid[lo] + frac * (self.grid[hi] - self.grid[lo])
    }

    /// Mean under the grid density (trapezoid rule).
    pub fn mean(&self) -> f64 {
        let h = self.grid[1] - self.grid[0];
        let integrand: Vec<f64> =
            self.grid.iter().zip(self.density.iter()).map(|(x, d)| x * d).collect();
        trapezoid(&integrand, h)
    }

    /// Variance under the grid density (trapezoid rule).
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let h = self.grid[1] - self.grid[0];
        let integrand: Vec<f64> = self
            .grid
            .iter()
            .zip(self.density.iter())
            .map(|(x, d)| (x - mu) * (x - mu) * d)
            .collect();
        trapezoid(&integrand, h)
    }
}

/// Empirical squared 1-D Wasserstein-2 distance between a weighted scalar
/// sample set and a reference given by its quantile function: sorts the
/// samples, places each at its weighted midpoint rank `u_k`, and accumulates
/// `weight_k (x_(k) - quantile(u_k))²`. Pass `None` for uniform weights.
pub fn empirical_w2_sq_1d(
    values: &[f64],
    weights: Option<&[f64]>,
    quantile: impl Fn(f64) -> f64,
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(w) = weights {
        if w.len() != values.len() {
            return Err(Error::WeightMismatch { weights: w.len(), steps: values.len() });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
        }
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total = match weights {
        Some(w) => kahan_sum(w.iter().copied()),
        None => values.len() as f64,
    };
    if total <= 0.0 {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }
    let mut cum = KahanAccumulator::default();
    let mut acc = KahanAccumulator::default();
    for &idx in &order {
        let w = weights.map_or(1.0, |ws| ws[idx]);
        if w == 0.0 {
            continue;
        }
        let u = (cum.value() + 0.5 * w) / total;
        cum.add(w);
        let diff = values[idx] - quantile(u);
        acc.add(w * diff * diff);
    }
    Ok(acc.value() / total)
}
