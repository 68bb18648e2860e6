//! Target models: likelihood families with gradient oracles, strongly convex
//! priors, posterior-mode search, and the stochastic-gradient variance at the
//! mode.
//!
//! The sampled density is `p(w) ∝ exp(-(f(w) + g(w)) / beta)` where `f` is a
//! convex likelihood potential and `g` a strongly convex prior potential.
//! Shipped likelihood families:
//!
//! * [`Likelihood::zero`] — `f ≡ 0` (prior-only chains),
//! * [`Likelihood::quadratic`] — `f(w) = w'Aw/2 - b'w + c0`,
//! * [`Likelihood::ridge_separable`] — `f(w) = (1/n) Σ s_i(w·z_i)` over a
//!   dataset of feature columns `z_i` with per-datum scalar activations,
//! * [`Likelihood::scaled_abs`] — `f(w) = Σ a_j |w_j - c_j|`, the Lipschitz
//!   (non-smooth) test family.
//!
//! Regularity constants (`G` for Lipschitz families, `L` and a Hessian bound
//! for smooth ones) are trusted metadata; the test suite validates them by
//! randomized probing rather than at construction time.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

const MODE_MAX_ITER: usize = 1_000_000;
const MODE_TOL: f64 = 1e-8;

/// Quadratic potential `f(w) = w'Aw/2 - b'w + c0` with `A` symmetric
/// positive semidefinite.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    a: SymmetricMatrix,
    b: DVector<f64>,
    c0: f64,
}

impl QuadraticForm {
    pub fn new(a: SymmetricMatrix, b: DVector<f64>, c0: f64) -> Result<Self> {
        if a.dim() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "curvature is {}x{} but linear term has length {}",
                a.dim(),
                a.dim(),
                b.len()
            )));
        }
        if !c0.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("quadratic form has non-finite terms".into()));
        }
        Ok(QuadraticForm { a, b, c0 })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn curvature(&self) -> &SymmetricMatrix {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c0
    }

    pub fn value(&self, w: &DVector<f64>) -> f64 {
        0.5 * self.a.mul_vec(w).dot(w) - self.b.dot(w) + self.c0
    }

    pub fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        self.a.mul_vec(w) - &self.b
    }
}

/// Per-datum activation family for ridge-separable models.
///
/// Each datum contributes `s_i(x) = s(x; y_i)` evaluated at `x = w·z_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationFamily {
    /// `s(x) = (x - y)^2 / 2`; second derivative 1, so `L_s = 1`.
    HalfSquaredError,
    /// `s(x) = ln(1 + e^{-y x})` with labels `y ∈ {-1, +1}`; `L_s = 1/4`.
    Logistic,
}

impl ActivationFamily {
    /// Uniform bound on `|s''|` for the family.
    pub fn curvature_bound(self) -> f64 {
        match self {
            ActivationFamily::HalfSquaredError => 1.0,
            ActivationFamily::Logistic => 0.25,
        }
    }
}

impl std::str::FromStr for ActivationFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-squared-error" => Ok(ActivationFamily::HalfSquaredError),
            "logistic" => Ok(ActivationFamily::Logistic),
            other => Err(Error::UnknownActivation(other.to_string())),
        }
    }
}

fn activation_value(family: ActivationFamily, target: f64, x: f64) -> f64 {
    match family {
        ActivationFamily::HalfSquaredError => {
            let r = x - target;
            0.5 * r * r
        }
        ActivationFamily::Logistic => {
            // softplus(-y x), computed without overflow.
            let u = -target * x;
            u.max(0.0) + (-u.abs()).exp().ln_1p()
        }
    }
}

fn activation_deriv(family: ActivationFamily, target: f64, x: f64) -> f64 {
    match family {
        ActivationFamily::HalfSquaredError => x - target,
        ActivationFamily::Logistic => {
            // -y * sigmoid(-y x), evaluated on the stable branch.
            let v = target * x;
            if v >= 0.0 {
                let e = (-v).exp();
                -target * e / (1.0 + e)
            } else {
                -target / (1.0 + v.exp())
            }
        }
    }
}

/// Ridge-separable model `f(w) = (1/n) Σ s_i(w·z_i)` over feature columns
/// `z_i` (the `d x n` matrix `Z`). Carries the constants the convergence
/// bounds need: `L_s = sup |s''|`, `R_z = max ‖z_i‖²`, and the Hessian bound
/// `H = (L_s/n) Z Z'`.
#[derive(Clone, Debug)]
pub struct RidgeSeparable {
    z: DMatrix<f64>,
    family: ActivationFamily,
    targets: Vec<f64>,
    l_s: f64,
    r_z: f64,
}

impl RidgeSeparable {
    fn build(z: DMatrix<f64>, family: ActivationFamily, targets: Vec<f64>) -> Result<Self> {
        let n = z.ncols();
        if n == 0 {
            return Err(Error::InvalidParameter("ridge-separable model needs at least one datum".into()));
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns but {} targets",
                n,
                targets.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dataset has non-finite entries".into()));
        }
        if family == ActivationFamily::Logistic && targets.iter().any(|y| *y != 1.0 && *y != -1.0) {
            return Err(Error::InvalidParameter(
                "logistic activations require labels in {-1, +1} (the curvature bound 1/4 assumes them)".into(),
            ));
        }
        let r_z = (0..n).map(|i| z.column(i).norm_squared()).fold(0.0, f64::max);
        Ok(RidgeSeparable { z, family, targets, l_s: family.curvature_bound(), r_z })
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_data(&self) -> usize {
        self.z.ncols()
    }

    pub fn family(&self) -> ActivationFamily {
        self.family
    }

    /// `L_s`: uniform bound on the activation curvature.
    pub fn activation_curvature(&self) -> f64 {
        self.l_s
    }

    /// `R_z = max_i ‖z_i‖²`.
    pub fn max_feature_norm_sq(&self) -> f64 {
        self.r_z
    }

    /// Per-datum gradient Lipschitz constant `L_ℓ = L_s R_z`.
    pub fn per_datum_smoothness(&self) -> f64 {
        self.l_s * self.r_z
    }

    pub fn value(&self, w: &DVector<f64>) -> f64 {
        let x = self.z.tr_mul(w); // n inner products w·z_i
        let total: f64 = x
            .iter()
            .zip(&self.targets)
            .map(|(xi, y)| activation_value(self.family, *y, *xi))
            .sum();
        total / self.n_data() as f64
    }

    pub fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        let x = self.z.tr_mul(w);
        let n = self.n_data() as f64;
        let coeff = DVector::from_iterator(
            self.n_data(),
            x.iter()
                .zip(&self.targets)
                .map(|(xi, y)| activation_deriv(self.family, *y, *xi) / n),
        );
        &self.z * coeff
    }

    /// Gradient of a single datum's loss `ℓ(w, z_i) = s_i(w·z_i)`.
    pub fn grad_datum(&self, w: &DVector<f64>, i: usize) -> DVector<f64> {
        let zi = self.z.column(i);
        let coeff = activation_deriv(self.family, self.targets[i], zi.dot(w));
        zi * coeff
    }

    /// Mean gradient over a minibatch of datum indices.
    pub fn minibatch_grad(&self, w: &DVector<f64>, indices: &[usize]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for &i in indices {
            let zi = self.z.column(i);
            let coeff = activation_deriv(self.family, self.targets[i], zi.dot(w));
            acc.axpy(coeff, &zi, 1.0);
        }
        acc / indices.len() as f64
    }

    /// The Hessian bound `H = (L_s/n) Z Z'` as an explicit matrix.
    pub fn hessian_matrix(&self) -> SymmetricMatrix {
        let scale = self.l_s / self.n_data() as f64;
        let mut h = &self.z * self.z.transpose() * scale;
        // Kill floating-point asymmetry from the matmul before wrapping.
        for i in 0..h.nrows() {
            for j in (i + 1)..h.ncols() {
                let s = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = s;
                h[(j, i)] = s;
            }
        }
        SymmetricMatrix::from_dense(h).expect("symmetrised product is symmetric")
    }

    /// trace(H) without forming the d x d matrix.
    pub fn hessian_trace(&self) -> f64 {
        self.l_s / self.n_data() as f64 * self.z.iter().map(|v| v * v).sum::<f64>()
    }

    /// trace(H^2) without forming the d x d matrix (uses the n x n Gram matrix).
    pub fn hessian_trace_sq(&self) -> f64 {
        let gram = self.z.tr_mul(&self.z);
        let scale = self.l_s / self.n_data() as f64;
        scale * scale * gram.iter().map(|v| v * v).sum::<f64>()
    }

    /// The dense quadratic form of a half-squared-error model:
    /// `A = (1/n) Z Z'`, `b = (1/n) Z y`, `c0 = ‖y‖²/(2n)`.
    pub fn quadratic_view(&self) -> Option<QuadraticForm> {
        if self.family != ActivationFamily::HalfSquaredError {
            return None;
        }
        let a = self.hessian_matrix(); // L_s = 1 here, so H = A.
        let y = DVector::from_column_slice(&self.targets);
        let n = self.n_data() as f64;
        let b = &self.z * &y / n;
        let c0 = y.norm_squared() / (2.0 * n);
        Some(QuadraticForm::new(a, b, c0).expect("dimensions agree by construction"))
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.z
    }
}

/// Regularity class of a likelihood potential.
#[derive(Clone, Copy, Debug)]
pub enum Regularity {
    /// `‖∂f‖ <= bound` everywhere (possibly non-smooth).
    Lipschitz { bound: f64 },
    /// `∇f` is `l`-Lipschitz.
    Smooth { l: f64 },
}

#[derive(Clone, Debug)]
enum LikelihoodKind {
    Zero { dim: usize },
    Quadratic(QuadraticForm),
    Ridge(RidgeSeparable),
    ScaledAbs { scale: DVector<f64>, center: DVector<f64> },
}

/// A convex likelihood potential with gradient (and where applicable
/// per-datum and proximal) oracles. See the module docs for the families.
#[derive(Clone, Debug)]
pub struct Likelihood {
    kind: LikelihoodKind,
    regularity: Regularity,
}

impl Likelihood {
    /// `f ≡ 0` in the given dimension.
    pub fn zero(dim: usize) -> Self {
        Likelihood { kind: LikelihoodKind::Zero { dim }, regularity: Regularity::Smooth { l: 0.0 } }
    }

    /// Quadratic potential. The curvature must be positive semidefinite; its
    /// largest eigenvalue becomes the smoothness constant.
    pub fn quadratic(form: QuadraticForm) -> Result<Self> {
        let max_eig = form.curvature().max_eigenvalue();
        let min_eig = match form.curvature() {
            SymmetricMatrix::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            SymmetricMatrix::Dense(m) => m
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        };
        if min_eig < -1e-10 * max_eig.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic curvature has negative eigenvalue {min_eig}"
            )));
        }
        Ok(Likelihood { regularity: Regularity::Smooth { l: max_eig.max(0.0) }, kind: LikelihoodKind::Quadratic(form) })
    }

    /// Ridge-separable model over feature columns `z` with one activation per
    /// column. Smoothness is taken as `L_s R_z`, the uniform bound used by
    /// the convergence analysis (zero columns are permitted).
    pub fn ridge_separable(z: DMatrix<f64>, family: ActivationFamily, targets: Vec<f64>) -> Result<Self> {
        let model = RidgeSeparable::build(z, family, targets)?;
        let l = model.per_datum_smoothness();
        Ok(Likelihood { regularity: Regularity::Smooth { l }, kind: LikelihoodKind::Ridge(model) })
    }

    /// `f(w) = Σ a_j |w_j - c_j|` with `a_j >= 0`; Lipschitz with `G = ‖a‖`.
    pub fn scaled_abs(scale: DVector<f64>, center: DVector<f64>) -> Result<Self> {
        if scale.len() != center.len() {
            return Err(Error::DimensionMismatch(format!(
                "scale has length {} but center has length {}",
                scale.len(),
                center.len()
            )));
        }
        if scale.iter().any(|a| !a.is_finite() || *a < 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("scaled-abs parameters must be finite with non-negative scales".into()));
        }
        let g = scale.norm();
        Ok(Likelihood { kind: LikelihoodKind::ScaledAbs { scale, center }, regularity: Regularity::Lipschitz { bound: g } })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LikelihoodKind::Zero { dim } => *dim,
            LikelihoodKind::Quadratic(q) => q.dim(),
            LikelihoodKind::Ridge(r) => r.dim(),
            LikelihoodKind::ScaledAbs { scale, .. } => scale.len(),
        }
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn value(&self, w: &DVector<f64>) -> f64 {
        match &self.kind {
            LikelihoodKind::Zero { .. } => 0.0,
            LikelihoodKind::Quadratic(q) => q.value(w),
            LikelihoodKind::Ridge(r) => r.value(w),
            LikelihoodKind::ScaledAbs { scale, center } => scale
                .iter()
                .zip(center.iter())
                .zip(w.iter())
                .map(|((a, c), x)| a * (x - c).abs())
                .sum(),
        }
    }

    /// Minimum-norm subgradient: equals the gradient on smooth families and
    /// picks 0 at the kinks of `|·|`.
    pub fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            LikelihoodKind::Zero { dim } => DVector::zeros(*dim),
            LikelihoodKind::Quadratic(q) => q.grad(w),
            LikelihoodKind::Ridge(r) => r.grad(w),
            LikelihoodKind::ScaledAbs { scale, center } => DVector::from_iterator(
                w.len(),
                scale
                    .iter()
                    .zip(center.iter())
                    .zip(w.iter())
                    .map(|((a, c), x)| a * sign_or_zero(x - c)),
            ),
        }
    }

    /// Coordinate-wise subdifferential box `[lo_j, hi_j]`; `lo = hi = ∇f`
    /// away from kinks.
    pub fn subgrad_box(&self, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.kind {
            LikelihoodKind::ScaledAbs { scale, center } => {
                let mut lo = DVector::zeros(w.len());
                let mut hi = DVector::zeros(w.len());
                for j in 0..w.len() {
                    let d = w[j] - center[j];
                    if d == 0.0 {
                        lo[j] = -scale[j];
                        hi[j] = scale[j];
                    } else {
                        let g = scale[j] * d.signum();
                        lo[j] = g;
                        hi[j] = g;
                    }
                }
                (lo, hi)
            }
            _ => {
                let g = self.grad(w);
                (g.clone(), g)
            }
        }
    }

    /// Proximal map `argmin_u f(u) + ‖u - v‖²/(2 gamma)` for families with a
    /// closed form.
    pub fn prox(&self, v: &DVector<f64>, gamma: f64) -> Option<DVector<f64>> {
        match &self.kind {
            LikelihoodKind::Zero { .. } => Some(v.clone()),
            LikelihoodKind::ScaledAbs { scale, center } => Some(DVector::from_iterator(
                v.len(),
                scale
                    .iter()
                    .zip(center.iter())
                    .zip(v.iter())
                    .map(|((a, c), vi)| c + soft_threshold(vi - c, gamma * a)),
            )),
            _ => None,
        }
    }

    /// The ridge-separable dataset, when the likelihood has one.
    pub fn ridge(&self) -> Option<&RidgeSeparable> {
        match &self.kind {
            LikelihoodKind::Ridge(r) => Some(r),
            _ => None,
        }
    }

    /// The explicit quadratic form, when the family is exactly quadratic.
    pub fn quadratic_view(&self) -> Option<QuadraticForm> {
        match &self.kind {
            LikelihoodKind::Quadratic(q) => Some(q.clone()),
            LikelihoodKind::Ridge(r) => r.quadratic_view(),
            LikelihoodKind::Zero { dim } => Some(
                QuadraticForm::new(
                    SymmetricMatrix::scaled_identity(*dim, 0.0),
                    DVector::zeros(*dim),
                    0.0,
                )
                .expect("zero form is valid"),
            ),
            LikelihoodKind::ScaledAbs { .. } => None,
        }
    }

    fn is_coordinate_separable_kink(&self) -> bool {
        matches!(self.kind, LikelihoodKind::ScaledAbs { .. })
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Strongly convex prior potential `g`. Both variants have curvature `m`:
/// the isotropic Gaussian `g(w) = m‖w‖²/2`, and the coordinate-separable
/// elastic net `g(w) = Σ_j m w_j²/2 + alpha_j |w_j|`.
#[derive(Clone, Debug)]
pub enum Prior {
    Isotropic { m: f64 },
    Separable { m: f64, alpha: DVector<f64> },
}

impl Prior {
    pub fn isotropic(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidParameter(format!("prior curvature must be positive, got {m}")));
        }
        Ok(Prior::Isotropic { m })
    }

    pub fn separable(m: f64, alpha: DVector<f64>) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidParameter(format!("prior curvature must be positive, got {m}")));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParameter("elastic-net weights must be finite and non-negative".into()));
        }
        Ok(Prior::Separable { m, alpha })
    }

    pub fn m(&self) -> f64 {
        match self {
            Prior::Isotropic { m } | Prior::Separable { m, .. } => *m,
        }
    }

    /// True when the prior is a (product) Gaussian, i.e. it has an exact
    /// diffusion transition and exact stationary sampler.
    pub fn is_purely_gaussian(&self) -> bool {
        match self {
            Prior::Isotropic { .. } => true,
            Prior::Separable { alpha, .. } => alpha.iter().all(|a| *a == 0.0),
        }
    }

    /// Whether a state of dimension `dim` is acceptable.
    pub fn accepts_dim(&self, dim: usize) -> bool {
        match self {
            Prior::Isotropic { .. } => true,
            Prior::Separable { alpha, .. } => alpha.len() == dim,
        }
    }

    pub fn value(&self, w: &DVector<f64>) -> f64 {
        match self {
            Prior::Isotropic { m } => 0.5 * m * w.norm_squared(),
            Prior::Separable { m, alpha } => w
                .iter()
                .zip(alpha.iter())
                .map(|(x, a)| 0.5 * m * x * x + a * x.abs())
                .sum(),
        }
    }

    /// Minimum-norm subgradient (0 is chosen at `|·|` kinks).
    pub fn grad_min_norm(&self, w: &DVector<f64>) -> DVector<f64> {
        match self {
            Prior::Isotropic { m } => w * *m,
            Prior::Separable { m, alpha } => DVector::from_iterator(
                w.len(),
                w.iter().zip(alpha.iter()).map(|(x, a)| m * x + a * sign_or_zero(*x)),
            ),
        }
    }

    /// Coordinate-wise subdifferential box of `g`.
    pub fn subgrad_box(&self, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self {
            Prior::Isotropic { m } => {
                let g = w * *m;
                (g.clone(), g)
            }
            Prior::Separable { m, alpha } => {
                let mut lo = DVector::zeros(w.len());
                let mut hi = DVector::zeros(w.len());
                for j in 0..w.len() {
                    let base = m * w[j];
                    if w[j] == 0.0 {
                        lo[j] = base - alpha[j];
                        hi[j] = base + alpha[j];
                    } else {
                        let g = base + alpha[j] * w[j].signum();
                        lo[j] = g;
                        hi[j] = g;
                    }
                }
                (lo, hi)
            }
        }
    }

    fn alpha_at(&self, j: usize) -> f64 {
        match self {
            Prior::Isotropic { .. } => 0.0,
            Prior::Separable { alpha, .. } => alpha[j],
        }
    }
}

fn sign_or_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Norm of the minimum-norm element of `∂(f + g)(w)`, computed from the
/// coordinate-wise subdifferential boxes of both potentials. Zero exactly at
/// minimisers.
pub fn stationarity_residual(likelihood: &Likelihood, prior: &Prior, w: &DVector<f64>) -> f64 {
    let (flo, fhi) = likelihood.subgrad_box(w);
    let (glo, ghi) = prior.subgrad_box(w);
    let mut acc = 0.0;
    for j in 0..w.len() {
        let lo = flo[j] + glo[j];
        let hi = fhi[j] + ghi[j];
        let r = if lo <= 0.0 && 0.0 <= hi { 0.0 } else { lo.abs().min(hi.abs()) };
        acc += r * r;
    }
    acc.sqrt()
}

/// Finds the mode `w* = argmin f + g`.
///
/// Routing: explicit quadratic likelihoods with Gaussian priors solve
/// `(A + mI) w = b` in closed form; coordinate-separable kink families are
/// minimised coordinate-wise exactly; remaining smooth cases run first-order
/// descent (gradient steps of `1/(L+m)`, proximal steps when the prior has
/// `|·|` terms) until the subgradient residual drops below
/// `1e-8 * max(1, ‖w‖)`, with an iteration cap of 10^6. Non-convergence at
/// the cap signals inconsistent oracles and is reported as an error.
pub fn find_mode(likelihood: &Likelihood, prior: &Prior) -> Result<DVector<f64>> {
    let dim = likelihood.dim();
    if !prior.accepts_dim(dim) {
        return Err(Error::DimensionMismatch(format!(
            "likelihood dimension {dim} incompatible with prior"
        )));
    }
    let m = prior.m();

    // Exact coordinate-wise minimisation for kink families (the prior is
    // coordinate-separable in both variants).
    if likelihood.is_coordinate_separable_kink() {
        let (scale, center) = match &likelihood.kind {
            LikelihoodKind::ScaledAbs { scale, center } => (scale, center),
            _ => unreachable!(),
        };
        let mut w = DVector::zeros(dim);
        for j in 0..dim {
            w[j] = minimize_abs_coordinate(scale[j], center[j], m, prior.alpha_at(j));
        }
        return check_mode(likelihood, prior, w, 1);
    }

    // Closed-form solve for quadratic + Gaussian.
    if prior.is_purely_gaussian() {
        if let Some(q) = likelihood.quadratic_view() {
            let w = solve_shifted(q.curvature(), q.linear(), m)?;
            return check_mode(likelihood, prior, w, 1);
        }
    }

    // First-order descent. Smooth likelihoods only; a non-smooth likelihood
    // combined with a non-Gaussian prior has no shipped solver.
    let l = match likelihood.regularity() {
        Regularity::Smooth { l } => l,
        Regularity::Lipschitz { .. } => {
            return Err(Error::Unsupported(
                "mode search for a non-smooth likelihood with an elastic-net prior".into(),
            ))
        }
    };
    let gamma = 1.0 / (l + m);
    let mut w = DVector::zeros(dim);
    for iter in 0..MODE_MAX_ITER {
        let residual = stationarity_residual(likelihood, prior, &w);
        if residual <= MODE_TOL * w.norm().max(1.0) {
            return check_mode(likelihood, prior, w, iter + 1);
        }
        // Forward step on the smooth part f + m‖·‖²/2, then (when the prior
        // has |·| terms) the exact backward step: soft-thresholding.
        let g = likelihood.grad(&w) + &w * m;
        let mut next = &w - g * gamma;
        if let Prior::Separable { alpha, .. } = prior {
            // The quadratic part of g was handled in the forward step; the
            // remaining alpha_j |x| term has prox = soft threshold. The step
            // above used gradient m*w of the quadratic prior part, so the
            // effective prox parameter stays gamma.
            for j in 0..dim {
                next[j] = soft_threshold(next[j], gamma * alpha[j]);
            }
        }
        w = next;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: iter + 1 });
        }
    }
    Err(Error::NonConvergence {
        max_iter: MODE_MAX_ITER,
        residual: stationarity_residual(likelihood, prior, &w),
    })
}

/// Exact minimiser of `a|x - c| + m x²/2 + alpha |x|` (1-D).
fn minimize_abs_coordinate(a: f64, c: f64, m: f64, alpha: f64) -> f64 {
    let h = |x: f64| a * (x - c).abs() + 0.5 * m * x * x + alpha * x.abs();
    let mut best = 0.0;
    let mut best_val = h(0.0);
    let mut consider = |x: f64| {
        let v = h(x);
        if v < best_val {
            best = x;
            best_val = v;
        }
    };
    consider(c);
    // Interior stationary points of each linear region: m x = -(a s1 + alpha s2).
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            let x = -(a * s1 + alpha * s2) / m;
            if (x - c).signum() == s1 && x.signum() == s2 {
                consider(x);
            }
        }
    }
    best
}

/// Solves `(A + mI) x = b` via Cholesky (or directly on the diagonal path).
fn solve_shifted(a: &SymmetricMatrix, b: &DVector<f64>, m: f64) -> Result<DVector<f64>> {
    match a {
        SymmetricMatrix::Diagonal(d) => Ok(DVector::from_iterator(
            b.len(),
            b.iter().zip(d.iter()).map(|(bi, di)| bi / (di + m)),
        )),
        SymmetricMatrix::Dense(mat) => {
            let mut shifted = mat.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += m;
            }
            let chol = Cholesky::new(shifted).ok_or(Error::SingularCovariance)?;
            Ok(chol.solve(b))
        }
    }
}

fn check_mode(
    likelihood: &Likelihood,
    prior: &Prior,
    w: DVector<f64>,
    iters: usize,
) -> Result<DVector<f64>> {
    let residual = stationarity_residual(likelihood, prior, &w);
    if residual <= MODE_TOL * w.norm().max(1.0) {
        Ok(w)
    } else {
        Err(Error::NonConvergence { max_iter: iters, residual })
    }
}

/// Stochastic-gradient variance at a point (normally the mode):
/// `b² = (1/n) Σ_i ‖∇ℓ(w, z_i) - ∇f(w)‖²`, plus the analytic bound
/// `4 R_z b_s²` with `b_s = max_i |s_i'(w·z_i)|`.
#[derive(Clone, Copy, Debug)]
pub struct SgVariance {
    /// Empirical per-datum gradient variance `b²`.
    pub b_sq: f64,
    /// Closed-form bound `4 R_z b_s² >= b²`.
    pub bound: f64,
}

/// Computes [`SgVariance`] for a likelihood with a dataset.
pub fn sg_variance_at_mode(likelihood: &Likelihood, w_star: &DVector<f64>) -> Result<SgVariance> {
    let model = likelihood.ridge().ok_or(Error::MissingDataset)?;
    if w_star.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "mode has length {} but model dimension is {}",
            w_star.len(),
            model.dim()
        )));
    }
    let full = model.grad(w_star);
    let n = model.n_data();
    let mut acc = 0.0;
    let mut max_coeff: f64 = 0.0;
    for i in 0..n {
        let gi = model.grad_datum(w_star, i);
        acc += (gi - &full).norm_squared();
        let coeff = activation_deriv(model.family, model.targets[i], model.z.column(i).dot(w_star));
        max_coeff = max_coeff.max(coeff.abs());
    }
    Ok(SgVariance {
        b_sq: acc / n as f64,
        bound: 4.0 * model.max_feature_norm_sq() * max_coeff * max_coeff,
    })
}
