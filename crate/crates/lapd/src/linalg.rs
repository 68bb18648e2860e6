//! Small shared linear-algebra helpers: a symmetric-matrix representation
//! with a diagonal fast path, and a compensated summation routine.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a dense matrix as symmetric.
const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric matrix stored either as its diagonal or as a full dense
/// matrix. Diagonal storage keeps the common isotropic/axis-aligned cases at
/// O(d) per operation.
#[derive(Clone, Debug)]
pub enum SymmetricMatrix {
    /// Diagonal matrix; the vector holds the diagonal entries.
    Diagonal(DVector<f64>),
    /// Full symmetric matrix.
    Dense(DMatrix<f64>),
}

impl SymmetricMatrix {
    /// Wraps a dense matrix, validating squareness, finiteness, and symmetry
    /// up to a relative tolerance of 1e-12.
    pub fn from_dense(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        for i in 0..mat.nrows() {
            for j in (i + 1)..mat.ncols() {
                if (mat[(i, j)] - mat[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SymmetricMatrix::Dense(mat))
    }

    /// Wraps a diagonal given by its entries.
    pub fn from_diagonal(diag: DVector<f64>) -> Result<Self> {
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("diagonal has non-finite entries".into()));
        }
        Ok(SymmetricMatrix::Diagonal(diag))
    }

    /// Scaled identity of the given dimension.
    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        SymmetricMatrix::Diagonal(DVector::from_element(dim, value))
    }

    pub fn dim(&self) -> usize {
        match self {
            SymmetricMatrix::Diagonal(d) => d.len(),
            SymmetricMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, SymmetricMatrix::Diagonal(_))
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            SymmetricMatrix::Diagonal(d) => d.component_mul(v),
            SymmetricMatrix::Dense(m) => m * v,
        }
    }

    /// Dense copy of the matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymmetricMatrix::Diagonal(d) => DMatrix::from_diagonal(d),
            SymmetricMatrix::Dense(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            SymmetricMatrix::Diagonal(d) => d.sum(),
            SymmetricMatrix::Dense(m) => m.trace(),
        }
    }

    /// trace(M^2); for a symmetric matrix this is the squared Frobenius norm.
    pub fn trace_of_square(&self) -> f64 {
        match self {
            SymmetricMatrix::Diagonal(d) => d.iter().map(|v| v * v).sum(),
            SymmetricMatrix::Dense(m) => m.iter().map(|v| v * v).sum(),
        }
    }

    /// Largest eigenvalue. Dense matrices go through a symmetric
    /// eigendecomposition, so keep them modest in size.
    pub fn max_eigenvalue(&self) -> f64 {
        match self {
            SymmetricMatrix::Diagonal(d) => d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            SymmetricMatrix::Dense(m) => m
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Eigendecomposition `M = V diag(lambda) V^T`. Diagonal matrices return
    /// their entries directly with no basis (`None` means identity basis).
    pub fn eigen_decompose(&self) -> (DVector<f64>, Option<DMatrix<f64>>) {
        match self {
            SymmetricMatrix::Diagonal(d) => (d.clone(), None),
            SymmetricMatrix::Dense(m) => {
                let eig = m.clone().symmetric_eigen();
                (eig.eigenvalues, Some(eig.eigenvectors))
            }
        }
    }

    /// `M + c I`, preserving the storage form.
    pub fn add_scaled_identity(&self, c: f64) -> Self {
        match self {
            SymmetricMatrix::Diagonal(d) => SymmetricMatrix::Diagonal(d.add_scalar(c)),
            SymmetricMatrix::Dense(m) => {
                let mut out = m.clone();
                for i in 0..out.nrows() {
                    out[(i, i)] += c;
                }
                SymmetricMatrix::Dense(out)
            }
        }
    }
}

/// Kahan-compensated sum; keeps long weight/KL accumulations at O(eps)
/// error instead of O(n*eps).
pub(crate) fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanAccumulator::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Running Kahan-compensated accumulator, for prefix sums kept across loop
/// iterations.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanAccumulator {
    sum: f64,
    compensation: f64,
}

impl KahanAccumulator {
    pub(crate) fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_dense() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 2.0]);
        assert!(SymmetricMatrix::from_dense(m).is_err());
    }

    #[test]
    fn rejects_non_square() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
        assert!(SymmetricMatrix::from_dense(m).is_err());
    }

    #[test]
    fn trace_of_square_matches_dense_product() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let sym = SymmetricMatrix::from_dense(m.clone()).unwrap();
        let prod = &m * &m;
        assert!((sym.trace_of_square() - prod.trace()).abs() < 1e-14);
    }

    #[test]
    fn diagonal_eigen_has_identity_basis() {
        let sym = SymmetricMatrix::from_diagonal(DVector::from_vec(vec![2.0, 3.0])).unwrap();
        let (vals, basis) = sym.eigen_decompose();
        assert_eq!(vals, DVector::from_vec(vec![2.0, 3.0]));
        assert!(basis.is_none());
    }

    #[test]
    fn kahan_handles_many_small_terms() {
        let n = 1_000_000;
        let s = kahan_sum((0..n).map(|_| 0.1));
        assert!((s - 0.1 * n as f64).abs() < 1e-9);
    }
}
