use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{ensure_finite, Matrix, Vector};
use crate::sampling::standard_normal;

use super::Objective;

const SENSING_SYM_TOL: f64 = 1e-12;

/// `f(X) = 1/2 ||A(X) - y||_2^2` with a linear map `A(X)_i = <A_i, X>`.
///
/// The sensing matrices are stored as the rows of an `n x p^2` matrix, each
/// row being the column-major vectorization of a symmetric `A_i`.
#[derive(Debug, Clone)]
pub struct TraceRegressionObjective {
    p: usize,
    r: usize,
    sensing: Matrix,
    y: Vector,
    noise_sigma: f64,
}

fn vec_of(x: &Matrix) -> Vector {
    Vector::from_column_slice(x.as_slice())
}

impl TraceRegressionObjective {
    /// Build from explicit sensing matrices and observations.
    pub fn new(sensing: &[Matrix], y: Vector, r: usize) -> Result<Self> {
        let n = sensing.len();
        if n == 0 {
            return Err(Error::contract("trace regression needs at least one measurement"));
        }
        if y.len() != n {
            return Err(Error::contract(format!(
                "{} observations for {n} sensing matrices",
                y.len()
            )));
        }
        let p = sensing[0].nrows();
        let mut rows = Matrix::zeros(n, p * p);
        for (i, a) in sensing.iter().enumerate() {
            if a.shape() != (p, p) {
                return Err(Error::contract("sensing matrices must share one square shape"));
            }
            ensure_finite(a, "sensing matrix")?;
            let asym = (a - a.transpose()).amax();
            if asym > SENSING_SYM_TOL * a.amax().max(1.0) {
                return Err(Error::contract(format!(
                    "sensing matrix {i} is not symmetric (max defect {asym:e})"
                )));
            }
            let s = (a + a.transpose()) * 0.5;
            rows.row_mut(i).copy_from_slice(s.as_slice());
        }
        Ok(Self {
            p,
            r,
            sensing: rows,
            y,
            noise_sigma: 0.0,
        })
    }

    /// Draw `A_i = (G_i + G_i^T) / (2 sqrt(n))` with i.i.d. standard normal `G_i`.
    pub(crate) fn gaussian_sensing<R: Rng + ?Sized>(p: usize, n: usize, rng: &mut R) -> Matrix {
        let scale = 1.0 / (2.0 * (n as f64).sqrt());
        let mut rows = Matrix::zeros(n, p * p);
        let mut g = Matrix::zeros(p, p);
        for i in 0..n {
            for v in g.iter_mut() {
                *v = standard_normal(rng);
            }
            let a = (&g + g.transpose()) * scale;
            rows.row_mut(i).copy_from_slice(a.as_slice());
        }
        rows
    }

    pub(crate) fn from_parts(
        p: usize,
        r: usize,
        sensing: Matrix,
        y: Vector,
        noise_sigma: f64,
    ) -> Self {
        Self {
            p,
            r,
            sensing,
            y,
            noise_sigma,
        }
    }

    pub(crate) fn into_sensing(self) -> Matrix {
        self.sensing
    }

    pub fn n(&self) -> usize {
        self.sensing.nrows()
    }

    pub fn observations(&self) -> &Vector {
        &self.y
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// `i`-th sensing matrix.
    pub fn sensing_matrix(&self, i: usize) -> Matrix {
        Matrix::from_iterator(self.p, self.p, self.sensing.row(i).iter().copied())
    }

    /// `A(X)`.
    pub fn measure(&self, x: &Matrix) -> Vector {
        &self.sensing * vec_of(x)
    }

    /// `A^T(v) = sum_i v_i A_i`.
    pub fn adjoint(&self, v: &Vector) -> Matrix {
        let flat = self.sensing.tr_mul(v);
        Matrix::from_column_slice(self.p, self.p, flat.as_slice())
    }
}

impl Objective for TraceRegressionObjective {
    fn dim(&self) -> usize {
        self.p
    }

    fn target_rank(&self) -> usize {
        self.r
    }

    fn value(&self, x: &Matrix) -> f64 {
        0.5 * (self.measure(x) - &self.y).norm_squared()
    }

    fn euclid_grad(&self, x: &Matrix) -> Matrix {
        self.adjoint(&(self.measure(x) - &self.y))
    }

    fn euclid_hess_form(&self, _x: &Matrix, g1: &Matrix, g2: &Matrix) -> f64 {
        self.measure(g1).dot(&self.measure(g2))
    }

    fn euclid_hess_apply(&self, _x: &Matrix, g: &Matrix) -> Matrix {
        self.adjoint(&self.measure(g))
    }

    fn euclid_hess_gram(&self, _x: &Matrix, dirs: &[Matrix]) -> Matrix {
        let d = dirs.len();
        let mut stacked = Matrix::zeros(self.p * self.p, d);
        for (k, g) in dirs.iter().enumerate() {
            stacked.column_mut(k).copy_from_slice(g.as_slice());
        }
        let images = &self.sensing * stacked;
        images.tr_mul(&images)
    }
}
