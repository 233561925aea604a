//! Smooth function oracles: value and gradient.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::Vector;

/// A continuously differentiable function `ℝⁿ → ℝ`.
///
/// Implementations must be pure; a problem shares its oracles across threads.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;

    /// True if the function is known to be affine.
    fn is_affine(&self) -> bool {
        false
    }
}

pub type Oracle = Arc<dyn SmoothFunction>;

impl fmt::Debug for dyn SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothFunction(dim = {})", self.dim())
    }
}

/// Oracle built from a pair of closures.
pub struct FnOracle<V, G> {
    dim: usize,
    value: V,
    gradient: G,
    affine: bool,
}

impl<V, G> FnOracle<V, G>
where
    V: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(dim: usize, value: V, gradient: G) -> Self {
        FnOracle { dim, value, gradient, affine: false }
    }

    pub fn affine(mut self) -> Self {
        self.affine = true;
        self
    }
}

impl<V, G> SmoothFunction for FnOracle<V, G>
where
    V: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }
    fn is_affine(&self) -> bool {
        self.affine
    }
}

/// Boxes a closure pair into an [`Oracle`].
pub fn oracle<V, G>(dim: usize, value: V, gradient: G) -> Oracle
where
    V: Fn(&Vector) -> f64 + Send + Sync + 'static,
    G: Fn(&Vector) -> Vector + Send + Sync + 'static,
{
    Arc::new(FnOracle::new(dim, value, gradient))
}

/// `½ xᵀQx + qᵀx + c` with symmetric `Q`.
#[derive(Debug, Clone)]
pub struct QuadraticFunction {
    pub hessian: DMatrix<f64>,
    pub linear: Vector,
    pub constant: f64,
}

impl QuadraticFunction {
    pub fn new(hessian: DMatrix<f64>, linear: Vector, constant: f64) -> Self {
        assert_eq!(hessian.nrows(), hessian.ncols(), "hessian must be square");
        assert_eq!(hessian.nrows(), linear.len(), "linear term has wrong size");
        QuadraticFunction { hessian, linear, constant }
    }

    /// `½‖Ax − b‖²`
    pub fn least_squares(a: &DMatrix<f64>, b: &Vector) -> Self {
        let hessian = a.transpose() * a;
        let linear = -(a.transpose() * b);
        QuadraticFunction::new(hessian, linear, 0.5 * b.norm_squared())
    }

    /// `a·‖x − c‖²`
    pub fn scaled_distance(a: f64, c: &Vector) -> Self {
        let n = c.len();
        QuadraticFunction::new(DMatrix::identity(n, n) * (2.0 * a), c * (-2.0 * a), a * c.norm_squared())
    }

    /// `aᵀx + c`
    pub fn affine(a: Vector, c: f64) -> Self {
        let n = a.len();
        QuadraticFunction::new(DMatrix::zeros(n, n), a, c)
    }
}

impl SmoothFunction for QuadraticFunction {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.hessian * x + &self.linear
    }
    fn is_affine(&self) -> bool {
        self.hessian.iter().all(|&h| h == 0.0)
    }
}

/// One monomial `coeff · Π x_j^{e_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// A multivariate polynomial given as a list of monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    /// Panics if a term's exponent list does not have length `dim`.
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Self {
        for t in &terms {
            assert_eq!(t.exponents.len(), dim, "monomial exponent list has wrong length");
        }
        Polynomial { dim, terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().filter(|t| t.coeff != 0.0).map(|t| t.exponents.iter().sum()).max().unwrap_or(0)
    }
}

impl SmoothFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().zip(x.iter()).fold(t.coeff, |acc, (&e, &xi)| acc * xi.powi(e as i32)))
            .sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for t in &self.terms {
            for k in 0..self.dim {
                let ek = t.exponents[k];
                if ek == 0 {
                    continue;
                }
                let mut p = t.coeff * ek as f64 * x[k].powi(ek as i32 - 1);
                for (j, (&e, &xj)) in t.exponents.iter().zip(x.iter()).enumerate() {
                    if j != k {
                        p *= xj.powi(e as i32);
                    }
                }
                g[k] += p;
            }
        }
        g
    }

    fn is_affine(&self) -> bool {
        self.degree() <= 1
    }
}
