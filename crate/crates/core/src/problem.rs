//! The constrained composite program
//!
//! ```text
//! minimize  f(x) + φ(Tx)   subject to  g(x) ⪯ 0,  h(x) = 0
//! ```
//!
//! together with KKT diagnostics and constraint-qualification checks.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{least_squares, numerical_rank, singular_values, RANK_TOL};
use crate::oracle::{Oracle, SmoothFunction};
use crate::prox::{ProxFunction, ProxKind, SmoothingParam};
use crate::Vector;

/// Default tolerance for deciding that an inequality is active.
pub const ACTIVE_TOL: f64 = 1e-6;

/// An immutable problem instance. Cheap to clone; oracles are shared.
#[derive(Clone)]
pub struct ProblemSpec {
    n: usize,
    objective: Oracle,
    inequalities: Vec<Oracle>,
    equalities: Vec<Oracle>,
    splitting: DMatrix<f64>,
    phi: ProxFunction,
    strong_convexity: Option<f64>,
    known_optimum: Option<Vector>,
    nonaffine_equalities: bool,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("n", &self.n)
            .field("r", &self.inequalities.len())
            .field("s", &self.equalities.len())
            .field("m", &self.splitting.nrows())
            .field("phi", &self.phi.kind().name())
            .finish()
    }
}

pub struct ProblemBuilder {
    n: usize,
    objective: Option<Oracle>,
    inequalities: Vec<Oracle>,
    equalities: Vec<Oracle>,
    splitting: Option<(DMatrix<f64>, ProxFunction)>,
    strong_convexity: Option<f64>,
    known_optimum: Option<Vector>,
    require_full_rank: bool,
}

impl ProblemBuilder {
    pub fn objective(mut self, f: Oracle) -> Self {
        self.objective = Some(f);
        self
    }

    pub fn objective_fn<F: SmoothFunction + 'static>(self, f: F) -> Self {
        self.objective(Arc::new(f))
    }

    pub fn inequality(mut self, g: Oracle) -> Self {
        self.inequalities.push(g);
        self
    }

    pub fn inequality_fn<F: SmoothFunction + 'static>(self, g: F) -> Self {
        self.inequality(Arc::new(g))
    }

    pub fn equality(mut self, h: Oracle) -> Self {
        self.equalities.push(h);
        self
    }

    pub fn equality_fn<F: SmoothFunction + 'static>(self, h: F) -> Self {
        self.equality(Arc::new(h))
    }

    /// Sets the nonsmooth term `φ(Tx)`. Defaults to `T = I`, `φ = 0`.
    pub fn splitting(mut self, t: DMatrix<f64>, phi: ProxFunction) -> Self {
        self.splitting = Some((t, phi));
        self
    }

    pub fn strong_convexity(mut self, alpha: f64) -> Self {
        self.strong_convexity = Some(alpha);
        self
    }

    pub fn known_optimum(mut self, x: Vector) -> Self {
        self.known_optimum = Some(x);
        self
    }

    /// Skips the full-column-rank check on `T`. Consensus formulations need this:
    /// an incidence matrix always has the all-ones vector in its kernel.
    pub fn allow_rank_deficient_splitting(mut self) -> Self {
        self.require_full_rank = false;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Parameter("decision dimension must be positive".into()));
        }
        let objective = self.objective.ok_or_else(|| Error::Parameter("problem has no objective".into()))?;
        check_dim("objective input", n, objective.dim())?;
        for (i, g) in self.inequalities.iter().enumerate() {
            check_dim(&format!("inequality {i} input"), n, g.dim())?;
        }
        for (i, h) in self.equalities.iter().enumerate() {
            check_dim(&format!("equality {i} input"), n, h.dim())?;
        }
        let (splitting, phi) = self.splitting.unwrap_or_else(|| (DMatrix::identity(n, n), ProxFunction::zero(n)));
        check_dim("splitting matrix columns", n, splitting.ncols())?;
        check_dim("prox function dimension", splitting.nrows(), phi.dim())?;
        if self.require_full_rank {
            let sv = singular_values(&splitting);
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            if splitting.nrows() < n || !(smin > RANK_TOL * smax) {
                return Err(Error::Contract(format!(
                    "splitting matrix must have full column rank (σ_min = {smin:e}, σ_max = {smax:e})"
                )));
            }
        }
        if let Some(alpha) = self.strong_convexity {
            if !(alpha >= 0.0) {
                return Err(Error::Parameter(format!("strong convexity modulus must be >= 0, got {alpha}")));
            }
        }
        if let Some(x) = &self.known_optimum {
            check_dim("known optimum", n, x.len())?;
        }
        let nonaffine_equalities = self.equalities.iter().any(|h| !h.is_affine());
        if nonaffine_equalities {
            log::warn!("equality constraints are not (known to be) affine; convergence guarantees assume affine h");
        }
        Ok(ProblemSpec {
            n,
            objective,
            inequalities: self.inequalities,
            equalities: self.equalities,
            splitting,
            phi,
            strong_convexity: self.strong_convexity,
            known_optimum: self.known_optimum,
            nonaffine_equalities,
        })
    }
}

impl ProblemSpec {
    pub fn builder(n: usize) -> ProblemBuilder {
        ProblemBuilder {
            n,
            objective: None,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            splitting: None,
            strong_convexity: None,
            known_optimum: None,
            require_full_rank: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn r(&self) -> usize {
        self.inequalities.len()
    }
    pub fn s(&self) -> usize {
        self.equalities.len()
    }
    pub fn m(&self) -> usize {
        self.splitting.nrows()
    }
    pub fn objective(&self) -> &Oracle {
        &self.objective
    }
    pub fn inequalities(&self) -> &[Oracle] {
        &self.inequalities
    }
    pub fn equalities(&self) -> &[Oracle] {
        &self.equalities
    }
    pub fn splitting(&self) -> &DMatrix<f64> {
        &self.splitting
    }
    pub fn phi(&self) -> &ProxFunction {
        &self.phi
    }
    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity
    }
    pub fn known_optimum(&self) -> Option<&Vector> {
        self.known_optimum.as_ref()
    }
    pub fn has_nonaffine_equalities(&self) -> bool {
        self.nonaffine_equalities
    }

    pub fn g(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.r(), self.inequalities.iter().map(|g| g.value(x)))
    }

    pub fn h(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.s(), self.equalities.iter().map(|h| h.value(x)))
    }

    /// Rows are constraint gradients.
    pub fn g_jacobian(&self, x: &Vector) -> DMatrix<f64> {
        stack_rows(self.n, self.inequalities.iter().map(|g| g.gradient(x)))
    }

    pub fn h_jacobian(&self, x: &Vector) -> DMatrix<f64> {
        stack_rows(self.n, self.equalities.iter().map(|h| h.gradient(x)))
    }

    /// `∇f(x) + Σλᵢ∇gᵢ(x) + Σνᵢ∇hᵢ(x)`
    pub fn smooth_lagrangian_gradient(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Vector {
        let mut grad = self.objective.gradient(x);
        for (g, &l) in self.inequalities.iter().zip(lambda.iter()) {
            if l != 0.0 {
                grad.axpy(l, &g.gradient(x), 1.0);
            }
        }
        for (h, &v) in self.equalities.iter().zip(nu.iter()) {
            if v != 0.0 {
                grad.axpy(v, &h.gradient(x), 1.0);
            }
        }
        grad
    }

    /// `Tx + μw`, the argument of the Moreau envelope.
    pub fn envelope_argument(&self, x: &Vector, w: &Vector, mu: SmoothingParam) -> Vector {
        &self.splitting * x + w * mu.get()
    }
}

fn stack_rows(n: usize, rows: impl Iterator<Item = Vector>) -> DMatrix<f64> {
    let rows: Vec<Vector> = rows.collect();
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    m
}

/// Primal point with its multipliers: `λ` for `g`, `ν` for `h`, `w` for `Tx = y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktPoint {
    pub x: Vector,
    pub lambda: Vector,
    pub nu: Vector,
    pub w: Vector,
}

impl KktPoint {
    pub fn new(x: Vector, lambda: Vector, nu: Vector, w: Vector) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|&l| !(l >= 0.0)) {
            return Err(Error::Contract(format!("inequality multiplier {i} must be >= 0, got {}", lambda[i])));
        }
        Ok(KktPoint { x, lambda, nu, w })
    }

    pub fn check_dims(&self, spec: &ProblemSpec) -> Result<()> {
        check_dim("x", spec.n(), self.x.len())?;
        check_dim("lambda", spec.r(), self.lambda.len())?;
        check_dim("nu", spec.s(), self.nu.len())?;
        check_dim("w", spec.m(), self.w.len())
    }
}

/// Norms of the smoothed KKT residual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `‖∇f + Σλ∇g + Σν∇h + Tᵀ∇φ_μ(Tx + μw)‖`
    pub stationarity: f64,
    /// `‖max(g, 0)‖`
    pub primal_ineq: f64,
    /// `‖h‖`
    pub primal_eq: f64,
    /// `‖λ ⊙ g‖`
    pub complementarity: f64,
    /// `‖Tx − prox_{μφ}(Tx + μw)‖`, i.e. `Tx = y` at the inner minimizer `y`.
    pub splitting: f64,
    pub total: f64,
}

/// Smoothed KKT residual at `pt`.
pub fn kkt_residual(spec: &ProblemSpec, pt: &KktPoint, mu: SmoothingParam) -> Result<ResidualReport> {
    pt.check_dims(spec)?;
    if let Some(i) = pt.lambda.iter().position(|&l| !(l >= 0.0)) {
        return Err(Error::Contract(format!("inequality multiplier {i} must be >= 0, got {}", pt.lambda[i])));
    }
    let x = &pt.x;
    let v = spec.envelope_argument(x, &pt.w, mu);
    let prox = spec.phi().prox(&v, mu)?;
    let w_smooth = (&v - &prox) / mu.get();

    let mut grad = spec.smooth_lagrangian_gradient(x, &pt.lambda, &pt.nu);
    grad += spec.splitting().transpose() * &w_smooth;

    let g = spec.g(x);
    let h = spec.h(x);
    let stationarity = grad.norm();
    let primal_ineq = g.map(|gi| gi.max(0.0)).norm();
    let primal_eq = h.norm();
    let complementarity = pt.lambda.component_mul(&g).norm();
    let splitting = (spec.splitting() * x - prox).norm();
    let total = [stationarity, primal_ineq, primal_eq, complementarity, splitting].into_iter().fold(0.0, f64::max);
    Ok(ResidualReport { stationarity, primal_ineq, primal_eq, complementarity, splitting, total })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LicqReport {
    pub satisfied: bool,
    pub active_set: Vec<usize>,
    pub rank: usize,
}

/// Linear independence of the equality gradients and the active inequality gradients.
pub fn check_licq(spec: &ProblemSpec, x: &Vector, active_tol: f64) -> Result<LicqReport> {
    check_dim("x", spec.n(), x.len())?;
    if !(active_tol > 0.0) {
        return Err(Error::Parameter(format!("active tolerance must be > 0, got {active_tol}")));
    }
    let g = spec.g(x);
    let active_set: Vec<usize> = (0..spec.r()).filter(|&i| g[i].abs() <= active_tol).collect();
    let rows = spec
        .equalities()
        .iter()
        .map(|h| h.gradient(x))
        .chain(active_set.iter().map(|&i| spec.inequalities()[i].gradient(x)));
    let jac = stack_rows(spec.n(), rows);
    let rank = numerical_rank(&jac, RANK_TOL);
    Ok(LicqReport { satisfied: rank == jac.nrows(), active_set, rank })
}

/// Strict feasibility: `g(x) ≺ −tol` and `‖h(x)‖ ≤ tol`.
pub fn check_slater(spec: &ProblemSpec, candidate: &Vector, tol: f64) -> Result<bool> {
    check_dim("candidate", spec.n(), candidate.len())?;
    let strict = spec.g(candidate).iter().all(|&gi| gi < -tol);
    Ok(strict && spec.h(candidate).norm() <= tol)
}

/// Worst relative error between supplied gradients and central differences,
/// over `f`, every `gᵢ` and every `hᵢ`.
pub fn verify_gradients(spec: &ProblemSpec, x: &Vector) -> Result<f64> {
    check_dim("x", spec.n(), x.len())?;
    let worst = std::iter::once(spec.objective())
        .chain(spec.inequalities())
        .chain(spec.equalities())
        .map(|f| gradient_error(f.as_ref(), x))
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Relative error of one oracle's gradient against central differences.
pub fn gradient_error(f: &dyn SmoothFunction, x: &Vector) -> f64 {
    let supplied = f.gradient(x);
    let fd = central_difference(|z| f.value(z), x);
    let scale = supplied.norm().max(fd.norm());
    let err = (supplied - fd).norm();
    if scale < 1e-8 {
        err
    } else {
        err / scale
    }
}

pub(crate) fn central_difference(f: impl Fn(&Vector) -> f64, x: &Vector) -> Vector {
    let mut grad = Vector::zeros(x.len());
    let mut z = x.clone();
    for i in 0..x.len() {
        let step = 6e-6 * x[i].abs().max(1.0);
        z[i] = x[i] + step;
        let up = f(&z);
        z[i] = x[i] - step;
        let down = f(&z);
        z[i] = x[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    grad
}

/// Recovers multipliers at a candidate optimum by least squares on the
/// stationarity equation.
///
/// Inactive inequalities get `λᵢ = 0`. Components of `w` that the
/// equilibrium condition `w = ∇φ_μ(Tx + μw)` pins down are fixed; the rest are
/// unknowns alongside the active `λ` and all of `ν`. Fails if an active
/// multiplier comes out negative beyond roundoff.
pub fn recover_multipliers(spec: &ProblemSpec, x: &Vector, active_tol: f64) -> Result<KktPoint> {
    check_dim("x", spec.n(), x.len())?;
    let n = spec.n();
    let m = spec.m();
    let y = spec.splitting() * x;
    let g = spec.g(x);
    let active: Vec<usize> = (0..spec.r()).filter(|&i| g[i] >= -active_tol).collect();

    let mut w_fixed = Vector::zeros(m);
    let mut free: Vec<usize> = Vec::new();
    match spec.phi().kind() {
        ProxKind::Zero => {}
        ProxKind::Quadratic { weight } => w_fixed = &y * *weight,
        ProxKind::IndicatorZero => free.extend(0..m),
        ProxKind::L1Norm => {
            for i in 0..m {
                if y[i].abs() > active_tol {
                    w_fixed[i] = y[i].signum();
                } else {
                    free.push(i);
                }
            }
        }
        ProxKind::IndicatorBox { lower, upper } => {
            for i in 0..m {
                if (y[i] - lower[i]).abs() <= active_tol || (y[i] - upper[i]).abs() <= active_tol {
                    free.push(i);
                }
            }
        }
    }

    let cols = active.len() + spec.s() + free.len();
    let mut a = DMatrix::zeros(n, cols);
    let mut c = 0;
    for &i in &active {
        a.set_column(c, &spec.inequalities()[i].gradient(x));
        c += 1;
    }
    for h in spec.equalities() {
        a.set_column(c, &h.gradient(x));
        c += 1;
    }
    let tt = spec.splitting().transpose();
    for &j in &free {
        a.set_column(c, &tt.column(j));
        c += 1;
    }
    let rhs = -(spec.objective().gradient(x) + &tt * &w_fixed);
    let u = least_squares(&a, &rhs);

    let mut lambda = Vector::zeros(spec.r());
    for (k, &i) in active.iter().enumerate() {
        let l = u[k];
        if l < -1e-9 {
            return Err(Error::Contract(format!(
                "recovered multiplier for inequality {i} is negative ({l}); x is not a KKT point"
            )));
        }
        lambda[i] = l.max(0.0);
    }
    let nu = Vector::from_iterator(spec.s(), u.iter().skip(active.len()).take(spec.s()).cloned());
    let mut w = w_fixed;
    for (k, &j) in free.iter().enumerate() {
        w[j] = u[active.len() + spec.s() + k];
    }
    KktPoint::new(x.clone(), lambda, nu, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle, QuadraticFunction};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn mu1() -> SmoothingParam {
        SmoothingParam::new(1.0).unwrap()
    }

    fn sq_norm(n: usize) -> ProblemSpec {
        ProblemSpec::builder(n)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(n)))
            .build()
            .unwrap()
    }

    #[test]
    fn residual_of_unconstrained_quadratic() {
        let spec = sq_norm(1);
        let at_origin = KktPoint::new(v(&[0.0]), v(&[]), v(&[]), v(&[0.0])).unwrap();
        assert_eq!(kkt_residual(&spec, &at_origin, mu1()).unwrap().total, 0.0);
        let at_one = KktPoint::new(v(&[1.0]), v(&[]), v(&[]), v(&[0.0])).unwrap();
        let rep = kkt_residual(&spec, &at_one, mu1()).unwrap();
        assert_eq!(rep.total, 2.0);
        assert_eq!(rep.stationarity, 2.0);
    }

    #[test]
    fn negative_multiplier_is_rejected() {
        assert!(matches!(KktPoint::new(v(&[0.0]), v(&[-1.0]), v(&[]), v(&[0.0])), Err(Error::Contract(_))));
        let spec = ProblemSpec::builder(1)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &v(&[0.0])))
            .inequality_fn(QuadraticFunction::affine(v(&[1.0]), -1.0))
            .build()
            .unwrap();
        let pt = KktPoint { x: v(&[0.0]), lambda: v(&[-0.5]), nu: v(&[]), w: v(&[0.0]) };
        assert!(matches!(kkt_residual(&spec, &pt, mu1()), Err(Error::Contract(_))));
    }

    #[test]
    fn licq_examples() {
        // g(x) = x1² − 1 at (1, 0)
        let g = oracle(2, |x| x[0] * x[0] - 1.0, |x| v(&[2.0 * x[0], 0.0]));
        let spec = ProblemSpec::builder(2)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(2)))
            .inequality(g)
            .build()
            .unwrap();
        let rep = check_licq(&spec, &v(&[1.0, 0.0]), 1e-8).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.rank, 1);
        assert_eq!(rep.active_set, vec![0]);

        // g1 = g2 = x1, both active at x1 = 0
        let lin = || Arc::new(QuadraticFunction::affine(v(&[1.0, 0.0]), 0.0)) as Oracle;
        let dup = ProblemSpec::builder(2)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(2)))
            .inequality(lin())
            .inequality(lin())
            .build()
            .unwrap();
        let rep = check_licq(&dup, &v(&[0.0, 3.0]), 1e-8).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.rank, 1);
        assert!(check_licq(&dup, &v(&[0.0, 3.0]), 0.0).is_err());
    }

    #[test]
    fn slater_examples() {
        let spec = ProblemSpec::builder(1)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &v(&[0.0])))
            .inequality_fn(QuadraticFunction::affine(v(&[1.0]), -1.0))
            .build()
            .unwrap();
        assert!(check_slater(&spec, &v(&[0.0]), 1e-9).unwrap());
        assert!(!check_slater(&spec, &v(&[1.0]), 1e-9).unwrap());
    }

    #[test]
    fn gradient_check_flags_wrong_gradient() {
        let good = ProblemSpec::builder(3)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(3)))
            .build()
            .unwrap();
        let x = v(&[0.3, -1.2, 2.0]);
        assert!(verify_gradients(&good, &x).unwrap() <= 1e-7);

        let bad = ProblemSpec::builder(3)
            .objective(oracle(3, |x: &Vector| x.norm_squared(), |x: &Vector| x * 4.0))
            .build()
            .unwrap();
        let err = verify_gradients(&bad, &x).unwrap();
        assert!((err - 0.5).abs() < 1e-6, "err = {err}");
    }

    #[test]
    fn splitting_must_have_full_column_rank() {
        let t = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let res = ProblemSpec::builder(2)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(2)))
            .splitting(t.clone(), ProxFunction::indicator_zero(1))
            .build();
        assert!(matches!(res, Err(Error::Contract(_))));
        let ok = ProblemSpec::builder(2)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(2)))
            .splitting(t, ProxFunction::indicator_zero(1))
            .allow_rank_deficient_splitting()
            .build();
        assert!(ok.is_ok());
    }

    #[test]
    fn dimension_checks() {
        let res =
            ProblemSpec::builder(2).objective_fn(QuadraticFunction::scaled_distance(1.0, &Vector::zeros(3))).build();
        assert!(matches!(res, Err(Error::Dimension { .. })));
        let spec = sq_norm(2);
        let pt = KktPoint::new(v(&[0.0]), v(&[]), v(&[]), v(&[0.0, 0.0])).unwrap();
        assert!(matches!(kkt_residual(&spec, &pt, mu1()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn recovers_equality_multiplier() {
        // min ‖x − c‖² s.t. x1 + x2 = 1, c = (1, 1) → x* = (0.5, 0.5), ν* = 1
        let spec = ProblemSpec::builder(2)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &v(&[1.0, 1.0])))
            .equality_fn(QuadraticFunction::affine(v(&[1.0, 1.0]), -1.0))
            .build()
            .unwrap();
        let pt = recover_multipliers(&spec, &v(&[0.5, 0.5]), ACTIVE_TOL).unwrap();
        assert!((pt.nu[0] - 1.0).abs() < 1e-12);
        assert!(kkt_residual(&spec, &pt, mu1()).unwrap().total < 1e-12);
    }
}
