//! Proximal augmented Lagrangian and the projection-free primal-dual flow.
//!
//! With `v = Tx + μw`, the proximal augmented Lagrangian is
//!
//! ```text
//! L_μ(x; λ, ν, w) = f(x) + φ_μ(v) + λᵀg(x) + νᵀh(x) − (μ/2)‖w‖²
//! ```
//!
//! and the flow performs gradient descent in `x`, gradient ascent in `(ν, w)`
//! and mirror ascent in `λ` under the potential `(η/2)λ² + λ ln λ`:
//!
//! ```text
//! ẋ = −∇f(x) − Tᵀ∇φ_μ(v) − Σλᵢ∇gᵢ(x) − Σνᵢ∇hᵢ(x)
//! λ̇ = [λ ⊘ (1 + η ⊙ λ)] ⊙ g(x)
//! ν̇ = h(x)
//! ẇ = μ∇φ_μ(v) − μw
//! ```
//!
//! The multiplier update keeps `λ` in the positive orthant without any projection.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::problem::{KktPoint, ProblemSpec};
use crate::prox::SmoothingParam;
use crate::Vector;

/// Multipliers below this are treated as zero when forming the support `Ω`.
pub const OMEGA_THRESHOLD: f64 = 1e-9;

/// State `(x, λ, ν, w)` of the flow at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalDualState {
    pub x: Vector,
    pub lambda: Vector,
    pub nu: Vector,
    pub w: Vector,
    pub t: f64,
}

impl PrimalDualState {
    /// Validates `λ ⪰ 0`.
    pub fn new(x: Vector, lambda: Vector, nu: Vector, w: Vector) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|&l| !(l >= 0.0)) {
            return Err(Error::Contract(format!("lambda[{i}] = {} is negative", lambda[i])));
        }
        Ok(PrimalDualState { x, lambda, nu, w, t: 0.0 })
    }

    /// An initial condition for integration. Requires `λ ≻ 0`: a zero
    /// component stays zero forever under the mirror update, which silently
    /// drops that constraint.
    pub fn initial(x: Vector, lambda: Vector, nu: Vector, w: Vector) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|&l| !(l > 0.0)) {
            return Err(Error::Contract(format!(
                "initial lambda[{i}] = {} must be strictly positive; a zero multiplier never moves",
                lambda[i]
            )));
        }
        Self::new(x, lambda, nu, w)
    }

    /// `x = 0, λ = 1, ν = 0, w = 0`.
    pub fn default_for(spec: &ProblemSpec) -> Self {
        PrimalDualState {
            x: Vector::zeros(spec.n()),
            lambda: Vector::from_element(spec.r(), 1.0),
            nu: Vector::zeros(spec.s()),
            w: Vector::zeros(spec.m()),
            t: 0.0,
        }
    }

    pub fn from_kkt(pt: &KktPoint) -> Self {
        PrimalDualState { x: pt.x.clone(), lambda: pt.lambda.clone(), nu: pt.nu.clone(), w: pt.w.clone(), t: 0.0 }
    }

    pub fn to_kkt(&self) -> KktPoint {
        KktPoint { x: self.x.clone(), lambda: self.lambda.clone(), nu: self.nu.clone(), w: self.w.clone() }
    }

    pub fn check_dims(&self, spec: &ProblemSpec) -> Result<()> {
        check_dim("state x", spec.n(), self.x.len())?;
        check_dim("state lambda", spec.r(), self.lambda.len())?;
        check_dim("state nu", spec.s(), self.nu.len())?;
        check_dim("state w", spec.m(), self.w.len())
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout { n: self.x.len(), r: self.lambda.len(), s: self.nu.len(), m: self.w.len() }
    }

    /// `[x, λ, ν, w]` as one vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.layout().len());
        z.extend(self.x.iter());
        z.extend(self.lambda.iter());
        z.extend(self.nu.iter());
        z.extend(self.w.iter());
        z
    }

    pub fn from_flat(layout: StateLayout, z: &[f64], t: f64) -> Self {
        let (x, rest) = z.split_at(layout.n);
        let (lambda, rest) = rest.split_at(layout.r);
        let (nu, w) = rest.split_at(layout.s);
        PrimalDualState {
            x: Vector::from_column_slice(x),
            lambda: Vector::from_column_slice(lambda),
            nu: Vector::from_column_slice(nu),
            w: Vector::from_column_slice(w),
            t,
        }
    }

    /// Euclidean distance over all blocks.
    pub fn distance(&self, other: &PrimalDualState) -> f64 {
        ((&self.x - &other.x).norm_squared()
            + (&self.lambda - &other.lambda).norm_squared()
            + (&self.nu - &other.nu).norm_squared()
            + (&self.w - &other.w).norm_squared())
        .sqrt()
    }
}

/// Block sizes of a flattened state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub m: usize,
}

impl StateLayout {
    pub fn of(spec: &ProblemSpec) -> Self {
        StateLayout { n: spec.n(), r: spec.r(), s: spec.s(), m: spec.m() }
    }

    pub fn len(&self) -> usize {
        self.n + self.r + self.s + self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lambda_range(&self) -> std::ops::Range<usize> {
        self.n..self.n + self.r
    }
}

/// Time derivative of a [`PrimalDualState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: Vector,
    pub dlambda: Vector,
    pub dnu: Vector,
    pub dw: Vector,
}

impl StateDerivative {
    pub fn norm(&self) -> f64 {
        (self.dx.norm_squared() + self.dlambda.norm_squared() + self.dnu.norm_squared() + self.dw.norm_squared()).sqrt()
    }

    pub fn write_flat(&self, out: &mut [f64]) {
        let parts = [&self.dx, &self.dlambda, &self.dnu, &self.dw];
        let mut k = 0;
        for p in parts {
            for &c in p.iter() {
                out[k] = c;
                k += 1;
            }
        }
    }
}

/// Smoothing `μ` and the mirror weights `η ≻ 0`, one per inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsParams {
    pub mu: SmoothingParam,
    pub eta: Vector,
}

impl DynamicsParams {
    pub fn new(mu: SmoothingParam, eta: Vector) -> Result<Self> {
        if let Some(i) = eta.iter().position(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Parameter(format!("eta[{i}] = {} must be finite and > 0", eta[i])));
        }
        Ok(DynamicsParams { mu, eta })
    }

    pub fn uniform(mu: f64, eta: f64, r: usize) -> Result<Self> {
        Self::new(SmoothingParam::new(mu)?, Vector::from_element(r, eta))
    }

    pub fn with_mu(&self, mu: SmoothingParam) -> Self {
        DynamicsParams { mu, eta: self.eta.clone() }
    }
}

/// Value of the proximal augmented Lagrangian.
pub fn pal_value(spec: &ProblemSpec, state: &PrimalDualState, mu: SmoothingParam) -> Result<f64> {
    state.check_dims(spec)?;
    let x = &state.x;
    let v = spec.envelope_argument(x, &state.w, mu);
    Ok(spec.objective().value(x)
        + spec.phi().moreau_value(&v, mu)?
        + state.lambda.dot(&spec.g(x))
        + state.nu.dot(&spec.h(x))
        - 0.5 * mu.get() * state.w.norm_squared())
}

/// `∇ₓL_μ`.
pub fn pal_grad_x(spec: &ProblemSpec, state: &PrimalDualState, mu: SmoothingParam) -> Result<Vector> {
    state.check_dims(spec)?;
    let v = spec.envelope_argument(&state.x, &state.w, mu);
    let env_grad = spec.phi().moreau_grad(&v, mu)?;
    let mut grad = spec.smooth_lagrangian_gradient(&state.x, &state.lambda, &state.nu);
    grad += spec.splitting().transpose() * env_grad;
    Ok(grad)
}

/// `(∇_λ L_μ, ∇_ν L_μ, ∇_w L_μ) = (g(x), h(x), μ∇φ_μ(v) − μw)`.
pub fn pal_grad_dual(
    spec: &ProblemSpec,
    state: &PrimalDualState,
    mu: SmoothingParam,
) -> Result<(Vector, Vector, Vector)> {
    state.check_dims(spec)?;
    let v = spec.envelope_argument(&state.x, &state.w, mu);
    let env_grad = spec.phi().moreau_grad(&v, mu)?;
    let m = mu.get();
    Ok((spec.g(&state.x), spec.h(&state.x), env_grad * m - &state.w * m))
}

/// Right-hand side of the projection-free primal-dual flow.
pub fn vector_field(spec: &ProblemSpec, state: &PrimalDualState, params: &DynamicsParams) -> Result<StateDerivative> {
    state.check_dims(spec)?;
    check_dim("eta", spec.r(), params.eta.len())?;
    let mu = params.mu;
    let x = &state.x;
    let v = spec.envelope_argument(x, &state.w, mu);
    let env_grad = spec.phi().moreau_grad(&v, mu)?;

    let mut dx = spec.smooth_lagrangian_gradient(x, &state.lambda, &state.nu);
    dx += spec.splitting().transpose() * &env_grad;
    dx.neg_mut();

    let g = spec.g(x);
    let dlambda = Vector::from_fn(spec.r(), |i, _| {
        let l = state.lambda[i];
        l / (1.0 + params.eta[i] * l) * g[i]
    });
    let dnu = spec.h(x);
    let dw = (env_grad - &state.w) * mu.get();
    Ok(StateDerivative { dx, dlambda, dnu, dw })
}

/// `D_ψ(a, b) = a ln(a/b) − a + b`, the Bregman divergence of `ψ(t) = t ln t`.
///
/// Defined for `a ≥ 0`, `b > 0` with `0 ln 0 = 0`.
pub fn bregman_entropy(a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) || !(a >= 0.0) {
        return Err(Error::Domain(format!("entropy Bregman divergence undefined at ({a}, {b})")));
    }
    let a_ln = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    Ok(a_ln - a + b)
}

/// Lyapunov function value and its four parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    /// Indices with `λ*ᵢ > 0`.
    pub omega: Vec<usize>,
}

/// Lyapunov function of the flow around a reference saddle point `star`:
///
/// ```text
/// V1 = ½‖x − x*‖²
/// V2 = ½ Σ ηᵢ(λᵢ − λ*ᵢ)²
/// V3 = Σ_{i∈Ω} D_ψ(λᵢ, λ*ᵢ) + Σ_{i∉Ω} (λᵢ − λ*ᵢ)²
/// V4 = ½‖ν − ν*‖² + ½‖w − w*‖²
/// ```
pub fn lyapunov_value(
    state: &PrimalDualState,
    star: &PrimalDualState,
    params: &DynamicsParams,
) -> Result<LyapunovReport> {
    check_dim("state x", star.x.len(), state.x.len())?;
    check_dim("state lambda", star.lambda.len(), state.lambda.len())?;
    check_dim("state nu", star.nu.len(), state.nu.len())?;
    check_dim("state w", star.w.len(), state.w.len())?;
    check_dim("eta", star.lambda.len(), params.eta.len())?;
    if let Some(i) = star.lambda.iter().position(|&l| !(l >= 0.0)) {
        return Err(Error::Contract(format!("reference lambda[{i}] is negative")));
    }

    let v1 = 0.5 * (&state.x - &star.x).norm_squared();
    let mut v2 = 0.0;
    let mut v3 = 0.0;
    let mut omega = Vec::new();
    for i in 0..star.lambda.len() {
        let (l, ls) = (state.lambda[i], star.lambda[i]);
        v2 += 0.5 * params.eta[i] * (l - ls).powi(2);
        if ls > OMEGA_THRESHOLD {
            if !(l > 0.0) {
                return Err(Error::Domain(format!(
                    "lambda[{i}] = {l} must be positive where the reference multiplier is active"
                )));
            }
            v3 += bregman_entropy(l, ls)?;
            omega.push(i);
        } else {
            v3 += (l - ls).powi(2);
        }
    }
    let v4 = 0.5 * (&state.nu - &star.nu).norm_squared() + 0.5 * (&state.w - &star.w).norm_squared();
    Ok(LyapunovReport { v: v1 + v2 + v3 + v4, v1, v2, v3, v4, omega })
}

/// The modulus `μℓ/(μ + ℓ) + 2μ` claimed for `L_μ` in `(λ, ν, w)`, where
/// `1/ℓ` is the Lipschitz constant of `∂φ`. `ℓ = +∞` gives the limit `3μ`.
///
/// Kept for reference only. `L_μ` is affine in `(λ, ν)`, and its curvature in
/// `w` is exactly `−μℓ/(μ + ℓ)` for quadratic `φ`, so the bound that holds is
/// the first term alone and in `w` alone.
pub fn concavity_modulus(mu: f64, ell: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Parameter(format!("mu must be finite and > 0, got {mu}")));
    }
    if !(ell > 0.0) {
        return Err(Error::Parameter(format!("ell must be > 0, got {ell}")));
    }
    let harmonic = if ell.is_infinite() { mu } else { mu * ell / (mu + ell) };
    Ok(harmonic + 2.0 * mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::QuadraticFunction;
    use crate::prox::ProxFunction;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn mu(m: f64) -> SmoothingParam {
        SmoothingParam::new(m).unwrap()
    }

    #[test]
    fn pal_collapses_to_objective() {
        let c = v(&[1.0, -2.0]);
        let spec = ProblemSpec::builder(2).objective_fn(QuadraticFunction::scaled_distance(1.0, &c)).build().unwrap();
        let st = PrimalDualState::new(v(&[0.5, 0.5]), v(&[]), v(&[]), v(&[0.0, 0.0])).unwrap();
        let f = spec.objective().value(&st.x);
        assert_eq!(pal_value(&spec, &st, mu(0.3)).unwrap(), f);
    }

    #[test]
    fn pal_with_indicator_envelope() {
        let spec = ProblemSpec::builder(1)
            .objective_fn(QuadraticFunction::affine(v(&[0.0]), 0.0))
            .splitting(DMatrix::identity(1, 1), ProxFunction::indicator_zero(1))
            .build()
            .unwrap();
        let st = PrimalDualState::new(v(&[1.0]), v(&[]), v(&[]), v(&[0.0])).unwrap();
        assert_eq!(pal_value(&spec, &st, mu(1.0)).unwrap(), 0.5);
    }

    #[test]
    fn pal_term_by_term() {
        // f = x², g = x − 1, λ = 2, x = 3: 9 + 2·2 = 13
        let spec = ProblemSpec::builder(1)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &v(&[0.0])))
            .inequality_fn(QuadraticFunction::affine(v(&[1.0]), -1.0))
            .build()
            .unwrap();
        let st = PrimalDualState::new(v(&[3.0]), v(&[2.0]), v(&[]), v(&[0.0])).unwrap();
        assert_eq!(pal_value(&spec, &st, mu(0.5)).unwrap(), 13.0);
    }

    #[test]
    fn zero_multiplier_is_frozen() {
        let spec = ProblemSpec::builder(1)
            .objective_fn(QuadraticFunction::scaled_distance(1.0, &v(&[0.0])))
            .inequality_fn(QuadraticFunction::affine(v(&[1.0]), 5.0))
            .build()
            .unwrap();
        let st = PrimalDualState::new(v(&[2.0]), v(&[0.0]), v(&[]), v(&[0.0])).unwrap();
        let params = DynamicsParams::uniform(0.1, 1.0, 1).unwrap();
        let d = vector_field(&spec, &st, &params).unwrap();
        assert_eq!(d.dlambda[0], 0.0);
        assert_eq!(d.dx[0], -4.0);
    }

    #[test]
    fn initial_state_requires_positive_multipliers() {
        let res = PrimalDualState::initial(v(&[0.0]), v(&[1.0, 0.0]), v(&[]), v(&[0.0]));
        assert!(matches!(res, Err(Error::Contract(_))));
        assert!(PrimalDualState::new(v(&[0.0]), v(&[0.0]), v(&[]), v(&[0.0])).is_ok());
    }

    #[test]
    fn bregman_values() {
        assert_eq!(bregman_entropy(1.0, 1.0).unwrap(), 0.0);
        let d = bregman_entropy(2.0, 1.0).unwrap();
        assert!((d - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((d - 0.3863).abs() < 1e-4);
        assert_eq!(bregman_entropy(0.0, 2.0).unwrap(), 2.0);
        assert!(bregman_entropy(1.0, 0.0).is_err());
    }

    #[test]
    fn lyapunov_is_zero_at_reference() {
        let star = PrimalDualState::new(v(&[1.0, 2.0]), v(&[0.5, 0.0]), v(&[3.0]), v(&[1.0])).unwrap();
        let params = DynamicsParams::uniform(0.1, 2.0, 2).unwrap();
        let rep = lyapunov_value(&star, &star, &params).unwrap();
        assert_eq!(rep.v, 0.0);
        assert_eq!(rep.omega, vec![0]);
    }

    #[test]
    fn lyapunov_without_multipliers() {
        let star = PrimalDualState::new(v(&[1.0]), v(&[]), v(&[]), v(&[2.0])).unwrap();
        let st = PrimalDualState::new(v(&[3.0]), v(&[]), v(&[]), v(&[-1.0])).unwrap();
        let params = DynamicsParams::uniform(0.1, 1.0, 0).unwrap();
        let rep = lyapunov_value(&st, &star, &params).unwrap();
        assert_eq!(rep.v, 0.5 * 4.0 + 0.5 * 9.0);
    }

    #[test]
    fn lyapunov_domain_error() {
        let star = PrimalDualState::new(v(&[0.0]), v(&[1.0]), v(&[]), v(&[0.0])).unwrap();
        let st = PrimalDualState::new(v(&[0.0]), v(&[0.0]), v(&[]), v(&[0.0])).unwrap();
        let params = DynamicsParams::uniform(0.1, 1.0, 1).unwrap();
        assert!(matches!(lyapunov_value(&st, &star, &params), Err(Error::Domain(_))));
    }

    #[test]
    fn modulus_values() {
        assert_eq!(concavity_modulus(1.0, 1.0).unwrap(), 2.5);
        assert_eq!(concavity_modulus(2.0, 2.0).unwrap(), 5.0);
        assert!(concavity_modulus(1e-12, 1.0).unwrap() < 1e-11);
        assert_eq!(concavity_modulus(1.0, f64::INFINITY).unwrap(), 3.0);
        assert!(concavity_modulus(0.0, 1.0).is_err());
        assert!(concavity_modulus(1.0, -1.0).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let st = PrimalDualState::new(v(&[1.0, 2.0]), v(&[0.5]), v(&[3.0]), v(&[4.0, 5.0])).unwrap();
        let back = PrimalDualState::from_flat(st.layout(), &st.to_flat(), 0.0);
        assert_eq!(back, st);
    }

    #[test]
    fn eta_must_be_positive() {
        assert!(DynamicsParams::uniform(0.1, 0.0, 2).is_err());
        assert!(DynamicsParams::uniform(0.1, 1.0, 2).is_ok());
    }
}
