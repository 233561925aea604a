//! Closed-form proximal operators and Moreau envelopes.
//!
//! For a proper closed convex `φ` and smoothing `μ > 0`:
//!
//! ```text
//! prox_{μφ}(v) = argmin_y  φ(y) + ‖y − v‖² / (2μ)
//! φ_μ(v)       = min_y     φ(y) + ‖y − v‖² / (2μ)
//! ∇φ_μ(v)      = (v − prox_{μφ}(v)) / μ
//! ```
//!
//! Only functions whose prox has a closed form are supported.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::Vector;

/// Smoothing parameter `μ` of the Moreau envelope. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Parameter(format!("smoothing parameter must be finite and > 0, got {mu}")));
        }
        Ok(SmoothingParam(mu))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for SmoothingParam {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mu = f64::deserialize(d)?;
        SmoothingParam::new(mu).map_err(serde::de::Error::custom)
    }
}

/// A value of an extended-real-valued function: finite, or `+∞` outside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    Infinite,
}

impl ExtendedValue {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedValue::Finite(v) => Some(v),
            ExtendedValue::Infinite => None,
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(v) => write!(f, "{v}"),
            ExtendedValue::Infinite => f.write_str("+inf"),
        }
    }
}

/// The registered nonsmooth terms.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxKind {
    /// `‖y‖₁`
    L1Norm,
    /// Indicator of `{0}`.
    IndicatorZero,
    /// Indicator of the box `lower ≤ y ≤ upper`.
    IndicatorBox { lower: Vector, upper: Vector },
    /// `(weight / 2)‖y‖²`
    Quadratic { weight: f64 },
    /// `φ ≡ 0`
    Zero,
}

impl ProxKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProxKind::L1Norm => "l1",
            ProxKind::IndicatorZero => "indicator_zero",
            ProxKind::IndicatorBox { .. } => "box",
            ProxKind::Quadratic { .. } => "quadratic",
            ProxKind::Zero => "zero",
        }
    }
}

/// A nonsmooth convex function `φ : ℝ^dim → ℝ ∪ {+∞}` with a closed-form prox.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxFunction {
    kind: ProxKind,
    dim: usize,
}

impl ProxFunction {
    pub fn new(kind: ProxKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("prox function dimension must be positive".into()));
        }
        match &kind {
            ProxKind::IndicatorBox { lower, upper } => {
                check_dim("box lower bound", dim, lower.len())?;
                check_dim("box upper bound", dim, upper.len())?;
                for i in 0..dim {
                    if !(lower[i] <= upper[i]) {
                        return Err(Error::Parameter(format!(
                            "box bounds need lower <= upper, component {i}: {} > {}",
                            lower[i], upper[i]
                        )));
                    }
                }
            }
            ProxKind::Quadratic { weight } if !(*weight >= 0.0) || !weight.is_finite() => {
                return Err(Error::Parameter(format!("quadratic weight must be finite and >= 0, got {weight}")));
            }
            _ => {}
        }
        Ok(ProxFunction { kind, dim })
    }

    pub fn l1(dim: usize) -> Self {
        ProxFunction { kind: ProxKind::L1Norm, dim }
    }

    pub fn zero(dim: usize) -> Self {
        ProxFunction { kind: ProxKind::Zero, dim }
    }

    pub fn indicator_zero(dim: usize) -> Self {
        ProxFunction { kind: ProxKind::IndicatorZero, dim }
    }

    pub fn kind(&self) -> &ProxKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `φ(y)`, with `+∞` outside the domain of indicator kinds.
    pub fn value(&self, y: &Vector) -> Result<ExtendedValue> {
        check_dim("prox function argument", self.dim, y.len())?;
        let v = match &self.kind {
            ProxKind::L1Norm => ExtendedValue::Finite(y.iter().map(|c| c.abs()).sum()),
            ProxKind::IndicatorZero => {
                if y.iter().all(|&c| c == 0.0) {
                    ExtendedValue::Finite(0.0)
                } else {
                    ExtendedValue::Infinite
                }
            }
            ProxKind::IndicatorBox { lower, upper } => {
                let inside = (0..self.dim).all(|i| lower[i] <= y[i] && y[i] <= upper[i]);
                if inside {
                    ExtendedValue::Finite(0.0)
                } else {
                    ExtendedValue::Infinite
                }
            }
            ProxKind::Quadratic { weight } => ExtendedValue::Finite(0.5 * weight * y.norm_squared()),
            ProxKind::Zero => ExtendedValue::Finite(0.0),
        };
        Ok(v)
    }

    /// `prox_{μφ}(v)`.
    pub fn prox(&self, v: &Vector, mu: SmoothingParam) -> Result<Vector> {
        check_dim("prox argument", self.dim, v.len())?;
        let mu = mu.get();
        let p = match &self.kind {
            ProxKind::L1Norm => v.map(|c| soft_threshold(c, mu)),
            ProxKind::IndicatorZero => Vector::zeros(self.dim),
            ProxKind::IndicatorBox { lower, upper } => Vector::from_fn(self.dim, |i, _| v[i].clamp(lower[i], upper[i])),
            ProxKind::Quadratic { weight } => v / (1.0 + mu * weight),
            ProxKind::Zero => v.clone(),
        };
        Ok(p)
    }

    /// Moreau envelope `φ_μ(v)`. Finite everywhere.
    pub fn moreau_value(&self, v: &Vector, mu: SmoothingParam) -> Result<f64> {
        let p = self.prox(v, mu)?;
        // p lies in dom φ for every kind, so the value is finite.
        let phi_p = self.value(&p)?.finite().ok_or_else(|| Error::Domain("prox landed outside dom(φ)".into()))?;
        Ok(phi_p + (&p - v).norm_squared() / (2.0 * mu.get()))
    }

    /// `∇φ_μ(v) = (v − prox_{μφ}(v)) / μ`.
    pub fn moreau_grad(&self, v: &Vector, mu: SmoothingParam) -> Result<Vector> {
        let p = self.prox(v, mu)?;
        Ok((v - p) / mu.get())
    }

    /// Inverse Lipschitz constant `ℓ` of the subgradient map, when one exists.
    ///
    /// `None` for kinds whose subdifferential is not single-valued Lipschitz
    /// (ℓ1 and indicators). `Zero` has a constant gradient, so `ℓ = +∞`.
    pub fn subgradient_ell(&self) -> Option<f64> {
        match &self.kind {
            ProxKind::Quadratic { weight } if *weight > 0.0 => Some(1.0 / weight),
            ProxKind::Quadratic { .. } | ProxKind::Zero => Some(f64::INFINITY),
            _ => None,
        }
    }
}

/// `sign(v)·max(|v| − μ, 0)`
#[inline]
pub fn soft_threshold(v: f64, mu: f64) -> f64 {
    if v > mu {
        v - mu
    } else if v < -mu {
        v + mu
    } else {
        0.0
    }
}
