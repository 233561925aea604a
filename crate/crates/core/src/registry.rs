//! Built-in problems addressable by name.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::PrimalDualState;
use crate::error::{Error, Result};
use crate::network::{rosen_suzuki, NetworkSpec, NetworkState};
use crate::oracle::{Monomial, Polynomial, QuadraticFunction};
use crate::problem::ProblemSpec;
use crate::prox::ProxFunction;
use crate::Vector;

/// A problem ready to run, with its preferred starting point.
#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Central {
        spec: ProblemSpec,
        /// `None` means the default start `x = 0, λ = 1, ν = 0, w = 0`.
        state0: Option<PrimalDualState>,
        eta: Option<Vector>,
    },
    Distributed {
        net: NetworkSpec,
        state0: NetworkState,
        eta: Option<Vector>,
    },
}

impl ProblemInstance {
    pub fn is_distributed(&self) -> bool {
        matches!(self, ProblemInstance::Distributed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub distributed: bool,
    /// Decision dimension per agent for network problems.
    pub n: usize,
    pub agents: Option<usize>,
    pub inequalities: usize,
    pub equalities: usize,
    pub phi: &'static str,
    pub known_optimum: Option<Vec<f64>>,
}

pub const NAMES: [&str; 6] =
    ["rosen-suzuki-central", "rosen-suzuki-distributed", "eq-qp", "ineq-qp", "ineq-qp-convex", "lasso-toy"];

/// Integration horizon used when a run does not set one.
pub const DEFAULT_HORIZON: f64 = 100.0;

/// Default horizon per problem. The distributed Rosen–Suzuki run and the
/// lasso fixture contract at roughly `e^{−0.1t}` and need about 150 time units
/// to reach a KKT residual of `1e−6`.
pub fn default_horizon(name: &str) -> f64 {
    match name {
        "rosen-suzuki-distributed" | "lasso-toy" => 200.0,
        _ => DEFAULT_HORIZON,
    }
}

fn description(name: &str) -> &'static str {
    match name {
        "rosen-suzuki-central" => "Rosen-Suzuki problem solved by one agent",
        "rosen-suzuki-distributed" => "Rosen-Suzuki problem split over five agents on a 5-cycle with a chord",
        "eq-qp" => "min |x - c|^2 s.t. sum(x) = 1",
        "ineq-qp" => "min |x - c|^2 s.t. |x|^2 <= 1, sum(x) = 0.5",
        "ineq-qp-convex" => "min (x1 + x2 - 3)^2 + (x3 + 2)^2 s.t. |x|^2 <= 1, sum(x) = 0.5 (not strongly convex)",
        "lasso-toy" => "min 0.5 |Ax - b|^2 + |x|_1",
        _ => "",
    }
}

/// Listing of every built-in problem, in a fixed order.
pub fn list_problems() -> Vec<RegistryEntry> {
    NAMES
        .iter()
        .map(|&name| {
            let inst = load(name).expect("registry problems are valid");
            match &inst {
                ProblemInstance::Central { spec, .. } => RegistryEntry {
                    name,
                    description: description(name),
                    distributed: false,
                    n: spec.n(),
                    agents: None,
                    inequalities: spec.r(),
                    equalities: spec.s(),
                    phi: spec.phi().kind().name(),
                    known_optimum: spec.known_optimum().map(|x| x.iter().cloned().collect()),
                },
                ProblemInstance::Distributed { net, .. } => RegistryEntry {
                    name,
                    description: description(name),
                    distributed: true,
                    n: net.n(),
                    agents: Some(net.num_agents()),
                    inequalities: net.r(),
                    equalities: net.s(),
                    phi: "indicator_zero",
                    known_optimum: net.known_optimum().map(|x| x.iter().cloned().collect()),
                },
            }
        })
        .collect()
}

pub fn load(name: &str) -> Result<ProblemInstance> {
    let central = |spec: ProblemSpec| ProblemInstance::Central { spec, state0: None, eta: None };
    Ok(match name {
        "rosen-suzuki-central" => {
            let x0 = rosen_suzuki::printed_initial_state().x[0].clone();
            let state0 = PrimalDualState::initial(
                x0,
                Vector::from_element(2, 3.0),
                Vector::from_element(1, 3.0),
                Vector::zeros(4),
            )?;
            ProblemInstance::Central {
                spec: rosen_suzuki::central_problem()?,
                state0: Some(state0),
                eta: Some(rosen_suzuki::eta()),
            }
        }
        "rosen-suzuki-distributed" => ProblemInstance::Distributed {
            net: rosen_suzuki::network(),
            state0: rosen_suzuki::printed_initial_state(),
            eta: Some(rosen_suzuki::eta()),
        },
        "eq-qp" => central(eq_qp()?),
        "ineq-qp" => central(ineq_qp()?),
        "ineq-qp-convex" => central(ineq_qp_convex()?),
        "lasso-toy" => central(lasso_toy()?),
        other => return Err(Error::UnknownProblem(format!("{other} (known problems: {})", NAMES.join(", ")))),
    })
}

fn sum_equals(n: usize, rhs: f64) -> Polynomial {
    let mut terms: Vec<Monomial> = (0..n)
        .map(|k| {
            let mut e = vec![0; n];
            e[k] = 1;
            Monomial { coeff: 1.0, exponents: e }
        })
        .collect();
    terms.push(Monomial { coeff: -rhs, exponents: vec![0; n] });
    Polynomial::new(n, terms)
}

fn unit_ball(n: usize) -> Polynomial {
    let mut terms: Vec<Monomial> = (0..n)
        .map(|k| {
            let mut e = vec![0; n];
            e[k] = 2;
            Monomial { coeff: 1.0, exponents: e }
        })
        .collect();
    terms.push(Monomial { coeff: -1.0, exponents: vec![0; n] });
    Polynomial::new(n, terms)
}

pub const EQ_QP_CENTER: [f64; 3] = [1.0, 2.0, 3.0];

/// `min ‖x − c‖²  s.t.  Σx = 1`. The optimum is the projection
/// `c − (Σc − 1)/3 · 1`.
pub fn eq_qp() -> Result<ProblemSpec> {
    let c = Vector::from_column_slice(&EQ_QP_CENTER);
    let shift = (c.sum() - 1.0) / 3.0;
    let xs = c.map(|ci| ci - shift);
    ProblemSpec::builder(3)
        .objective_fn(QuadraticFunction::scaled_distance(1.0, &c))
        .equality_fn(sum_equals(3, 1.0))
        .strong_convexity(2.0)
        .known_optimum(xs)
        .build()
}

pub const INEQ_QP_CENTER: [f64; 3] = [2.0, 1.0, -1.0];
pub const INEQ_QP_SUM: f64 = 0.5;

/// Closed-form solution of `min ‖x − c‖²` over the circle cut from the unit
/// ball by the plane `Σx = 0.5`, valid when the plane projection of `c` lies
/// outside the ball.
pub fn ineq_qp_optimum() -> Vector {
    let n = 3.0;
    let c = Vector::from_column_slice(&INEQ_QP_CENTER);
    let ones = Vector::from_element(3, 1.0);
    let o = &ones * (INEQ_QP_SUM / n);
    let p = &c - &ones * ((c.sum() - INEQ_QP_SUM) / n);
    let radius = (1.0 - o.norm_squared()).sqrt();
    let d = &p - &o;
    let scale = radius / d.norm();
    o + d * scale
}

pub fn ineq_qp() -> Result<ProblemSpec> {
    let c = Vector::from_column_slice(&INEQ_QP_CENTER);
    ProblemSpec::builder(3)
        .objective_fn(QuadraticFunction::scaled_distance(1.0, &c))
        .inequality_fn(unit_ball(3))
        .equality_fn(sum_equals(3, INEQ_QP_SUM))
        .strong_convexity(2.0)
        .known_optimum(ineq_qp_optimum())
        .build()
}

/// Same constraints as [`ineq_qp`] with a rank-deficient quadratic objective.
pub fn ineq_qp_convex() -> Result<ProblemSpec> {
    // (x1 + x2 - 3)^2 + (x3 + 2)^2 = 0.5 |Ax - b|^2 with A = sqrt2 [[1,1,0],[0,0,1]]
    let s = std::f64::consts::SQRT_2;
    let a = DMatrix::from_row_slice(2, 3, &[s, s, 0.0, 0.0, 0.0, s]);
    let b = Vector::from_column_slice(&[3.0 * s, -2.0 * s]);
    ProblemSpec::builder(3)
        .objective_fn(QuadraticFunction::least_squares(&a, &b))
        .inequality_fn(unit_ball(3))
        .equality_fn(sum_equals(3, INEQ_QP_SUM))
        .strong_convexity(0.0)
        .build()
}

pub fn lasso_matrix() -> (DMatrix<f64>, Vector) {
    let a = DMatrix::from_row_slice(4, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0]);
    let b = Vector::from_column_slice(&[3.0, -2.0, 0.0, 0.0]);
    (a, b)
}

/// `min ½‖Ax − b‖² + ‖x‖₁`, solved exactly by `x = (43, −27, 0)/41`.
pub fn lasso_toy() -> Result<ProblemSpec> {
    let (a, b) = lasso_matrix();
    let ata = a.transpose() * &a;
    let alpha = ata.symmetric_eigenvalues().min();
    ProblemSpec::builder(3)
        .objective_fn(QuadraticFunction::least_squares(&a, &b))
        .splitting(DMatrix::identity(3, 3), ProxFunction::l1(3))
        .strong_convexity(alpha)
        .known_optimum(Vector::from_column_slice(&[43.0 / 41.0, -27.0 / 41.0, 0.0]))
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_contents() {
        let l = list_problems();
        let rs = l.iter().find(|e| e.name == "rosen-suzuki-distributed").unwrap();
        assert_eq!((rs.agents, rs.n), (Some(5), 4));
        let lasso = l.iter().find(|e| e.name == "lasso-toy").unwrap();
        assert_eq!(lasso.phi, "l1");
        assert_eq!(l, list_problems());
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(load("nope"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn eq_qp_optimum_is_projection() {
        let spec = eq_qp().unwrap();
        let xs = spec.known_optimum().unwrap();
        assert!((xs - Vector::from_column_slice(&[-2.0 / 3.0, 1.0 / 3.0, 4.0 / 3.0])).norm() < 1e-15);
    }

    #[test]
    fn ineq_qp_optimum_is_feasible_and_active() {
        let spec = ineq_qp().unwrap();
        let xs = ineq_qp_optimum();
        assert!(spec.g(&xs)[0].abs() < 1e-14);
        assert!(spec.h(&xs)[0].abs() < 1e-14);
        assert!((xs[0] - 0.757604).abs() < 1e-6);
    }

    #[test]
    fn lasso_optimum_satisfies_subgradient_condition() {
        let (a, b) = lasso_matrix();
        let xs = Vector::from_column_slice(&[43.0 / 41.0, -27.0 / 41.0, 0.0]);
        let grad = a.transpose() * (&a * &xs - &b);
        // nonzero entries: grad = -sign(x); zero entry: |grad| <= 1
        assert!((grad[0] + 1.0).abs() < 1e-12);
        assert!((grad[1] - 1.0).abs() < 1e-12);
        assert!(grad[2].abs() < 1.0);
    }
}
