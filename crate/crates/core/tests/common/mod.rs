//! Random convex test problems shared by the property suites.
#![allow(dead_code)]

pub mod prox_suite;

use nalgebra::DMatrix;
use palflow::oracle::QuadraticFunction;
use palflow::prox::{ProxFunction, ProxKind};
use palflow::{PrimalDualState, ProblemSpec, Vector};
use proptest::prelude::*;

/// `b‖x − d‖² − radius`
#[derive(Debug, Clone)]
pub struct Ball {
    pub scale: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `aᵀx − beta`
#[derive(Debug, Clone)]
pub struct Plane {
    pub normal: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub enum Phi {
    Zero,
    L1,
    Quadratic(f64),
}

/// Plain description of a strongly convex program with ball inequalities,
/// affine equalities and `T = I`.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub n: usize,
    pub weight: f64,
    pub target: Vec<f64>,
    pub balls: Vec<Ball>,
    pub planes: Vec<Plane>,
    pub phi: Phi,
}

impl ProblemData {
    pub fn alpha(&self) -> f64 {
        2.0 * self.weight
    }

    pub fn ball(&self, b: &Ball) -> QuadraticFunction {
        let mut q = QuadraticFunction::scaled_distance(b.scale, &Vector::from_column_slice(&b.center));
        q.constant -= b.radius;
        q
    }

    pub fn plane(&self, p: &Plane) -> QuadraticFunction {
        QuadraticFunction::affine(Vector::from_column_slice(&p.normal), -p.beta)
    }

    pub fn prox(&self) -> ProxFunction {
        let kind = match self.phi {
            Phi::Zero => ProxKind::Zero,
            Phi::L1 => ProxKind::L1Norm,
            Phi::Quadratic(weight) => ProxKind::Quadratic { weight },
        };
        ProxFunction::new(kind, self.n).unwrap()
    }

    /// Builds the program with constraints in the order given by the permutations.
    pub fn build_permuted(&self, g_order: &[usize], h_order: &[usize]) -> ProblemSpec {
        let mut b = ProblemSpec::builder(self.n)
            .objective_fn(QuadraticFunction::scaled_distance(self.weight, &Vector::from_column_slice(&self.target)))
            .splitting(DMatrix::identity(self.n, self.n), self.prox())
            .strong_convexity(self.alpha());
        for &i in g_order {
            b = b.inequality_fn(self.ball(&self.balls[i]));
        }
        for &i in h_order {
            b = b.equality_fn(self.plane(&self.planes[i]));
        }
        b.build().unwrap()
    }

    pub fn build(&self) -> ProblemSpec {
        let g: Vec<usize> = (0..self.balls.len()).collect();
        let h: Vec<usize> = (0..self.planes.len()).collect();
        self.build_permuted(&g, &h)
    }
}

pub fn vector(n: usize, range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, n)
}

fn ball(n: usize) -> impl Strategy<Value = Ball> {
    (0.2..2.0f64, vector(n, 1.0), 0.5..4.0f64).prop_map(|(scale, center, radius)| Ball { scale, center, radius })
}

fn plane(n: usize) -> impl Strategy<Value = Plane> {
    (vector(n, 1.0), -1.0..1.0f64)
        .prop_filter("normal away from zero", |(a, _)| a.iter().map(|v| v * v).sum::<f64>() > 0.1)
        .prop_map(|(normal, beta)| Plane { normal, beta })
}

fn phi() -> impl Strategy<Value = Phi> {
    prop_oneof![Just(Phi::Zero), Just(Phi::L1), (0.1..3.0f64).prop_map(Phi::Quadratic)]
}

pub fn problem() -> impl Strategy<Value = ProblemData> {
    (2usize..5).prop_flat_map(|n| {
        (
            0.5..2.0f64,
            vector(n, 2.0),
            prop::collection::vec(ball(n), 0..4),
            prop::collection::vec(plane(n), 0..3),
            phi(),
        )
            .prop_map(move |(weight, target, balls, planes, phi)| ProblemData {
                n,
                weight,
                target,
                balls,
                planes,
                phi,
            })
    })
}

/// A problem together with a state of matching shape, `λ ≻ 0`.
pub fn problem_and_state() -> impl Strategy<Value = (ProblemData, PrimalDualState)> {
    problem().prop_flat_map(|d| {
        let (n, r, s) = (d.n, d.balls.len(), d.planes.len());
        (Just(d), vector(n, 2.0), prop::collection::vec(0.01..3.0f64, r), vector(s, 3.0), vector(n, 2.0)).prop_map(
            |(d, x, l, nu, w)| {
                let state = PrimalDualState::new(
                    Vector::from_vec(x),
                    Vector::from_vec(l),
                    Vector::from_vec(nu),
                    Vector::from_vec(w),
                )
                .unwrap();
                (d, state)
            },
        )
    })
}

pub fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, failure_persistence: None, ..ProptestConfig::default() }
}
