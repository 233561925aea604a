//! Checks of the closed-form prox operators against independent oracles: a
//! 1-D grid search, brute-force competitors and finite differences.

use palflow::prox::{ExtendedValue, ProxFunction, ProxKind, SmoothingParam};
use palflow::Vector;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const GRID_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-6;

pub fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
}

fn fd_step(v: f64) -> f64 {
    1e-6f64.max(1e-6 * v.abs())
}

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-5.0..5.0f64, dim).prop_map(Vector::from_vec)
}

/// Box bounds on the `GRID_STEP` lattice so the grid search can hit them exactly.
fn box_strategy(dim: usize) -> impl Strategy<Value = ProxKind> {
    prop::collection::vec((-30_000i32..30_000, 0i32..30_000), dim).prop_map(|b| {
        let lower: Vec<f64> = b.iter().map(|&(l, _)| l as f64 * GRID_STEP).collect();
        let upper: Vec<f64> = b.iter().map(|&(l, w)| (l + w) as f64 * GRID_STEP).collect();
        ProxKind::IndicatorBox { lower: Vector::from_vec(lower), upper: Vector::from_vec(upper) }
    })
}

fn kind_strategy(name: &'static str, dim: usize) -> BoxedStrategy<ProxKind> {
    match name {
        "l1" => Just(ProxKind::L1Norm).boxed(),
        "indicator_zero" => Just(ProxKind::IndicatorZero).boxed(),
        "box" => box_strategy(dim).boxed(),
        "quadratic" => (0.0..10.0f64).prop_map(|weight| ProxKind::Quadratic { weight }).boxed(),
        "zero" => Just(ProxKind::Zero).boxed(),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub phi: ProxFunction,
    pub u: Vector,
    pub v: Vector,
    pub competitor: Vector,
    pub mu: f64,
}

pub fn instances(name: &'static str) -> impl Strategy<Value = Instance> {
    (1usize..6).prop_flat_map(move |dim| {
        (kind_strategy(name, dim), vec_strategy(dim), vec_strategy(dim), vec_strategy(dim), 0.1..5.0f64).prop_map(
            move |(kind, u, v, competitor, mu)| Instance {
                phi: ProxFunction::new(kind, dim).unwrap(),
                u,
                v,
                competitor,
                mu,
            },
        )
    })
}

pub fn objective(phi: &ProxFunction, y: &Vector, v: &Vector, mu: f64) -> ExtendedValue {
    match phi.value(y).unwrap() {
        ExtendedValue::Finite(p) => ExtendedValue::Finite(p + (y - v).norm_squared() / (2.0 * mu)),
        ExtendedValue::Infinite => ExtendedValue::Infinite,
    }
}

/// Grid minimization of `φ(y) + (y − v)²/(2μ)` for a 1-D `φ`, over lattice
/// points `k · GRID_STEP` covering the origin, `v` and any box bounds.
pub fn grid_envelope(phi: &ProxFunction, v: f64, mu: f64) -> f64 {
    let (mut lo, mut hi) = (v.min(0.0), v.max(0.0));
    if let ProxKind::IndicatorBox { lower, upper } = phi.kind() {
        lo = lo.min(lower[0]);
        hi = hi.max(upper[0]);
    }
    let k0 = (lo / GRID_STEP).floor() as i64 - 10;
    let k1 = (hi / GRID_STEP).ceil() as i64 + 10;
    let mut best = f64::INFINITY;
    for k in k0..=k1 {
        let y = Vector::from_element(1, k as f64 * GRID_STEP);
        if let ExtendedValue::Finite(val) = objective(phi, &y, &Vector::from_element(1, v), mu) {
            best = best.min(val);
        }
    }
    best
}

/// Whether `v_i` sits within `margin` of a point where the prox map has a kink.
fn near_kink(phi: &ProxFunction, i: usize, vi: f64, mu: f64, margin: f64) -> bool {
    match phi.kind() {
        ProxKind::L1Norm => (vi.abs() - mu).abs() < margin,
        ProxKind::IndicatorBox { lower, upper } => (vi - lower[i]).abs() < margin || (vi - upper[i]).abs() < margin,
        _ => false,
    }
}

pub fn check(inst: &Instance) -> Result<(), TestCaseError> {
    let Instance { phi, u, v, competitor, mu } = inst;
    let m = SmoothingParam::new(*mu).unwrap();
    let p = phi.prox(v, m).unwrap();
    let q = phi.prox(u, m).unwrap();

    // p minimizes the prox objective: no competitor does better
    let at_p = objective(phi, &p, v, *mu).finite().expect("prox lands in dom φ");
    for y in [competitor.clone(), v.clone(), u.clone(), q.clone(), Vector::zeros(v.len())] {
        if let ExtendedValue::Finite(at_y) = objective(phi, &y, v, *mu) {
            prop_assert!(at_p <= at_y + 1e-12 * (1.0 + at_y.abs()), "competitor {y:?} beats prox {p:?}");
        }
    }

    // firm nonexpansiveness, and hence nonexpansiveness
    let dp = &p - &q;
    let du = v - u;
    prop_assert!(dp.norm() <= du.norm() + 1e-12);
    prop_assert!(dp.norm_squared() <= dp.dot(&du) + 1e-12);

    // envelope value at the prox point and the upper bound by φ(v)
    let env = phi.moreau_value(v, m).unwrap();
    prop_assert!((env - at_p).abs() <= 1e-12 * (1.0 + env.abs()));
    if let ExtendedValue::Finite(phi_v) = phi.value(v).unwrap() {
        prop_assert!(env <= phi_v + 1e-12, "envelope {env} above φ(v) = {phi_v}");
    }

    // gradient against central differences of the envelope
    let grad = phi.moreau_grad(v, m).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..v.len() {
        let h = fd_step(v[i]);
        if near_kink(phi, i, v[i], *mu, 10.0 * h) {
            continue;
        }
        let (mut vp, mut vm) = (v.clone(), v.clone());
        vp[i] += h;
        vm[i] -= h;
        let fd = (phi.moreau_value(&vp, m).unwrap() - phi.moreau_value(&vm, m).unwrap()) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    prop_assert!(worst <= GRAD_TOL, "gradient relative error {worst}");

    // 1-D brute force
    if v.len() == 1 {
        let grid = grid_envelope(phi, v[0], *mu);
        prop_assert!((env - grid).abs() <= 1e-6, "envelope {env} vs grid {grid}");
    }

    // soft-threshold optimality
    if let ProxKind::L1Norm = phi.kind() {
        for i in 0..v.len() {
            let r = v[i] - p[i];
            if p[i] == 0.0 {
                prop_assert!(r.abs() <= mu + 1e-12);
            } else {
                prop_assert!((r - mu * p[i].signum()).abs() <= 1e-12 * (1.0 + v[i].abs()));
            }
        }
    }
    Ok(())
}

/// Every prox kind the library registers.
pub const KINDS: [&str; 5] = ["l1", "indicator_zero", "box", "quadratic", "zero"];
