mod common;

use std::sync::Arc;

use common::cases;
use palflow::dynamics::vector_field;
use palflow::network::{distributed_field, gram_int, simulate, Agent, Graph, NetworkSpec, NetworkState};
use palflow::ode::solve;
use palflow::oracle::{Oracle, QuadraticFunction};
use palflow::{DynamicsParams, IntegratorConfig, PrimalDualState, Vector};
use proptest::prelude::*;

/// A connected graph: a random spanning tree plus random extra edges.
fn graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (2..=max_nodes).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|i| (0..i).boxed()).collect();
        (parents, prop::collection::vec((0..n, 0..n), 0..n)).prop_map(move |(parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
            for (a, b) in extra {
                let e = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
                    edges.push((a, b));
                }
            }
            Graph::new(n, &edges).unwrap()
        })
    })
}

#[derive(Debug, Clone)]
struct AgentData {
    target: Vec<f64>,
    ball: Option<(Vec<f64>, f64)>,
    plane: Option<(Vec<f64>, f64)>,
}

impl AgentData {
    fn agent(&self) -> Agent {
        let v = |x: &[f64]| Vector::from_column_slice(x);
        let inequalities: Vec<Oracle> = self
            .ball
            .iter()
            .map(|(c, r)| {
                let mut q = QuadraticFunction::scaled_distance(1.0, &v(c));
                q.constant -= r;
                Arc::new(q) as Oracle
            })
            .collect();
        let equalities: Vec<Oracle> =
            self.plane.iter().map(|(a, b)| Arc::new(QuadraticFunction::affine(v(a), -b)) as Oracle).collect();
        Agent {
            objective: Arc::new(QuadraticFunction::scaled_distance(0.5, &v(&self.target))),
            inequalities,
            equalities,
        }
    }
}

fn agent_data(n: usize) -> impl Strategy<Value = AgentData> {
    (
        common::vector(n, 2.0),
        prop::option::of((common::vector(n, 1.0), 0.5..3.0f64)),
        prop::option::of((common::vector(n, 1.0), -1.0..1.0f64)),
    )
        .prop_map(|(target, ball, plane)| AgentData { target, ball, plane })
}

/// A random network problem, a matching state and random edge multipliers `w`
/// of the stacked formulation.
fn network_case() -> impl Strategy<Value = (NetworkSpec, NetworkState, Vector, f64)> {
    (graph(5), 1usize..4).prop_flat_map(|(g, n)| {
        let nodes = g.num_nodes();
        let edges = g.edges().len();
        (
            Just(g),
            prop::collection::vec(agent_data(n), nodes),
            prop::collection::vec(any::<u64>(), 1),
            common::vector(edges * n, 2.0),
            0.05..2.0f64,
        )
            .prop_map(move |(g, agents, seed, w, mu)| {
                let net = NetworkSpec::new(g, n, agents.iter().map(AgentData::agent).collect()).unwrap();
                let state = random_state(&net, seed[0]);
                (net, state, Vector::from_vec(w), mu)
            })
    })
}

fn random_state(net: &NetworkSpec, seed: u64) -> NetworkState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = NetworkState::default_for(net);
    for i in 0..net.num_agents() {
        s.x[i] = Vector::from_fn(net.n(), |_, _| rng.random_range(-2.0..2.0));
        s.lambda[i] = s.lambda[i].map(|_| rng.random_range(0.01..3.0));
        s.nu[i] = s.nu[i].map(|_| rng.random_range(-2.0..2.0));
        s.w[i] = Vector::from_fn(net.n(), |_, _| rng.random_range(-2.0..2.0));
    }
    s
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn incidence_gram_is_the_laplacian(g in graph(9)) {
        let t = g.incidence_int();
        prop_assert_eq!(gram_int(&t, g.num_nodes()), g.laplacian_int());
        for row in &t {
            prop_assert_eq!(row.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn node_derivative_reads_only_neighbors((net, state, _w, mu) in network_case(), bump in 0.1..5.0f64) {
        let params = DynamicsParams::uniform(mu, 1.0, net.r()).unwrap();
        let base = distributed_field(&net, &state, &params).unwrap();
        for k in 0..net.num_agents() {
            let mut other = state.clone();
            other.x[k].add_scalar_mut(bump);
            other.lambda[k].add_scalar_mut(bump);
            other.nu[k].add_scalar_mut(bump);
            other.w[k].add_scalar_mut(bump);
            let moved = distributed_field(&net, &other, &params).unwrap();
            for i in 0..net.num_agents() {
                if i != k && !net.graph().neighbors(i).contains(&k) {
                    prop_assert_eq!(&moved[i], &base[i], "node {} changed when node {} moved", i, k);
                }
            }
        }
    }

    #[test]
    fn distributed_field_is_the_stacked_field((net, state, w, mu) in network_case(), eta in 0.1..5.0f64) {
        let params = DynamicsParams::uniform(mu, eta, net.r()).unwrap();
        let stacked = net.stacked_problem().unwrap();
        let ts = net.stacked_splitting();

        // distributed side uses the transformed multiplier w' = T_sᵀ w
        let mut dist_state = state.clone();
        let w_prime = ts.transpose() * &w;
        for i in 0..net.num_agents() {
            dist_state.w[i] = w_prime.rows(i * net.n(), net.n()).into_owned();
        }
        let dist = distributed_field(&net, &dist_state, &params).unwrap();

        let central_state = PrimalDualState::new(state.stacked_x(), state.stacked_lambda(), state.stacked_nu(), w).unwrap();
        let central = vector_field(&stacked, &central_state, &params).unwrap();

        let cat = |f: fn(&palflow::network::NodeDerivative) -> &Vector| {
            dist.iter().flat_map(|d| f(d).iter().copied()).collect::<Vec<f64>>()
        };
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        prop_assert!(close(&cat(|d| &d.dx), central.dx.as_slice()));
        prop_assert!(close(&cat(|d| &d.dlambda), central.dlambda.as_slice()));
        prop_assert!(close(&cat(|d| &d.dnu), central.dnu.as_slice()));
        let dw_prime = ts.transpose() * &central.dw;
        prop_assert!(close(&cat(|d| &d.dw), dw_prime.as_slice()));
    }
}

#[test]
fn distributed_limit_matches_centralized_solve() {
    // three agents on a path pulling toward different targets; agent 0 also
    // keeps x inside the unit disc. The targets average to (1, 1).
    let targets = [[3.0, 0.0], [0.0, 2.0], [0.0, 1.0]];
    let mut agents: Vec<Agent> = targets
        .iter()
        .map(|c| {
            Agent::objective_only(Arc::new(QuadraticFunction::scaled_distance(1.0, &Vector::from_column_slice(c))))
        })
        .collect();
    let mut disc = QuadraticFunction::scaled_distance(1.0, &Vector::zeros(2));
    disc.constant -= 1.0;
    agents[0].inequalities.push(Arc::new(disc));
    let net = NetworkSpec::new(Graph::new(3, &[(0, 1), (1, 2)]).unwrap(), 2, agents).unwrap();

    let params = DynamicsParams::uniform(0.5, 1.0, net.r()).unwrap();
    let cfg = IntegratorConfig { record_every: 1000, ..IntegratorConfig::rk4(1e-3, 200.0) };
    let run = simulate(&net, &NetworkState::default_for(&net), &params, &cfg, 1e-8).unwrap();
    assert!(run.converged, "kkt {}", run.residual.total);

    let aggregate = net.aggregate_problem().unwrap();
    let sol = solve(&aggregate, &DynamicsParams::uniform(0.5, 1.0, aggregate.r()).unwrap(), &cfg, 1e-8, None).unwrap();
    assert!(sol.converged);
    let analytic = Vector::from_element(2, std::f64::consts::FRAC_1_SQRT_2);
    assert!((&sol.x_star - &analytic).amax() < 1e-6);
    for xi in &run.last().state.x {
        assert!((xi - &sol.x_star).amax() <= 1e-3, "{xi:?} vs {:?}", sol.x_star);
    }
}
