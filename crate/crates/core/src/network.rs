//! Multi-agent consensus formulation and its distributed flow.
//!
//! Each agent `i` keeps a copy `x_i` of the decision vector, its own
//! multipliers and a transformed splitting multiplier `w'_i`. Stacking the
//! copies into `x̂` and enforcing `(T ⊗ I)x̂ = 0` through an indicator of `{0}`
//! turns the network problem into an instance of the centralized program; the
//! distributed flow is the centralized flow rewritten with `w' = (T ⊗ I)ᵀw`.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::DynamicsParams;
use crate::error::{check_dim, Error, Result};
use crate::linalg::kron_identity;
use crate::ode::{run_flow, Control, FlowSystem, IntegratorConfig, StopReason};
use crate::oracle::{Monomial, Oracle, Polynomial, SmoothFunction};
use crate::problem::{ProblemSpec, ResidualReport};
use crate::prox::{ProxFunction, SmoothingParam};
use crate::Vector;

/// Undirected connected graph on nodes `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    num_nodes: usize,
    /// Normalized so that `a < b`, in input order.
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Parameter("graph needs at least one node".into()));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Parameter(format!("edge ({a}, {b}) references a node outside 0..{num_nodes}")));
            }
            if a == b {
                return Err(Error::Parameter(format!("self-loop at node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if norm.contains(&e) {
                return Err(Error::Parameter(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            norm.push(e);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let graph = Graph { num_nodes, edges: norm, neighbors };
        if !graph.is_connected() {
            return Err(Error::Parameter("graph is not connected".into()));
        }
        Ok(graph)
    }

    /// The default five-agent topology: a 5-cycle plus the chord `{0, 2}`.
    pub fn fig1_default() -> Self {
        Graph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).expect("valid fixture graph")
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Edge-by-node incidence with `+1` at the lower endpoint and `−1` at the higher.
    pub fn incidence_int(&self) -> Vec<Vec<i64>> {
        self.edges
            .iter()
            .map(|&(a, b)| {
                let mut row = vec![0i64; self.num_nodes];
                row[a] = 1;
                row[b] = -1;
                row
            })
            .collect()
    }

    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let rows = self.incidence_int();
        DMatrix::from_fn(self.edges.len(), self.num_nodes, |e, i| rows[e][i] as f64)
    }

    /// Degree matrix minus adjacency.
    pub fn laplacian_int(&self) -> Vec<Vec<i64>> {
        let mut l = vec![vec![0i64; self.num_nodes]; self.num_nodes];
        for i in 0..self.num_nodes {
            l[i][i] = self.neighbors[i].len() as i64;
            for &j in &self.neighbors[i] {
                l[i][j] = -1;
            }
        }
        l
    }
}

/// `TᵀT` in exact integer arithmetic.
pub fn gram_int(t: &[Vec<i64>], cols: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0i64; cols]; cols];
    for row in t {
        for i in 0..cols {
            for j in 0..cols {
                out[i][j] += row[i] * row[j];
            }
        }
    }
    out
}

/// The functions one agent can see.
#[derive(Debug, Clone)]
pub struct Agent {
    pub objective: Oracle,
    pub inequalities: Vec<Oracle>,
    pub equalities: Vec<Oracle>,
}

impl Agent {
    pub fn objective_only(f: Oracle) -> Self {
        Agent { objective: f, inequalities: Vec::new(), equalities: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    graph: Graph,
    n: usize,
    agents: Vec<Agent>,
    lambda_offsets: Vec<usize>,
    nu_offsets: Vec<usize>,
    known_optimum: Option<Vector>,
}

impl NetworkSpec {
    pub fn new(graph: Graph, n: usize, agents: Vec<Agent>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("decision dimension must be positive".into()));
        }
        check_dim("agents", graph.num_nodes(), agents.len())?;
        let mut lambda_offsets = vec![0];
        let mut nu_offsets = vec![0];
        for (i, a) in agents.iter().enumerate() {
            check_dim(&format!("agent {i} objective input"), n, a.objective.dim())?;
            for (j, g) in a.inequalities.iter().enumerate() {
                check_dim(&format!("agent {i} inequality {j} input"), n, g.dim())?;
            }
            for (j, h) in a.equalities.iter().enumerate() {
                check_dim(&format!("agent {i} equality {j} input"), n, h.dim())?;
            }
            lambda_offsets.push(lambda_offsets[i] + a.inequalities.len());
            nu_offsets.push(nu_offsets[i] + a.equalities.len());
        }
        Ok(NetworkSpec { graph, n, agents, lambda_offsets, nu_offsets, known_optimum: None })
    }

    pub fn with_known_optimum(mut self, x: Vector) -> Result<Self> {
        check_dim("known optimum", self.n, x.len())?;
        self.known_optimum = Some(x);
        Ok(self)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn known_optimum(&self) -> Option<&Vector> {
        self.known_optimum.as_ref()
    }

    /// Total number of inequality constraints over all agents.
    pub fn r(&self) -> usize {
        *self.lambda_offsets.last().unwrap()
    }

    pub fn s(&self) -> usize {
        *self.nu_offsets.last().unwrap()
    }

    /// Position of agent `i`'s inequality multipliers in the stacked `λ`.
    pub fn lambda_block(&self, i: usize) -> Range<usize> {
        self.lambda_offsets[i]..self.lambda_offsets[i + 1]
    }

    pub fn nu_block(&self, i: usize) -> Range<usize> {
        self.nu_offsets[i]..self.nu_offsets[i + 1]
    }

    /// `T ⊗ I_n`.
    pub fn stacked_splitting(&self) -> DMatrix<f64> {
        kron_identity(&self.graph.incidence_matrix(), self.n)
    }

    /// The network problem as one program in `x̂ = col(x_1, …, x_N)` with
    /// `φ` the indicator of `{0}` applied to `(T ⊗ I)x̂`.
    pub fn stacked_problem(&self) -> Result<ProblemSpec> {
        let big = self.n * self.num_agents();
        let t = self.stacked_splitting();
        let m = t.nrows();
        let objective =
            Arc::new(BlockSum { n: self.n, parts: self.agents.iter().map(|a| a.objective.clone()).collect() });
        let mut b = ProblemSpec::builder(big).objective(objective);
        for (i, a) in self.agents.iter().enumerate() {
            for g in &a.inequalities {
                b = b.inequality(Arc::new(Lifted { inner: g.clone(), block: i, total: big }));
            }
        }
        for (i, a) in self.agents.iter().enumerate() {
            for h in &a.equalities {
                b = b.equality(Arc::new(Lifted { inner: h.clone(), block: i, total: big }));
            }
        }
        if let Some(x) = &self.known_optimum {
            let mut stacked = Vector::zeros(big);
            for i in 0..self.num_agents() {
                stacked.rows_mut(i * self.n, self.n).copy_from(x);
            }
            b = b.known_optimum(stacked);
        }
        b.splitting(t, ProxFunction::indicator_zero(m)).allow_rank_deficient_splitting().build()
    }

    /// The centralized program all agents cooperate on: `Σ f_i` subject to
    /// every agent's constraints, on a single `x`.
    pub fn aggregate_problem(&self) -> Result<ProblemSpec> {
        let objective =
            Arc::new(SharedSum { n: self.n, parts: self.agents.iter().map(|a| a.objective.clone()).collect() });
        let mut b = ProblemSpec::builder(self.n).objective(objective);
        for a in &self.agents {
            for g in &a.inequalities {
                b = b.inequality(g.clone());
            }
        }
        for a in &self.agents {
            for h in &a.equalities {
                b = b.equality(h.clone());
            }
        }
        if let Some(x) = &self.known_optimum {
            b = b.known_optimum(x.clone());
        }
        b.build()
    }
}

/// `Σ_i f_i(x_i)` over a stacked vector.
struct BlockSum {
    n: usize,
    parts: Vec<Oracle>,
}

impl SmoothFunction for BlockSum {
    fn dim(&self) -> usize {
        self.n * self.parts.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.parts.iter().enumerate().map(|(i, f)| f.value(&x.rows(i * self.n, self.n).into_owned())).sum()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim());
        for (i, f) in self.parts.iter().enumerate() {
            let gi = f.gradient(&x.rows(i * self.n, self.n).into_owned());
            g.rows_mut(i * self.n, self.n).copy_from(&gi);
        }
        g
    }
    fn is_affine(&self) -> bool {
        self.parts.iter().all(|f| f.is_affine())
    }
}

/// `Σ_i f_i(x)` on a shared vector.
struct SharedSum {
    n: usize,
    parts: Vec<Oracle>,
}

impl SmoothFunction for SharedSum {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &Vector) -> f64 {
        self.parts.iter().map(|f| f.value(x)).sum()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.parts.iter().fold(Vector::zeros(self.n), |acc, f| acc + f.gradient(x))
    }
    fn is_affine(&self) -> bool {
        self.parts.iter().all(|f| f.is_affine())
    }
}

/// A function of block `block` of a stacked vector.
struct Lifted {
    inner: Oracle,
    block: usize,
    total: usize,
}

impl SmoothFunction for Lifted {
    fn dim(&self) -> usize {
        self.total
    }
    fn value(&self, x: &Vector) -> f64 {
        let n = self.inner.dim();
        self.inner.value(&x.rows(self.block * n, n).into_owned())
    }
    fn gradient(&self, x: &Vector) -> Vector {
        let n = self.inner.dim();
        let mut g = Vector::zeros(self.total);
        g.rows_mut(self.block * n, n).copy_from(&self.inner.gradient(&x.rows(self.block * n, n).into_owned()));
        g
    }
    fn is_affine(&self) -> bool {
        self.inner.is_affine()
    }
}

/// Per-agent state of the distributed flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkState {
    pub x: Vec<Vector>,
    pub lambda: Vec<Vector>,
    pub nu: Vec<Vector>,
    /// Transformed splitting multipliers `w'_i`.
    pub w: Vec<Vector>,
}

impl NetworkState {
    pub fn check_dims(&self, net: &NetworkSpec) -> Result<()> {
        let na = net.num_agents();
        check_dim("agent states x", na, self.x.len())?;
        check_dim("agent states lambda", na, self.lambda.len())?;
        check_dim("agent states nu", na, self.nu.len())?;
        check_dim("agent states w'", na, self.w.len())?;
        for i in 0..na {
            check_dim(&format!("agent {i} x"), net.n(), self.x[i].len())?;
            check_dim(&format!("agent {i} lambda"), net.lambda_block(i).len(), self.lambda[i].len())?;
            check_dim(&format!("agent {i} nu"), net.nu_block(i).len(), self.nu[i].len())?;
            check_dim(&format!("agent {i} w'"), net.n(), self.w[i].len())?;
        }
        Ok(())
    }

    /// `x = 0, λ = 1, ν = 0, w' = 0` for every agent.
    pub fn default_for(net: &NetworkSpec) -> Self {
        let na = net.num_agents();
        NetworkState {
            x: vec![Vector::zeros(net.n()); na],
            lambda: (0..na).map(|i| Vector::from_element(net.lambda_block(i).len(), 1.0)).collect(),
            nu: (0..na).map(|i| Vector::zeros(net.nu_block(i).len())).collect(),
            w: vec![Vector::zeros(net.n()); na],
        }
    }

    /// Layout `[x_1..x_N, λ_1..λ_N, ν_1..ν_N, w'_1..w'_N]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = Vec::new();
        for block in [&self.x, &self.lambda, &self.nu, &self.w] {
            for v in block.iter() {
                z.extend(v.iter());
            }
        }
        z
    }

    pub fn from_flat(net: &NetworkSpec, z: &[f64]) -> Self {
        let na = net.num_agents();
        let n = net.n();
        let mut pos = 0;
        let mut take = |len: usize| {
            let v = Vector::from_column_slice(&z[pos..pos + len]);
            pos += len;
            v
        };
        let x = (0..na).map(|_| take(n)).collect();
        let lambda = (0..na).map(|i| take(net.lambda_block(i).len())).collect();
        let nu = (0..na).map(|i| take(net.nu_block(i).len())).collect();
        let w = (0..na).map(|_| take(n)).collect();
        NetworkState { x, lambda, nu, w }
    }

    pub fn stacked_x(&self) -> Vector {
        stack(&self.x)
    }

    pub fn stacked_lambda(&self) -> Vector {
        stack(&self.lambda)
    }

    pub fn stacked_nu(&self) -> Vector {
        stack(&self.nu)
    }

    pub fn stacked_w(&self) -> Vector {
        stack(&self.w)
    }

    /// Largest pairwise distance between agent copies.
    pub fn consensus_error(&self) -> f64 {
        consensus_error(&self.x)
    }

    /// Part of `w'` outside the range of `(T ⊗ I)ᵀ`: the agent mean, which the
    /// flow conserves. Returns `√N · ‖mean_i w'_i‖`.
    pub fn dual_range_violation(&self) -> f64 {
        let na = self.w.len() as f64;
        mean(&self.w).map_or(0.0, |m| na.sqrt() * m.norm())
    }

    /// Removes the agent mean from `w'`, projecting it onto the range of
    /// `(T ⊗ I)ᵀ` where every stacked multiplier `w` maps to.
    pub fn project_dual_to_range(&mut self) {
        if let Some(m) = mean(&self.w) {
            for wi in &mut self.w {
                *wi -= &m;
            }
        }
    }
}

fn stack(blocks: &[Vector]) -> Vector {
    Vector::from_iterator(blocks.iter().map(|b| b.len()).sum(), blocks.iter().flat_map(|b| b.iter().cloned()))
}

fn mean(blocks: &[Vector]) -> Option<Vector> {
    let first = blocks.first()?;
    let sum = blocks.iter().skip(1).fold(first.clone(), |acc, b| acc + b);
    Some(sum / blocks.len() as f64)
}

/// `max_{i,j} ‖x_i − x_j‖`.
pub fn consensus_error(x: &[Vector]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            worst = worst.max((&x[i] - &x[j]).norm());
        }
    }
    worst
}

/// What agent `i` reads when computing its own derivative.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a> {
    pub x: &'a Vector,
    pub lambda: &'a Vector,
    pub nu: &'a Vector,
    pub w: &'a Vector,
    /// Neighbor copies `x_j`, `j ∈ 𝒩_i`.
    pub neighbor_x: &'a [&'a Vector],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDerivative {
    pub dx: Vector,
    pub dlambda: Vector,
    pub dnu: Vector,
    pub dw: Vector,
}

/// Derivative of one agent from its own state and its neighbors' `x` only.
pub fn node_field(agent: &Agent, view: LocalView<'_>, mu: SmoothingParam, eta: &[f64]) -> Result<NodeDerivative> {
    check_dim("agent lambda", agent.inequalities.len(), view.lambda.len())?;
    check_dim("agent nu", agent.equalities.len(), view.nu.len())?;
    check_dim("agent eta", agent.inequalities.len(), eta.len())?;
    let x = view.x;
    let mut diffusion = Vector::zeros(x.len());
    for xj in view.neighbor_x {
        diffusion += *xj - x;
    }
    let mut dx = &diffusion / mu.get() - agent.objective.gradient(x) - view.w;
    let mut dlambda = Vector::zeros(view.lambda.len());
    for (j, g) in agent.inequalities.iter().enumerate() {
        let l = view.lambda[j];
        dx -= g.gradient(x) * l;
        dlambda[j] = l / (1.0 + eta[j] * l) * g.value(x);
    }
    let mut dnu = Vector::zeros(view.nu.len());
    for (j, h) in agent.equalities.iter().enumerate() {
        dx -= h.gradient(x) * view.nu[j];
        dnu[j] = h.value(x);
    }
    Ok(NodeDerivative { dx, dlambda, dnu, dw: -diffusion })
}

/// The distributed flow for every agent. `params.eta` is indexed like the
/// stacked `λ`.
pub fn distributed_field(
    net: &NetworkSpec,
    state: &NetworkState,
    params: &DynamicsParams,
) -> Result<Vec<NodeDerivative>> {
    state.check_dims(net)?;
    check_dim("eta", net.r(), params.eta.len())?;
    (0..net.num_agents())
        .map(|i| {
            let neighbor_x: Vec<&Vector> = net.graph().neighbors(i).iter().map(|&j| &state.x[j]).collect();
            let view = LocalView {
                x: &state.x[i],
                lambda: &state.lambda[i],
                nu: &state.nu[i],
                w: &state.w[i],
                neighbor_x: &neighbor_x,
            };
            let eta = &params.eta.as_slice()[net.lambda_block(i)];
            node_field(&net.agents()[i], view, params.mu, eta)
        })
        .collect()
}

/// Smoothed KKT residual of the stacked problem expressed in `w'`.
///
/// Stationarity uses `(T ⊗ I)ᵀ∇φ_μ = (L ⊗ I)x̂/μ + w'`. The splitting block
/// combines the consensus violation `‖(T ⊗ I)x̂‖` with
/// [`NetworkState::dual_range_violation`], since a `w'` with a nonzero agent
/// mean corresponds to no stacked multiplier at all.
pub fn network_kkt(net: &NetworkSpec, state: &NetworkState, mu: SmoothingParam) -> Result<ResidualReport> {
    state.check_dims(net)?;
    let mut stationarity_sq = 0.0;
    let mut g_pos_sq = 0.0;
    let mut h_sq = 0.0;
    let mut comp_sq = 0.0;
    for (i, agent) in net.agents().iter().enumerate() {
        let x = &state.x[i];
        let mut grad = agent.objective.gradient(x) + &state.w[i];
        for &j in net.graph().neighbors(i) {
            grad += (x - &state.x[j]) / mu.get();
        }
        for (k, g) in agent.inequalities.iter().enumerate() {
            let l = state.lambda[i][k];
            if !(l >= 0.0) {
                return Err(Error::Contract(format!("agent {i} lambda[{k}] = {l} is negative")));
            }
            grad += g.gradient(x) * l;
            let gv = g.value(x);
            g_pos_sq += gv.max(0.0).powi(2);
            comp_sq += (l * gv).powi(2);
        }
        for (k, h) in agent.equalities.iter().enumerate() {
            grad += h.gradient(x) * state.nu[i][k];
            h_sq += h.value(x).powi(2);
        }
        stationarity_sq += grad.norm_squared();
    }
    let mut edge_sq = 0.0;
    for &(a, b) in net.graph().edges() {
        edge_sq += (&state.x[a] - &state.x[b]).norm_squared();
    }
    let splitting = edge_sq.sqrt().hypot(state.dual_range_violation());
    let (stationarity, primal_ineq, primal_eq, complementarity) =
        (stationarity_sq.sqrt(), g_pos_sq.sqrt(), h_sq.sqrt(), comp_sq.sqrt());
    let total = [stationarity, primal_ineq, primal_eq, complementarity, splitting].into_iter().fold(0.0, f64::max);
    Ok(ResidualReport { stationarity, primal_ineq, primal_eq, complementarity, splitting, total })
}

/// The distributed flow as one synchronous system.
pub struct NetworkFlow<'a> {
    net: &'a NetworkSpec,
    params: &'a DynamicsParams,
    len: usize,
}

impl<'a> NetworkFlow<'a> {
    pub fn new(net: &'a NetworkSpec, params: &'a DynamicsParams) -> Result<Self> {
        check_dim("eta", net.r(), params.eta.len())?;
        let len = 2 * net.n() * net.num_agents() + net.r() + net.s();
        Ok(NetworkFlow { net, params, len })
    }
}

impl FlowSystem for NetworkFlow<'_> {
    fn len(&self) -> usize {
        self.len
    }

    fn nonnegative(&self) -> Range<usize> {
        let start = self.net.n() * self.net.num_agents();
        start..start + self.net.r()
    }

    fn derivative(&self, z: &[f64], dz: &mut [f64]) -> Result<()> {
        let state = NetworkState::from_flat(self.net, z);
        let field = distributed_field(self.net, &state, self.params)?;
        let mut pos = 0;
        let blocks: [&dyn Fn(&NodeDerivative) -> &Vector; 4] = [&|d| &d.dx, &|d| &d.dlambda, &|d| &d.dnu, &|d| &d.dw];
        for pick in blocks {
            for d in &field {
                let v = pick(d);
                dz[pos..pos + v.len()].copy_from_slice(v.as_slice());
                pos += v.len();
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSample {
    pub t: f64,
    pub state: NetworkState,
    pub kkt_total: f64,
    pub consensus_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkRun {
    pub samples: Vec<NetworkSample>,
    pub stop_reason: StopReason,
    pub converged: bool,
    pub residual: ResidualReport,
    pub steps: usize,
    pub clamp_events: usize,
    pub min_multiplier: f64,
}

impl NetworkRun {
    pub fn last(&self) -> &NetworkSample {
        self.samples.last().expect("a run always holds its initial condition")
    }
}

/// Integrates the distributed flow until the network KKT residual is at most
/// `kkt_tol` or the horizon runs out.
pub fn simulate(
    net: &NetworkSpec,
    state0: &NetworkState,
    params: &DynamicsParams,
    cfg: &IntegratorConfig,
    kkt_tol: f64,
) -> Result<NetworkRun> {
    state0.check_dims(net)?;
    if !(kkt_tol > 0.0) {
        return Err(Error::Parameter(format!("kkt_tol must be > 0, got {kkt_tol}")));
    }
    for (i, l) in state0.lambda.iter().enumerate() {
        if let Some(k) = l.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Contract(format!(
                "initial lambda of agent {i}[{k}] = {} must be strictly positive",
                l[k]
            )));
        }
    }
    let sys = NetworkFlow::new(net, params)?;
    let mut samples = Vec::new();
    let mut pending: Option<NetworkSample> = None;
    let mut hit_tol = false;
    let outcome = run_flow(&sys, &state0.to_flat(), cfg, |t, z, step| {
        let state = NetworkState::from_flat(net, z);
        let kkt_total = network_kkt(net, &state, params.mu)?.total;
        let stop = kkt_total <= kkt_tol;
        hit_tol |= stop;
        let sample = NetworkSample { t, consensus_error: state.consensus_error(), state, kkt_total };
        if step % cfg.record_every == 0 || stop {
            samples.push(sample);
            pending = None;
        } else {
            pending = Some(sample);
        }
        Ok(if stop { Control::Stop } else { Control::Continue })
    })?;
    samples.extend(pending);
    let stop_reason = if outcome.non_finite {
        StopReason::NonFinite
    } else if hit_tol {
        StopReason::KktTol
    } else {
        StopReason::TimeLimit
    };
    let last = samples.last().expect("initial sample recorded");
    let residual = network_kkt(net, &last.state, params.mu)?;
    Ok(NetworkRun {
        converged: stop_reason == StopReason::KktTol,
        residual,
        stop_reason,
        steps: outcome.steps,
        clamp_events: outcome.clamp_events,
        min_multiplier: outcome.min_multiplier,
        samples,
    })
}

fn mono(coeff: f64, e: [u32; 4]) -> Monomial {
    Monomial { coeff, exponents: e.to_vec() }
}

fn poly(terms: Vec<Monomial>) -> Oracle {
    Arc::new(Polynomial::new(4, terms))
}

/// The Rosen–Suzuki test problem in `ℝ⁴`.
pub mod rosen_suzuki {
    use super::*;

    pub const OPTIMUM: [f64; 4] = [0.0, 1.0, 2.0, -1.0];

    /// Per-agent objectives `f_1..f_5`.
    pub fn objectives() -> Vec<Polynomial> {
        vec![
            Polynomial::new(4, vec![mono(1.0, [2, 0, 0, 0]), mono(1.0, [0, 2, 0, 0])]),
            Polynomial::new(4, vec![mono(2.0, [0, 0, 2, 0]), mono(1.0, [0, 0, 0, 2])]),
            Polynomial::new(4, vec![mono(-5.0, [1, 0, 0, 0]), mono(-5.0, [0, 1, 0, 0])]),
            Polynomial::new(4, vec![mono(-21.0, [0, 0, 1, 0])]),
            Polynomial::new(4, vec![mono(7.0, [0, 0, 0, 1])]),
        ]
    }

    pub fn g1() -> Polynomial {
        Polynomial::new(
            4,
            vec![
                mono(-8.0, [0, 0, 0, 0]),
                mono(1.0, [1, 0, 0, 0]),
                mono(-1.0, [0, 1, 0, 0]),
                mono(1.0, [0, 0, 1, 0]),
                mono(-1.0, [0, 0, 0, 1]),
                mono(1.0, [2, 0, 0, 0]),
                mono(1.0, [0, 2, 0, 0]),
                mono(1.0, [0, 0, 2, 0]),
                mono(1.0, [0, 0, 0, 2]),
            ],
        )
    }

    pub fn g2() -> Polynomial {
        Polynomial::new(
            4,
            vec![
                mono(-10.0, [0, 0, 0, 0]),
                mono(-1.0, [1, 0, 0, 0]),
                mono(-1.0, [0, 0, 0, 1]),
                mono(1.0, [2, 0, 0, 0]),
                mono(2.0, [0, 2, 0, 0]),
                mono(1.0, [0, 0, 2, 0]),
                mono(2.0, [0, 0, 0, 2]),
            ],
        )
    }

    /// Not affine; the flow is run on it anyway.
    pub fn h1() -> Polynomial {
        Polynomial::new(
            4,
            vec![
                mono(-5.0, [0, 0, 0, 0]),
                mono(2.0, [1, 0, 0, 0]),
                mono(-1.0, [0, 1, 0, 0]),
                mono(-1.0, [0, 0, 0, 1]),
                mono(2.0, [2, 0, 0, 0]),
                mono(1.0, [0, 2, 0, 0]),
                mono(1.0, [0, 0, 2, 0]),
            ],
        )
    }

    /// The sum of the five objectives.
    pub fn objective() -> Polynomial {
        Polynomial::new(4, objectives().into_iter().flat_map(|p| p.terms().to_vec()).collect())
    }

    /// Minimize `Σ f_i` subject to `g1, g2 ≤ 0`, `h1 = 0`; strongly convex with `α = 2`.
    pub fn central_problem() -> Result<ProblemSpec> {
        ProblemSpec::builder(4)
            .objective_fn(objective())
            .inequality_fn(g1())
            .inequality_fn(g2())
            .equality_fn(h1())
            .strong_convexity(2.0)
            .known_optimum(Vector::from_column_slice(&OPTIMUM))
            .build()
    }

    /// Agent 1 sees `(f1, g1, h1)`, agent 2 sees `(f2, g2)`, agents 3..5 only their objective.
    pub fn network_on(graph: Graph) -> Result<NetworkSpec> {
        let mut fs = objectives().into_iter().map(|p| Arc::new(p) as Oracle);
        let mut agents = vec![
            Agent {
                objective: fs.next().unwrap(),
                inequalities: vec![poly(g1().terms().to_vec())],
                equalities: vec![poly(h1().terms().to_vec())],
            },
            Agent {
                objective: fs.next().unwrap(),
                inequalities: vec![poly(g2().terms().to_vec())],
                equalities: vec![],
            },
        ];
        agents.extend(fs.map(Agent::objective_only));
        NetworkSpec::new(graph, 4, agents)?.with_known_optimum(Vector::from_column_slice(&OPTIMUM))
    }

    pub fn network() -> NetworkSpec {
        network_on(Graph::fig1_default()).expect("valid Rosen-Suzuki network")
    }

    /// The published initial condition: agent copies as printed,
    /// `λ_1 = λ_2 = 3`, `ν_1 = 3` and `w'_i = (1, 2, 3, 4)` for every agent.
    pub fn printed_initial_state() -> NetworkState {
        let v = |xs: [f64; 4]| Vector::from_column_slice(&xs);
        NetworkState {
            x: vec![
                v([3.0, 4.0, -3.0, 4.0]),
                v([1.0, -2.0, 4.0, 2.0]),
                v([-3.0, -4.0, 3.0, 3.0]),
                v([3.0, 1.0, 2.0, -3.0]),
                v([4.0, -2.0, -4.0, 1.0]),
            ],
            lambda: vec![
                Vector::from_element(1, 3.0),
                Vector::from_element(1, 3.0),
                Vector::zeros(0),
                Vector::zeros(0),
                Vector::zeros(0),
            ],
            nu: vec![
                Vector::from_element(1, 3.0),
                Vector::zeros(0),
                Vector::zeros(0),
                Vector::zeros(0),
                Vector::zeros(0),
            ],
            w: vec![v([1.0, 2.0, 3.0, 4.0]); 5],
        }
    }

    /// The printed initial condition with `w'` projected onto the range of
    /// `(T ⊗ I)ᵀ`. All `w'_i` are equal there, so the projection zeroes them.
    pub fn projected_initial_state() -> NetworkState {
        let mut s = printed_initial_state();
        s.project_dual_to_range();
        s
    }

    /// `η = 1` on both inequalities.
    pub fn eta() -> Vector {
        Vector::from_element(2, 1.0)
    }
}

/// Largest max-norm distance from any agent copy to `target`.
pub fn max_agent_error(state: &NetworkState, target: &Vector) -> f64 {
    state.x.iter().map(|xi| (xi - target).amax()).fold(0.0, f64::max)
}
