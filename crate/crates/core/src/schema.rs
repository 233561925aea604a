//! JSON problem files.
//!
//! Every function is a polynomial given as a list of monomials
//! `{"coeff": c, "exponents": [e1, ..., en]}`. A file describes either one
//! centralized program or, with `agents` and `edges`, a network problem.
//!
//! ```json
//! {
//!   "n": 2,
//!   "objective": [{"coeff": 1, "exponents": [2, 0]}, {"coeff": 1, "exponents": [0, 2]}],
//!   "inequalities": [[{"coeff": 1, "exponents": [1, 0]}, {"coeff": -1, "exponents": [0, 0]}]],
//!   "T": "identity",
//!   "phi": {"kind": "l1"}
//! }
//! ```

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::PrimalDualState;
use crate::error::{Error, Result};
use crate::network::{Agent, Graph, NetworkSpec, NetworkState};
use crate::oracle::{Monomial, Oracle, Polynomial};
use crate::problem::ProblemSpec;
use crate::prox::{ProxFunction, ProxKind};
use crate::registry::ProblemInstance;
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplittingSpec {
    /// `"identity"` or `"incidence"`.
    Named(String),
    /// Row-major.
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    Zero,
    L1,
    IndicatorZero,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Quadratic { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub objective: Vec<Term>,
    #[serde(default)]
    pub inequalities: Vec<Vec<Term>>,
    #[serde(default)]
    pub equalities: Vec<Vec<Term>>,
    /// `w` here is the agent's transformed multiplier `w'_i`.
    pub initial: Option<InitialSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub objective: Option<Vec<Term>>,
    #[serde(default)]
    pub inequalities: Vec<Vec<Term>>,
    #[serde(default)]
    pub equalities: Vec<Vec<Term>>,
    #[serde(rename = "T")]
    pub splitting: Option<SplittingSpec>,
    pub phi: Option<PhiSpec>,
    pub strong_convexity: Option<f64>,
    pub known_optimum: Option<Vec<f64>>,
    pub initial: Option<InitialSpec>,
    /// One weight per inequality (stacked over agents for network files).
    pub eta: Option<Vec<f64>>,
    pub agents: Option<Vec<AgentSpec>>,
    pub edges: Option<Vec<[usize; 2]>>,
}

fn parse_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{path}: {msg}"))
}

fn expect_len(path: &str, what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(parse_err(path, format!("expected {expected} entries ({what}), got {got}")))
    }
}

fn polynomial(path: &str, n: usize, terms: &[Term]) -> Result<Polynomial> {
    for (k, t) in terms.iter().enumerate() {
        expect_len(&format!("{path}[{k}].exponents"), "one per decision variable", n, t.exponents.len())?;
        if !t.coeff.is_finite() {
            return Err(parse_err(&format!("{path}[{k}].coeff"), "must be finite"));
        }
    }
    Ok(Polynomial::new(n, terms.iter().map(|t| Monomial { coeff: t.coeff, exponents: t.exponents.clone() }).collect()))
}

fn oracle_list(path: &str, n: usize, list: &[Vec<Term>]) -> Result<Vec<Oracle>> {
    list.iter()
        .enumerate()
        .map(|(i, terms)| Ok(Arc::new(polynomial(&format!("{path}[{i}]"), n, terms)?) as Oracle))
        .collect()
}

fn vector(path: &str, what: &str, expected: usize, v: &Option<Vec<f64>>) -> Result<Option<Vector>> {
    match v {
        None => Ok(None),
        Some(v) => {
            expect_len(path, what, expected, v.len())?;
            Ok(Some(Vector::from_column_slice(v)))
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path.is_empty() {
                Error::Parse(inner.to_string())
            } else {
                parse_err(&path, inner)
            }
        })
    }

    pub fn into_instance(self) -> Result<ProblemInstance> {
        if self.n == 0 {
            return Err(parse_err("n", "must be positive"));
        }
        if self.agents.is_some() || self.edges.is_some() {
            self.network_instance()
        } else {
            self.central_instance()
        }
    }

    fn central_instance(self) -> Result<ProblemInstance> {
        let n = self.n;
        let objective = self.objective.as_ref().ok_or_else(|| parse_err("objective", "missing field"))?;
        let f = polynomial("objective", n, objective)?;
        let g = oracle_list("inequalities", n, &self.inequalities)?;
        let h = oracle_list("equalities", n, &self.equalities)?;
        let t = match &self.splitting {
            None => DMatrix::identity(n, n),
            Some(SplittingSpec::Named(s)) if s == "identity" => DMatrix::identity(n, n),
            Some(SplittingSpec::Named(s)) if s == "incidence" => {
                return Err(parse_err("T", "\"incidence\" needs \"agents\" and \"edges\""))
            }
            Some(SplittingSpec::Named(s)) => {
                return Err(parse_err(
                    "T",
                    format!("unknown matrix name {s:?}; use \"identity\" or a row-major matrix"),
                ))
            }
            Some(SplittingSpec::Matrix(rows)) => {
                if rows.is_empty() {
                    return Err(parse_err("T", "matrix has no rows"));
                }
                for (i, row) in rows.iter().enumerate() {
                    expect_len(&format!("T[{i}]"), "one per decision variable", n, row.len())?;
                }
                DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
            }
        };
        let m = t.nrows();
        let phi = phi_function(self.phi.as_ref(), m)?;
        let mut b = ProblemSpec::builder(n).objective_fn(f).splitting(t, phi);
        for gi in g {
            b = b.inequality(gi);
        }
        for hi in h {
            b = b.equality(hi);
        }
        if let Some(a) = self.strong_convexity {
            b = b.strong_convexity(a);
        }
        if let Some(x) = vector("known_optimum", "one per decision variable", n, &self.known_optimum)? {
            b = b.known_optimum(x);
        }
        let spec = b.build().map_err(|e| parse_err("problem", e))?;
        let eta = vector("eta", "one per inequality", spec.r(), &self.eta)?;
        let state0 = match &self.initial {
            None => None,
            Some(init) => {
                let d = PrimalDualState::default_for(&spec);
                let x = vector("initial.x", "one per decision variable", n, &init.x)?.unwrap_or(d.x);
                let lambda =
                    vector("initial.lambda", "one per inequality", spec.r(), &init.lambda)?.unwrap_or(d.lambda);
                let nu = vector("initial.nu", "one per equality", spec.s(), &init.nu)?.unwrap_or(d.nu);
                let w = vector("initial.w", "one per row of T", m, &init.w)?.unwrap_or(d.w);
                Some(PrimalDualState::initial(x, lambda, nu, w).map_err(|e| parse_err("initial.lambda", e))?)
            }
        };
        Ok(ProblemInstance::Central { spec, state0, eta })
    }

    fn network_instance(self) -> Result<ProblemInstance> {
        let n = self.n;
        let agents = self.agents.as_ref().ok_or_else(|| parse_err("agents", "required with \"edges\""))?;
        let edges = self.edges.as_ref().ok_or_else(|| parse_err("edges", "required with \"agents\""))?;
        if self.objective.is_some() {
            return Err(parse_err("objective", "not allowed in a network file; give each agent its own"));
        }
        if !self.inequalities.is_empty() || !self.equalities.is_empty() {
            return Err(parse_err("inequalities", "constraints of a network file belong to agents"));
        }
        if self.initial.is_some() {
            return Err(parse_err("initial", "not allowed in a network file; use agents[i].initial"));
        }
        match &self.splitting {
            None => {}
            Some(SplittingSpec::Named(s)) if s == "incidence" => {}
            Some(_) => return Err(parse_err("T", "a network file only supports \"incidence\"")),
        }
        match &self.phi {
            None | Some(PhiSpec::IndicatorZero) => {}
            Some(_) => return Err(parse_err("phi", "a network file only supports {\"kind\": \"indicator_zero\"}")),
        }
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Graph::new(agents.len(), &pairs).map_err(|e| parse_err("edges", e))?;
        let mut list = Vec::with_capacity(agents.len());
        for (i, a) in agents.iter().enumerate() {
            let p = format!("agents[{i}]");
            list.push(Agent {
                objective: Arc::new(polynomial(&format!("{p}.objective"), n, &a.objective)?),
                inequalities: oracle_list(&format!("{p}.inequalities"), n, &a.inequalities)?,
                equalities: oracle_list(&format!("{p}.equalities"), n, &a.equalities)?,
            });
        }
        let mut net = NetworkSpec::new(graph, n, list).map_err(|e| parse_err("agents", e))?;
        if let Some(x) = vector("known_optimum", "one per decision variable", n, &self.known_optimum)? {
            net = net.with_known_optimum(x)?;
        }
        let eta = vector("eta", "one per inequality over all agents", net.r(), &self.eta)?;
        let mut state0 = NetworkState::default_for(&net);
        for (i, a) in agents.iter().enumerate() {
            let Some(init) = &a.initial else { continue };
            let p = format!("agents[{i}].initial");
            let r_i = net.lambda_block(i).len();
            let s_i = net.nu_block(i).len();
            if let Some(x) = vector(&format!("{p}.x"), "one per decision variable", n, &init.x)? {
                state0.x[i] = x;
            }
            if let Some(l) = vector(&format!("{p}.lambda"), "one per agent inequality", r_i, &init.lambda)? {
                if let Some(k) = l.iter().position(|&v| !(v > 0.0)) {
                    return Err(parse_err(&format!("{p}.lambda[{k}]"), "initial multipliers must be > 0"));
                }
                state0.lambda[i] = l;
            }
            if let Some(nu) = vector(&format!("{p}.nu"), "one per agent equality", s_i, &init.nu)? {
                state0.nu[i] = nu;
            }
            if let Some(w) = vector(&format!("{p}.w"), "one per decision variable", n, &init.w)? {
                state0.w[i] = w;
            }
        }
        Ok(ProblemInstance::Distributed { net, state0, eta })
    }
}

fn phi_function(spec: Option<&PhiSpec>, m: usize) -> Result<ProxFunction> {
    let kind = match spec {
        None | Some(PhiSpec::Zero) => ProxKind::Zero,
        Some(PhiSpec::L1) => ProxKind::L1Norm,
        Some(PhiSpec::IndicatorZero) => ProxKind::IndicatorZero,
        Some(PhiSpec::Box { lower, upper }) => {
            expect_len("phi.lower", "one per row of T", m, lower.len())?;
            expect_len("phi.upper", "one per row of T", m, upper.len())?;
            ProxKind::IndicatorBox { lower: Vector::from_column_slice(lower), upper: Vector::from_column_slice(upper) }
        }
        Some(PhiSpec::Quadratic { weight }) => ProxKind::Quadratic { weight: *weight },
    };
    ProxFunction::new(kind, m).map_err(|e| parse_err("phi", e))
}

pub fn parse_problem_str(text: &str) -> Result<ProblemInstance> {
    ProblemFile::from_json(text)?.into_instance()
}

pub fn parse_problem_file(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
