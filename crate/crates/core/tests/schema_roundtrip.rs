use std::path::PathBuf;

use palflow::dynamics::vector_field;
use palflow::network::{distributed_field, network_kkt, rosen_suzuki};
use palflow::problem::kkt_residual;
use palflow::registry::{self, ProblemInstance};
use palflow::schema::{parse_problem_file, parse_problem_str};
use palflow::{DynamicsParams, Error, NetworkState, PrimalDualState, SmoothingParam, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn close(a: &Vector, b: &Vector) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + y.abs()))
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(lo..hi))
}

#[test]
fn central_fixture_matches_registry() {
    let ProblemInstance::Central { spec: parsed, state0: s_parsed, eta: e_parsed } =
        parse_problem_file(&fixture("rosen_suzuki_central.json")).unwrap()
    else {
        panic!("central fixture parsed as a network")
    };
    let ProblemInstance::Central { spec, state0, eta } = registry::load("rosen-suzuki-central").unwrap() else {
        unreachable!()
    };
    assert_eq!(parsed.n(), spec.n());
    assert_eq!((parsed.r(), parsed.s(), parsed.m()), (spec.r(), spec.s(), spec.m()));
    assert_eq!(parsed.phi(), spec.phi());
    assert_eq!(parsed.splitting(), spec.splitting());
    assert_eq!(parsed.known_optimum(), spec.known_optimum());
    assert_eq!(parsed.strong_convexity(), spec.strong_convexity());
    assert_eq!(s_parsed, state0);
    assert_eq!(e_parsed, eta);

    let params = DynamicsParams::new(SmoothingParam::new(0.1).unwrap(), eta.unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let state = PrimalDualState::new(
            random_vector(&mut rng, 4, -3.0, 3.0),
            random_vector(&mut rng, 2, 0.0, 3.0),
            random_vector(&mut rng, 1, -3.0, 3.0),
            random_vector(&mut rng, 4, -1.0, 1.0),
        )
        .unwrap();
        let a = vector_field(&parsed, &state, &params).unwrap();
        let b = vector_field(&spec, &state, &params).unwrap();
        assert!(close(&a.dx, &b.dx) && close(&a.dlambda, &b.dlambda) && close(&a.dnu, &b.dnu) && close(&a.dw, &b.dw));
        let ra = kkt_residual(&parsed, &state.to_kkt(), params.mu).unwrap().total;
        let rb = kkt_residual(&spec, &state.to_kkt(), params.mu).unwrap().total;
        assert!((ra - rb).abs() <= 1e-12 * (1.0 + rb));
    }
}

#[test]
fn network_fixture_matches_registry() {
    let ProblemInstance::Distributed { net: parsed, state0: s_parsed, eta: e_parsed } =
        parse_problem_file(&fixture("rosen_suzuki_network.json")).unwrap()
    else {
        panic!("network fixture parsed as a central problem")
    };
    let net = rosen_suzuki::network();
    assert_eq!(parsed.graph(), net.graph());
    assert_eq!((parsed.n(), parsed.r(), parsed.s()), (net.n(), net.r(), net.s()));
    assert_eq!(s_parsed, rosen_suzuki::printed_initial_state());
    assert_eq!(e_parsed, Some(rosen_suzuki::eta()));

    let mu = SmoothingParam::new(0.1).unwrap();
    let params = DynamicsParams::new(mu, rosen_suzuki::eta()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let mut state = NetworkState::default_for(&net);
        for i in 0..net.num_agents() {
            state.x[i] = random_vector(&mut rng, 4, -3.0, 3.0);
            state.lambda[i] = random_vector(&mut rng, state.lambda[i].len(), 0.0, 3.0);
            state.nu[i] = random_vector(&mut rng, state.nu[i].len(), -3.0, 3.0);
            state.w[i] = random_vector(&mut rng, 4, -1.0, 1.0);
        }
        let a = distributed_field(&parsed, &state, &params).unwrap();
        let b = distributed_field(&net, &state, &params).unwrap();
        for (da, db) in a.iter().zip(&b) {
            assert!(
                close(&da.dx, &db.dx)
                    && close(&da.dlambda, &db.dlambda)
                    && close(&da.dnu, &db.dnu)
                    && close(&da.dw, &db.dw)
            );
        }
        let ra = network_kkt(&parsed, &state, mu).unwrap().total;
        let rb = network_kkt(&net, &state, mu).unwrap().total;
        assert!((ra - rb).abs() <= 1e-12 * (1.0 + rb));
    }
}

#[test]
fn malformed_documents_name_the_offending_path() {
    let cases = [
        (r#"{"n": 2, "objective": {"kind": "nope"}}"#, "objective"),
        (r#"{"n": 2, "objective": [{"coeff": 1.0, "exponents": [2, 0, 1]}]}"#, "objective[0].exponents"),
        (r#"{"n": 2, "objective": [], "extra": 1}"#, "extra"),
    ];
    for (text, path) in cases {
        match parse_problem_str(text) {
            Err(Error::Parse(msg)) => assert!(msg.contains(path), "{msg:?} should mention {path}"),
            other => panic!("{text}: expected a parse error, got {other:?}"),
        }
    }
}
