use photonic_lab::analysis::*;
use photonic_lab::circuit::{build_sanaka_cnot, Stage, TimeBinConfig};

fn spec(name: &str) -> GateSpec {
    gate_spec(name, &GateOptions::default()).unwrap()
}

#[test]
fn every_gate_meets_its_expectation() {
    let tol = Tolerances::default();
    for name in GATE_NAMES {
        let s = spec(name);
        let r = verify_gate(&s, None, &tol).unwrap();
        assert!(r.passed, "{name}");
        assert!(r.process_fidelity >= 1.0 - 1e-9, "{name}: F = {}", r.process_fidelity);
        let e = s.expected_probability.unwrap();
        assert!((r.success_probability - e).abs() < 1e-9, "{name}: p = {}", r.success_probability);
    }
}

#[test]
fn success_is_input_independent() {
    for name in GATE_NAMES.iter().filter(|n| **n != "cnot-simplified") {
        let s = spec(name);
        let inputs = random_inputs(&s, 20, 17).unwrap();
        let sweep = success_probability_sweep(&s.circuit, &inputs).unwrap();
        assert!(sweep.spread < 1e-10, "{name}: spread {}", sweep.spread);
        assert!((sweep.min - s.expected_probability.unwrap()).abs() < 1e-9, "{name}");
    }
}

#[test]
fn tomography_reproduces_superpositions() {
    for name in GATE_NAMES {
        let map = conditional_process_map(&spec(name)).unwrap();
        assert!(map.tomography_residual.unwrap() <= 1e-10, "{name}");
    }
}

#[test]
fn optimizer_results_resimulate() {
    let config = OptimizerConfig {
        seed: 3,
        restarts: 8,
        ..Default::default()
    };
    for (name, target) in [("simplified-cnot", 1.0 / 6.0), ("ralph-topology", 1.0 / 9.0)] {
        let problem = OptimizationProblem::named(name).unwrap();
        let out = optimize_gate(&problem, &config).unwrap();
        assert!(out.feasible, "{name}");
        assert!(out.probability >= target - 1e-6, "{name}: p = {}", out.probability);
        assert!((out.probability - target).abs() < 1e-8, "{name}: p = {}", out.probability);
        let report = verify_gate(&problem.spec(&out.parameters).unwrap(), None, &Tolerances::default()).unwrap();
        assert!((report.success_probability - out.probability).abs() < 1e-10, "{name}");
        assert!((report.process_fidelity - out.fidelity).abs() < 1e-10, "{name}");
        if name == "ralph-topology" {
            for eta in &out.parameters {
                assert!((eta - 1.0 / 3.0).abs() < 1e-6, "eta = {eta}");
            }
        }
    }
}

#[test]
fn optimizer_is_deterministic() {
    let problem = OptimizationProblem::named("simplified-cnot").unwrap();
    let config = OptimizerConfig {
        seed: 11,
        restarts: 4,
        ..Default::default()
    };
    let a = serde_json::to_string(&optimize_gate(&problem, &config).unwrap()).unwrap();
    let b = serde_json::to_string(&optimize_gate(&problem, &config).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = OptimizerConfig {
        seed: 12,
        ..config.clone()
    };
    let c = serde_json::to_string(&optimize_restarts(&problem, &other)).unwrap();
    assert_ne!(serde_json::to_string(&optimize_restarts(&problem, &config)).unwrap(), c);
}

#[test]
fn reports_serialize_reproducibly() {
    let s = spec("fredkin-fig3");
    let a = serde_json::to_string(&verify_gate(&s, Some((4, 1)), &Tolerances::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&verify_gate(&s, Some((4, 1)), &Tolerances::default()).unwrap()).unwrap();
    assert_eq!(a, b);
    let back: GateReport = serde_json::from_str(&a).unwrap();
    assert!(back.passed);
}

#[test]
fn stages_round_trip_through_json() {
    for name in GATE_NAMES {
        let s = spec(name);
        let text = serde_json::to_string(s.circuit.stages()).unwrap();
        let back: Vec<Stage> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s.circuit.stages(), "{name}");
    }
}

#[test]
fn time_bin_window_must_resolve_the_delay() {
    let ok = TimeBinConfig::default();
    assert!(build_sanaka_cnot(ok).is_ok());
    let edge = TimeBinConfig {
        delta_t: ok.delta_l / ok.c,
        ..ok
    };
    assert!(build_sanaka_cnot(edge).is_err());
}
