use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::{identity_spec, ralph_spec_with, simplified_spec, GateSpec};
use super::process::process_map_from_basis;
use crate::circuit::{RalphParams, SimplifiedParams};
use crate::error::{Error, Result};

/// Settings for one bounded Nelder-Mead descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Initial simplex edge as a fraction of each parameter's range.
    pub initial_step: f64,
    /// Stop when the simplex spans less than this in every coordinate.
    pub x_tol: f64,
    /// Stop when function values across the simplex differ by less.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 3000,
            initial_step: 0.1,
            x_tol: 1e-12,
            f_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Nelder-Mead with every trial point projected onto the box `bounds`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut start = x0.to_vec();
    clamp(&mut start, bounds);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = opts.initial_step * (hi - lo);
        let mut p = start.clone();
        // step away from the nearer wall
        p[i] = if p[i] + step <= hi { p[i] + step } else { p[i] - step };
        clamp(&mut p, bounds);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        let mut p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        clamp(&mut p, bounds);
        p
    };

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let width = (0..n)
            .map(|i| {
                let (lo, hi) = simplex
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])));
                hi - lo
            })
            .fold(0.0, f64::max);
        let finished = (spread.is_finite() && spread <= opts.f_tol) || width <= opts.x_tol;
        if finished || evals.get() >= opts.max_evals {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|p| p[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflected = lerp(&worst, &centroid, 2.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = lerp(&worst, &centroid, 3.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let p = lerp(&worst, &centroid, 1.5);
            let v = eval(&p);
            (p, v)
        } else {
            let p = lerp(&worst, &centroid, 0.5);
            let v = eval(&p);
            (p, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = lerp(&best, &simplex[i], 0.5);
            values[i] = eval(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Minimum {
        x: simplex[best].clone(),
        f: values[best],
        evals: evals.get(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Success probability after balancing input groups.
    pub probability: f64,
    pub fidelity: f64,
    pub infidelity: f64,
}

/// Evaluates `spec` on its basis inputs.
pub fn evaluate_spec(spec: &GateSpec) -> Result<Evaluation> {
    let map = process_map_from_basis(spec)?;
    let balanced = map.balanced(&spec.groups);
    let infidelity = balanced.infidelity(&spec.ideal)?;
    Ok(Evaluation {
        probability: map
            .group_probabilities(&spec.groups)
            .into_iter()
            .fold(f64::INFINITY, f64::min),
        fidelity: 1.0 - infidelity,
        infidelity,
    })
}

/// A parametrized gate family to maximize the success probability of while
/// keeping the logic exact.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub name: &'static str,
    pub parameter_names: Vec<&'static str>,
    pub bounds: Vec<(f64, f64)>,
    build: fn(&[f64]) -> Result<GateSpec>,
}

pub const PROBLEM_NAMES: [&str; 3] = ["simplified-cnot", "ralph-topology", "identity"];

fn build_simplified(p: &[f64]) -> Result<GateSpec> {
    simplified_spec(SimplifiedParams::from_slice(p)?)
}

fn build_ralph(p: &[f64]) -> Result<GateSpec> {
    ralph_spec_with(RalphParams::from_slice(p)?)
}

fn build_identity(p: &[f64]) -> Result<GateSpec> {
    match p {
        [eta] => identity_spec(*eta),
        _ => Err(Error::InvalidParameters(format!("expected 1 parameter, got {}", p.len()))),
    }
}

impl OptimizationProblem {
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "simplified-cnot" => OptimizationProblem {
                name: "simplified-cnot",
                parameter_names: vec!["theta1_deg", "coupling", "theta2_deg", "attenuation"],
                bounds: vec![(0.0, 180.0), (0.0, 1.0), (0.0, 180.0), (0.0, 1.0)],
                build: build_simplified,
            },
            "ralph-topology" => OptimizationProblem {
                name: "ralph-topology",
                parameter_names: vec!["control_bystander", "central", "target_bystander"],
                bounds: vec![(0.0, 1.0); 3],
                build: build_ralph,
            },
            "identity" => OptimizationProblem {
                name: "identity",
                parameter_names: vec!["reflectivity"],
                bounds: vec![(0.0, 1.0)],
                build: build_identity,
            },
            _ => return Err(Error::UnknownProblem(name.to_string())),
        })
    }

    pub fn spec(&self, params: &[f64]) -> Result<GateSpec> {
        (self.build)(params)
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        evaluate_spec(&self.spec(params)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Penalty weights on `1 - fidelity`, applied in turn, each stage
    /// starting from the previous stage's optimum.
    pub penalties: Vec<f64>,
    pub fidelity_tolerance: f64,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed: 0,
            restarts: 32,
            penalties: vec![1e3, 1e6, 1e9, 1e12],
            fidelity_tolerance: 1e-8,
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    pub start: Vec<f64>,
    pub parameters: Vec<f64>,
    pub probability: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub objective: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationOutcome {
    pub problem: String,
    pub parameter_names: Vec<String>,
    pub parameters: Vec<f64>,
    pub probability: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    /// Whether the best point meets the fidelity tolerance. When false the
    /// other fields describe the least infidelity point found.
    pub feasible: bool,
    pub seed: u64,
    pub restarts: usize,
    pub evaluations: usize,
}

fn objective(problem: &OptimizationProblem, x: &[f64], lambda: f64) -> f64 {
    match problem.evaluate(x) {
        Ok(e) => -e.probability + lambda * e.infidelity,
        Err(_) => 1.0 + lambda,
    }
}

fn run_restart(problem: &OptimizationProblem, config: &OptimizerConfig, index: usize) -> RestartResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let start: Vec<f64> = problem.bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let mut x = start.clone();
    let mut evaluations = 0;
    let mut opts = config.nelder_mead;
    let mut last = f64::INFINITY;
    for &lambda in &config.penalties {
        let m = nelder_mead(|p| objective(problem, p, lambda), &x, &problem.bounds, &opts);
        evaluations += m.evals;
        x = m.x;
        last = m.f;
        opts.initial_step *= 0.1;
    }
    let (probability, infidelity) = match problem.evaluate(&x) {
        Ok(e) => (e.probability, e.infidelity),
        Err(_) => (0.0, 1.0),
    };
    RestartResult {
        start,
        parameters: x,
        probability,
        fidelity: 1.0 - infidelity,
        infidelity,
        objective: last,
        evaluations,
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// All restarts, sorted by objective and then by parameters.
pub fn optimize_restarts(problem: &OptimizationProblem, config: &OptimizerConfig) -> Vec<RestartResult> {
    let mut results: Vec<RestartResult> = (0..config.restarts)
        .into_par_iter()
        .map(|i| run_restart(problem, config, i))
        .collect();
    results.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(lexicographic(&a.parameters, &b.parameters)));
    results
}

/// Multi-start penalized search: maximize `p` subject to fidelity one.
pub fn optimize_gate(problem: &OptimizationProblem, config: &OptimizerConfig) -> Result<OptimizationOutcome> {
    if config.restarts == 0 || config.penalties.is_empty() {
        return Err(Error::InvalidParameters("need at least one restart and one penalty".into()));
    }
    let results = optimize_restarts(problem, config);
    let feasible = |r: &RestartResult| r.infidelity <= config.fidelity_tolerance;
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let (best, ok) = match results.iter().find(|r| feasible(r)) {
        Some(r) => (r, true),
        None => (
            results
                .iter()
                .min_by(|a, b| a.infidelity.total_cmp(&b.infidelity).then(lexicographic(&a.parameters, &b.parameters)))
                .unwrap(),
            false,
        ),
    };
    Ok(OptimizationOutcome {
        problem: problem.name.to_string(),
        parameter_names: problem.parameter_names.iter().map(|s| s.to_string()).collect(),
        parameters: best.parameters.clone(),
        probability: best.probability,
        fidelity: best.fidelity,
        infidelity: best.infidelity,
        feasible: ok,
        seed: config.seed,
        restarts: config.restarts,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let m = nelder_mead(
            |x| (x[0] - 0.3).powi(2) + 10.0 * (x[1] + 0.2).powi(2),
            &[0.9, 0.9],
            &[(-1.0, 1.0), (-1.0, 1.0)],
            &NelderMeadOptions::default(),
        );
        assert_abs_diff_eq!(m.x[0], 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(m.x[1], -0.2, epsilon = 1e-6);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let m = nelder_mead(|x| x[0], &[0.5], &[(0.0, 1.0)], &NelderMeadOptions::default());
        assert_eq!(m.x[0], 0.0);
    }

    #[test]
    fn identity_problem() {
        let problem = OptimizationProblem::named("identity").unwrap();
        let config = OptimizerConfig {
            restarts: 4,
            ..Default::default()
        };
        let out = optimize_gate(&problem, &config).unwrap();
        assert!(out.feasible);
        assert_abs_diff_eq!(out.probability, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.parameters[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_problem() {
        assert!(matches!(OptimizationProblem::named("x"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn closed_form_points() {
        let s = OptimizationProblem::named("simplified-cnot").unwrap();
        let e = s.evaluate(&SimplifiedParams::OPTIMAL.to_vec()).unwrap();
        assert_abs_diff_eq!(e.probability, 1.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.fidelity, 1.0, epsilon = 1e-14);
        let r = OptimizationProblem::named("ralph-topology").unwrap();
        let e = r.evaluate(&[1.0 / 3.0; 3]).unwrap();
        assert_abs_diff_eq!(e.probability, 1.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.fidelity, 1.0, epsilon = 1e-14);
    }
}
