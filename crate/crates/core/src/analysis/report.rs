use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::GateSpec;
use super::process::{conditional_process_map, ProcessMap};
use crate::circuit::Circuit;
use crate::error::Result;
use crate::fock::PhotonicState;

/// Tolerances used to decide whether a gate report passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub fidelity: f64,
    pub probability: f64,
    pub spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fidelity: 1e-9,
            probability: 1e-9,
            spread: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub probabilities: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
}

impl Sweep {
    fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let min = probabilities.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = probabilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Sweep {
            spread: if probabilities.is_empty() { 0.0 } else { max - min },
            probabilities,
            min,
            max,
        }
    }
}

/// Exact acceptance probability of each input, evaluated in parallel.
pub fn success_probability_sweep(circuit: &Circuit, inputs: &[PhotonicState]) -> Result<Sweep> {
    let probabilities = inputs
        .par_iter()
        .map(|s| Ok(circuit.run(s)?.success_probability()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Sweep::from_probabilities(probabilities))
}

/// `n` Haar-random inputs cycling over the gate's input groups.
pub fn random_inputs(spec: &GateSpec, n: usize, seed: u64) -> Result<Vec<PhotonicState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| spec.random_input(i, &mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub input: String,
    pub output: String,
    /// Amplitude `[re, im]` of the dominant output in the first branch.
    pub amplitude: [f64; 2],
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub gate: String,
    pub dimension: usize,
    pub branches: usize,
    pub truth_table: Vec<TruthRow>,
    /// First branch map, rows are outputs; entries `[re, im]`.
    pub process_matrix: Vec<Vec<[f64; 2]>>,
    pub process_fidelity: f64,
    /// Success probability after balancing input groups (the least likely
    /// group's probability).
    pub success_probability: f64,
    pub expected_probability: Option<f64>,
    /// Per basis input, before balancing.
    pub input_probabilities: Vec<f64>,
    pub tomography_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub conventions: Vec<String>,
    pub passed: bool,
}

pub const CONVENTIONS: [&str; 4] = [
    "modes: beam-major, H<V, S<L",
    "pbs: V crosses with amplitude +1",
    "bs: [[t, r], [r, -t]] on (a, b), minus on the signed port",
    "hwp(theta): [[cos 2theta, sin 2theta], [sin 2theta, -cos 2theta]]",
];

fn truth_table(spec: &GateSpec, map: &ProcessMap) -> Vec<TruthRow> {
    let cols = map.column_probabilities();
    (0..spec.dimension())
        .map(|j| {
            let weight = |i: usize| -> f64 { map.branches.iter().map(|b| b.matrix[(i, j)].norm_sqr()).sum() };
            let best = (0..spec.outputs.len())
                .max_by(|&a, &b| weight(a).total_cmp(&weight(b)).then(b.cmp(&a)))
                .unwrap_or(0);
            let a = map.branches[0].matrix[(best, j)];
            TruthRow {
                input: spec.input_labels[j].clone(),
                output: spec.output_labels[best].clone(),
                amplitude: [a.re, a.im],
                probability: cols[j],
            }
        })
        .collect()
}

/// Full verification of a gate: process map with tomography check,
/// fidelity against the ideal, probabilities, and an optional random sweep.
pub fn verify_gate(spec: &GateSpec, sweep: Option<(usize, u64)>, tol: &Tolerances) -> Result<GateReport> {
    let map = conditional_process_map(spec)?;
    let balanced = map.balanced(&spec.groups);
    let fidelity = balanced.fidelity(&spec.ideal)?;
    let group_probs = map.group_probabilities(&spec.groups);
    let p = group_probs.iter().cloned().fold(f64::INFINITY, f64::min);
    let sweep = match sweep {
        Some((n, seed)) => Some(success_probability_sweep(&spec.circuit, &random_inputs(spec, n, seed)?)?),
        None => None,
    };
    // the same probability for every input
    let uniform = |probs: &[f64]| probs.iter().all(|q| (q - p).abs() <= tol.spread);
    let input_probabilities = map.column_probabilities();
    let balanced_cols = balanced.column_probabilities();
    let passed = fidelity >= 1.0 - tol.fidelity
        && spec.expected_probability.is_none_or(|e| (p - e).abs() <= tol.probability)
        && uniform(&balanced_cols)
        && (spec.groups.len() > 1 || sweep.as_ref().is_none_or(|s| uniform(&s.probabilities)));
    Ok(GateReport {
        gate: spec.circuit.name.clone(),
        dimension: spec.dimension(),
        branches: map.branches.len(),
        truth_table: truth_table(spec, &map),
        process_matrix: map.branches[0]
            .matrix
            .row_iter()
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
        process_fidelity: fidelity,
        success_probability: p,
        expected_probability: spec.expected_probability,
        input_probabilities,
        tomography_residual: map.tomography_residual.unwrap_or(0.0),
        sweep,
        conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::gates::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ralph_report() {
        let r = verify_gate(&ralph_spec().unwrap(), Some((5, 1)), &Tolerances::default()).unwrap();
        assert!(r.passed);
        assert_abs_diff_eq!(r.success_probability, 1.0 / 9.0, epsilon = 1e-14);
        assert_eq!(r.truth_table[2].output, "VV");
        assert_eq!(r.truth_table[3].output, "VH");
        assert!(r.sweep.unwrap().spread < 1e-12);
    }

    #[test]
    fn failing_expectation_is_flagged() {
        let mut spec = ralph_spec().unwrap();
        spec.expected_probability = Some(1.0 / 8.0);
        assert!(!verify_gate(&spec, None, &Tolerances::default()).unwrap().passed);
    }

    #[test]
    fn sweeps_are_seeded() {
        let spec = pittman_spec().unwrap();
        let a = random_inputs(&spec, 3, 9).unwrap();
        let b = random_inputs(&spec, 3, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.describe(), y.describe());
        }
    }
}
