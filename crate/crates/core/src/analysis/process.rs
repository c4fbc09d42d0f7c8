use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::gates::GateSpec;
use crate::engine::{Branch, OutcomeRecord};
use crate::error::{Error, Result};
use crate::fock::{PhotonicState, C64};

/// Leakage (in probability) tolerated outside the logical output basis.
pub const LEAKAGE_TOLERANCE: f64 = 1e-9;
/// Tolerated mismatch between a superposition run and the reconstructed map.
pub const TOMOGRAPHY_TOLERANCE: f64 = 1e-10;

/// Conditional map of one detection record.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMap {
    pub outcomes: Vec<OutcomeRecord>,
    pub matrix: DMatrix<C64>,
}

/// Accepted-branch maps `K_k` with `output = K_k input` on logical
/// amplitudes. Heralded gates with feed-forward produce one map per record.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMap {
    pub branches: Vec<BranchMap>,
    /// Largest deviation seen on the superposition checks, if they ran.
    pub tomography_residual: Option<f64>,
}

impl ProcessMap {
    pub fn dims(&self) -> (usize, usize) {
        self.branches.first().map_or((0, 0), |b| b.matrix.shape())
    }

    /// Success probability of each basis input.
    pub fn column_probabilities(&self) -> Vec<f64> {
        let (_, d_in) = self.dims();
        (0..d_in)
            .map(|j| {
                self.branches
                    .iter()
                    .map(|b| b.matrix.column(j).norm_squared())
                    .sum()
            })
            .collect()
    }

    /// Mean success probability of each input group.
    pub fn group_probabilities(&self, groups: &[Vec<usize>]) -> Vec<f64> {
        let cols = self.column_probabilities();
        groups
            .iter()
            .map(|g| g.iter().map(|&j| cols[j]).sum::<f64>() / g.len() as f64)
            .collect()
    }

    /// Rescales each group's columns to the least likely group's probability,
    /// as a downstream attenuator on the better groups would.
    pub fn balanced(&self, groups: &[Vec<usize>]) -> ProcessMap {
        if groups.len() < 2 {
            return self.clone();
        }
        let probs = self.group_probabilities(groups);
        let floor = probs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut out = self.clone();
        for (g, p) in groups.iter().zip(&probs) {
            let s = if *p > 0.0 { (floor / p).sqrt() } else { 0.0 };
            for b in &mut out.branches {
                for &j in g {
                    b.matrix.column_mut(j).scale_mut(s);
                }
            }
        }
        out
    }

    pub fn fidelity(&self, ideal: &DMatrix<C64>) -> Result<f64> {
        Ok(1.0 - self.infidelity(ideal)?)
    }

    pub fn infidelity(&self, ideal: &DMatrix<C64>) -> Result<f64> {
        let maps: Vec<&DMatrix<C64>> = self.branches.iter().map(|b| &b.matrix).collect();
        branched_infidelity(&maps, ideal)
    }

    /// Applies every branch map to logical amplitudes.
    pub fn apply(&self, input: &DVector<C64>) -> Vec<DVector<C64>> {
        self.branches.iter().map(|b| &b.matrix * input).collect()
    }
}

/// `|tr(V^dag K)|^2 / (d ||K||_F^2)`: the fidelity of the probability-normalized
/// map with the ideal one. Equals 1 iff `K` is proportional to `ideal`.
pub fn process_fidelity(k: &DMatrix<C64>, ideal: &DMatrix<C64>) -> Result<f64> {
    branched_fidelity(&[k], ideal)
}

/// Fidelity of an incoherent mixture of branch maps, each weighted by its
/// own probability.
pub fn branched_fidelity(maps: &[&DMatrix<C64>], ideal: &DMatrix<C64>) -> Result<f64> {
    Ok(1.0 - branched_infidelity(maps, ideal)?)
}

/// `1 - F` without the cancellation of subtracting from one, via
/// `|V|^2 |K|^2 - |<V, K>|^2 = sum_{i<j} |V_i K_j - V_j K_i|^2`.
/// Stays accurate for infidelities far below machine epsilon.
pub fn branched_infidelity(maps: &[&DMatrix<C64>], ideal: &DMatrix<C64>) -> Result<f64> {
    let v = ideal.as_slice();
    let v_norm = ideal.norm_squared();
    let mut gap = 0.0;
    let mut weight = 0.0;
    for k in maps {
        if k.shape() != ideal.shape() {
            return Err(Error::DimensionMismatch {
                expected: ideal.nrows(),
                got: k.nrows(),
            });
        }
        let k = k.as_slice();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                if v[i] != C64::new(0.0, 0.0) || v[j] != C64::new(0.0, 0.0) {
                    gap += (v[i] * k[j] - v[j] * k[i]).norm_sqr();
                }
            }
        }
        weight += k.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    if weight == 0.0 || v_norm == 0.0 {
        return Err(Error::ZeroMap);
    }
    Ok((gap / (v_norm * weight)).clamp(0.0, 1.0))
}

fn max_abs(v: &DVector<C64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Projects each accepted branch onto the logical outputs.
fn project(spec: &GateSpec, branches: &[Branch], label: &str) -> Result<Vec<(Vec<OutcomeRecord>, DVector<C64>)>> {
    branches
        .iter()
        .map(|b| {
            let col = DVector::from_iterator(spec.outputs.len(), spec.outputs.iter().map(|o| b.state.amplitude(o)));
            let leak = b.probability() - col.norm_squared();
            if leak > LEAKAGE_TOLERANCE {
                return Err(Error::Leakage {
                    input: label.to_string(),
                    amount: leak,
                });
            }
            Ok((b.outcomes.clone(), col))
        })
        .collect()
}

fn run_columns(spec: &GateSpec, input: &PhotonicState, label: &str) -> Result<Vec<(Vec<OutcomeRecord>, DVector<C64>)>> {
    let result = spec.circuit.run(input)?;
    project(spec, &result.branches, label)
}

/// Maps built from the basis inputs alone.
pub fn process_map_from_basis(spec: &GateSpec) -> Result<ProcessMap> {
    let d_in = spec.inputs.len();
    let d_out = spec.outputs.len();
    let mut maps: BTreeMap<Vec<OutcomeRecord>, DMatrix<C64>> = BTreeMap::new();
    for (j, input) in spec.inputs.iter().enumerate() {
        for (record, col) in run_columns(spec, input, &spec.input_labels[j])? {
            maps.entry(record)
                .or_insert_with(|| DMatrix::zeros(d_out, d_in))
                .set_column(j, &col);
        }
    }
    if maps.is_empty() {
        return Err(Error::ZeroMap);
    }
    Ok(ProcessMap {
        branches: maps
            .into_iter()
            .map(|(outcomes, matrix)| BranchMap { outcomes, matrix })
            .collect(),
        tomography_residual: None,
    })
}

/// Reconstructs the conditional maps from the basis inputs and checks them
/// against every pairwise superposition `(|j> + |k>)/sqrt(2)` within a group.
pub fn conditional_process_map(spec: &GateSpec) -> Result<ProcessMap> {
    let mut map = process_map_from_basis(spec)?;
    let (_, d_in) = map.dims();
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut residual: f64 = 0.0;
    for group in &spec.groups {
        for (a, &j) in group.iter().enumerate() {
            for &k in &group[a + 1..] {
                let input = spec.superpose(&[(j, h), (k, h)])?;
                let label = format!("{}+{}", spec.input_labels[j], spec.input_labels[k]);
                let observed: BTreeMap<_, _> = run_columns(spec, &input, &label)?.into_iter().collect();
                let mut logical = DVector::zeros(d_in);
                logical[j] = h;
                logical[k] = h;
                for b in &map.branches {
                    let predicted = &b.matrix * &logical;
                    let dev = match observed.get(&b.outcomes) {
                        Some(col) => max_abs(&(col - &predicted)),
                        None => max_abs(&predicted),
                    };
                    residual = residual.max(dev);
                }
                if observed.keys().any(|r| !map.branches.iter().any(|b| &b.outcomes == r)) {
                    return Err(Error::Tomography(f64::INFINITY));
                }
            }
        }
    }
    if residual > TOMOGRAPHY_TOLERANCE {
        return Err(Error::Tomography(residual));
    }
    map.tomography_residual = Some(residual);
    Ok(map)
}
