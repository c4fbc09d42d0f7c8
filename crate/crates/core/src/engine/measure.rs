use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{PhotonicState, Polarization};
use crate::optics::{compose, ElementSpec};

use super::apply_unitary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionBasis {
    HV,
    PlusMinus,
}

/// A photon-number-resolving, polarization-resolving detector on one beam.
/// In the `PlusMinus` basis the first count is `+` and the second `-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub name: String,
    pub beam: String,
    pub basis: DetectionBasis,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub detectors: Vec<Detector>,
}

impl DetectorSpec {
    pub fn new(detectors: Vec<Detector>) -> Self {
        DetectorSpec { detectors }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correction {
    Identity,
    PolarizationFlip,
    SignFlip,
    /// Sign flip followed by a polarization flip.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOp {
    pub beam: String,
    pub correction: Correction,
}

impl CorrectionOp {
    pub fn new(beam: &str, correction: Correction) -> Self {
        CorrectionOp {
            beam: beam.to_string(),
            correction,
        }
    }

    fn elements(&self) -> Vec<ElementSpec> {
        match self.correction {
            Correction::Identity => vec![],
            Correction::PolarizationFlip => vec![ElementSpec::hv_swap(&self.beam)],
            Correction::SignFlip => vec![ElementSpec::sign_flip(&self.beam)],
            Correction::Both => vec![ElementSpec::sign_flip(&self.beam), ElementSpec::hv_swap(&self.beam)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum FeedForwardAction {
    Accept {
        #[serde(default)]
        corrections: Vec<CorrectionOp>,
    },
    Reject,
}

/// Detector counts `[first, second]` keyed by detector name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardEntry {
    pub outcome: BTreeMap<String, [u8; 2]>,
    #[serde(flatten)]
    pub action: FeedForwardAction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardTable {
    pub entries: Vec<FeedForwardEntry>,
    /// Action for outcomes without an entry. Without it, such an outcome
    /// occurring with nonzero probability is an error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otherwise: Option<FeedForwardAction>,
}

impl FeedForwardTable {
    fn lookup(&self, counts: &BTreeMap<String, [u8; 2]>) -> Option<&FeedForwardAction> {
        self.entries
            .iter()
            .find(|e| &e.outcome == counts)
            .map(|e| &e.action)
            .or(self.otherwise.as_ref())
    }
}

/// One detection event: per-detector counts plus the full pattern over the
/// measured modes (which also resolves time bins).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub counts: BTreeMap<String, [u8; 2]>,
    pub pattern: Vec<u8>,
    pub accepted: bool,
}

impl fmt::Display for OutcomeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(name, [a, b])| format!("{name}=({a},{b})"))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// A conditional (unnormalized) state together with the detection record
/// that produced it. Branches with different records are incoherent.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcomes: Vec<OutcomeRecord>,
    pub state: PhotonicState,
}

impl Branch {
    pub fn root(state: PhotonicState) -> Self {
        Branch {
            outcomes: Vec::new(),
            state,
        }
    }

    pub fn probability(&self) -> f64 {
        self.state.norm_sqr()
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementResult {
    /// Accepted branches in canonical outcome order.
    pub branches: Vec<Branch>,
    /// Every outcome that occurred, accepted or not, with its probability.
    pub outcomes: Vec<(OutcomeRecord, f64)>,
}

impl MeasurementResult {
    pub fn acceptance_probability(&self) -> f64 {
        self.branches.iter().map(Branch::probability).sum()
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    pub fn merged_state(&self) -> Option<PhotonicState> {
        merge_branches(&self.branches)
    }
}

/// Combines corrected branches as `sum_k (p_k / sqrt(P)) |phi_k>` with
/// `|phi_k>` the normalized branch states and `P = sum_k p_k`. When every
/// branch carries the same conditional state the result has norm² `P`.
pub fn merge_branches(branches: &[Branch]) -> Option<PhotonicState> {
    let first = branches.first()?;
    let total: f64 = branches.iter().map(Branch::probability).sum();
    let mut merged = first.state.like();
    if total == 0.0 {
        return Some(merged);
    }
    for b in branches {
        let p = b.probability();
        if p == 0.0 {
            continue;
        }
        // (p / sqrt(P)) * psi / sqrt(p)
        let w = (p / total).sqrt();
        for (occ, a) in b.state.iter() {
            merged.add(occ.clone(), a * w);
        }
    }
    Some(merged.pruned())
}

/// Enumerates detection outcomes exactly, applies the table's corrections to
/// accepted outcomes and drops rejected ones. Measured modes are left empty.
pub fn measure_and_feedforward(
    state: &PhotonicState,
    detectors: &DetectorSpec,
    table: &FeedForwardTable,
) -> Result<MeasurementResult> {
    let reg = state.registry().clone();
    let mut rotated = state.clone();
    let mut rotations = Vec::new();
    let mut det_modes = Vec::new();
    for d in &detectors.detectors {
        reg.require_beam(&d.beam)?;
        if d.basis == DetectionBasis::PlusMinus {
            rotations.push(ElementSpec::hwp(&d.beam, 22.5));
        }
        det_modes.push((
            d.name.clone(),
            reg.beam_pol_modes(&d.beam, Polarization::H)?,
            reg.beam_pol_modes(&d.beam, Polarization::V)?,
        ));
    }
    if !rotations.is_empty() {
        rotated = apply_unitary(&rotated, &compose(&reg, &rotations)?)?;
    }
    let mut measured: Vec<usize> = det_modes
        .iter()
        .flat_map(|(_, h, v)| h.iter().chain(v).copied())
        .collect();
    measured.sort_unstable();

    let mut groups: BTreeMap<Vec<u8>, PhotonicState> = BTreeMap::new();
    for (occ, a) in rotated.iter() {
        let pattern: Vec<u8> = measured.iter().map(|&m| occ.0[m]).collect();
        let mut rest = occ.clone();
        for &m in &measured {
            rest.0[m] = 0;
        }
        groups
            .entry(pattern)
            .or_insert_with(|| rotated.like())
            .add(rest, *a);
    }

    let mut branches = Vec::new();
    let mut outcomes = Vec::new();
    for (pattern, conditional) in groups {
        let conditional = conditional.pruned();
        let p = conditional.norm_sqr();
        if conditional.is_empty() {
            continue;
        }
        let counts: BTreeMap<String, [u8; 2]> = det_modes
            .iter()
            .map(|(name, h, v)| {
                let count = |modes: &[usize]| -> u8 {
                    modes
                        .iter()
                        .map(|m| pattern[measured.binary_search(m).unwrap()])
                        .sum()
                };
                (name.clone(), [count(h), count(v)])
            })
            .collect();
        let mut record = OutcomeRecord {
            counts,
            pattern,
            accepted: false,
        };
        let action = table
            .lookup(&record.counts)
            .ok_or_else(|| Error::MissingOutcome(record.to_string()))?;
        if let FeedForwardAction::Accept { corrections } = action {
            record.accepted = true;
            let elements: Vec<ElementSpec> = corrections.iter().flat_map(CorrectionOp::elements).collect();
            let corrected = if elements.is_empty() {
                conditional
            } else {
                apply_unitary(&conditional, &compose(&reg, &elements)?)?
            };
            branches.push(Branch {
                outcomes: vec![record.clone()],
                state: corrected,
            });
        }
        outcomes.push((record, p));
    }
    Ok(MeasurementResult { branches, outcomes })
}

impl Branch {
    pub(crate) fn extend(&self, result: MeasurementResult) -> Vec<Branch> {
        result
            .branches
            .into_iter()
            .map(|b| {
                let mut outcomes = self.outcomes.clone();
                outcomes.extend(b.outcomes);
                Branch {
                    outcomes,
                    state: b.state,
                }
            })
            .collect()
    }
}
