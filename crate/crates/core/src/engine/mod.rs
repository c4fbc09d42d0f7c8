//! State evolution: linear optics, ideal conditional flips, sources,
//! detection with feed-forward and post-selection.

mod measure;
mod permanent;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasisState, ModeRegistry, PhotonicState, Polarization, TimeBin, C64};
use crate::optics::ModeUnitary;

pub use measure::{
    measure_and_feedforward, merge_branches, Branch, Correction, CorrectionOp, DetectionBasis,
    Detector, DetectorSpec, FeedForwardAction, FeedForwardEntry, FeedForwardTable,
    MeasurementResult, OutcomeRecord,
};
pub use permanent::{permanent, transition_amplitude_oracle, TransitionAmplitude};

fn factorial(n: u8) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

/// Applies `a†_i -> sum_j U[j, i] a†_j` to every basis monomial.
pub fn apply_unitary(state: &PhotonicState, unitary: &ModeUnitary) -> Result<PhotonicState> {
    let m = state.registry().len();
    if unitary.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: unitary.dim(),
        });
    }
    let supports: Vec<Vec<(usize, C64)>> = (0..m).map(|i| unitary.column_support(i, 0.0)).collect();
    let mut out = state.like();
    for (occ, amp) in state.iter() {
        let in_norm: f64 = occ.occupations().iter().map(|&n| factorial(n)).product();
        let mut terms: HashMap<Vec<u8>, C64> = HashMap::new();
        terms.insert(vec![0; m], amp / in_norm.sqrt());
        for (mode, &n) in occ.occupations().iter().enumerate() {
            for _ in 0..n {
                let mut next: HashMap<Vec<u8>, C64> = HashMap::with_capacity(terms.len() * supports[mode].len());
                for (partial, c) in &terms {
                    for &(j, u) in &supports[mode] {
                        let mut o = partial.clone();
                        o[j] += 1;
                        *next.entry(o).or_default() += c * u;
                    }
                }
                terms = next;
            }
        }
        for (o, c) in terms {
            let out_norm: f64 = o.iter().map(|&n| factorial(n)).product();
            out.add(FockBasisState(o), c * out_norm.sqrt());
        }
    }
    Ok(out.pruned())
}

/// Ideal CNOT on polarization: when the control beam's `V` modes hold the
/// single control photon, `H` and `V` occupations of the target beam are
/// exchanged bin by bin. An empty target passes unchanged.
pub fn controlled_flip(state: &PhotonicState, control: &str, target: &str) -> Result<PhotonicState> {
    let reg = state.registry();
    let control_modes = reg.beam_modes(control)?;
    let control_v = reg.beam_pol_modes(control, Polarization::V)?;
    reg.require_beam(target)?;
    let pairs: Vec<(usize, usize)> = reg
        .bins()
        .into_iter()
        .map(|bin| Ok((reg.index(target, Polarization::H, bin)?, reg.index(target, Polarization::V, bin)?)))
        .collect::<Result<_>>()?;
    let mut out = state.like();
    for (occ, amp) in state.iter() {
        let photons = occ.count_in(&control_modes);
        if photons != 1 {
            return Err(Error::ControlPhotonCount {
                beam: control.to_string(),
                photons,
            });
        }
        let mut o = occ.clone();
        if occ.count_in(&control_v) == 1 {
            for &(h, v) in &pairs {
                o.0.swap(h, v);
            }
        }
        out.add(o, *amp);
    }
    Ok(out.pruned())
}

/// Tensors an ancilla state onto `state`; ancilla modes must be empty.
pub fn inject(state: &PhotonicState, ancilla: &PhotonicState) -> Result<PhotonicState> {
    state.check_registry(ancilla)?;
    let reg = state.registry();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for (occ, _) in ancilla.iter() {
        used.extend(occ.occupations().iter().enumerate().filter(|(_, &n)| n > 0).map(|(m, _)| m));
    }
    let mut out = state.like();
    for (occ, a) in state.iter() {
        if let Some(&m) = used.iter().find(|&&m| occ.0[m] > 0) {
            return Err(Error::OccupiedSource(reg.label(m).beam.clone()));
        }
        for (anc, b) in ancilla.iter() {
            let joined: Vec<u8> = occ.0.iter().zip(&anc.0).map(|(x, y)| x + y).collect();
            out.add(FockBasisState(joined), a * b);
        }
    }
    Ok(out.pruned())
}

/// Modes picked out by beam, with optional polarization and bin filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSelector {
    pub beam: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pol: Option<Polarization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<TimeBin>,
}

impl ModeSelector {
    pub fn beam(beam: &str) -> Self {
        ModeSelector {
            beam: beam.to_string(),
            pol: None,
            bin: None,
        }
    }

    pub fn resolve(&self, reg: &ModeRegistry) -> Result<Vec<usize>> {
        let all = reg.beam_modes(&self.beam)?;
        if self.bin.is_some() && !reg.time_resolved() {
            return Err(Error::NotTimeResolved(format!("bin filter on `{}`", self.beam)));
        }
        Ok(all
            .into_iter()
            .filter(|&m| {
                let l = reg.label(m);
                self.pol.is_none_or(|p| l.pol == p) && self.bin.is_none_or(|b| l.bin == Some(b))
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountConstraint {
    pub modes: Vec<ModeSelector>,
    pub count: usize,
}

/// Photon-count conditions applied to the output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PostSelectionRule {
    pub constraints: Vec<CountConstraint>,
    /// Beams whose photons must all share one time bin (coincidence window).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub same_time_bin: Vec<String>,
    #[serde(default)]
    pub renormalize: bool,
}

impl PostSelectionRule {
    /// Exactly `count` photons in each listed beam.
    pub fn per_beam(beams: &[&str], count: usize) -> Self {
        PostSelectionRule {
            constraints: beams
                .iter()
                .map(|b| CountConstraint {
                    modes: vec![ModeSelector::beam(b)],
                    count,
                })
                .collect(),
            same_time_bin: Vec::new(),
            renormalize: false,
        }
    }

    pub fn with_same_time_bin(mut self, beams: &[&str]) -> Self {
        self.same_time_bin = beams.iter().map(|b| b.to_string()).collect();
        self
    }

    pub fn and(mut self, other: PostSelectionRule) -> Self {
        self.constraints.extend(other.constraints);
        self.same_time_bin.extend(other.same_time_bin);
        self.renormalize |= other.renormalize;
        self
    }

    fn compile(&self, reg: &ModeRegistry) -> Result<CompiledRule> {
        let mut seen = BTreeSet::new();
        let mut counts = Vec::new();
        for c in &self.constraints {
            let mut modes = Vec::new();
            for sel in &c.modes {
                for m in sel.resolve(reg)? {
                    if !seen.insert(m) {
                        return Err(Error::OverlappingRule(m));
                    }
                    modes.push(m);
                }
            }
            counts.push((modes, c.count));
        }
        let mut early = Vec::new();
        let mut late = Vec::new();
        if !self.same_time_bin.is_empty() {
            if !reg.time_resolved() {
                return Err(Error::NotTimeResolved("coincidence window".into()));
            }
            for beam in &self.same_time_bin {
                for m in reg.beam_modes(beam)? {
                    match reg.label(m).bin {
                        Some(TimeBin::S) => early.push(m),
                        _ => late.push(m),
                    }
                }
            }
        }
        Ok(CompiledRule { counts, early, late })
    }
}

struct CompiledRule {
    counts: Vec<(Vec<usize>, usize)>,
    early: Vec<usize>,
    late: Vec<usize>,
}

impl CompiledRule {
    fn accepts(&self, occ: &FockBasisState) -> bool {
        self.counts.iter().all(|(modes, n)| occ.count_in(modes) == *n)
            && (occ.count_in(&self.early) == 0 || occ.count_in(&self.late) == 0)
    }
}

/// Keeps basis states satisfying `rule`; returns the surviving state and its
/// squared norm. The state is renormalized if the rule asks for it and any
/// amplitude survives.
pub fn post_select(state: &PhotonicState, rule: &PostSelectionRule) -> Result<(PhotonicState, f64)> {
    let compiled = rule.compile(state.registry())?;
    let mut out = state.like();
    for (occ, a) in state.iter() {
        if compiled.accepts(occ) {
            out.add(occ.clone(), *a);
        }
    }
    let p = out.norm_sqr();
    if rule.renormalize && p > 0.0 {
        out = out.normalized();
    }
    Ok((out, p))
}
