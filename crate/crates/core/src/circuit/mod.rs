//! Circuits as ordered stage lists, and builders for the gates in this crate.

mod builders;
mod timebin;

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::{
    apply_unitary, controlled_flip, inject, measure_and_feedforward, merge_branches, post_select, Branch,
    DetectorSpec, FeedForwardTable, OutcomeRecord, PostSelectionRule,
};
use crate::error::{Error, Result};
use crate::fock::{FockBasisState, ModeRegistry, PhotonicState, Polarization, C64};
use crate::optics::{compose, ElementSpec, ModeUnitary};

pub use builders::*;
pub use timebin::TimeBinConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

/// Ancilla photons created into empty modes, in the registry's default bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    BellPair { a: String, b: String, state: BellState },
    SinglePhoton { beam: String, pol: Polarization },
}

impl SourceSpec {
    fn beams(&self) -> Vec<&str> {
        match self {
            SourceSpec::BellPair { a, b, .. } => vec![a, b],
            SourceSpec::SinglePhoton { beam, .. } => vec![beam],
        }
    }

    fn photons(&self) -> usize {
        self.beams().len()
    }

    fn state(&self, reg: &Arc<ModeRegistry>) -> Result<PhotonicState> {
        use Polarization::{H, V};
        match self {
            SourceSpec::SinglePhoton { beam, pol } => PhotonicState::from_photons(reg.clone(), &[(beam, *pol)]),
            SourceSpec::BellPair { a, b, state } => {
                let (first, second, sign) = match state {
                    BellState::PhiPlus => ([H, H], [V, V], 1.0),
                    BellState::PhiMinus => ([H, H], [V, V], -1.0),
                    BellState::PsiPlus => ([H, V], [V, H], 1.0),
                    BellState::PsiMinus => ([H, V], [V, H], -1.0),
                };
                let one = PhotonicState::from_photons(reg.clone(), &[(a, first[0]), (b, first[1])])?;
                let two = PhotonicState::from_photons(reg.clone(), &[(a, second[0]), (b, second[1])])?;
                one.scaled(C64::new(FRAC_1_SQRT_2, 0.0))
                    .plus(&two.scaled(C64::new(sign * FRAC_1_SQRT_2, 0.0)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    /// Optical elements applied in order.
    Linear { elements: Vec<ElementSpec> },
    /// A precompiled mode unitary, column `i` being the image of mode `i`.
    Unitary { matrix: DMatrix<C64> },
    /// Ideal polarization CNOT between two beams.
    ControlledFlip { control: String, target: String },
    Source(SourceSpec),
    Measure {
        detectors: DetectorSpec,
        table: FeedForwardTable,
    },
    PostSelect { rule: PostSelectionRule },
    /// Named point at which a run can be stopped.
    Checkpoint { name: String },
}

impl Stage {
    pub fn linear(elements: Vec<ElementSpec>) -> Self {
        Stage::Linear { elements }
    }

    pub fn flip(control: &str, target: &str) -> Self {
        Stage::ControlledFlip {
            control: control.into(),
            target: target.into(),
        }
    }

    pub fn checkpoint(name: &str) -> Self {
        Stage::Checkpoint { name: name.into() }
    }

    pub fn post_select(rule: PostSelectionRule) -> Self {
        Stage::PostSelect { rule }
    }

    fn check_beams(&self, reg: &ModeRegistry) -> Result<()> {
        let beams: Vec<&str> = match self {
            Stage::Linear { elements } => elements.iter().flat_map(|e| e.beams()).collect(),
            Stage::ControlledFlip { control, target } => vec![control, target],
            Stage::Source(s) => s.beams(),
            Stage::Measure { detectors, table } => {
                for entry in &table.entries {
                    for name in entry.outcome.keys() {
                        if !detectors.detectors.iter().any(|d| &d.name == name) {
                            return Err(Error::MissingOutcome(format!("no detector named `{name}`")));
                        }
                    }
                }
                detectors.detectors.iter().map(|d| d.beam.as_str()).collect()
            }
            Stage::PostSelect { rule } => rule
                .constraints
                .iter()
                .flat_map(|c| c.modes.iter().map(|m| m.beam.as_str()))
                .chain(rule.same_time_bin.iter().map(String::as_str))
                .collect(),
            Stage::Unitary { matrix } => {
                if matrix.nrows() != reg.len() || matrix.ncols() != reg.len() {
                    return Err(Error::DimensionMismatch {
                        expected: reg.len(),
                        got: matrix.nrows(),
                    });
                }
                vec![]
            }
            Stage::Checkpoint { .. } => vec![],
        };
        beams.into_iter().try_for_each(|b| reg.require_beam(b))
    }
}

/// Where a run ended and what survived.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Accepted branches, each with its detection record.
    pub branches: Vec<Branch>,
    input_norm: f64,
}

impl RunResult {
    /// Total accepted probability for a normalized input.
    pub fn success_probability(&self) -> f64 {
        self.branches.iter().map(Branch::probability).sum::<f64>() / self.input_norm
    }

    /// Corrected branches combined into one state of norm² equal to the
    /// success probability (times the input norm²).
    pub fn merged_state(&self) -> Option<PhotonicState> {
        merge_branches(&self.branches)
    }

    /// The merged state normalized to one, if anything survived.
    pub fn conditional_state(&self) -> Option<PhotonicState> {
        self.merged_state().filter(|s| s.norm_sqr() > 0.0).map(|s| s.normalized())
    }

    pub fn outcome_records(&self) -> Vec<&[OutcomeRecord]> {
        self.branches.iter().map(|b| b.outcomes.as_slice()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub name: String,
    registry: Arc<ModeRegistry>,
    /// Photon number carried by the input state.
    photons: Option<usize>,
    stages: Vec<Stage>,
    /// Beams holding the input qubits, most significant first.
    qubits: Vec<String>,
    /// Beams holding the output qubits, in the same order.
    outputs: Vec<String>,
    time_bin: Option<TimeBinConfig>,
    /// Mode unitary of each linear stage, built once.
    unitaries: Vec<Option<ModeUnitary>>,
}

impl Circuit {
    pub fn new(
        name: &str,
        registry: Arc<ModeRegistry>,
        stages: Vec<Stage>,
        qubits: &[&str],
        outputs: &[&str],
    ) -> Result<Self> {
        let mut circuit = Circuit {
            name: name.to_string(),
            registry,
            photons: Some(qubits.len()),
            stages,
            qubits: qubits.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            time_bin: None,
            unitaries: Vec::new(),
        };
        circuit.validate()?;
        circuit.unitaries = circuit
            .stages
            .iter()
            .map(|s| circuit.stage_unitary(s))
            .collect::<Result<_>>()?;
        Ok(circuit)
    }

    /// Circuits whose input photon number is not fixed by their qubits.
    pub fn with_photons(mut self, photons: Option<usize>) -> Self {
        self.photons = photons;
        self
    }

    pub fn with_time_bin(mut self, config: TimeBinConfig) -> Result<Self> {
        if !self.registry.time_resolved() {
            return Err(Error::NotTimeResolved(self.name.clone()));
        }
        config.validate()?;
        self.time_bin = Some(config);
        Ok(self)
    }

    /// Re-checks everything `new` checks; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::EmptyCircuit);
        }
        for beam in self.qubits.iter().chain(&self.outputs) {
            self.registry.require_beam(beam)?;
        }
        for s in &self.stages {
            s.check_beams(&self.registry)?;
        }
        // post-selection may only close the circuit
        let first_post = self.stages.iter().position(|s| matches!(s, Stage::PostSelect { .. }));
        if let Some(i) = first_post {
            let trailing_ok = self.stages[i..]
                .iter()
                .all(|s| matches!(s, Stage::PostSelect { .. } | Stage::Checkpoint { .. }));
            if !trailing_ok {
                return Err(Error::InvalidParameters(
                    "post-selection must form the terminal stages".into(),
                ));
            }
        }
        if let Some(cfg) = &self.time_bin {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn photons(&self) -> Option<usize> {
        self.photons
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn qubits(&self) -> &[String] {
        &self.qubits
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn time_bin(&self) -> Option<&TimeBinConfig> {
        self.time_bin.as_ref()
    }

    pub fn checkpoints(&self) -> Vec<&str> {
        self.stages
            .iter()
            .filter_map(|s| match s {
                Stage::Checkpoint { name } => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    /// The product of every linear stage, ignoring everything else.
    pub fn linear_unitary(&self) -> Result<ModeUnitary> {
        let mut u = ModeUnitary::identity(&self.registry);
        for next in self.unitaries.iter().flatten() {
            u = u.then(next);
        }
        Ok(u)
    }

    fn stage_unitary(&self, stage: &Stage) -> Result<Option<ModeUnitary>> {
        Ok(match stage {
            Stage::Linear { elements } => Some(compose(&self.registry, elements)?),
            Stage::Unitary { matrix } => Some(ModeUnitary::from_matrix(&self.registry, matrix.clone())?),
            _ => None,
        })
    }

    pub fn run(&self, input: &PhotonicState) -> Result<RunResult> {
        self.execute(input, None)
    }

    /// Runs up to (not including anything after) the named checkpoint.
    pub fn run_until(&self, input: &PhotonicState, checkpoint: &str) -> Result<RunResult> {
        if !self.checkpoints().contains(&checkpoint) {
            return Err(Error::UnknownCheckpoint(checkpoint.to_string()));
        }
        self.execute(input, Some(checkpoint))
    }

    fn execute(&self, input: &PhotonicState, stop: Option<&str>) -> Result<RunResult> {
        if !Arc::ptr_eq(input.registry(), &self.registry) && **input.registry() != *self.registry {
            return Err(Error::RegistryMismatch);
        }
        if let Some(n) = self.photons {
            for got in input.photon_numbers() {
                if got != n {
                    return Err(Error::PhotonCount { expected: n, got });
                }
            }
        }
        let input_norm = input.norm_sqr();
        if input_norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        let mut branches = vec![Branch::root(input.clone())];
        for (stage, unitary) in self.stages.iter().zip(&self.unitaries) {
            if let Stage::Checkpoint { name } = stage {
                if Some(name.as_str()) == stop {
                    break;
                }
                continue;
            }
            branches = self.apply_stage(stage, unitary.as_ref(), branches)?;
        }
        Ok(RunResult { branches, input_norm })
    }

    fn apply_stage(&self, stage: &Stage, unitary: Option<&ModeUnitary>, branches: Vec<Branch>) -> Result<Vec<Branch>> {
        if let Some(u) = unitary {
            return branches
                .into_iter()
                .map(|b| {
                    Ok(Branch {
                        state: apply_unitary(&b.state, u)?,
                        outcomes: b.outcomes,
                    })
                })
                .collect();
        }
        let mut out = Vec::with_capacity(branches.len());
        for b in branches {
            match stage {
                Stage::ControlledFlip { control, target } => out.push(Branch {
                    state: controlled_flip(&b.state, control, target)?,
                    outcomes: b.outcomes,
                }),
                Stage::Source(src) => {
                    let anc = src.state(&self.registry)?;
                    out.push(Branch {
                        state: inject(&b.state, &anc)?,
                        outcomes: b.outcomes,
                    });
                }
                Stage::Measure { detectors, table } => {
                    let result = measure_and_feedforward(&b.state, detectors, table)?;
                    out.extend(b.extend(result));
                }
                Stage::PostSelect { rule } => {
                    let rule = PostSelectionRule {
                        renormalize: false,
                        ..rule.clone()
                    };
                    let (state, _) = post_select(&b.state, &rule)?;
                    if !state.is_empty() {
                        out.push(Branch {
                            state,
                            outcomes: b.outcomes,
                        });
                    }
                }
                Stage::Linear { .. } | Stage::Unitary { .. } | Stage::Checkpoint { .. } => unreachable!(),
            }
        }
        Ok(out)
    }

    /// Photons contributed by sources during a run.
    pub fn ancilla_photons(&self) -> usize {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::Source(src) => src.photons(),
                _ => 0,
            })
            .sum()
    }

    /// The Fock state with one photon per output beam, polarized per the
    /// bits of `index` and placed in `bin`.
    pub fn output_basis_state(&self, index: usize, bins: &[Option<crate::fock::TimeBin>]) -> Result<FockBasisState> {
        let n = self.outputs.len();
        let mut occ = FockBasisState::vacuum(self.registry.len());
        for (q, beam) in self.outputs.iter().enumerate() {
            let pol = if (index >> (n - 1 - q)) & 1 == 1 {
                Polarization::V
            } else {
                Polarization::H
            };
            occ.0[self.registry.index(beam, pol, bins[q])?] += 1;
        }
        Ok(occ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{CountConstraint, ModeSelector};
    use crate::fock::register_modes;
    use approx::assert_abs_diff_eq;

    fn reg(beams: &[&str]) -> Arc<ModeRegistry> {
        Arc::new(register_modes(beams, false).unwrap())
    }

    #[test]
    fn validation_errors() {
        let r = reg(&["a", "b"]);
        assert_eq!(Circuit::new("x", r.clone(), vec![], &["a"], &["a"]), Err(Error::EmptyCircuit));
        let bad = Circuit::new("x", r.clone(), vec![Stage::flip("a", "z")], &["a"], &["a"]);
        assert!(matches!(bad, Err(Error::UnknownBeam(_))));
        let rule = PostSelectionRule::per_beam(&["a"], 1);
        let misordered = vec![Stage::post_select(rule), Stage::linear(vec![ElementSpec::hv_swap("a")])];
        assert!(Circuit::new("x", r.clone(), misordered, &["a"], &["a"]).is_err());
        let c = Circuit::new("x", r, vec![Stage::checkpoint("mid")], &["a"], &["a"]).unwrap();
        assert!(c.with_time_bin(TimeBinConfig::default()).is_err());
    }

    #[test]
    fn checkpoints_and_photon_count() {
        let r = reg(&["a", "b"]);
        let c = Circuit::new(
            "x",
            r.clone(),
            vec![
                Stage::linear(vec![ElementSpec::hv_swap("a")]),
                Stage::checkpoint("mid"),
                Stage::linear(vec![ElementSpec::swap("a", "b")]),
            ],
            &["a"],
            &["b"],
        )
        .unwrap();
        let input = PhotonicState::from_photons(r.clone(), &[("a", Polarization::H)]).unwrap();
        let mid = c.run_until(&input, "mid").unwrap().merged_state().unwrap();
        assert_abs_diff_eq!(
            mid.amplitude(&FockBasisState(vec![0, 1, 0, 0])).re,
            1.0,
            epsilon = 1e-15
        );
        let end = c.run(&input).unwrap().merged_state().unwrap();
        assert_abs_diff_eq!(end.amplitude(&FockBasisState(vec![0, 0, 0, 1])).re, 1.0, epsilon = 1e-15);
        assert!(matches!(c.run_until(&input, "nope"), Err(Error::UnknownCheckpoint(_))));
        let two = PhotonicState::from_photons(r, &[("a", Polarization::H), ("b", Polarization::H)]).unwrap();
        assert!(matches!(c.run(&two), Err(Error::PhotonCount { .. })));
    }

    #[test]
    fn bell_sources() {
        let r = reg(&["a", "b"]);
        for (state, hh, hv) in [
            (BellState::PhiPlus, FRAC_1_SQRT_2, 0.0),
            (BellState::PsiMinus, 0.0, FRAC_1_SQRT_2),
        ] {
            let s = SourceSpec::BellPair {
                a: "a".into(),
                b: "b".into(),
                state,
            }
            .state(&r)
            .unwrap();
            assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s.amplitude(&FockBasisState(vec![1, 0, 1, 0])).re, hh, epsilon = 1e-15);
            assert_abs_diff_eq!(s.amplitude(&FockBasisState(vec![1, 0, 0, 1])).re, hv, epsilon = 1e-15);
        }
    }

    #[test]
    fn terminal_post_selection_drops_empty_branches() {
        let r = reg(&["a", "b"]);
        let rule = PostSelectionRule {
            constraints: vec![CountConstraint {
                modes: vec![ModeSelector::beam("b")],
                count: 1,
            }],
            ..Default::default()
        };
        let c = Circuit::new(
            "x",
            r.clone(),
            vec![Stage::linear(vec![ElementSpec::bs("a", "b", 0.25)]), Stage::post_select(rule)],
            &["a"],
            &["b"],
        )
        .unwrap();
        let input = PhotonicState::from_photons(r, &[("a", Polarization::V)]).unwrap();
        let res = c.run(&input).unwrap();
        assert_abs_diff_eq!(res.success_probability(), 0.25, epsilon = 1e-15);
        assert_eq!(res.branches.len(), 1);
    }
}
