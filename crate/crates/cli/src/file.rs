//! The versioned JSON circuit format.

use std::sync::Arc;

use photonic_lab::analysis::{cnot_matrix, fredkin_matrix, permutation_matrix, GateSpec};
use photonic_lab::circuit::{Circuit, Stage, TimeBinConfig};
use photonic_lab::{register_modes, TimeBin};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// How the logical output basis is placed in time bins.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputBins {
    /// The registry's default bin (none, or `S` when time-resolved).
    #[default]
    Default,
    /// Every output photon in the control's bin: `S` for control `H`,
    /// `L` for control `V`.
    FollowControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealGate {
    Identity,
    Cnot,
    Fredkin,
    /// Basis state `j` goes to `permutation[j]`.
    Permutation(Vec<usize>),
}

/// What a file's circuit is supposed to do, for `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateMeta {
    pub ideal: IdealGate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_probability: Option<f64>,
    #[serde(default)]
    pub output_bins: OutputBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub version: u32,
    pub name: String,
    pub beams: Vec<String>,
    #[serde(default)]
    pub time_resolved: bool,
    /// Input qubit beams, most significant first.
    pub qubits: Vec<String>,
    pub outputs: Vec<String>,
    /// Photon number of valid inputs; `null` or absent disables the check.
    pub photons: Option<usize>,
    pub stages: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_bin_config: Option<TimeBinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateMeta>,
}

impl CircuitFile {
    pub fn from_circuit(circuit: &Circuit, gate: Option<GateMeta>) -> Self {
        let reg = circuit.registry();
        CircuitFile {
            version: FORMAT_VERSION,
            name: circuit.name.clone(),
            beams: reg.beams().to_vec(),
            time_resolved: reg.time_resolved(),
            qubits: circuit.qubits().to_vec(),
            outputs: circuit.outputs().to_vec(),
            photons: circuit.photons(),
            stages: circuit.stages().to_vec(),
            time_bin_config: circuit.time_bin().copied(),
            gate,
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let file: CircuitFile = serde_json::from_str(text).map_err(|e| CliError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
        if file.version != FORMAT_VERSION {
            return Err(CliError::Usage(format!(
                "{origin}: unsupported circuit file version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("circuit files always serialize");
        s.push('\n');
        s
    }

    pub fn to_circuit(&self) -> Result<Circuit, CliError> {
        let reg = Arc::new(register_modes(&self.beams, self.time_resolved)?);
        let qubits: Vec<&str> = self.qubits.iter().map(String::as_str).collect();
        let outputs: Vec<&str> = self.outputs.iter().map(String::as_str).collect();
        let mut circuit =
            Circuit::new(&self.name, reg, self.stages.clone(), &qubits, &outputs)?.with_photons(self.photons);
        if let Some(cfg) = self.time_bin_config {
            circuit = circuit.with_time_bin(cfg)?;
        }
        Ok(circuit)
    }

    /// The circuit paired with its logical code, when the file declares one.
    pub fn to_spec(&self) -> Result<GateSpec, CliError> {
        let meta = self.gate.as_ref().ok_or_else(|| {
            CliError::Usage(format!("circuit `{}` has no `gate` section to verify against", self.name))
        })?;
        let circuit = self.to_circuit()?;
        let n = circuit.qubits().len();
        let d = 1usize << n;
        let ideal = match &meta.ideal {
            IdealGate::Identity => permutation_matrix(d, |j| j),
            IdealGate::Cnot => cnot_matrix(),
            IdealGate::Fredkin => fredkin_matrix(),
            IdealGate::Permutation(p) => {
                let mut seen = vec![false; d];
                if p.len() != d || !p.iter().all(|&k| k < d && !std::mem::replace(&mut seen[k], true)) {
                    return Err(CliError::Usage(format!("`permutation` must be a permutation of 0..{d}")));
                }
                permutation_matrix(d, |j| p[j])
            }
        };
        let bins = meta.output_bins;
        let time_resolved = circuit.registry().time_resolved();
        let spec = GateSpec::qubit_gate(circuit, ideal, meta.expected_probability, move |i| match bins {
            OutputBins::Default if time_resolved => Some(TimeBin::S),
            OutputBins::Default => None,
            OutputBins::FollowControl => Some(if i >> (n - 1) == 1 { TimeBin::L } else { TimeBin::S }),
        })?;
        Ok(spec)
    }
}

/// serde_json appends " at line X column Y"; the position is reported
/// separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}
