use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_fredkin_heralded, build_fredkin_postselected, build_fredkin_timebin, build_leaky_identity,
    build_pittman_cnot, build_ralph_cnot, build_ralph_cnot_with, build_sanaka_cnot, build_simplified_cnot, Circuit,
    HeraldedCnot, PostSelectedCnots, RalphParams, SimplifiedParams, TimeBinConfig,
};
use crate::error::{Error, Result};
use crate::fock::{prepare_logical_input, FockBasisState, LogicalAmplitudes, PhotonicState, Polarization, TimeBin, C64};

/// Names accepted by [`gate_spec`].
pub const GATE_NAMES: [&str; 8] = [
    "fredkin-heralded",
    "fredkin-postselected",
    "fredkin-fig3",
    "fredkin-timebin",
    "cnot-pittman",
    "cnot-ralph",
    "cnot-sanaka",
    "cnot-simplified",
];

/// A circuit together with the logical code it is meant to implement.
#[derive(Debug, Clone)]
pub struct GateSpec {
    pub circuit: Circuit,
    /// Logical input basis states, as Fock states of the circuit.
    pub inputs: Vec<PhotonicState>,
    pub input_labels: Vec<String>,
    /// Logical output basis, `ideal` being expressed in it.
    pub outputs: Vec<FockBasisState>,
    pub output_labels: Vec<String>,
    /// Target map, `outputs.len() x inputs.len()`.
    pub ideal: DMatrix<C64>,
    /// Input columns that may be superposed. Columns in different groups
    /// carry different photon numbers and are compared after rescaling each
    /// group to a common success probability.
    pub groups: Vec<Vec<usize>>,
    pub expected_probability: Option<f64>,
}

/// Knobs for gates that take configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOptions {
    #[serde(default)]
    pub time_bin: TimeBinConfig,
    #[serde(default = "default_simplified")]
    pub simplified: SimplifiedParams,
}

fn default_simplified() -> SimplifiedParams {
    SimplifiedParams::OPTIMAL
}

impl Default for GateOptions {
    fn default() -> Self {
        GateOptions {
            time_bin: TimeBinConfig::default(),
            simplified: SimplifiedParams::OPTIMAL,
        }
    }
}

fn bits_label(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if (index >> (n - 1 - q)) & 1 == 1 { 'V' } else { 'H' })
        .collect()
}

/// Permutation matrix sending basis `j` to `f(j)`.
pub fn permutation_matrix(d: usize, f: impl Fn(usize) -> usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        m[(f(j), j)] = C64::new(1.0, 0.0);
    }
    m
}

pub fn cnot_matrix() -> DMatrix<C64> {
    permutation_matrix(4, |j| if j >= 2 { j ^ 1 } else { j })
}

/// Controlled swap of the two targets when the control (most significant
/// qubit) is `V`.
pub fn fredkin_matrix() -> DMatrix<C64> {
    permutation_matrix(8, |j| match j {
        5 => 6,
        6 => 5,
        j => j,
    })
}

impl GateSpec {
    /// Standard qubit code: one photon per qubit beam, all in `input_bin`;
    /// output bins chosen per output basis index.
    pub fn qubit_gate(
        circuit: Circuit,
        ideal: DMatrix<C64>,
        expected_probability: Option<f64>,
        output_bins: impl Fn(usize) -> Option<TimeBin>,
    ) -> Result<Self> {
        let n = circuit.qubits().len();
        let d = 1 << n;
        if ideal.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: ideal.nrows(),
            });
        }
        let reg = circuit.registry().clone();
        let inputs = (0..d)
            .map(|i| prepare_logical_input(&reg, &LogicalAmplitudes::basis(n, i), circuit.qubits()))
            .collect::<Result<Vec<_>>>()?;
        let outputs = (0..d)
            .map(|i| circuit.output_basis_state(i, &vec![output_bins(i); n]))
            .collect::<Result<Vec<_>>>()?;
        let suffix = |i: usize| match output_bins(i) {
            Some(b) => format!("^{b}"),
            None => String::new(),
        };
        Ok(GateSpec {
            input_labels: (0..d).map(|i| bits_label(i, n)).collect(),
            output_labels: (0..d).map(|i| format!("{}{}", bits_label(i, n), suffix(i))).collect(),
            circuit,
            inputs,
            outputs,
            ideal,
            groups: vec![(0..d).collect()],
            expected_probability,
        })
    }

    pub fn dimension(&self) -> usize {
        self.inputs.len()
    }

    fn group_of(&self, column: usize) -> usize {
        self.groups.iter().position(|g| g.contains(&column)).unwrap_or(0)
    }

    /// Logical amplitudes living on a single group, as a Fock state.
    pub fn superpose(&self, amplitudes: &[(usize, C64)]) -> Result<PhotonicState> {
        if let Some(&(j, _)) = amplitudes.iter().find(|(j, _)| *j >= self.dimension()) {
            return Err(Error::InvalidParameters(format!("logical index {j} out of range")));
        }
        let mut state = PhotonicState::empty(self.circuit.registry().clone());
        let mut groups = amplitudes.iter().map(|(j, _)| self.group_of(*j));
        let first = groups.next();
        if groups.any(|g| Some(g) != first) {
            return Err(Error::InvalidParameters("superposition spans input groups".into()));
        }
        for &(j, a) in amplitudes {
            state = state.plus(&self.inputs[j].scaled(a))?;
        }
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > crate::fock::NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Haar-random input on group `group`.
    pub fn random_input<R: Rng + ?Sized>(&self, group: usize, rng: &mut R) -> Result<PhotonicState> {
        let cols = &self.groups[group % self.groups.len()];
        let mut amps: Vec<(usize, C64)> = cols
            .iter()
            .map(|&j| (j, C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))))
            .collect();
        let n = amps.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
        for (_, a) in &mut amps {
            *a /= n;
        }
        self.superpose(&amps)
    }
}

pub fn pittman_spec() -> Result<GateSpec> {
    GateSpec::qubit_gate(build_pittman_cnot()?, cnot_matrix(), Some(0.25), |_| None)
}

pub fn ralph_spec_with(params: RalphParams) -> Result<GateSpec> {
    GateSpec::qubit_gate(build_ralph_cnot_with(params)?, cnot_matrix(), Some(1.0 / 9.0), |_| None)
}

pub fn ralph_spec() -> Result<GateSpec> {
    GateSpec::qubit_gate(build_ralph_cnot()?, cnot_matrix(), Some(1.0 / 9.0), |_| None)
}

/// Control `H` stays early, control `V` takes the late bin.
fn control_bin(index: usize, qubits: usize) -> Option<TimeBin> {
    Some(if index >> (qubits - 1) == 1 { TimeBin::L } else { TimeBin::S })
}

pub fn sanaka_spec(config: TimeBinConfig) -> Result<GateSpec> {
    GateSpec::qubit_gate(build_sanaka_cnot(config)?, cnot_matrix(), Some(0.25), |i| control_bin(i, 2))
}

pub fn fredkin_heralded_spec(cnot: HeraldedCnot) -> Result<GateSpec> {
    let p = match cnot {
        HeraldedCnot::Ideal => 0.25,
        HeraldedCnot::Pittman => 0.25f64.powi(5),
    };
    GateSpec::qubit_gate(build_fredkin_heralded(cnot)?, fredkin_matrix(), Some(p), |_| None)
}

pub fn fredkin_postselected_spec(cnots: PostSelectedCnots) -> Result<GateSpec> {
    let p = match cnots {
        PostSelectedCnots::Ideal => 1.0 / 8.0,
        PostSelectedCnots::Physical(_) => 1.0 / 192.0,
    };
    GateSpec::qubit_gate(build_fredkin_postselected(cnots)?, fredkin_matrix(), Some(p), |_| None)
}

pub fn fredkin_timebin_spec(config: TimeBinConfig) -> Result<GateSpec> {
    GateSpec::qubit_gate(build_fredkin_timebin(config)?, fredkin_matrix(), Some(1.0 / 64.0), |i| {
        control_bin(i, 3)
    })
}

/// Known-target CNOT. Inputs are `(c, t)` with `t` either `V` or empty,
/// ordered `HV, H0, VV, V0`; outputs are `(c, t)` with `t` in `H, V, 0`.
pub fn simplified_spec(params: SimplifiedParams) -> Result<GateSpec> {
    use Polarization::{H, V};
    let circuit = build_simplified_cnot(params)?;
    let reg = circuit.registry().clone();
    let states: [(Polarization, Option<Polarization>); 6] =
        [(H, Some(H)), (H, Some(V)), (H, None), (V, Some(H)), (V, Some(V)), (V, None)];
    let fock = |(c, t): (Polarization, Option<Polarization>)| -> Result<PhotonicState> {
        let mut photons = vec![("c", c)];
        photons.extend(t.map(|t| ("t", t)));
        PhotonicState::from_photons(reg.clone(), &photons)
    };
    let label = |(c, t): (Polarization, Option<Polarization>)| format!("{c}{}", t.map_or("0".into(), |t| t.to_string()));
    let outputs = states
        .iter()
        .map(|&s| Ok(fock(s)?.iter().next().map(|(o, _)| o.clone()).unwrap()))
        .collect::<Result<Vec<_>>>()?;
    let input_states = [states[1], states[2], states[4], states[5]];
    // HV -> HV, H0 -> H0, VV -> VH, V0 -> V0
    let targets = [1, 2, 3, 5];
    let mut ideal = DMatrix::zeros(6, 4);
    for (j, &i) in targets.iter().enumerate() {
        ideal[(i, j)] = C64::new(1.0, 0.0);
    }
    Ok(GateSpec {
        inputs: input_states.iter().map(|&s| fock(s)).collect::<Result<_>>()?,
        input_labels: input_states.iter().map(|&s| label(s)).collect(),
        output_labels: states.iter().map(|&s| label(s)).collect(),
        outputs,
        ideal,
        groups: vec![vec![0, 2], vec![1, 3]],
        expected_probability: Some(1.0 / 6.0),
        circuit,
    })
}

pub fn identity_spec(eta: f64) -> Result<GateSpec> {
    GateSpec::qubit_gate(build_leaky_identity(eta)?, permutation_matrix(2, |j| j), Some(1.0), |_| None)
}

/// The named gates with their expected success probabilities.
pub fn gate_spec(name: &str, options: &GateOptions) -> Result<GateSpec> {
    match name {
        "fredkin-heralded" => fredkin_heralded_spec(HeraldedCnot::Pittman),
        "fredkin-postselected" => fredkin_postselected_spec(PostSelectedCnots::Ideal),
        "fredkin-fig3" => fredkin_postselected_spec(PostSelectedCnots::Physical(options.simplified)),
        "fredkin-timebin" => fredkin_timebin_spec(options.time_bin),
        "cnot-pittman" => pittman_spec(),
        "cnot-ralph" => ralph_spec(),
        "cnot-sanaka" => sanaka_spec(options.time_bin),
        "cnot-simplified" => simplified_spec(options.simplified),
        _ => Err(Error::UnknownGate(name.to_string())),
    }
}
