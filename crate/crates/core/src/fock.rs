//! Mode space, Fock basis states and sparse photonic superpositions.
//!
//! A [`ModeRegistry`] fixes the single-photon modes of a circuit. Every beam
//! contributes one mode per polarization, and per time bin when the registry
//! is time-resolved. Modes are laid out beam-major with `H` before `V` and
//! `S` before `L`, so beam `b` owns the contiguous block `[H^S, H^L, V^S, V^L]`
//! (or `[H, V]` without time bins).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Amplitudes below this modulus are dropped from sparse states.
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-14;

/// Tolerance on `sum |a_i|^2 = 1` for logical inputs.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => f.write_str("H"),
            Polarization::V => f.write_str("V"),
        }
    }
}

/// Short (`S`) or long (`L`) path label of a time-resolved mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeBin {
    S,
    L,
}

impl TimeBin {
    pub const BOTH: [TimeBin; 2] = [TimeBin::S, TimeBin::L];
}

impl fmt::Display for TimeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeBin::S => f.write_str("S"),
            TimeBin::L => f.write_str("L"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeLabel {
    pub beam: String,
    pub pol: Polarization,
    pub bin: Option<TimeBin>,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bin {
            Some(bin) => write!(f, "{}:{}^{}", self.beam, self.pol, bin),
            None => write!(f, "{}:{}", self.beam, self.pol),
        }
    }
}

/// Dense indexing of the modes of one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRegistry {
    beams: Vec<String>,
    labels: Vec<ModeLabel>,
    index: HashMap<ModeLabel, usize>,
    time_resolved: bool,
}

/// Registers `2 * beams.len()` modes, or `4 * beams.len()` when time-resolved.
pub fn register_modes<S: AsRef<str>>(beams: &[S], time_resolved: bool) -> Result<ModeRegistry> {
    let mut seen = BTreeSet::new();
    let mut names = Vec::with_capacity(beams.len());
    for beam in beams {
        let beam = beam.as_ref().to_string();
        if !seen.insert(beam.clone()) {
            return Err(Error::DuplicateBeam(beam));
        }
        names.push(beam);
    }
    let bins: &[Option<TimeBin>] = if time_resolved {
        &[Some(TimeBin::S), Some(TimeBin::L)]
    } else {
        &[None]
    };
    let mut labels = Vec::new();
    for beam in &names {
        for pol in Polarization::BOTH {
            for &bin in bins {
                labels.push(ModeLabel {
                    beam: beam.clone(),
                    pol,
                    bin,
                });
            }
        }
    }
    let index = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    Ok(ModeRegistry {
        beams: names,
        labels,
        index,
        time_resolved,
    })
}

impl ModeRegistry {
    pub fn new<S: AsRef<str>>(beams: &[S], time_resolved: bool) -> Result<Self> {
        register_modes(beams, time_resolved)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn beams(&self) -> &[String] {
        &self.beams
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn label(&self, mode: usize) -> &ModeLabel {
        &self.labels[mode]
    }

    pub fn time_resolved(&self) -> bool {
        self.time_resolved
    }

    pub fn has_beam(&self, beam: &str) -> bool {
        self.beams.iter().any(|b| b == beam)
    }

    pub fn require_beam(&self, beam: &str) -> Result<()> {
        if self.has_beam(beam) {
            Ok(())
        } else {
            Err(Error::UnknownBeam(beam.to_string()))
        }
    }

    /// Number of modes per beam (2 or 4).
    pub fn modes_per_beam(&self) -> usize {
        if self.time_resolved {
            4
        } else {
            2
        }
    }

    pub fn bins(&self) -> Vec<Option<TimeBin>> {
        if self.time_resolved {
            vec![Some(TimeBin::S), Some(TimeBin::L)]
        } else {
            vec![None]
        }
    }

    /// The bin photons are created in when none is given explicitly.
    pub fn default_bin(&self) -> Option<TimeBin> {
        self.time_resolved.then_some(TimeBin::S)
    }

    pub fn index(&self, beam: &str, pol: Polarization, bin: Option<TimeBin>) -> Result<usize> {
        let label = ModeLabel {
            beam: beam.to_string(),
            pol,
            bin,
        };
        self.index.get(&label).copied().ok_or_else(|| Error::UnknownMode {
            beam: beam.to_string(),
            pol: pol.to_string(),
            bin: bin.map(|b| format!("^{b}")).unwrap_or_default(),
        })
    }

    /// All modes of `beam` in canonical order.
    pub fn beam_modes(&self, beam: &str) -> Result<Vec<usize>> {
        let pos = self
            .beams
            .iter()
            .position(|b| b == beam)
            .ok_or_else(|| Error::UnknownBeam(beam.to_string()))?;
        let per = self.modes_per_beam();
        Ok((pos * per..(pos + 1) * per).collect())
    }

    /// Modes of `beam` with polarization `pol`, one per time bin.
    pub fn beam_pol_modes(&self, beam: &str, pol: Polarization) -> Result<Vec<usize>> {
        self.require_beam(beam)?;
        self.bins()
            .into_iter()
            .map(|bin| self.index(beam, pol, bin))
            .collect()
    }

    /// Paired modes `(a, b)` of two beams that agree in polarization and bin,
    /// optionally restricted to one polarization.
    pub fn paired_modes(
        &self,
        beam_a: &str,
        beam_b: &str,
        pol: Option<Polarization>,
    ) -> Result<Vec<(usize, usize)>> {
        self.require_beam(beam_a)?;
        self.require_beam(beam_b)?;
        let pols: Vec<Polarization> = match pol {
            Some(p) => vec![p],
            None => Polarization::BOTH.to_vec(),
        };
        let mut pairs = Vec::new();
        for p in pols {
            for bin in self.bins() {
                pairs.push((self.index(beam_a, p, bin)?, self.index(beam_b, p, bin)?));
            }
        }
        Ok(pairs)
    }
}

/// Photon counts per mode of a registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockBasisState(pub Vec<u8>);

impl FockBasisState {
    pub fn vacuum(modes: usize) -> Self {
        FockBasisState(vec![0; modes])
    }

    pub fn photons(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn count_in(&self, modes: &[usize]) -> usize {
        modes.iter().map(|&m| self.0[m] as usize).sum()
    }

    /// Renders the occupied modes, e.g. `|c:H t1:V t2:H>`.
    pub fn ket(&self, registry: &ModeRegistry) -> String {
        let mut parts = Vec::new();
        for (mode, &n) in self.0.iter().enumerate() {
            match n {
                0 => {}
                1 => parts.push(registry.label(mode).to_string()),
                n => parts.push(format!("{}x{}", n, registry.label(mode))),
            }
        }
        if parts.is_empty() {
            "|vac>".to_string()
        } else {
            format!("|{}>", parts.join(" "))
        }
    }
}

/// Sparse superposition of Fock basis states.
///
/// States are not required to be normalized: after post-selection the squared
/// norm carries the success probability of the surviving branch.
#[derive(Debug, Clone)]
pub struct PhotonicState {
    registry: Arc<ModeRegistry>,
    amplitudes: BTreeMap<FockBasisState, C64>,
    epsilon: f64,
}

impl PhotonicState {
    /// The zero vector (no amplitude at all, not the vacuum).
    pub fn empty(registry: Arc<ModeRegistry>) -> Self {
        PhotonicState {
            registry,
            amplitudes: BTreeMap::new(),
            epsilon: DEFAULT_PRUNE_EPSILON,
        }
    }

    pub fn vacuum(registry: Arc<ModeRegistry>) -> Self {
        let occ = FockBasisState::vacuum(registry.len());
        Self::basis(registry, occ)
    }

    pub fn basis(registry: Arc<ModeRegistry>, occ: FockBasisState) -> Self {
        let mut s = Self::empty(registry);
        s.add(occ, C64::new(1.0, 0.0));
        s
    }

    /// Builds a basis state from single photons placed in `(beam, pol)` modes
    /// of the registry's default time bin.
    pub fn from_photons(registry: Arc<ModeRegistry>, photons: &[(&str, Polarization)]) -> Result<Self> {
        let mut occ = FockBasisState::vacuum(registry.len());
        let bin = registry.default_bin();
        for &(beam, pol) in photons {
            occ.0[registry.index(beam, pol, bin)?] += 1;
        }
        Ok(Self::basis(registry, occ))
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self.prune();
        self
    }

    /// Same registry and pruning threshold, no amplitudes.
    pub fn like(&self) -> Self {
        PhotonicState {
            registry: self.registry.clone(),
            amplitudes: BTreeMap::new(),
            epsilon: self.epsilon,
        }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockBasisState, &C64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occ: &FockBasisState) -> C64 {
        self.amplitudes.get(occ).copied().unwrap_or_default()
    }

    /// Accumulates `amp` onto `occ` without pruning.
    pub fn add(&mut self, occ: FockBasisState, amp: C64) {
        *self.amplitudes.entry(occ).or_default() += amp;
    }

    /// Drops amplitudes whose modulus is below the pruning threshold.
    pub fn prune(&mut self) {
        let eps = self.epsilon;
        self.amplitudes.retain(|_, a| a.norm() >= eps);
    }

    pub fn pruned(mut self) -> Self {
        self.prune();
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.like();
        for (occ, a) in &self.amplitudes {
            out.amplitudes.insert(occ.clone(), a * factor);
        }
        out.pruned()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// `self + other`; both must share a registry.
    pub fn plus(&self, other: &PhotonicState) -> Result<Self> {
        self.check_registry(other)?;
        let mut out = self.clone();
        for (occ, a) in &other.amplitudes {
            out.add(occ.clone(), *a);
        }
        Ok(out.pruned())
    }

    /// Distinct total photon numbers present in the superposition.
    pub fn photon_numbers(&self) -> BTreeSet<usize> {
        self.amplitudes.keys().map(|o| o.photons()).collect()
    }

    pub fn check_registry(&self, other: &PhotonicState) -> Result<()> {
        if Arc::ptr_eq(&self.registry, &other.registry) || *self.registry == *other.registry {
            Ok(())
        } else {
            Err(Error::RegistryMismatch)
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PhotonicState) -> Result<C64> {
        inner_product(self, other)
    }

    /// Renders `amp |ket>` lines, photons in earlier modes first (so
    /// `|c:H t:H>` precedes `|c:H t:V>`).
    pub fn describe(&self) -> String {
        let mut lines = Vec::new();
        for (occ, a) in self.amplitudes.iter().rev() {
            lines.push(format!("{:+.12} {:+.12}i  {}", a.re, a.im, occ.ket(&self.registry)));
        }
        lines.join("\n")
    }
}

/// `<s1|s2>`, conjugate-linear in the first argument.
pub fn inner_product(s1: &PhotonicState, s2: &PhotonicState) -> Result<C64> {
    s1.check_registry(s2)?;
    let (small, large, conj_small) = if s1.len() <= s2.len() {
        (s1, s2, true)
    } else {
        (s2, s1, false)
    };
    let mut acc = C64::default();
    for (occ, a) in &small.amplitudes {
        if let Some(b) = large.amplitudes.get(occ) {
            acc += if conj_small { a.conj() * b } else { b.conj() * a };
        }
    }
    Ok(acc)
}

/// Amplitudes of a logical `n`-qubit input in binary order, qubit 0 most
/// significant; bit value 0 is `H` and 1 is `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalAmplitudes(Vec<C64>);

impl LogicalAmplitudes {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = amplitudes.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::AmplitudeCount {
                expected: n.next_power_of_two().max(2),
                got: n,
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(LogicalAmplitudes(amplitudes))
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut v = vec![C64::default(); 1 << qubits];
        v[index] = C64::new(1.0, 0.0);
        LogicalAmplitudes(v)
    }

    /// Haar-random pure state of `qubits` qubits.
    pub fn random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Self {
        let mut v: Vec<C64> = (0..1usize << qubits)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut v {
            *a /= n;
        }
        LogicalAmplitudes(v)
    }

    pub fn qubits(&self) -> usize {
        self.0.len().trailing_zeros() as usize
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    /// Polarization of qubit `q` in basis term `index`.
    pub fn bit(&self, index: usize, q: usize) -> Polarization {
        let n = self.qubits();
        if (index >> (n - 1 - q)) & 1 == 1 {
            Polarization::V
        } else {
            Polarization::H
        }
    }
}

/// Places one photon per qubit beam, polarized per computational basis term.
pub fn prepare_logical_input<S: AsRef<str>>(
    registry: &Arc<ModeRegistry>,
    amplitudes: &LogicalAmplitudes,
    qubit_beams: &[S],
) -> Result<PhotonicState> {
    let n = amplitudes.qubits();
    if qubit_beams.len() != n {
        return Err(Error::AmplitudeCount {
            expected: 1 << qubit_beams.len(),
            got: amplitudes.as_slice().len(),
        });
    }
    for beam in qubit_beams {
        registry.require_beam(beam.as_ref())?;
    }
    let bin = registry.default_bin();
    let mut state = PhotonicState::empty(registry.clone());
    for (index, amp) in amplitudes.as_slice().iter().enumerate() {
        let mut occ = FockBasisState::vacuum(registry.len());
        for (q, beam) in qubit_beams.iter().enumerate() {
            occ.0[registry.index(beam.as_ref(), amplitudes.bit(index, q), bin)?] += 1;
        }
        state.add(occ, *amp);
    }
    Ok(state.pruned())
}
