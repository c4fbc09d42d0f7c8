//! Optical elements compiled to mode unitaries.
//!
//! A [`ModeUnitary`] `U` acts on creation operators as
//! `a†_i -> sum_j U[j, i] a†_j`: column `i` is the single-photon output of
//! mode `i`. Elements act identically on the `S` and `L` copies of a beam.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeRegistry, Polarization, TimeBin, C64};

/// Which port of a beam splitter carries the minus sign on its
/// self-coupling entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    A,
    #[default]
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElementSpec {
    /// Half-wave plate with its fast axis at `angle_deg` from horizontal.
    Hwp { beam: String, angle_deg: f64 },
    /// Polarizing beam splitter: `H` stays in its beam, `V` crosses.
    Pbs { a: String, b: String },
    /// Real beam splitter with reflectivity `reflectivity`, optionally acting
    /// on one polarization only (a partially polarizing splitter).
    Bs {
        a: String,
        b: String,
        reflectivity: f64,
        #[serde(default)]
        signed: Port,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pol: Option<Polarization>,
    },
    /// PBS in the diagonal basis: `|+>` stays, `|->` crosses.
    Rpbs { a: String, b: String },
    /// Polarization flip `H <-> V`.
    HvSwap { beam: String },
    /// Phase `e^{i degrees}` on one polarization of a beam.
    Phase {
        beam: String,
        pol: Polarization,
        degrees: f64,
    },
    /// Beam relabeling: a photon in `from` continues in `to`.
    Route { pairs: Vec<(String, String)> },
    /// Moves the early copy of a beam to the late bin (and back).
    DelayToL {
        beam: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pol: Option<Polarization>,
    },
}

impl ElementSpec {
    pub fn hwp(beam: &str, angle_deg: f64) -> Self {
        ElementSpec::Hwp {
            beam: beam.into(),
            angle_deg,
        }
    }

    pub fn pbs(a: &str, b: &str) -> Self {
        ElementSpec::Pbs {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn rpbs(a: &str, b: &str) -> Self {
        ElementSpec::Rpbs {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn bs(a: &str, b: &str, reflectivity: f64) -> Self {
        ElementSpec::Bs {
            a: a.into(),
            b: b.into(),
            reflectivity,
            signed: Port::B,
            pol: None,
        }
    }

    pub fn ppbs(a: &str, b: &str, reflectivity: f64, pol: Polarization) -> Self {
        ElementSpec::Bs {
            a: a.into(),
            b: b.into(),
            reflectivity,
            signed: Port::B,
            pol: Some(pol),
        }
    }

    pub fn hv_swap(beam: &str) -> Self {
        ElementSpec::HvSwap { beam: beam.into() }
    }

    pub fn sign_flip(beam: &str) -> Self {
        ElementSpec::Phase {
            beam: beam.into(),
            pol: Polarization::V,
            degrees: 180.0,
        }
    }

    pub fn route(pairs: &[(&str, &str)]) -> Self {
        ElementSpec::Route {
            pairs: pairs.iter().map(|&(a, b)| (a.into(), b.into())).collect(),
        }
    }

    /// Exchanges two beams.
    pub fn swap(a: &str, b: &str) -> Self {
        Self::route(&[(a, b), (b, a)])
    }

    pub fn delay(beam: &str) -> Self {
        ElementSpec::DelayToL {
            beam: beam.into(),
            pol: None,
        }
    }

    pub fn delay_pol(beam: &str, pol: Polarization) -> Self {
        ElementSpec::DelayToL {
            beam: beam.into(),
            pol: Some(pol),
        }
    }

    /// Beams this element touches.
    pub fn beams(&self) -> Vec<&str> {
        match self {
            ElementSpec::Hwp { beam, .. }
            | ElementSpec::HvSwap { beam }
            | ElementSpec::Phase { beam, .. }
            | ElementSpec::DelayToL { beam, .. } => vec![beam],
            ElementSpec::Pbs { a, b } | ElementSpec::Rpbs { a, b } | ElementSpec::Bs { a, b, .. } => {
                vec![a, b]
            }
            ElementSpec::Route { pairs } => pairs.iter().map(|(f, _)| f.as_str()).collect(),
        }
    }
}

/// Half-wave plate action on `(H, V)` creation operators.
pub fn hwp_matrix(angle_deg: f64) -> Matrix2<C64> {
    let two_theta = (2.0 * angle_deg).to_radians();
    let (s, c) = two_theta.sin_cos();
    Matrix2::new(
        C64::new(c, 0.0),
        C64::new(s, 0.0),
        C64::new(s, 0.0),
        C64::new(-c, 0.0),
    )
}

/// Real beam-splitter block over ports `(a, b)`.
pub fn bs_matrix(reflectivity: f64, signed: Port) -> Result<Matrix2<C64>> {
    if !(0.0..=1.0).contains(&reflectivity) || reflectivity.is_nan() {
        return Err(Error::InvalidReflectivity(reflectivity));
    }
    let t = (1.0 - reflectivity).sqrt();
    let r = reflectivity.sqrt();
    let (ta, tb) = match signed {
        Port::A => (-t, t),
        Port::B => (t, -t),
    };
    Ok(Matrix2::new(
        C64::new(ta, 0.0),
        C64::new(r, 0.0),
        C64::new(r, 0.0),
        C64::new(tb, 0.0),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    registry: Arc<ModeRegistry>,
    matrix: DMatrix<C64>,
}

impl ModeUnitary {
    pub fn identity(registry: &Arc<ModeRegistry>) -> Self {
        let m = registry.len();
        ModeUnitary {
            registry: registry.clone(),
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn from_matrix(registry: &Arc<ModeRegistry>, matrix: DMatrix<C64>) -> Result<Self> {
        let m = registry.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(ModeUnitary {
            registry: registry.clone(),
            matrix,
        })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `next ∘ self`: apply `self` first.
    pub fn then(&self, next: &ModeUnitary) -> ModeUnitary {
        // elements touch a few modes, so only rows of `next` that differ
        // from the identity need work
        let m = self.dim();
        let one = C64::new(1.0, 0.0);
        let zero = C64::default();
        let mut matrix = self.matrix.clone();
        for r in 0..m {
            let row = next.matrix.row(r);
            if row.iter().enumerate().all(|(k, z)| *z == if k == r { one } else { zero }) {
                continue;
            }
            let mut acc = nalgebra::RowDVector::<C64>::zeros(m);
            for (k, z) in row.iter().enumerate() {
                if *z != zero {
                    acc += self.matrix.row(k) * *z;
                }
            }
            matrix.set_row(r, &acc);
        }
        ModeUnitary {
            registry: self.registry.clone(),
            matrix,
        }
    }

    /// `max |U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.dim();
        let gram = self.matrix.adjoint() * &self.matrix;
        let id = DMatrix::<C64>::identity(m, m);
        (gram - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Nonzero entries of column `i` as `(row, value)`.
    pub fn column_support(&self, i: usize, epsilon: f64) -> Vec<(usize, C64)> {
        self.matrix
            .column(i)
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > epsilon)
            .map(|(j, z)| (j, *z))
            .collect()
    }

    fn embed_block(&mut self, a: usize, b: usize, block: &Matrix2<C64>) {
        self.matrix[(a, a)] = block[(0, 0)];
        self.matrix[(b, a)] = block[(1, 0)];
        self.matrix[(a, b)] = block[(0, 1)];
        self.matrix[(b, b)] = block[(1, 1)];
    }
}

fn distinct(a: &str, b: &str) -> Result<()> {
    if a == b {
        Err(Error::SamePort(a.to_string()))
    } else {
        Ok(())
    }
}

pub fn pbs_unitary(registry: &Arc<ModeRegistry>, beam_a: &str, beam_b: &str) -> Result<ModeUnitary> {
    distinct(beam_a, beam_b)?;
    let mut u = ModeUnitary::identity(registry);
    let swap = Matrix2::new(
        C64::default(),
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
        C64::default(),
    );
    for (a, b) in registry.paired_modes(beam_a, beam_b, Some(Polarization::V))? {
        u.embed_block(a, b, &swap);
    }
    // H pairs are validated by paired_modes and left as identity.
    registry.paired_modes(beam_a, beam_b, Some(Polarization::H))?;
    Ok(u)
}

pub fn bs_unitary(
    registry: &Arc<ModeRegistry>,
    reflectivity: f64,
    beam_a: &str,
    beam_b: &str,
    signed: Port,
    pol: Option<Polarization>,
) -> Result<ModeUnitary> {
    let block = bs_matrix(reflectivity, signed)?;
    distinct(beam_a, beam_b)?;
    let mut u = ModeUnitary::identity(registry);
    for (a, b) in registry.paired_modes(beam_a, beam_b, pol)? {
        u.embed_block(a, b, &block);
    }
    Ok(u)
}

pub fn hwp_unitary(registry: &Arc<ModeRegistry>, beam: &str, angle_deg: f64) -> Result<ModeUnitary> {
    let block = hwp_matrix(angle_deg);
    let mut u = ModeUnitary::identity(registry);
    for bin in registry.bins() {
        let h = registry.index(beam, Polarization::H, bin)?;
        let v = registry.index(beam, Polarization::V, bin)?;
        u.embed_block(h, v, &block);
    }
    Ok(u)
}

/// `hwp(22.5°)` on each input, PBS, `hwp(22.5°)` on each output.
pub fn rpbs_unitary(registry: &Arc<ModeRegistry>, beam_a: &str, beam_b: &str) -> Result<ModeUnitary> {
    let rotate = hwp_unitary(registry, beam_a, 22.5)?.then(&hwp_unitary(registry, beam_b, 22.5)?);
    let pbs = pbs_unitary(registry, beam_a, beam_b)?;
    Ok(rotate.then(&pbs).then(&rotate))
}

fn phase_unitary(registry: &Arc<ModeRegistry>, beam: &str, pol: Polarization, degrees: f64) -> Result<ModeUnitary> {
    let mut u = ModeUnitary::identity(registry);
    let phase = C64::from_polar(1.0, degrees.to_radians());
    for m in registry.beam_pol_modes(beam, pol)? {
        u.matrix[(m, m)] = phase;
    }
    Ok(u)
}

fn route_unitary(registry: &Arc<ModeRegistry>, pairs: &[(String, String)]) -> Result<ModeUnitary> {
    let from: BTreeSet<&str> = pairs.iter().map(|(f, _)| f.as_str()).collect();
    let to: BTreeSet<&str> = pairs.iter().map(|(_, t)| t.as_str()).collect();
    if from.len() != pairs.len() || to.len() != pairs.len() || from != to {
        let desc: Vec<String> = pairs.iter().map(|(f, t)| format!("{f}->{t}")).collect();
        return Err(Error::InvalidRoute(desc.join(", ")));
    }
    let m = registry.len();
    let mut matrix = DMatrix::<C64>::identity(m, m);
    for (f, t) in pairs {
        let src = registry.beam_modes(f)?;
        let dst = registry.beam_modes(t)?;
        for &s in &src {
            matrix[(s, s)] = C64::default();
        }
        for (&s, &d) in src.iter().zip(&dst) {
            matrix[(d, s)] = C64::new(1.0, 0.0);
        }
    }
    ModeUnitary::from_matrix(registry, matrix)
}

fn delay_unitary(registry: &Arc<ModeRegistry>, beam: &str, pol: Option<Polarization>) -> Result<ModeUnitary> {
    if !registry.time_resolved() {
        return Err(Error::NotTimeResolved(format!("delay on `{beam}`")));
    }
    let swap = Matrix2::new(
        C64::default(),
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
        C64::default(),
    );
    let pols: Vec<Polarization> = match pol {
        Some(p) => vec![p],
        None => Polarization::BOTH.to_vec(),
    };
    let mut u = ModeUnitary::identity(registry);
    for p in pols {
        let s = registry.index(beam, p, Some(TimeBin::S))?;
        let l = registry.index(beam, p, Some(TimeBin::L))?;
        u.embed_block(s, l, &swap);
    }
    Ok(u)
}

pub fn element_unitary(registry: &Arc<ModeRegistry>, element: &ElementSpec) -> Result<ModeUnitary> {
    match element {
        ElementSpec::Hwp { beam, angle_deg } => hwp_unitary(registry, beam, *angle_deg),
        ElementSpec::Pbs { a, b } => pbs_unitary(registry, a, b),
        ElementSpec::Bs {
            a,
            b,
            reflectivity,
            signed,
            pol,
        } => bs_unitary(registry, *reflectivity, a, b, *signed, *pol),
        ElementSpec::Rpbs { a, b } => rpbs_unitary(registry, a, b),
        ElementSpec::HvSwap { beam } => hwp_unitary(registry, beam, 45.0),
        ElementSpec::Phase { beam, pol, degrees } => phase_unitary(registry, beam, *pol, *degrees),
        ElementSpec::Route { pairs } => route_unitary(registry, pairs),
        ElementSpec::DelayToL { beam, pol } => delay_unitary(registry, beam, *pol),
    }
}

/// Product of element unitaries in application order.
pub fn compose(registry: &Arc<ModeRegistry>, elements: &[ElementSpec]) -> Result<ModeUnitary> {
    let mut u = ModeUnitary::identity(registry);
    for e in elements {
        u = u.then(&element_unitary(registry, e)?);
    }
    Ok(u)
}

/// Composes elements that act in parallel; no two may share a beam.
pub fn compose_layer(registry: &Arc<ModeRegistry>, elements: &[ElementSpec]) -> Result<ModeUnitary> {
    let mut used = BTreeSet::new();
    for e in elements {
        let beams: BTreeSet<&str> = match e {
            ElementSpec::Route { pairs } => pairs
                .iter()
                .flat_map(|(f, t)| [f.as_str(), t.as_str()])
                .collect(),
            other => other.beams().into_iter().collect(),
        };
        for b in beams {
            if !used.insert(b.to_string()) {
                return Err(Error::LayerClash(b.to_string()));
            }
        }
    }
    compose(registry, elements)
}
