use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BellState, Circuit, SourceSpec, Stage, TimeBinConfig};
use crate::engine::{
    Correction, CorrectionOp, CountConstraint, DetectionBasis, Detector, DetectorSpec,
    FeedForwardAction, FeedForwardEntry, FeedForwardTable, ModeSelector, PostSelectionRule,
};
use crate::error::{Error, Result};
use crate::fock::{register_modes, ModeRegistry, PhotonicState, Polarization};
use crate::optics::ElementSpec;

/// Which CNOT realizes each conditional flip of the heralded Fredkin gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeraldedCnot {
    Ideal,
    Pittman,
}

/// Ideal flips, or the Pittman gate on beam 1 and the known-target gate on
/// beam 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PostSelectedCnots {
    Ideal,
    Physical(SimplifiedParams),
}

/// Parameters of the known-target CNOT: a wave plate on the target, a
/// V-only splitter coupling control and target, a second wave plate on the
/// target, and an H-only attenuator on the control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedParams {
    pub theta1_deg: f64,
    pub coupling: f64,
    pub theta2_deg: f64,
    pub attenuation: f64,
}

impl SimplifiedParams {
    /// The optimum of the search in `analysis::optimize`, in closed form.
    pub const OPTIMAL: SimplifiedParams = SimplifiedParams {
        theta1_deg: 75.0,
        coupling: 2.0 / 3.0,
        theta2_deg: 22.5,
        attenuation: 2.0 / 3.0,
    };

    /// All-transmitting splitters and plates at zero.
    pub const TRIVIAL: SimplifiedParams = SimplifiedParams {
        theta1_deg: 0.0,
        coupling: 0.0,
        theta2_deg: 0.0,
        attenuation: 0.0,
    };

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.theta1_deg, self.coupling, self.theta2_deg, self.attenuation]
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        match *p {
            [theta1_deg, coupling, theta2_deg, attenuation] => {
                let params = SimplifiedParams {
                    theta1_deg,
                    coupling,
                    theta2_deg,
                    attenuation,
                };
                params.validate()?;
                Ok(params)
            }
            _ => Err(Error::InvalidParameters(format!("expected 4 parameters, got {}", p.len()))),
        }
    }

    fn validate(&self) -> Result<()> {
        for eta in [self.coupling, self.attenuation] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidReflectivity(eta));
            }
        }
        if !self.theta1_deg.is_finite() || !self.theta2_deg.is_finite() {
            return Err(Error::InvalidParameters("non-finite wave plate angle".into()));
        }
        Ok(())
    }

    fn elements(&self, control: &str, target: &str, dump: &str) -> Vec<ElementSpec> {
        vec![
            ElementSpec::hwp(target, self.theta1_deg),
            ElementSpec::ppbs(control, target, self.coupling, Polarization::V),
            ElementSpec::hwp(target, self.theta2_deg),
            ElementSpec::ppbs(control, dump, self.attenuation, Polarization::H),
        ]
    }
}

/// Reflectivities of the three splitters in the Ralph-type CNOT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RalphParams {
    pub control_bystander: f64,
    pub central: f64,
    pub target_bystander: f64,
}

impl RalphParams {
    pub const THIRD: RalphParams = RalphParams {
        control_bystander: 1.0 / 3.0,
        central: 1.0 / 3.0,
        target_bystander: 1.0 / 3.0,
    };

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        match *p {
            [control_bystander, central, target_bystander] => Ok(RalphParams {
                control_bystander,
                central,
                target_bystander,
            }),
            _ => Err(Error::InvalidParameters(format!("expected 3 parameters, got {}", p.len()))),
        }
    }
}

fn registry(beams: &[&str], time_resolved: bool) -> Result<Arc<ModeRegistry>> {
    Ok(Arc::new(register_modes(beams, time_resolved)?))
}

fn vacuum_rule(beams: &[&str]) -> PostSelectionRule {
    PostSelectionRule::per_beam(beams, 0)
}

/// Stages of the Pittman CNOT acting on `control` and `target` with the
/// ancilla pair in `a1`, `a2`. The pair leaves the ancilla beams empty again.
pub fn pittman_stages(control: &str, target: &str, a1: &str, a2: &str) -> Vec<Stage> {
    let d1 = format!("D1[{target}]");
    let d2 = format!("D2[{target}]");
    let mut entries = Vec::new();
    for (d1_counts, sign) in [([1, 0], false), ([0, 1], true)] {
        for (d2_counts, flip) in [([1, 0], false), ([0, 1], true)] {
            let mut corrections = Vec::new();
            if sign {
                corrections.push(CorrectionOp::new(control, Correction::SignFlip));
            }
            if flip {
                corrections.push(CorrectionOp::new(target, Correction::PolarizationFlip));
            }
            entries.push(FeedForwardEntry {
                outcome: [(d1.clone(), d1_counts), (d2.clone(), d2_counts)].into_iter().collect(),
                action: FeedForwardAction::Accept { corrections },
            });
        }
    }
    vec![
        Stage::Source(SourceSpec::BellPair {
            a: a1.into(),
            b: a2.into(),
            state: BellState::PsiPlus,
        }),
        Stage::linear(vec![
            ElementSpec::hwp(a2, 45.0),
            ElementSpec::pbs(control, a1),
            ElementSpec::rpbs(a2, target),
        ]),
        Stage::Measure {
            detectors: DetectorSpec::new(vec![
                Detector {
                    name: d1,
                    beam: a1.into(),
                    basis: DetectionBasis::PlusMinus,
                },
                Detector {
                    name: d2,
                    beam: a2.into(),
                    basis: DetectionBasis::HV,
                },
            ]),
            table: FeedForwardTable {
                entries,
                otherwise: Some(FeedForwardAction::Reject),
            },
        },
    ]
}

pub fn build_pittman_cnot() -> Result<Circuit> {
    let reg = registry(&["c", "t", "a1", "a2"], false)?;
    Circuit::new("cnot-pittman", reg, pittman_stages("c", "t", "a1", "a2"), &["c", "t"], &["c", "t"])
}

pub fn build_ralph_cnot() -> Result<Circuit> {
    build_ralph_cnot_with(RalphParams::THIRD)
}

/// Dual-rail CNOT: the control splits into H/V rails, the target into
/// diagonal rails, and the control-V rail meets one target rail at the
/// central splitter. Each rail continues in its splitter's reflected port.
pub fn build_ralph_cnot_with(p: RalphParams) -> Result<Circuit> {
    let reg = registry(&["c", "cv", "t", "tv", "d1", "d2"], false)?;
    let stages = vec![
        Stage::linear(vec![
            ElementSpec::pbs("c", "cv"),
            ElementSpec::hwp("t", 22.5),
            ElementSpec::pbs("t", "tv"),
            ElementSpec::bs("cv", "tv", p.central),
            ElementSpec::swap("cv", "tv"),
            ElementSpec::bs("c", "d1", p.control_bystander),
            ElementSpec::swap("c", "d1"),
            ElementSpec::bs("t", "d2", p.target_bystander),
            ElementSpec::swap("t", "d2"),
            ElementSpec::pbs("c", "cv"),
            ElementSpec::pbs("t", "tv"),
            ElementSpec::hwp("t", 22.5),
        ]),
        Stage::post_select(PostSelectionRule::per_beam(&["c", "t"], 1)),
    ];
    Circuit::new("cnot-ralph", reg, stages, &["c", "t"], &["c", "t"])
}

/// CNOT for a target known to be `V` or empty. The target beam is `t`; the
/// attenuator dumps into `x`.
pub fn build_simplified_cnot(params: SimplifiedParams) -> Result<Circuit> {
    params.validate()?;
    let reg = registry(&["c", "t", "x"], false)?;
    let stages = vec![
        Stage::linear(params.elements("c", "t", "x")),
        Stage::post_select(PostSelectionRule::per_beam(&["c"], 1).and(vacuum_rule(&["x"]))),
    ];
    Ok(Circuit::new("cnot-simplified", reg, stages, &["c", "t"], &["c", "t"])?.with_photons(None))
}

/// Success probabilities of the known-target gate for an occupied and an
/// empty target, with control `H`.
pub fn simplified_branch_probabilities(params: SimplifiedParams) -> Result<(f64, f64)> {
    let circuit = build_simplified_cnot(params)?;
    let reg = circuit.registry().clone();
    let occupied = PhotonicState::from_photons(reg.clone(), &[("c", Polarization::H), ("t", Polarization::V)])?;
    let empty = PhotonicState::from_photons(reg, &[("c", Polarization::H)])?;
    Ok((
        circuit.run(&occupied)?.success_probability(),
        circuit.run(&empty)?.success_probability(),
    ))
}

const FREDKIN_CORE: [&str; 9] = ["c", "t1", "t2", "1", "2", "3", "4", "t1'", "t2'"];

fn fredkin_split() -> Stage {
    Stage::linear(vec![
        ElementSpec::route(&[("t1", "1"), ("1", "t1"), ("t2", "4"), ("4", "t2")]),
        ElementSpec::pbs("1", "2"),
        ElementSpec::pbs("4", "3"),
    ])
}

/// PBS3/PBS4 mixing, the four wave plates, PBS5/PBS6 and the routing of
/// their outputs onto `t1`, `t2` and the monitored `t1'`, `t2'`.
fn fredkin_network() -> Stage {
    Stage::linear(vec![
        ElementSpec::pbs("1", "4"),
        ElementSpec::pbs("2", "3"),
        ElementSpec::hwp("2", 67.5),
        ElementSpec::hwp("1", 22.5),
        ElementSpec::hwp("3", 67.5),
        ElementSpec::hwp("4", 22.5),
        ElementSpec::pbs("1", "3"),
        ElementSpec::pbs("4", "2"),
        ElementSpec::route(&[
            ("1", "t1"),
            ("t1", "1"),
            ("4", "t2"),
            ("t2", "4"),
            ("3", "t1'"),
            ("t1'", "3"),
            ("2", "t2'"),
            ("t2'", "2"),
        ]),
    ])
}

pub fn build_fredkin_heralded(cnot: HeraldedCnot) -> Result<Circuit> {
    let mut beams = FREDKIN_CORE.to_vec();
    if cnot == HeraldedCnot::Pittman {
        beams.extend(["a1", "a2"]);
    }
    let reg = registry(&beams, false)?;
    let mut stages = vec![fredkin_split()];
    for k in ["1", "2", "3", "4"] {
        match cnot {
            HeraldedCnot::Ideal => stages.push(Stage::flip("c", k)),
            HeraldedCnot::Pittman => stages.extend(pittman_stages("c", k, "a1", "a2")),
        }
    }
    stages.push(Stage::checkpoint("after-cnots"));
    stages.push(fredkin_network());
    stages.push(Stage::post_select(vacuum_rule(&["t1'", "t2'"])));
    let name = match cnot {
        HeraldedCnot::Ideal => "fredkin-heralded-ideal",
        HeraldedCnot::Pittman => "fredkin-heralded",
    };
    Circuit::new(name, reg, stages, &["c", "t1", "t2"], &["c", "t1", "t2"])
}

pub fn build_fredkin_postselected(cnots: PostSelectedCnots) -> Result<Circuit> {
    let mut beams = FREDKIN_CORE.to_vec();
    if let PostSelectedCnots::Physical(_) = cnots {
        beams.extend(["a1", "a2", "x", "y"]);
    }
    let reg = registry(&beams, false)?;
    let mut stages = vec![fredkin_split()];
    let mut rule = PostSelectionRule::per_beam(&["c", "t1", "t2"], 1);
    match cnots {
        PostSelectedCnots::Ideal => {
            stages.push(Stage::flip("c", "1"));
            stages.push(Stage::flip("c", "2"));
        }
        PostSelectedCnots::Physical(params) => {
            let (occupied, empty) = simplified_branch_probabilities(params)?;
            if !(occupied > 0.0 && occupied <= empty) {
                return Err(Error::InvalidParameters(format!(
                    "known-target gate cannot be balanced: p(V) = {occupied}, p(vacuum) = {empty}"
                )));
            }
            stages.extend(pittman_stages("c", "1", "a1", "a2"));
            let mut elements = params.elements("c", "2", "x");
            // beam 1 is occupied exactly when beam 2 is empty
            elements.push(ElementSpec::bs("1", "y", 1.0 - occupied / empty));
            stages.push(Stage::linear(elements));
            rule = rule.and(vacuum_rule(&["x", "y"]));
        }
    }
    stages.push(Stage::linear(vec![ElementSpec::hwp("3", 67.5), ElementSpec::hwp("4", 22.5)]));
    stages.push(Stage::checkpoint("before-pbs3"));
    stages.push(fredkin_network());
    stages.push(Stage::post_select(rule));
    let name = match cnots {
        PostSelectedCnots::Ideal => "fredkin-postselected",
        PostSelectedCnots::Physical(_) => "fredkin-fig3",
    };
    Circuit::new(name, reg, stages, &["c", "t1", "t2"], &["c", "t1", "t2"])
}

fn coincidence(beams: &[&str]) -> PostSelectionRule {
    PostSelectionRule::per_beam(beams, 1).with_same_time_bin(beams)
}

/// Control interferometer sending `V` through the long arm.
fn control_delay_line(control: &str, arm: &str) -> Vec<ElementSpec> {
    vec![ElementSpec::pbs(control, arm), ElementSpec::delay(arm), ElementSpec::pbs(control, arm)]
}

/// Balanced Mach-Zehnder whose long arm also flips polarization.
fn target_delay_line(target: &str, arm: &str) -> Vec<ElementSpec> {
    vec![
        ElementSpec::bs(target, arm, 0.5),
        ElementSpec::delay(arm),
        ElementSpec::hwp(arm, 45.0),
        ElementSpec::bs(target, arm, 0.5),
    ]
}

pub fn build_sanaka_cnot(config: TimeBinConfig) -> Result<Circuit> {
    config.validate()?;
    let reg = registry(&["c", "cl", "t", "tl"], true)?;
    let mut elements = control_delay_line("c", "cl");
    elements.extend(target_delay_line("t", "tl"));
    let stages = vec![Stage::linear(elements), Stage::post_select(coincidence(&["c", "t"]))];
    Circuit::new("cnot-sanaka", reg, stages, &["c", "t"], &["c", "t"])?.with_time_bin(config)
}

pub fn build_fredkin_timebin(config: TimeBinConfig) -> Result<Circuit> {
    config.validate()?;
    let mut beams = FREDKIN_CORE.to_vec();
    beams.extend(["cl", "l1", "l2", "l3", "l4"]);
    let reg = registry(&beams, true)?;
    let mut elements = control_delay_line("c", "cl");
    for (k, arm) in [("1", "l1"), ("2", "l2"), ("3", "l3"), ("4", "l4")] {
        elements.extend(target_delay_line(k, arm));
    }
    let stages = vec![
        fredkin_split(),
        Stage::linear(elements),
        Stage::checkpoint("after-cnots"),
        fredkin_network(),
        Stage::post_select(coincidence(&["c", "t1", "t2"])),
    ];
    Circuit::new("fredkin-timebin", reg, stages, &["c", "t1", "t2"], &["c", "t1", "t2"])?.with_time_bin(config)
}

/// One qubit through a splitter of reflectivity `eta` into an empty beam,
/// keeping the transmitted photon.
pub fn build_leaky_identity(eta: f64) -> Result<Circuit> {
    let reg = registry(&["q", "x"], false)?;
    let rule = PostSelectionRule {
        constraints: vec![CountConstraint {
            modes: vec![ModeSelector::beam("q")],
            count: 1,
        }],
        ..Default::default()
    };
    let stages = vec![Stage::linear(vec![ElementSpec::bs("q", "x", eta)]), Stage::post_select(rule)];
    Circuit::new("identity", reg, stages, &["q"], &["q"])
}
