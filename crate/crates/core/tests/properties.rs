use std::sync::Arc;

use nalgebra::DMatrix;
use photonic_lab::analysis::{fredkin_heralded_spec, fredkin_postselected_spec};
use photonic_lab::circuit::{HeraldedCnot, PostSelectedCnots};
use photonic_lab::engine::{
    apply_unitary, measure_and_feedforward, post_select, transition_amplitude_oracle, DetectionBasis, Detector,
    DetectorSpec, FeedForwardAction, FeedForwardTable, PostSelectionRule,
};
use photonic_lab::{register_modes, FockBasisState, LogicalAmplitudes, ModeRegistry, ModeUnitary, PhotonicState, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const BEAMS: [&str; 3] = ["a", "b", "c"];

fn haar(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<C64> {
    let z = DMatrix::from_fn(m, m, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = d / d.norm();
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn occupation(rng: &mut ChaCha8Rng, modes: usize, photons: usize) -> FockBasisState {
    let mut occ = FockBasisState::vacuum(modes);
    for _ in 0..photons {
        occ.0[rng.gen_range(0..modes)] += 1;
    }
    occ
}

fn setup(seed: u64, beams: usize) -> (ChaCha8Rng, Arc<ModeRegistry>) {
    let reg = Arc::new(register_modes(&BEAMS[..beams], false).unwrap());
    (ChaCha8Rng::seed_from_u64(seed), reg)
}

/// A random state of `n` photons over a few basis terms.
fn random_state(rng: &mut ChaCha8Rng, reg: &Arc<ModeRegistry>, n: usize, terms: usize) -> PhotonicState {
    let mut s = PhotonicState::empty(reg.clone());
    for _ in 0..terms {
        let occ = occupation(rng, reg.len(), n);
        s.add(occ, C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    }
    s.pruned().normalized()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn engine_matches_permanent(seed in any::<u64>(), beams in 1usize..=3, n in 1usize..=4) {
        let (mut rng, reg) = setup(seed, beams);
        let u = haar(&mut rng, reg.len());
        let mu = ModeUnitary::from_matrix(&reg, u.clone()).unwrap();
        let input = occupation(&mut rng, reg.len(), n);
        let evolved = apply_unitary(&PhotonicState::basis(reg.clone(), input.clone()), &mu).unwrap();
        for _ in 0..4 {
            let output = occupation(&mut rng, reg.len(), n);
            let oracle = transition_amplitude_oracle(&u, &input, &output);
            prop_assert!(oracle.conserved);
            prop_assert!((evolved.amplitude(&output) - oracle.amplitude).norm() < 1e-10);
        }
    }

    #[test]
    fn unitaries_preserve_norm(seed in any::<u64>(), beams in 1usize..=3, n in 1usize..=4, terms in 1usize..=5) {
        let (mut rng, reg) = setup(seed, beams);
        let mu = ModeUnitary::from_matrix(&reg, haar(&mut rng, reg.len())).unwrap();
        let s = random_state(&mut rng, &reg, n, terms);
        let out = apply_unitary(&s, &mu).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert_eq!(out.photon_numbers(), s.photon_numbers());
    }

    #[test]
    fn measurement_outcomes_are_complete(seed in any::<u64>(), beams in 2usize..=3, n in 1usize..=4, diag in any::<bool>()) {
        let (mut rng, reg) = setup(seed, beams);
        let mu = ModeUnitary::from_matrix(&reg, haar(&mut rng, reg.len())).unwrap();
        let s = apply_unitary(&random_state(&mut rng, &reg, n, 3), &mu).unwrap();
        let detectors = DetectorSpec::new(vec![Detector {
            name: "D".into(),
            beam: "a".into(),
            basis: if diag { DetectionBasis::PlusMinus } else { DetectionBasis::HV },
        }]);
        let accept_all = FeedForwardTable {
            entries: vec![],
            otherwise: Some(FeedForwardAction::Accept { corrections: vec![] }),
        };
        let r = measure_and_feedforward(&s, &detectors, &accept_all).unwrap();
        prop_assert!((r.total_probability() - 1.0).abs() < 1e-12);
        prop_assert!((r.acceptance_probability() - 1.0).abs() < 1e-12);
        let reject_all = FeedForwardTable { entries: vec![], otherwise: Some(FeedForwardAction::Reject) };
        let r = measure_and_feedforward(&s, &detectors, &reject_all).unwrap();
        prop_assert!((r.total_probability() - 1.0).abs() < 1e-12);
        prop_assert!(r.branches.is_empty());
    }

    #[test]
    fn post_selection_composes(seed in any::<u64>(), n in 1usize..=4, ka in 0usize..=2, kb in 0usize..=2) {
        let (mut rng, reg) = setup(seed, 3);
        let mu = ModeUnitary::from_matrix(&reg, haar(&mut rng, reg.len())).unwrap();
        let s = apply_unitary(&random_state(&mut rng, &reg, n, 2), &mu).unwrap();
        let ra = PostSelectionRule::per_beam(&["a"], ka);
        let rb = PostSelectionRule::per_beam(&["b"], kb);
        let (sa, _) = post_select(&s, &ra).unwrap();
        let (sab, p_seq) = post_select(&sa, &rb).unwrap();
        let (both, p) = post_select(&s, &ra.clone().and(rb.clone())).unwrap();
        prop_assert!((p - p_seq).abs() < 1e-14);
        prop_assert_eq!(both.len(), sab.len());
        for (occ, a) in both.iter() {
            prop_assert_eq!(*a, sab.amplitude(occ));
        }
        // order does not matter either
        let (sb, _) = post_select(&s, &rb).unwrap();
        let (_, p_rev) = post_select(&sb, &ra).unwrap();
        prop_assert!((p - p_rev).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// Both ideal-CNOT Fredkin constructions accept every input with the
    /// same conditional output.
    #[test]
    fn heralded_and_postselected_agree(seed in any::<u64>()) {
        let heralded = fredkin_heralded_spec(HeraldedCnot::Ideal).unwrap();
        let post = fredkin_postselected_spec(PostSelectedCnots::Ideal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = LogicalAmplitudes::random(3, &mut rng);
        let terms: Vec<(usize, C64)> = a.as_slice().iter().copied().enumerate().collect();
        let out_h = heralded.circuit.run(&heralded.superpose(&terms).unwrap()).unwrap().conditional_state().unwrap();
        let out_p = post.circuit.run(&post.superpose(&terms).unwrap()).unwrap().conditional_state().unwrap();
        for (oh, op) in heralded.outputs.iter().zip(&post.outputs) {
            prop_assert!((out_h.amplitude(oh) - out_p.amplitude(op)).norm() < 1e-12);
        }
        prop_assert!((out_h.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
