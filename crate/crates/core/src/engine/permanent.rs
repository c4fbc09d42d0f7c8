//! Matrix permanents and the permanent-based transition amplitude.
//!
//! This path is deliberately independent from the creation-operator expansion
//! in [`super::apply_unitary`]; the two are cross-checked in tests.

use nalgebra::DMatrix;

use crate::fock::{FockBasisState, C64};

/// Permanent by Ryser's formula with Gray-code subset enumeration.
pub fn permanent(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "permanent of a non-square matrix");
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut row_sums = vec![C64::default(); n];
    let mut total = C64::default();
    let mut gray: u64 = 0;
    for k in 1..(1u64 << n) {
        let next = k ^ (k >> 1);
        let changed = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << changed) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += m[(i, changed)];
            } else {
                *s -= m[(i, changed)];
            }
        }
        gray = next;
        let prod: C64 = row_sums.iter().product();
        if (n - gray.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

fn factorial(n: u8) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

/// `<out| U |in>` for Fock states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionAmplitude {
    pub amplitude: C64,
    /// `false` when the two states carry different photon numbers; the
    /// amplitude is then zero by definition.
    pub conserved: bool,
}

/// `per(U_sub) / sqrt(prod n_i! prod m_j!)`, with `U_sub` built by repeating
/// column `i` of `U` `n_i` times and row `j` `m_j` times.
pub fn transition_amplitude_oracle(
    unitary: &DMatrix<C64>,
    input: &FockBasisState,
    output: &FockBasisState,
) -> TransitionAmplitude {
    if input.photons() != output.photons() {
        return TransitionAmplitude {
            amplitude: C64::default(),
            conserved: false,
        };
    }
    let expand = |occ: &FockBasisState| -> Vec<usize> {
        occ.occupations()
            .iter()
            .enumerate()
            .flat_map(|(mode, &n)| std::iter::repeat_n(mode, n as usize))
            .collect()
    };
    let cols = expand(input);
    let rows = expand(output);
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| unitary[(rows[r], cols[c])]);
    let norm: f64 = input
        .occupations()
        .iter()
        .chain(output.occupations())
        .map(|&n| factorial(n))
        .product();
    TransitionAmplitude {
        amplitude: permanent(&sub) / norm.sqrt(),
        conserved: true,
    }
}
