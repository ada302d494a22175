//! Spin-1/2 operators on the register.
//!
//! Conventions: `s^z = diag(+1/2, -1/2)` in the `(↑, ↓)` basis and
//! `s^+ = |↑⟩⟨↓|`. Products of single-spin factors are applied bitwise to
//! basis states, which is how every model operator is built.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Exec;
use crate::lattice::{is_up, BasisState, LatticeLayout};
use crate::sparse::{BasisTag, CsrMatrix, SparseOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinOp {
    Raise,
    Lower,
    Z,
}

impl SpinOp {
    /// Acts on one slot of `state`; `None` if the result vanishes.
    #[inline]
    pub fn apply(self, state: BasisState, slot: usize) -> Option<(BasisState, f64)> {
        let up = is_up(state, slot);
        match self {
            SpinOp::Raise if !up => Some((state | (1 << slot), 1.0)),
            SpinOp::Lower if up => Some((state & !(1 << slot), 1.0)),
            SpinOp::Z => Some((state, if up { 0.5 } else { -0.5 })),
            _ => None,
        }
    }
}

/// `coeff * Π factors`; the rightmost factor acts first.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductTerm {
    pub coeff: C64,
    pub factors: Vec<(usize, SpinOp)>,
}

impl ProductTerm {
    pub fn new(coeff: C64, factors: Vec<(usize, SpinOp)>) -> Self {
        ProductTerm { coeff, factors }
    }

    pub fn real(coeff: f64, factors: Vec<(usize, SpinOp)>) -> Self {
        Self::new(C64::new(coeff, 0.0), factors)
    }

    #[inline]
    pub fn apply(&self, state: BasisState) -> Option<(BasisState, C64)> {
        let mut s = state;
        let mut amp = self.coeff;
        for &(slot, op) in self.factors.iter().rev() {
            let (next, a) = op.apply(s, slot)?;
            s = next;
            amp *= a;
        }
        Some((s, amp))
    }

    /// Hermitian conjugate: reversed factor order, `s^± -> s^∓`, conjugated coefficient.
    pub fn adjoint(&self) -> Self {
        let factors = self
            .factors
            .iter()
            .rev()
            .map(|&(slot, op)| {
                let op = match op {
                    SpinOp::Raise => SpinOp::Lower,
                    SpinOp::Lower => SpinOp::Raise,
                    SpinOp::Z => SpinOp::Z,
                };
                (slot, op)
            })
            .collect();
        ProductTerm { coeff: self.coeff.conj(), factors }
    }
}

/// Sums of product terms on the full register of a layout.
pub fn operator_from_terms(layout: &LatticeLayout, terms: &[ProductTerm], exec: Exec) -> Result<SparseOperator> {
    for t in terms {
        for &(slot, _) in &t.factors {
            layout.check_slot(slot)?;
        }
    }
    let n = layout.hilbert_dim();
    let chunk = 1usize << 12;
    let chunks = n.div_ceil(chunk);
    let parts: Vec<Vec<(usize, usize, C64)>> = exec.map_range(chunks, |k| {
        let mut out = Vec::new();
        for col in (k * chunk)..((k + 1) * chunk).min(n) {
            for t in terms {
                if let Some((row, amp)) = t.apply(col as BasisState) {
                    out.push((row as usize, col, amp));
                }
            }
        }
        out
    });
    let triplets = parts.into_iter().flatten().collect();
    SparseOperator::new(BasisTag::Full { spins: layout.total_spins() }, CsrMatrix::from_triplets(n, n, triplets, 0.0))
}

/// The full-register embedding of one single-spin operator.
pub fn single_spin_operator(layout: &LatticeLayout, slot: usize, which: SpinOp) -> Result<SparseOperator> {
    layout.check_slot(slot)?;
    operator_from_terms(layout, &[ProductTerm::real(1.0, vec![(slot, which)])], Exec::Sequential)
}

/// A diagonal operator given by a function of the basis state.
pub fn diagonal_operator(layout: &LatticeLayout, f: impl Fn(BasisState) -> f64) -> SparseOperator {
    let diag: Vec<C64> = (0..layout.hilbert_dim()).map(|s| C64::new(f(s as BasisState), 0.0)).collect();
    SparseOperator::diagonal(BasisTag::Full { spins: layout.total_spins() }, &diag).expect("diagonal sized from the layout")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeLayout;

    fn one_spin() -> LatticeLayout {
        // the smallest layout is a 2-site chain; use its first slot as "a single spin"
        LatticeLayout::chain_obc(2).unwrap()
    }

    #[test]
    fn single_spin_conventions() {
        let layout = one_spin();
        let z = single_spin_operator(&layout, 0, SpinOp::Z).unwrap();
        assert_eq!(z.get(1, 1), C64::new(0.5, 0.0));
        assert_eq!(z.get(0, 0), C64::new(-0.5, 0.0));
        let up = single_spin_operator(&layout, 0, SpinOp::Raise).unwrap();
        let dn = single_spin_operator(&layout, 0, SpinOp::Lower).unwrap();
        let proj = up.mul(&dn).unwrap();
        // s^+ s^- = |↑⟩⟨↑| on slot 0
        for s in 0..layout.hilbert_dim() {
            let expect = if s & 1 == 1 { 1.0 } else { 0.0 };
            assert_eq!(proj.get(s, s), C64::new(expect, 0.0));
        }
        assert_eq!(up.mul(&up).unwrap().nnz(), 0);
        assert_eq!(up.adjoint(), dn);
    }

    #[test]
    fn raise_has_one_entry_per_down_state() {
        let layout = one_spin();
        let up = single_spin_operator(&layout, 1, SpinOp::Raise).unwrap();
        let downs = (0..layout.hilbert_dim()).filter(|s| (s >> 1) & 1 == 0).count();
        assert_eq!(up.nnz(), downs);
        assert!(up.matrix().triplets().all(|(_, _, v)| v == C64::new(1.0, 0.0)));
        assert!(single_spin_operator(&layout, 3, SpinOp::Z).is_err());
    }

    #[test]
    fn adjoint_term_matches_matrix_adjoint() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let t = ProductTerm::new(C64::new(0.3, 0.7), vec![(0, SpinOp::Raise), (3, SpinOp::Raise), (1, SpinOp::Lower)]);
        let a = operator_from_terms(&layout, std::slice::from_ref(&t), Exec::Sequential).unwrap();
        let b = operator_from_terms(&layout, &[t.adjoint()], Exec::Parallel).unwrap();
        assert_eq!(a.adjoint(), b);
    }
}
