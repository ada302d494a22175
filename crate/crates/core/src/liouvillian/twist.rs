//! Twisted boundaries on the periodic chain.
//!
//! `Lindblad` twists the Hamiltonian and keeps the Lindblad structure, so the
//! bra side carries `H(φ)`. `DoubleSpace` twists ket and bra alike, putting
//! `H(φ)ᵀ = H(-φ)` on the bra side; it is not a Lindblad generator for
//! `φ ≠ 0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{assemble, LindbladForm, Superoperator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{LatticeLayout, LayoutKind};
use crate::models::{build_hamiltonian, build_jump_set, Hamiltonian, ModelSpec};
use crate::symmetry::{DoubleSectorBasis, DEFAULT_LEAKAGE_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwistVariant {
    Lindblad,
    DoubleSpace,
}

/// The twisted generator at flux `φ` (taken mod 2π).
pub fn twisted_form(spec: &ModelSpec, layout: &LatticeLayout, phi: f64, variant: TwistVariant, exec: Exec) -> Result<LindbladForm> {
    if layout.kind() != LayoutKind::ChainPbc {
        return Err(Error::UnsupportedLayout(format!("twisted boundaries need chain-pbc, got {:?}", layout.kind())));
    }
    let Hamiltonian::Qlm1d { j, .. } = spec.hamiltonian else {
        return Err(Error::InvalidParameter("twisted boundaries need the qlm-1d Hamiltonian".into()));
    };
    let mut twisted = spec.clone();
    twisted.hamiltonian = Hamiltonian::Qlm1d { j, phi: phi.rem_euclid(2.0 * std::f64::consts::PI) };
    let h = build_hamiltonian(&twisted, layout, exec)?;
    let jumps: Vec<_> = build_jump_set(&twisted, layout, exec)?.into_iter().map(|j| j.op).collect();
    let mut form = LindbladForm::lindblad(&h, &jumps)?;
    if variant == TwistVariant::DoubleSpace {
        let shift = h.transpose().sub(&h)?.scale(C64::new(0.0, 1.0));
        form.bra = form.bra.add(&shift)?;
    }
    Ok(form)
}

pub fn assemble_twisted(
    spec: &ModelSpec,
    layout: &LatticeLayout,
    phi: f64,
    variant: TwistVariant,
    basis: &DoubleSectorBasis,
    exec: Exec,
) -> Result<Superoperator> {
    let form = twisted_form(spec, layout, phi, variant, exec)?;
    assemble(&form, basis, Some(DEFAULT_LEAKAGE_TOL), exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{enumerate_double_sector, DoubleConstraint};

    #[test]
    fn variants_agree_at_zero_flux() {
        let layout = LatticeLayout::chain_pbc(3).unwrap();
        let spec = ModelSpec::biased_chain(layout.spec(), 1.0, 2.4, 1.6);
        let basis = enumerate_double_sector(&layout, &DoubleConstraint::weak_gauge_zero(&layout, 1), Exec::default()).unwrap();
        let a = assemble_twisted(&spec, &layout, 0.0, TwistVariant::Lindblad, &basis, Exec::default()).unwrap();
        let b = assemble_twisted(&spec, &layout, 0.0, TwistVariant::DoubleSpace, &basis, Exec::default()).unwrap();
        let c = super::super::assemble_model(&spec, &layout, &basis, Exec::default()).unwrap();
        assert_eq!(a.matrix(), c.matrix());
        assert_eq!(b.matrix(), c.matrix());
        let d = assemble_twisted(&spec, &layout, 0.5, TwistVariant::DoubleSpace, &basis, Exec::default()).unwrap();
        assert_ne!(d.matrix(), c.matrix());
    }

    #[test]
    fn open_chain_rejected() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let spec = ModelSpec::biased_chain(layout.spec(), 1.0, 2.4, 1.6);
        assert!(twisted_form(&spec, &layout, 0.1, TwistVariant::Lindblad, Exec::default()).is_err());
    }
}
