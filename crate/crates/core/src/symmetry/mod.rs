//! Gauss-law generators, global charges and symmetry sectors.
//!
//! Every generator and charge in scope is diagonal and linear in the `s^z` of
//! the register, so it is stored as a [`ChargeForm`]: integer coefficients on
//! `2 s^z` plus an integer offset. Evaluating a form on a basis state yields
//! twice the eigenvalue, an exact integer usable as a hash key.

mod sector;

pub use sector::{
    enumerate_double_sector, enumerate_sector, partition_double_space, project_operator, BlockSymmetry, DoubleConstraint, DoubleSectorBasis,
    PairBlock, SectorBasis, SectorConstraint, SectorSummary, DEFAULT_LEAKAGE_TOL,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{sz2, BasisState, LatticeLayout, LayoutKind};
use crate::sparse::{BasisTag, SparseOperator};
use crate::spin::diagonal_operator;

/// A diagonal operator `Σ_slot coeff · s^z_slot + offset2 / 2`, stored in
/// half-units: [`ChargeForm::eval2`] returns twice the eigenvalue.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChargeForm {
    terms: Vec<(usize, i32)>,
    offset2: i32,
}

impl ChargeForm {
    /// Merges repeated slots and drops zero coefficients; terms end up sorted.
    pub fn new(terms: impl IntoIterator<Item = (usize, i32)>, offset2: i32) -> Self {
        let mut acc: Vec<(usize, i32)> = terms.into_iter().collect();
        acc.sort_unstable();
        let mut merged: Vec<(usize, i32)> = Vec::with_capacity(acc.len());
        for (slot, c) in acc {
            match merged.last_mut() {
                Some(last) if last.0 == slot => last.1 += c,
                _ => merged.push((slot, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0);
        ChargeForm { terms: merged, offset2 }
    }

    pub fn terms(&self) -> &[(usize, i32)] {
        &self.terms
    }

    pub fn offset2(&self) -> i32 {
        self.offset2
    }

    /// Coefficient of `s^z` on `slot`.
    pub fn coeff(&self, slot: usize) -> i32 {
        self.terms.iter().find(|t| t.0 == slot).map_or(0, |t| t.1)
    }

    #[inline]
    pub fn eval2(&self, state: BasisState) -> i32 {
        self.offset2 + self.terms.iter().map(|&(slot, c)| c * sz2(state, slot)).sum::<i32>()
    }

    pub fn eval(&self, state: BasisState) -> f64 {
        0.5 * self.eval2(state) as f64
    }

    pub fn scaled(&self, k: i32) -> Self {
        ChargeForm::new(self.terms.iter().map(|&(s, c)| (s, k * c)), k * self.offset2)
    }

    pub fn plus(&self, other: &Self) -> Self {
        ChargeForm::new(self.terms.iter().chain(other.terms.iter()).copied(), self.offset2 + other.offset2)
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scaled(-1))
    }

    pub fn to_operator(&self, layout: &LatticeLayout) -> SparseOperator {
        diagonal_operator(layout, |s| self.eval(s))
    }
}

/// Which family of local generators to build on the hierarchical ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeFamily {
    /// The generators that commute with the full model Hamiltonian
    /// (`G^{H'}_n` on the hierarchical ladder; the ordinary `G_n` elsewhere).
    Full,
    /// `G^{στ}_n`, symmetry of the top–middle coupling alone.
    SigmaTau,
    /// `G^{τs}_{n,n+1}`, symmetry of the middle–bottom coupling alone.
    TauS,
}

fn site_minus_out_plus_in(site: usize, outgoing: Option<usize>, incoming: Option<usize>) -> ChargeForm {
    let mut terms = vec![(site, 1)];
    terms.extend(outgoing.map(|s| (s, -1)));
    terms.extend(incoming.map(|s| (s, 1)));
    ChargeForm::new(terms, 0)
}

/// `G^{τs}` for middle-layer spin `m` (0-based), or `None` outside the ladder.
fn tau_s_form(layout: &LatticeLayout, m: Option<usize>) -> Option<ChargeForm> {
    let m = m?;
    let tau = layout.middle_slot(m)?;
    Some(site_minus_out_plus_in(tau, layout.bottom_slot(m + 1), layout.bottom_slot(m)))
}

/// The Gauss-law generator at site `n` (0-based; `n = y L_x + x` on the square
/// lattice) as a charge form. Boundary sites simply lack the missing links.
pub fn gauss_form(layout: &LatticeLayout, n: usize) -> Result<ChargeForm> {
    gauss_form_family(layout, n, GaugeFamily::Full)
}

pub fn gauss_form_family(layout: &LatticeLayout, n: usize, family: GaugeFamily) -> Result<ChargeForm> {
    let l = layout.l();
    match (layout.kind(), family) {
        (LayoutKind::ChainObc | LayoutKind::ChainPbc, GaugeFamily::Full) => {
            let site = layout.site_slot(n)?;
            let incoming = match n {
                0 => layout.link_slot(l - 1).filter(|_| layout.kind() == LayoutKind::ChainPbc),
                _ => layout.link_slot(n - 1),
            };
            Ok(site_minus_out_plus_in(site, layout.link_slot(n), incoming))
        }
        (LayoutKind::Square2d, GaugeFamily::Full) => {
            let site = layout.site_slot(n)?;
            let (x, y) = (n % l, n / l);
            let mut terms = vec![(site, 1)];
            terms.extend(layout.hlink_slot(x, y).map(|s| (s, -1)));
            terms.extend(x.checked_sub(1).and_then(|xm| layout.hlink_slot(xm, y)).map(|s| (s, 1)));
            terms.extend(layout.vlink_slot(x, y).map(|s| (s, -1)));
            terms.extend(y.checked_sub(1).and_then(|ym| layout.vlink_slot(x, ym)).map(|s| (s, 1)));
            Ok(ChargeForm::new(terms, 0))
        }
        (LayoutKind::Hierarchical, GaugeFamily::SigmaTau) => {
            let sigma = layout.site_slot(n)?;
            Ok(site_minus_out_plus_in(sigma, layout.middle_slot(n), n.checked_sub(1).and_then(|m| layout.middle_slot(m))))
        }
        (LayoutKind::Hierarchical, GaugeFamily::TauS) => tau_s_form(layout, Some(n)).ok_or(Error::InvalidSite { index: n, sites: l - 1 }),
        (LayoutKind::Hierarchical, GaugeFamily::Full) => {
            let sigma = layout.site_slot(n)?;
            let mut g = ChargeForm::new([(sigma, 1)], 0);
            if let Some(out) = tau_s_form(layout, Some(n)) {
                g = g.minus(&out);
            }
            if let Some(inc) = tau_s_form(layout, n.checked_sub(1)) {
                g = g.plus(&inc);
            }
            Ok(g)
        }
        (kind, family) => Err(Error::UnsupportedLayout(format!("{family:?} generators on {kind:?}"))),
    }
}

/// All Gauss-law generators of the layout, one per site.
pub fn gauss_forms(layout: &LatticeLayout) -> Vec<ChargeForm> {
    (0..layout.num_sites()).map(|n| gauss_form(layout, n).expect("every site has a generator")).collect()
}

pub fn gauss_generator(layout: &LatticeLayout, n: usize) -> Result<SparseOperator> {
    Ok(gauss_form(layout, n)?.to_operator(layout))
}

/// Per-site Gauss eigenvalues of a basis state, in half-units.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GaugeCharges(pub Vec<i32>);

impl GaugeCharges {
    pub fn of(forms: &[ChargeForm], state: BasisState) -> Self {
        GaugeCharges(forms.iter().map(|f| f.eval2(state)).collect())
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|&g| 0.5 * g as f64).collect()
    }

    pub fn total2(&self) -> i32 {
        self.0.iter().sum()
    }
}

/// Global charges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Charge {
    /// Particle number `N = Σ (τ^z_n + 1/2)`.
    N,
    /// Centered dipole `D = Σ τ^z_n (n - (L+1)/2)` (1-based `n`).
    Dipole,
    /// Total link polarization `S^z = Σ s^z`.
    LinkSz,
    /// Hierarchical `N_{H'} = Σ σ^z_n`.
    NHprime,
    /// Hierarchical `D_{H'} = Σ n σ^z_n + Σ τ^z_{n,n+1}`.
    DHprime,
}

/// Integer-valued (half-unit) charges as forms. The centered dipole is not
/// integral in half-units and is only available through [`charge_operator`].
pub fn charge_form(layout: &LatticeLayout, charge: Charge) -> Result<ChargeForm> {
    let kind = layout.kind();
    let unsupported = || Err(Error::UnsupportedLayout(format!("{charge:?} on {kind:?}")));
    match charge {
        Charge::N if kind != LayoutKind::Hierarchical => {
            let sites = layout.num_sites() as i32;
            Ok(ChargeForm::new(layout.site_slots().into_iter().map(|s| (s, 1)), sites))
        }
        Charge::LinkSz if kind != LayoutKind::Hierarchical => Ok(ChargeForm::new(layout.dissipative_slots().into_iter().map(|s| (s, 1)), 0)),
        Charge::NHprime if kind == LayoutKind::Hierarchical => Ok(ChargeForm::new(layout.site_slots().into_iter().map(|s| (s, 1)), 0)),
        Charge::DHprime if kind == LayoutKind::Hierarchical => {
            let l = layout.l();
            let top = (0..l).map(|n| (n, n as i32 + 1));
            let mid = (0..l - 1).filter_map(|m| layout.middle_slot(m)).map(|s| (s, 1));
            Ok(ChargeForm::new(top.chain(mid), 0))
        }
        _ => unsupported(),
    }
}

pub fn charge_operator(layout: &LatticeLayout, charge: Charge) -> Result<SparseOperator> {
    match charge {
        Charge::Dipole if layout.kind().is_chain() => {
            let l = layout.l();
            let center = (l as f64 + 1.0) / 2.0;
            Ok(diagonal_operator(layout, |s| (0..l).map(|n| 0.5 * sz2(s, n) as f64 * ((n + 1) as f64 - center)).sum()))
        }
        Charge::Dipole => Err(Error::UnsupportedLayout(format!("Dipole on {:?}", layout.kind()))),
        _ => Ok(charge_form(layout, charge)?.to_operator(layout)),
    }
}

/// The diagonal operator `exp(Σ_n c_n G_n)` for real coefficients, built
/// directly from the generators' eigenvalues (no per-spin factorization).
pub fn exp_gauss_combination(layout: &LatticeLayout, coeffs: &[f64]) -> Result<SparseOperator> {
    if coeffs.len() != layout.num_sites() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} generators", coeffs.len(), layout.num_sites())));
    }
    let forms = gauss_forms(layout);
    let diag: Vec<C64> = (0..layout.hilbert_dim() as BasisState)
        .map(|s| C64::new(forms.iter().zip(coeffs).map(|(f, c)| c * f.eval(s)).sum::<f64>().exp(), 0.0))
        .collect();
    SparseOperator::diagonal(BasisTag::Full { spins: layout.total_spins() }, &diag)
}
