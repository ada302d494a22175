//! Closed-form steady states and eigenoperators.
//!
//! Every exact state here has the form `exp[Σ_n c_n G_n]` for Gauss generators
//! `G_n`. Because each `G_n` is a sum of single-spin `s^z` terms, the operator
//! factorizes into per-slot ratios `r = w(↑)/w(↓) = exp(Σ_n c_n coeff_n)`.
//! A coefficient `c_n` may carry an odd multiple of `iπ`, which only flips the
//! sign of slot ratios; such ensembles are signed and carry no probability
//! interpretation.

mod marginals;

pub use marginals::{centered_moment, ensemble_marginals, profile_rows, Marginals, ProfileRow};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{is_up, BasisState, LatticeLayout, LayoutKind};
use crate::sparse::{BasisTag, SparseOperator};
use crate::symmetry::{enumerate_sector, gauss_forms, GaugeCharges, SectorConstraint};

/// `Re c + iπ·parity` for one Gauss coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeCoefficient {
    pub re: f64,
    pub parity: u32,
}

impl GaugeCoefficient {
    fn real(re: f64) -> Self {
        GaugeCoefficient { re, parity: 0 }
    }

    pub fn to_complex(self) -> C64 {
        C64::new(self.re, std::f64::consts::PI * (self.parity % 2) as f64)
    }
}

/// Parameters of the exact steady states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyParams {
    pub alpha: f64,
    pub beta: f64,
    /// Second chemical potential of the hierarchical ladder.
    #[serde(default = "one")]
    pub alpha_prime: f64,
    /// Vertical bias ratio on the square lattice; defaults to `beta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_prime: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl SteadyParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        SteadyParams { alpha, beta, alpha_prime: 1.0, beta_prime: None }
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} must be positive")))
    }
}

/// Which exact construction to use.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactKind {
    Steady(SteadyParams),
    /// Eigenoperator labelled by a bit string of length `L - 1`.
    Bitstring {
        k: Vec<bool>,
        alpha: f64,
        gamma_u: f64,
        gamma_d: f64,
    },
}

/// Gauss coefficients `c_n` of an exact construction, one per site.
///
/// * chain: `ln α + n ln β`
/// * hierarchical: `ln α' + n ln α + n(n-1)/2 ln β`
/// * square lattice: `ln α + x ln β + y ln β'`
/// * bit string `k`: `ln α + Σ_{i<n} ln β_{k_i}` with `β_0 = γ_u/γ_d`, `β_1 = -1`
///
/// with 1-based `n`, `x`, `y`.
pub fn gauge_coefficients(layout: &LatticeLayout, kind: &ExactKind) -> Result<Vec<GaugeCoefficient>> {
    if layout.kind() == LayoutKind::ChainPbc {
        return Err(Error::UnsupportedLayout("exact states are built for open boundaries only".into()));
    }
    match kind {
        ExactKind::Steady(p) => {
            let (la, lb) = (positive("alpha", p.alpha)?, positive("beta", p.beta)?);
            Ok(match layout.kind() {
                LayoutKind::ChainObc => (1..=layout.l()).map(|n| GaugeCoefficient::real(la + n as f64 * lb)).collect(),
                LayoutKind::Hierarchical => {
                    let lap = positive("alpha_prime", p.alpha_prime)?;
                    (1..=layout.l())
                        .map(|n| {
                            let n = n as f64;
                            GaugeCoefficient::real(lap + n * la + n * (n - 1.0) / 2.0 * lb)
                        })
                        .collect()
                }
                LayoutKind::Square2d => {
                    let lbp = positive("beta_prime", p.beta_prime.unwrap_or(p.beta))?;
                    let mut out = Vec::with_capacity(layout.num_sites());
                    for y in 1..=layout.ly() {
                        for x in 1..=layout.l() {
                            out.push(GaugeCoefficient::real(la + x as f64 * lb + y as f64 * lbp));
                        }
                    }
                    out
                }
                LayoutKind::ChainPbc => unreachable!(),
            })
        }
        ExactKind::Bitstring { k, alpha, gamma_u, gamma_d } => {
            if layout.kind() != LayoutKind::ChainObc {
                return Err(Error::UnsupportedLayout("bit-string eigenoperators are built on the open chain".into()));
            }
            if k.len() + 1 != layout.l() {
                return Err(Error::InvalidParameter(format!("bit string of length {} for L = {}", k.len(), layout.l())));
            }
            let la = positive("alpha", *alpha)?;
            let lb0 = positive("gamma_u / gamma_d", gamma_u / gamma_d)?;
            let mut c = GaugeCoefficient::real(la);
            let mut out = vec![c];
            for &bit in k {
                if bit {
                    c.parity += 1;
                } else {
                    c.re += lb0;
                }
                out.push(c);
            }
            Ok(out)
        }
    }
}

/// A diagonal operator `∝ exp[Σ c_n G_n]` stored as per-slot ratios, with an
/// optional sector projection.
#[derive(Clone, Debug)]
pub struct DiagonalEnsemble {
    layout: LatticeLayout,
    log_ratio: Vec<f64>,
    negative: Vec<bool>,
    constraint: SectorConstraint,
}

impl DiagonalEnsemble {
    pub fn from_coefficients(layout: &LatticeLayout, coeffs: &[GaugeCoefficient]) -> Result<Self> {
        let forms = gauss_forms(layout);
        if coeffs.len() != forms.len() {
            return Err(Error::DimensionMismatch(format!("{} coefficients for {} generators", coeffs.len(), forms.len())));
        }
        let spins = layout.total_spins();
        let mut log_ratio = vec![0.0; spins];
        let mut parity = vec![0i64; spins];
        for (form, c) in forms.iter().zip(coeffs) {
            for &(slot, k) in form.terms() {
                log_ratio[slot] += c.re * k as f64;
                parity[slot] += c.parity as i64 * k as i64;
            }
        }
        let negative = parity.iter().map(|p| p.rem_euclid(2) == 1).collect();
        Ok(DiagonalEnsemble { layout: layout.clone(), log_ratio, negative, constraint: SectorConstraint::default() })
    }

    /// The identity, optionally restricted to a sector.
    pub fn identity(layout: &LatticeLayout, constraint: SectorConstraint) -> Self {
        let spins = layout.total_spins();
        DiagonalEnsemble { layout: layout.clone(), log_ratio: vec![0.0; spins], negative: vec![false; spins], constraint }
    }

    pub fn with_constraint(mut self, constraint: SectorConstraint) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn layout(&self) -> &LatticeLayout {
        &self.layout
    }

    pub fn constraint(&self) -> &SectorConstraint {
        &self.constraint
    }

    /// `ln |w(↑)/w(↓)|` per slot.
    pub fn log_ratios(&self) -> &[f64] {
        &self.log_ratio
    }

    pub fn is_signed(&self) -> bool {
        self.negative.iter().any(|&n| n)
    }

    /// `(ln |w|, sign)` of a basis state, relative to the all-down state.
    pub fn log_weight(&self, state: BasisState) -> (f64, f64) {
        let mut lw = 0.0;
        let mut sign = 1.0;
        for slot in 0..self.log_ratio.len() {
            if is_up(state, slot) {
                lw += self.log_ratio[slot];
                if self.negative[slot] {
                    sign = -sign;
                }
            }
        }
        (lw, sign)
    }

    /// Diagonal operator on the full register. Nonnegative ensembles are
    /// normalized to unit trace, signed ones to unit largest entry.
    pub fn to_operator(&self, exec: Exec) -> Result<SparseOperator> {
        let sector = enumerate_sector(&self.layout, &self.constraint, exec)?;
        if sector.is_empty() {
            return Err(Error::EmptySector(format!("{:?}", self.constraint)));
        }
        let weights: Vec<(f64, f64)> = sector.states().iter().map(|&s| self.log_weight(s)).collect();
        let max = weights.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
        let vals: Vec<f64> = weights.iter().map(|&(lw, sign)| sign * (lw - max).exp()).collect();
        let norm = if self.is_signed() { 1.0 } else { vals.iter().sum() };
        let mut diag = vec![C64::new(0.0, 0.0); self.layout.hilbert_dim()];
        for (&s, v) in sector.states().iter().zip(vals) {
            diag[s as usize] = C64::new(v / norm, 0.0);
        }
        SparseOperator::diagonal(BasisTag::Full { spins: self.layout.total_spins() }, &diag)
    }
}

/// The exact open-boundary steady state (chain, hierarchical ladder or square
/// lattice), unprojected.
pub fn exact_steady_state(layout: &LatticeLayout, params: &SteadyParams) -> Result<DiagonalEnsemble> {
    let c = gauge_coefficients(layout, &ExactKind::Steady(*params))?;
    DiagonalEnsemble::from_coefficients(layout, &c)
}

/// The eigenoperator `ϱ_k` and its eigenvalue `-2(γ_u + γ_d) K`.
pub fn exact_eigenoperator(layout: &LatticeLayout, k: &[bool], alpha: f64, gamma_u: f64, gamma_d: f64) -> Result<(DiagonalEnsemble, f64)> {
    let kind = ExactKind::Bitstring { k: k.to_vec(), alpha, gamma_u, gamma_d };
    let c = gauge_coefficients(layout, &kind)?;
    let ens = DiagonalEnsemble::from_coefficients(layout, &c)?;
    let weight = k.iter().filter(|&&b| b).count() as f64;
    Ok((ens, -2.0 * (gamma_u + gamma_d) * weight))
}

/// The diagonal `T = exp[-Σ c_n G_n]`, evaluated generator by generator.
/// Up to a constant, `T ρ = I` for the corresponding exact state.
pub fn similarity_transform(layout: &LatticeLayout, kind: &ExactKind) -> Result<SparseOperator> {
    let c: Vec<C64> = gauge_coefficients(layout, kind)?.into_iter().map(GaugeCoefficient::to_complex).collect();
    let forms = gauss_forms(layout);
    let diag: Vec<C64> = (0..layout.hilbert_dim())
        .map(|s| {
            let exponent: C64 = forms.iter().zip(&c).map(|(f, &cn)| cn * f.eval(s as BasisState)).sum();
            (-exponent).exp()
        })
        .collect();
    SparseOperator::diagonal(BasisTag::Full { spins: layout.total_spins() }, &diag)
}

/// Families whose steady states are identities on symmetry sectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialFamily {
    /// x-like jumps with `γ_u = γ_d`: one identity per particle number.
    XLikeSymmetric,
    /// Dephasing: one identity per nonempty gauge sector.
    Dephasing,
}

pub fn special_steady_states(layout: &LatticeLayout, family: SpecialFamily) -> Result<Vec<DiagonalEnsemble>> {
    match family {
        SpecialFamily::XLikeSymmetric => {
            if layout.kind() == LayoutKind::Hierarchical {
                return Err(Error::UnsupportedLayout("particle number is not defined on the ladder".into()));
            }
            Ok((0..=layout.num_sites() as u32).map(|n| DiagonalEnsemble::identity(layout, SectorConstraint::particles(n))).collect())
        }
        SpecialFamily::Dephasing => {
            let forms = gauss_forms(layout);
            let mut keys: Vec<Vec<i32>> = (0..layout.hilbert_dim() as BasisState).map(|s| GaugeCharges::of(&forms, s).0).collect();
            keys.sort();
            keys.dedup();
            Ok(keys.into_iter().map(|g| DiagonalEnsemble::identity(layout, SectorConstraint::gauge(g))).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::exp_gauss_combination;

    #[test]
    fn zero_bitstring_is_the_steady_state() {
        let layout = LatticeLayout::chain_obc(4).unwrap();
        let (e, lambda) = exact_eigenoperator(&layout, &[false; 3], 1.0, 3.0, 1.0).unwrap();
        assert_eq!(lambda, 0.0);
        let s = exact_steady_state(&layout, &SteadyParams::new(1.0 / 3.0, 3.0)).unwrap();
        for (a, b) in e.log_ratios().iter().zip(s.log_ratios()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(!e.is_signed());
    }

    #[test]
    fn eigenvalue_ladder() {
        let layout = LatticeLayout::chain_obc(5).unwrap();
        let (e, lambda) = exact_eigenoperator(&layout, &[true, false, false, false], 1.0, 2.4, 1.6).unwrap();
        assert_eq!(lambda, -8.0);
        assert!(e.is_signed());
        assert!(exact_eigenoperator(&layout, &[true], 1.0, 2.4, 1.6).is_err());
    }

    #[test]
    fn ratios_match_direct_exponential() {
        let layout = LatticeLayout::chain_obc(4).unwrap();
        let p = SteadyParams::new(2.0, 3.0);
        let ens = exact_steady_state(&layout, &p).unwrap();
        let coeffs: Vec<f64> = (1..=4).map(|n| 2f64.ln() + n as f64 * 3f64.ln()).collect();
        let direct = exp_gauss_combination(&layout, &coeffs).unwrap();
        let ratio0 = direct.get(0, 0).re;
        for s in 0..layout.hilbert_dim() {
            let (lw, sign) = ens.log_weight(s as BasisState);
            assert!((sign * lw.exp() * ratio0 / direct.get(s, s).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn link_factor_matches_two_level_state() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let ens = exact_steady_state(&layout, &SteadyParams::new(1.0, 3.0)).unwrap();
        for slot in layout.dissipative_slots() {
            assert!((ens.log_ratios()[slot] - 3f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn periodic_chain_rejected() {
        let layout = LatticeLayout::chain_pbc(4).unwrap();
        assert!(matches!(exact_steady_state(&layout, &SteadyParams::new(1.0, 3.0)), Err(Error::UnsupportedLayout(_))));
    }

    #[test]
    fn transform_inverts_steady_state() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let kind = ExactKind::Steady(SteadyParams::new(1.0, 3.0));
        let t = similarity_transform(&layout, &kind).unwrap();
        let rho = exact_steady_state(&layout, &SteadyParams::new(1.0, 3.0)).unwrap().to_operator(Exec::default()).unwrap();
        let prod = t.mul(&rho).unwrap();
        let c = prod.get(0, 0);
        for s in 0..layout.hilbert_dim() {
            assert!((prod.get(s, s) / c - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn special_counts() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        assert_eq!(special_steady_states(&layout, SpecialFamily::XLikeSymmetric).unwrap().len(), 4);
        let deph = special_steady_states(&layout, SpecialFamily::Dephasing).unwrap();
        let total: usize = deph.iter().map(|e| enumerate_sector(&layout, e.constraint(), Exec::default()).unwrap().dim()).sum();
        assert_eq!(total, 32);
    }
}
