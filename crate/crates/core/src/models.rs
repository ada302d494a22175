//! Hamiltonians, jump-operator families and disorder terms.
//!
//! Every builder returns operators on the full register of the layout.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{LatticeLayout, LayoutKind, LayoutSpec};
use crate::sparse::SparseOperator;
use crate::spin::{operator_from_terms, ProductTerm, SpinOp};
use crate::symmetry::gauss_forms;

use SpinOp::{Lower, Raise, Z};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Hamiltonian {
    /// `J Σ (τ_n^+ s_{n,n+1}^+ τ_{n+1}^- + h.c.)`; under PBC the boundary bond
    /// carries the twist `e^{iφ}`.
    Qlm1d {
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        phi: f64,
    },
    /// Three-layer ladder with couplings `J_1` (top–middle) and `J_2`
    /// (middle–bottom).
    Hierarchical {
        #[serde(rename = "J1")]
        j1: f64,
        #[serde(rename = "J2")]
        j2: f64,
    },
    /// Square lattice with horizontal `J_1` and vertical `J_2` bonds.
    Qlm2d {
        #[serde(rename = "J1")]
        j1: f64,
        #[serde(rename = "J2")]
        j2: f64,
    },
    None,
}

/// One family of jump operators. Link families act on the dissipative slots
/// of the layout (chain links, square-lattice links, hierarchical bottom layer).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpFamily {
    /// `√γ_u s^+` and `√γ_d s^-` on every link; vertical square-lattice links
    /// use `γ_u'`, `γ_d'` when given.
    Biased {
        gamma_u: f64,
        gamma_d: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_u_v: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_d_v: Option<f64>,
    },
    /// A single `√γ_u s^+ + √γ_d s^-` per link.
    XLike { gamma_u: f64, gamma_d: f64 },
    /// `√γ s^z` per link.
    Dephasing { gamma: f64 },
    /// `√Γ G_n` per site.
    GaugeFixing {
        #[serde(rename = "Gamma")]
        gamma: f64,
    },
    /// `√γ_r τ_n^- τ_{n+1}^+` and `√γ_l τ_n^+ τ_{n+1}^-` per bond (chains only).
    EffectiveAsep { gamma_r: f64, gamma_l: f64 },
}

impl JumpFamily {
    pub fn biased(gamma_u: f64, gamma_d: f64) -> Self {
        JumpFamily::Biased { gamma_u, gamma_d, gamma_u_v: None, gamma_d_v: None }
    }

    /// Effective hopping rates of the strong-dissipation limit:
    /// `γ_{r,l} = γ_{u,d} J² / (γ_u + γ_d)²`.
    pub fn effective_asep(gamma_u: f64, gamma_d: f64, j: f64) -> Self {
        let s = (gamma_u + gamma_d).powi(2);
        JumpFamily::EffectiveAsep { gamma_r: gamma_u * j * j / s, gamma_l: gamma_d * j * j / s }
    }

    fn rates(&self) -> Vec<f64> {
        match *self {
            JumpFamily::Biased { gamma_u, gamma_d, gamma_u_v, gamma_d_v } => {
                [Some(gamma_u), Some(gamma_d), gamma_u_v, gamma_d_v].into_iter().flatten().collect()
            }
            JumpFamily::XLike { gamma_u, gamma_d } => vec![gamma_u, gamma_d],
            JumpFamily::Dephasing { gamma } | JumpFamily::GaugeFixing { gamma } => vec![gamma],
            JumpFamily::EffectiveAsep { gamma_r, gamma_l } => vec![gamma_r, gamma_l],
        }
    }

    /// Whether every jump operator commutes with every Gauss generator.
    pub fn preserves_strong_gauge(&self) -> bool {
        matches!(self, JumpFamily::Dephasing { .. } | JumpFamily::GaugeFixing { .. })
    }

    /// Whether the generated Liouvillian commutes with the weak gauge
    /// generators `𝒢_n`.
    pub fn preserves_weak_gauge(&self) -> bool {
        matches!(self, JumpFamily::Biased { .. } | JumpFamily::Dephasing { .. } | JumpFamily::GaugeFixing { .. })
    }
}

/// Symmetric disorder on chains: `δH = Σ h_n τ_n^z + Σ h'_n s^z_{n,n+1}` and
/// `δH' = Σ J'_n (τ_n^+ s^+_{n,n+1} s^+_{n+1,n+2} τ_{n+2}^- + h.c.)`.
/// Draw order: `h_n` for every site, `h'` for every link, then `J'_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disorder {
    pub seed: u64,
    /// `h_n, h' ~ U[-W, W]`.
    #[serde(rename = "W", default = "default_strength")]
    pub w: f64,
    /// `J'_n ~ U[0, W']`.
    #[serde(rename = "W_prime", default = "default_strength")]
    pub w_prime: f64,
}

fn default_strength() -> f64 {
    0.5
}

impl Disorder {
    pub fn new(seed: u64) -> Self {
        Disorder { seed, w: default_strength(), w_prime: default_strength() }
    }
}

/// Realized disorder values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisorderRealization {
    pub site_fields: Vec<f64>,
    pub link_fields: Vec<f64>,
    pub long_range: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layout: LayoutSpec,
    pub hamiltonian: Hamiltonian,
    #[serde(default)]
    pub jumps: Vec<JumpFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<Disorder>,
}

impl ModelSpec {
    /// The chain model with biased link dissipation.
    pub fn biased_chain(layout: LayoutSpec, j: f64, gamma_u: f64, gamma_d: f64) -> Self {
        ModelSpec { layout, hamiltonian: Hamiltonian::Qlm1d { j, phi: 0.0 }, jumps: vec![JumpFamily::biased(gamma_u, gamma_d)], disorder: None }
    }

    pub fn validate(&self, layout: &LatticeLayout) -> Result<()> {
        if layout.spec() != self.layout.build()?.spec() {
            return Err(Error::InvalidParameter("layout does not match the model".into()));
        }
        let kind = layout.kind();
        match self.hamiltonian {
            Hamiltonian::Qlm1d { j, phi } => {
                if !kind.is_chain() {
                    return Err(Error::UnsupportedLayout(format!("qlm-1d on {kind:?}")));
                }
                check_finite(&[j, phi])?;
                if !(0.0..2.0 * std::f64::consts::PI).contains(&phi) {
                    return Err(Error::InvalidParameter(format!("phi = {phi} outside [0, 2π)")));
                }
            }
            Hamiltonian::Hierarchical { j1, j2 } => {
                if kind != LayoutKind::Hierarchical {
                    return Err(Error::UnsupportedLayout(format!("hierarchical Hamiltonian on {kind:?}")));
                }
                check_finite(&[j1, j2])?;
            }
            Hamiltonian::Qlm2d { j1, j2 } => {
                if kind != LayoutKind::Square2d {
                    return Err(Error::UnsupportedLayout(format!("qlm-2d on {kind:?}")));
                }
                check_finite(&[j1, j2])?;
            }
            Hamiltonian::None => {}
        }
        for f in &self.jumps {
            for r in f.rates() {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::InvalidParameter(format!("negative or non-finite rate {r} in {f:?}")));
                }
            }
            if matches!(f, JumpFamily::EffectiveAsep { .. }) && !kind.is_chain() {
                return Err(Error::UnsupportedLayout("effective-asep needs a chain".into()));
            }
        }
        if let Some(d) = &self.disorder {
            if !kind.is_chain() {
                return Err(Error::UnsupportedLayout("disorder is defined on chains only".into()));
            }
            if !(d.w >= 0.0 && d.w_prime >= 0.0) {
                return Err(Error::InvalidParameter("negative disorder strength".into()));
            }
        }
        Ok(())
    }
}

fn check_finite(xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::InvalidParameter(format!("non-finite coupling {x}"))),
        None => Ok(()),
    }
}

/// `c · a^+ b^+ c^-` plus its Hermitian conjugate.
fn hop(coeff: C64, a: usize, link: usize, b: usize) -> [ProductTerm; 2] {
    let t = ProductTerm::new(coeff, vec![(a, Raise), (link, Raise), (b, Lower)]);
    let h = t.adjoint();
    [t, h]
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Product terms of the (disorder-free) Hamiltonian.
pub fn hamiltonian_terms(layout: &LatticeLayout, h: &Hamiltonian) -> Result<Vec<ProductTerm>> {
    let mut terms = Vec::new();
    match *h {
        Hamiltonian::Qlm1d { j, phi } => {
            let l = layout.l();
            for n in 0..l - 1 {
                terms.extend(hop(real(j), n, layout.link_slot(n).expect("bulk link"), n + 1));
            }
            if layout.kind() == LayoutKind::ChainPbc {
                terms.extend(twist_terms(layout, j, phi)?);
            }
        }
        Hamiltonian::Hierarchical { j1, j2 } => {
            let l = layout.l();
            for n in 0..l - 1 {
                terms.extend(hop(real(j1), n, layout.middle_slot(n).expect("middle"), n + 1));
            }
            for m in 0..l - 2 {
                let (a, b) = (layout.middle_slot(m).expect("middle"), layout.middle_slot(m + 1).expect("middle"));
                terms.extend(hop(real(j2), a, layout.bottom_slot(m + 1).expect("bottom"), b));
            }
        }
        Hamiltonian::Qlm2d { j1, j2 } => {
            for y in 0..layout.ly() {
                for x in 0..layout.l() {
                    let here = layout.site2d_slot(x, y).expect("site");
                    if let Some(link) = layout.hlink_slot(x, y) {
                        terms.extend(hop(real(j1), here, link, layout.site2d_slot(x + 1, y).expect("site")));
                    }
                    if let Some(link) = layout.vlink_slot(x, y) {
                        terms.extend(hop(real(j2), here, link, layout.site2d_slot(x, y + 1).expect("site")));
                    }
                }
            }
        }
        Hamiltonian::None => {}
    }
    Ok(terms)
}

/// `H_twist(φ) = J e^{iφ} τ_L^+ s_{L,1}^+ τ_1^- + h.c.` on a periodic chain.
pub fn twist_terms(layout: &LatticeLayout, j: f64, phi: f64) -> Result<Vec<ProductTerm>> {
    if layout.kind() != LayoutKind::ChainPbc {
        return Err(Error::UnsupportedLayout("a twist needs the periodic chain".into()));
    }
    let l = layout.l();
    let link = layout.link_slot(l - 1).expect("boundary link");
    Ok(hop(C64::from_polar(j, phi), l - 1, link, 0).to_vec())
}

pub fn twist_hamiltonian(layout: &LatticeLayout, j: f64, phi: f64, exec: Exec) -> Result<SparseOperator> {
    operator_from_terms(layout, &twist_terms(layout, j, phi)?, exec)
}

pub fn realize_disorder(layout: &LatticeLayout, d: &Disorder) -> Result<DisorderRealization> {
    if !layout.kind().is_chain() {
        return Err(Error::UnsupportedLayout("disorder is defined on chains only".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let l = layout.l();
    let links = layout.dissipative_slots().len();
    let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let site_fields = (0..l).map(|_| uniform(-d.w, d.w)).collect();
    let link_fields = (0..links).map(|_| uniform(-d.w, d.w)).collect();
    let long_range = (0..l.saturating_sub(2)).map(|_| uniform(0.0, d.w_prime)).collect();
    Ok(DisorderRealization { site_fields, link_fields, long_range })
}

pub fn disorder_terms(layout: &LatticeLayout, d: &Disorder) -> Result<Vec<ProductTerm>> {
    let r = realize_disorder(layout, d)?;
    let mut terms = Vec::new();
    for (n, &h) in r.site_fields.iter().enumerate() {
        terms.push(ProductTerm::real(h, vec![(n, Z)]));
    }
    for (&slot, &h) in layout.dissipative_slots().iter().zip(&r.link_fields) {
        terms.push(ProductTerm::real(h, vec![(slot, Z)]));
    }
    for (n, &jp) in r.long_range.iter().enumerate() {
        let (l1, l2) = (layout.link_slot(n).expect("link"), layout.link_slot(n + 1).expect("link"));
        let t = ProductTerm::real(jp, vec![(n, Raise), (l1, Raise), (l2, Raise), (n + 2, Lower)]);
        let h = t.adjoint();
        terms.extend([t, h]);
    }
    Ok(terms)
}

/// The full Hamiltonian including disorder.
pub fn build_hamiltonian(spec: &ModelSpec, layout: &LatticeLayout, exec: Exec) -> Result<SparseOperator> {
    spec.validate(layout)?;
    let mut terms = hamiltonian_terms(layout, &spec.hamiltonian)?;
    if let Some(d) = &spec.disorder {
        terms.extend(disorder_terms(layout, d)?);
    }
    operator_from_terms(layout, &terms, exec)
}

/// A jump operator with a label naming its family and position.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub label: String,
    pub op: SparseOperator,
}

fn family_jumps(layout: &LatticeLayout, f: &JumpFamily, exec: Exec) -> Result<Vec<Jump>> {
    let single = |label: String, terms: Vec<ProductTerm>| -> Result<Jump> { Ok(Jump { label, op: operator_from_terms(layout, &terms, exec)? }) };
    let links = layout.dissipative_slots();
    let mut out = Vec::new();
    match *f {
        JumpFamily::Biased { gamma_u, gamma_d, gamma_u_v, gamma_d_v } => {
            for &slot in &links {
                let vertical = matches!(layout.role(slot)?, crate::lattice::SlotRole::VLink(..));
                let (gu, gd) = if vertical { (gamma_u_v.unwrap_or(gamma_u), gamma_d_v.unwrap_or(gamma_d)) } else { (gamma_u, gamma_d) };
                out.push(single(format!("up@{slot}"), vec![ProductTerm::real(gu.sqrt(), vec![(slot, Raise)])])?);
                out.push(single(format!("down@{slot}"), vec![ProductTerm::real(gd.sqrt(), vec![(slot, Lower)])])?);
            }
        }
        JumpFamily::XLike { gamma_u, gamma_d } => {
            for &slot in &links {
                let terms = vec![ProductTerm::real(gamma_u.sqrt(), vec![(slot, Raise)]), ProductTerm::real(gamma_d.sqrt(), vec![(slot, Lower)])];
                out.push(single(format!("x@{slot}"), terms)?);
            }
        }
        JumpFamily::Dephasing { gamma } => {
            for &slot in &links {
                out.push(single(format!("z@{slot}"), vec![ProductTerm::real(gamma.sqrt(), vec![(slot, Z)])])?);
            }
        }
        JumpFamily::GaugeFixing { gamma } => {
            for (n, form) in gauss_forms(layout).iter().enumerate() {
                out.push(Jump { label: format!("gauss@{n}"), op: form.to_operator(layout).scale_re(gamma.sqrt()) });
            }
        }
        JumpFamily::EffectiveAsep { gamma_r, gamma_l } => {
            let l = layout.l();
            let bonds = if layout.kind() == LayoutKind::ChainPbc { l } else { l - 1 };
            for n in 0..bonds {
                let m = (n + 1) % l;
                out.push(single(format!("right@{n}"), vec![ProductTerm::real(gamma_r.sqrt(), vec![(n, Lower), (m, Raise)])])?);
                out.push(single(format!("left@{n}"), vec![ProductTerm::real(gamma_l.sqrt(), vec![(n, Raise), (m, Lower)])])?);
            }
        }
    }
    Ok(out)
}

/// All jump operators of the model, family by family in `ModelSpec::jumps` order.
pub fn build_jump_set(spec: &ModelSpec, layout: &LatticeLayout, exec: Exec) -> Result<Vec<Jump>> {
    spec.validate(layout)?;
    let mut out = Vec::new();
    for f in &spec.jumps {
        out.extend(family_jumps(layout, f, exec)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BasisState;

    fn chain(l: usize) -> (LatticeLayout, ModelSpec) {
        let layout = LatticeLayout::chain_obc(l).unwrap();
        let spec = ModelSpec::biased_chain(layout.spec(), 1.0, 2.4, 1.6);
        (layout, spec)
    }

    #[test]
    fn two_site_hopping_element() {
        let (layout, spec) = chain(2);
        let h = build_hamiltonian(&spec, &layout, Exec::Sequential).unwrap();
        // slots: τ_1 = 0, τ_2 = 1, s = 2
        let from: BasisState = 0b010;
        let to: BasisState = 0b101;
        assert_eq!(h.get(to as usize, from as usize), C64::new(1.0, 0.0));
        assert_eq!(h.nnz(), 2);
        assert!(h.hermiticity_defect() == 0.0);
    }

    #[test]
    fn biased_jump_count() {
        let (layout, spec) = chain(7);
        assert_eq!(build_jump_set(&spec, &layout, Exec::default()).unwrap().len(), 12);
    }

    #[test]
    fn effective_rates() {
        match JumpFamily::effective_asep(30.0, 10.0, 1.0) {
            JumpFamily::EffectiveAsep { gamma_r, gamma_l } => {
                assert!((gamma_r - 0.01875).abs() < 1e-15);
                assert!((gamma_l - 0.00625).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn negative_rate_rejected() {
        let (layout, mut spec) = chain(3);
        spec.jumps = vec![JumpFamily::Dephasing { gamma: -1.0 }];
        assert!(matches!(build_jump_set(&spec, &layout, Exec::Sequential), Err(Error::InvalidParameter(_))));
        spec.jumps = vec![JumpFamily::EffectiveAsep { gamma_r: 1.0, gamma_l: 1.0 }];
        spec.layout = LatticeLayout::square(2, 2).unwrap().spec();
        spec.hamiltonian = Hamiltonian::None;
        let sq = LatticeLayout::square(2, 2).unwrap();
        assert!(build_jump_set(&spec, &sq, Exec::Sequential).is_err());
    }

    #[test]
    fn disorder_is_seeded() {
        let layout = LatticeLayout::chain_obc(5).unwrap();
        let a = realize_disorder(&layout, &Disorder::new(7)).unwrap();
        let b = realize_disorder(&layout, &Disorder::new(7)).unwrap();
        let c = realize_disorder(&layout, &Disorder::new(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!((a.site_fields.len(), a.link_fields.len(), a.long_range.len()), (5, 4, 3));
        assert!(a.long_range.iter().all(|&j| (0.0..=0.5).contains(&j)));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let (_, mut spec) = chain(4);
        spec.jumps.push(JumpFamily::GaugeFixing { gamma: 1.0 });
        spec.disorder = Some(Disorder::new(3));
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&s).unwrap(), spec);
        assert!(serde_json::from_str::<ModelSpec>(&s.replace("\"seed\"", "\"sead\"")).is_err());
    }
}
