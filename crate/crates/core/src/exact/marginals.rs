//! Exact single-spin marginals of product-form ensembles under charge
//! constraints, by dynamic programming over slots.
//!
//! Constrained slots are swept in order while tracking partial charge sums in
//! half-units; a forward and a backward pass give every marginal. Weights are
//! kept as logarithms so that ensembles with ratios like `β^{n²}` at `L ≈ 24`
//! stay finite.

use std::collections::HashMap;

use serde::Serialize;

use super::DiagonalEnsemble;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{LatticeLayout, SlotRole};
use crate::symmetry::{charge_form, enumerate_sector, Charge, ChargeForm};

/// Per-slot `⟨s^z⟩` and the log partition function (relative to the all-down
/// weight).
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub sz: Vec<f64>,
    pub log_z: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn accumulate(map: &mut HashMap<Vec<i32>, f64>, key: Vec<i32>, lw: f64) {
    let e = map.entry(key).or_insert(f64::NEG_INFINITY);
    *e = log_add(*e, lw);
}

fn constraint_forms(ens: &DiagonalEnsemble) -> Result<Vec<(ChargeForm, i32)>> {
    let layout = ens.layout();
    let c = ens.constraint();
    let mut out = Vec::new();
    if let Some(n) = c.n_particles {
        if n as usize > layout.num_sites() {
            return Err(Error::EmptySector(format!("N = {n} on {} sites", layout.num_sites())));
        }
        out.push((charge_form(layout, Charge::N)?, 2 * n as i32));
    }
    if let Some((nh, dh)) = c.hierarchical2 {
        out.push((charge_form(layout, Charge::NHprime)?, nh));
        out.push((charge_form(layout, Charge::DHprime)?, dh));
    }
    Ok(out)
}

/// Marginals of a nonnegative ensemble. Particle-number and hierarchical
/// constraints use the DP; gauge-charge constraints fall back to enumerating
/// the sector.
pub fn ensemble_marginals(ens: &DiagonalEnsemble) -> Result<Marginals> {
    if ens.is_signed() {
        return Err(Error::InvalidParameter("marginals need a nonnegative ensemble".into()));
    }
    if ens.constraint().gauge2.is_some() {
        return enumerated_marginals(ens);
    }
    let lr = ens.log_ratios();
    let forms = constraint_forms(ens)?;
    let spins = lr.len();
    let delta: Vec<Vec<i32>> = (0..spins).map(|s| forms.iter().map(|(f, _)| f.coeff(s)).collect()).collect();
    let constrained: Vec<usize> = (0..spins).filter(|&s| delta[s].iter().any(|&d| d != 0)).collect();
    let start: Vec<i32> = forms.iter().map(|(f, _)| f.offset2()).collect();
    let target: Vec<i32> = forms.iter().map(|(_, t)| *t).collect();
    let step = |q: &[i32], s: usize, up: bool| -> Vec<i32> { q.iter().zip(&delta[s]).map(|(a, d)| if up { a + d } else { a - d }).collect() };

    // forward[k]: partial sums over constrained[..k]
    let mut forward = vec![HashMap::from([(start.clone(), 0.0)])];
    for &s in &constrained {
        let mut next = HashMap::new();
        for (q, &lw) in forward.last().expect("nonempty") {
            accumulate(&mut next, step(q, s, true), lw + lr[s]);
            accumulate(&mut next, step(q, s, false), lw);
        }
        forward.push(next);
    }
    let log_z_constrained = *forward.last().expect("nonempty").get(&target).ok_or_else(|| Error::EmptySector(format!("{:?}", ens.constraint())))?;

    // backward[k]: completions of constrained[k..] reaching the target
    let mut backward = vec![HashMap::new(); constrained.len() + 1];
    backward[constrained.len()].insert(target.clone(), 0.0);
    for k in (0..constrained.len()).rev() {
        let s = constrained[k];
        let mut cur = HashMap::new();
        for q in forward[k].keys() {
            let mut lw = f64::NEG_INFINITY;
            if let Some(b) = backward[k + 1].get(&step(q, s, true)) {
                lw = log_add(lw, b + lr[s]);
            }
            if let Some(b) = backward[k + 1].get(&step(q, s, false)) {
                lw = log_add(lw, *b);
            }
            if lw > f64::NEG_INFINITY {
                cur.insert(q.clone(), lw);
            }
        }
        backward[k] = cur;
    }

    let mut sz = vec![0.0; spins];
    let mut log_z = log_z_constrained;
    for s in 0..spins {
        if delta[s].iter().all(|&d| d == 0) {
            // independent two-level factor
            let p_up = 1.0 / (1.0 + (-lr[s]).exp());
            sz[s] = p_up - 0.5;
            log_z += log_add(0.0, lr[s]);
        }
    }
    for (k, &s) in constrained.iter().enumerate() {
        let mut lw_up = f64::NEG_INFINITY;
        for (q, &f) in &forward[k] {
            if let Some(b) = backward[k + 1].get(&step(q, s, true)) {
                lw_up = log_add(lw_up, f + lr[s] + b);
            }
        }
        sz[s] = (lw_up - log_z_constrained).exp() - 0.5;
    }
    Ok(Marginals { sz, log_z })
}

fn enumerated_marginals(ens: &DiagonalEnsemble) -> Result<Marginals> {
    let sector = enumerate_sector(ens.layout(), ens.constraint(), Exec::default())?;
    if sector.is_empty() {
        return Err(Error::EmptySector(format!("{:?}", ens.constraint())));
    }
    let lws: Vec<f64> = sector.states().iter().map(|&s| ens.log_weight(s).0).collect();
    let max = lws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = lws.iter().map(|lw| (lw - max).exp()).sum();
    let spins = ens.layout().total_spins();
    let mut sz = vec![0.0; spins];
    for (&state, lw) in sector.states().iter().zip(&lws) {
        let p = (lw - max).exp() / z;
        for (slot, v) in sz.iter_mut().enumerate() {
            *v += p * crate::lattice::sz2(state, slot) as f64 / 2.0;
        }
    }
    Ok(Marginals { sz, log_z: max + z.ln() })
}

/// One row of a profile table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub layer: &'static str,
    /// 1-based position in the layer (row-major site index on the square
    /// lattice; physical index for the hierarchical bottom layer).
    pub n: usize,
    pub value: f64,
}

/// `⟨s^z⟩` per slot labelled by layer, followed by site densities
/// `⟨τ^z⟩ + 1/2` for matter sites.
pub fn profile_rows(layout: &LatticeLayout, m: &Marginals) -> Vec<ProfileRow> {
    let mut rows = Vec::new();
    let mut density = Vec::new();
    for (slot, role) in layout.roles().iter().enumerate() {
        let v = m.sz[slot];
        let (layer, n) = match *role {
            SlotRole::Site(n) => {
                density.push(ProfileRow { layer: "density", n: n + 1, value: v + 0.5 });
                ("site", n + 1)
            }
            SlotRole::Site2d(x, y) => {
                let n = y * layout.l() + x + 1;
                density.push(ProfileRow { layer: "density", n, value: v + 0.5 });
                ("site", n)
            }
            SlotRole::Link(n) => ("link", n + 1),
            SlotRole::Top(n) => ("top", n + 1),
            SlotRole::Middle(n) => ("middle", n + 1),
            SlotRole::Bottom(k) => ("bottom", k + 2),
            SlotRole::HLink(x, y) => ("hlink", y * (layout.l() - 1) + x + 1),
            SlotRole::VLink(x, y) => ("vlink", y * layout.l() + x + 1),
        };
        rows.push(ProfileRow { layer, n, value: v });
    }
    rows.extend(density);
    rows
}

/// `Σ_n (n - (L+1)/2)^order v_n` with 1-based `n`.
pub fn centered_moment(values: &[f64], order: i32) -> f64 {
    let c = (values.len() as f64 + 1.0) / 2.0;
    values.iter().enumerate().map(|(i, v)| (i as f64 + 1.0 - c).powi(order) * v).sum()
}

#[cfg(test)]
mod tests {
    use super::super::{exact_steady_state, SteadyParams};
    use super::*;
    use crate::symmetry::SectorConstraint;

    #[test]
    fn uniform_filling_at_beta_one() {
        let layout = LatticeLayout::chain_obc(6).unwrap();
        let ens = exact_steady_state(&layout, &SteadyParams::new(1.7, 1.0)).unwrap().with_constraint(SectorConstraint::particles(2));
        let m = ensemble_marginals(&ens).unwrap();
        for n in 0..6 {
            assert!((m.sz[n] + 0.5 - 2.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn link_polarization() {
        let layout = LatticeLayout::chain_obc(8).unwrap();
        let ens = exact_steady_state(&layout, &SteadyParams::new(1.0, 1.5)).unwrap().with_constraint(SectorConstraint::particles(3));
        let m = ensemble_marginals(&ens).unwrap();
        for s in layout.dissipative_slots() {
            assert!((m.sz[s] - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn infeasible_sector() {
        let layout = LatticeLayout::hierarchical(4).unwrap();
        let ens = exact_steady_state(&layout, &SteadyParams::new(1.0, 3.0))
            .unwrap()
            .with_constraint(SectorConstraint { hierarchical2: Some((1, 0)), ..Default::default() });
        assert!(matches!(ensemble_marginals(&ens), Err(Error::EmptySector(_))));
    }

    #[test]
    fn moments() {
        assert_eq!(centered_moment(&[1.0, 0.0, 1.0], 2), 2.0);
        assert_eq!(centered_moment(&[-1.0, 0.0, 1.0], 1), 2.0);
    }
}
