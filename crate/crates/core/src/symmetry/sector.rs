use std::collections::{BTreeMap, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{charge_form, gauss_forms, Charge, ChargeForm, GaugeCharges};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{BasisState, LatticeLayout, LayoutKind};
use crate::sparse::{BasisTag, CsrMatrix, SparseOperator};

/// Tolerance on `‖(1 - P) A P‖_F` when an operator is asserted block-diagonal.
pub const DEFAULT_LEAKAGE_TOL: f64 = 1e-12;

/// Hilbert-space sector constraints; unset fields are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConstraint {
    /// Total particle number `N` (chain and square layouts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<u32>,
    /// Gauss-law eigenvalues in half-units, one per site. Background charges
    /// `g_n` enter as `-2 g_n`, i.e. the sector `(G_n + g_n)|ψ⟩ = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge2: Option<Vec<i32>>,
    /// Hierarchical `(2 N_{H'}, 2 D_{H'})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchical2: Option<(i32, i32)>,
}

impl SectorConstraint {
    pub fn particles(n: u32) -> Self {
        SectorConstraint { n_particles: Some(n), ..Default::default() }
    }

    pub fn gauge(gauge2: Vec<i32>) -> Self {
        SectorConstraint { gauge2: Some(gauge2), ..Default::default() }
    }

    /// Builds a membership predicate, validating against the layout.
    fn predicate(&self, layout: &LatticeLayout) -> Result<impl Fn(BasisState) -> bool + Sync> {
        if let Some(g) = &self.gauge2 {
            if g.len() != layout.num_sites() {
                return Err(Error::InvalidParameter(format!("{} gauge charges for {} sites", g.len(), layout.num_sites())));
            }
        }
        let hier = match self.hierarchical2 {
            Some(target) => {
                if layout.kind() != LayoutKind::Hierarchical {
                    return Err(Error::UnsupportedLayout("hierarchical charges on a non-hierarchical layout".into()));
                }
                Some((charge_form(layout, Charge::NHprime)?, charge_form(layout, Charge::DHprime)?, target))
            }
            None => None,
        };
        let n_form = match self.n_particles {
            Some(n) => {
                if n as usize > layout.num_sites() {
                    return Err(Error::InvalidParameter(format!("N = {n} exceeds {} sites", layout.num_sites())));
                }
                Some((charge_form(layout, Charge::N)?, 2 * n as i32))
            }
            None => None,
        };
        let gauge = self.gauge2.clone().map(|g| (gauss_forms(layout), g));
        Ok(move |s: BasisState| {
            if let Some((f, target)) = &n_form {
                if f.eval2(s) != *target {
                    return false;
                }
            }
            if let Some((forms, target)) = &gauge {
                if forms.iter().zip(target).any(|(f, &t)| f.eval2(s) != t) {
                    return false;
                }
            }
            if let Some((nf, df, (nt, dt))) = &hier {
                if nf.eval2(s) != *nt || df.eval2(s) != *dt {
                    return false;
                }
            }
            true
        })
    }
}

fn fingerprint<T: Hash>(items: &T) -> u64 {
    let mut h = DefaultHasher::new();
    items.hash(&mut h);
    h.finish()
}

/// Basis states satisfying a constraint, in increasing order.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    constraint: SectorConstraint,
    spins: usize,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
    fingerprint: u64,
}

/// JSON-exportable description of a sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSummary {
    pub constraint: SectorConstraint,
    pub dimension: usize,
    /// Dimension per gauge-charge configuration (half-units), sorted by key.
    pub gauge_blocks: Vec<(Vec<i32>, usize)>,
}

impl SectorBasis {
    pub fn from_states(spins: usize, constraint: SectorConstraint, mut states: Vec<BasisState>) -> Self {
        states.sort_unstable();
        states.dedup();
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let fingerprint = fingerprint(&(spins, &states));
        SectorBasis { constraint, spins, states, index, fingerprint }
    }

    pub fn constraint(&self) -> &SectorConstraint {
        &self.constraint
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, state: BasisState) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn tag(&self) -> BasisTag {
        BasisTag::Sector { fingerprint: self.fingerprint, dim: self.states.len() }
    }

    pub fn summary(&self, layout: &LatticeLayout) -> SectorSummary {
        let forms = gauss_forms(layout);
        let mut blocks: BTreeMap<Vec<i32>, usize> = BTreeMap::new();
        for &s in &self.states {
            *blocks.entry(GaugeCharges::of(&forms, s).0).or_default() += 1;
        }
        SectorSummary { constraint: self.constraint.clone(), dimension: self.dim(), gauge_blocks: blocks.into_iter().collect() }
    }

    /// Embeds a sector vector into the full `2^spins` space.
    pub fn lift(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); 1usize << self.spins];
        for (&s, &x) in self.states.iter().zip(v) {
            out[s as usize] = x;
        }
        out
    }
}

/// Next integer with the same popcount (Gosper's hack).
fn next_combination(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

/// Enumerates a Hilbert-space sector. Matter configurations with the right
/// particle number are generated directly; the remaining slots are scanned and
/// filtered by the gauge/hierarchical constraints. An empty sector is not an
/// error.
pub fn enumerate_sector(layout: &LatticeLayout, constraint: &SectorConstraint, exec: Exec) -> Result<SectorBasis> {
    let keep = constraint.predicate(layout)?;
    let sites = layout.num_sites();
    let rest = layout.total_spins() - sites;
    let site_configs: Vec<u64> = match constraint.n_particles {
        Some(0) => vec![0],
        Some(n) => {
            let mut out = Vec::new();
            let mut x = (1u64 << n) - 1;
            while x < (1u64 << sites) {
                out.push(x);
                x = next_combination(x);
            }
            out
        }
        None => (0..(1u64 << sites)).collect(),
    };
    let parts = exec.map(&site_configs, |&sc| (0..(1u64 << rest)).map(|r| sc | (r << sites)).filter(|&s| keep(s)).collect::<Vec<_>>());
    let states = parts.into_iter().flatten().collect();
    Ok(SectorBasis::from_states(layout.total_spins(), constraint.clone(), states))
}

/// Restricts a full-space operator to a sector. With `check_leakage` set, the
/// operator must not couple the sector to its complement.
pub fn project_operator(a: &SparseOperator, sector: &SectorBasis, check_leakage: Option<f64>) -> Result<SparseOperator> {
    let BasisTag::Full { spins } = a.basis() else {
        return Err(Error::BasisMismatch("projection needs a full-space operator".into()));
    };
    if spins != sector.spins {
        return Err(Error::BasisMismatch(format!("{spins}-spin operator for a {}-spin sector", sector.spins)));
    }
    // A^T rows are the columns of A
    let at = a.matrix().transpose();
    let mut leak = 0.0;
    let mut triplets = Vec::new();
    for (j, &s) in sector.states.iter().enumerate() {
        for (row, v) in at.row(s as usize) {
            match sector.index_of(row as BasisState) {
                Some(i) => triplets.push((i, j, v)),
                None => leak += v.norm_sqr(),
            }
        }
    }
    let leak = leak.sqrt();
    if let Some(tol) = check_leakage {
        if leak > tol {
            return Err(Error::Leakage { norm: leak, tolerance: tol });
        }
    }
    SparseOperator::new(sector.tag(), CsrMatrix::from_triplets(sector.dim(), sector.dim(), triplets, 0.0))
}

/// Double-space (ket ⊗ bra) sector constraints.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleConstraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ket: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bra: Option<u32>,
    /// Weak-gauge eigenvalues `g(ket) - g(bra)` in half-units; all zeros is
    /// the sector `𝒢_n[ρ] = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge_shift2: Option<Vec<i32>>,
    /// Sum of the ket's gauge charges in half-units; a strong label for
    /// layouts where `N` is not defined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ket_gauge_total2: Option<i32>,
}

impl DoubleConstraint {
    /// The sector `𝒢_n = 0` with `N_ket = N_bra = n`.
    pub fn weak_gauge_zero(layout: &LatticeLayout, n: u32) -> Self {
        DoubleConstraint { n_ket: Some(n), n_bra: Some(n), gauge_shift2: Some(vec![0; layout.num_sites()]), ket_gauge_total2: None }
    }
}

/// A contiguous run of pairs sharing ket and bra gauge charges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairBlock {
    pub ket_gauge2: Vec<i32>,
    pub bra_gauge2: Vec<i32>,
    pub start: usize,
    pub len: usize,
}

/// Ordered list of `(ket, bra)` pairs spanning a double-space sector.
///
/// Pairs are stored block-major: blocks follow the sorted ket gauge charges
/// and each block lists its pairs in lexicographic `(ket, bra)` order. When
/// no gauge constraint is imposed there is a single block.
#[derive(Clone, Debug)]
pub struct DoubleSectorBasis {
    constraint: DoubleConstraint,
    spins: usize,
    pairs: Vec<(BasisState, BasisState)>,
    index: HashMap<(BasisState, BasisState), usize>,
    /// Set for the unconstrained double space, where the index is `a * d + b`.
    full_dim: Option<usize>,
    blocks: Vec<PairBlock>,
    fingerprint: u64,
}

/// Ket gauge key, bra gauge key and every state pair between them.
type PairGroup = (Vec<i32>, Vec<i32>, Vec<(BasisState, BasisState)>);

impl DoubleSectorBasis {
    fn from_blocks(spins: usize, constraint: DoubleConstraint, groups: Vec<PairGroup>) -> Self {
        let mut pairs = Vec::new();
        let mut blocks = Vec::new();
        for (ket_gauge2, bra_gauge2, mut ps) in groups {
            ps.sort_unstable();
            blocks.push(PairBlock { ket_gauge2, bra_gauge2, start: pairs.len(), len: ps.len() });
            pairs.extend(ps);
        }
        let index = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let fingerprint = fingerprint(&(spins, &pairs));
        DoubleSectorBasis { constraint, spins, pairs, index, full_dim: None, blocks, fingerprint }
    }

    /// An explicit pair list forming a single block (no symmetry labels).
    pub fn from_pairs(spins: usize, pairs: Vec<(BasisState, BasisState)>) -> Self {
        Self::from_blocks(spins, DoubleConstraint::default(), vec![(vec![], vec![], pairs)])
    }

    /// Every pair of basis states, in lexicographic order.
    pub fn full(layout: &LatticeLayout) -> Self {
        let d = layout.hilbert_dim();
        let n = d as BasisState;
        let pairs: Vec<_> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
        let fingerprint = fingerprint(&(layout.total_spins(), &pairs));
        let blocks = vec![PairBlock { ket_gauge2: vec![], bra_gauge2: vec![], start: 0, len: pairs.len() }];
        DoubleSectorBasis {
            constraint: DoubleConstraint::default(),
            spins: layout.total_spins(),
            pairs,
            index: HashMap::new(),
            full_dim: Some(d),
            blocks,
            fingerprint,
        }
    }

    pub fn constraint(&self) -> &DoubleConstraint {
        &self.constraint
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(BasisState, BasisState)] {
        &self.pairs
    }

    pub fn blocks(&self) -> &[PairBlock] {
        &self.blocks
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    #[inline]
    pub fn index_of(&self, ket: BasisState, bra: BasisState) -> Option<usize> {
        if let Some(d) = self.full_dim {
            let (a, b) = (ket as usize, bra as usize);
            return (a < d && b < d).then(|| a * d + b);
        }
        self.index.get(&(ket, bra)).copied()
    }

    /// Positions of the diagonal pairs `(a, a)`, which carry the trace.
    pub fn diagonal_positions(&self) -> Vec<(usize, BasisState)> {
        self.pairs.iter().enumerate().filter(|(_, p)| p.0 == p.1).map(|(i, p)| (i, p.0)).collect()
    }

    /// Ket states appearing in the sector, sorted.
    pub fn ket_states(&self) -> Vec<BasisState> {
        let mut k: Vec<_> = self.pairs.iter().map(|p| p.0).collect();
        k.sort_unstable();
        k.dedup();
        k
    }
}

fn group_by_gauge(layout: &LatticeLayout, states: &[BasisState]) -> BTreeMap<Vec<i32>, Vec<BasisState>> {
    let forms = gauss_forms(layout);
    let mut groups: BTreeMap<Vec<i32>, Vec<BasisState>> = BTreeMap::new();
    for &s in states {
        groups.entry(GaugeCharges::of(&forms, s).0).or_default().push(s);
    }
    groups
}

fn hilbert_states(layout: &LatticeLayout, n: Option<u32>, exec: Exec) -> Result<Vec<BasisState>> {
    let c = SectorConstraint { n_particles: n, ..Default::default() };
    Ok(enumerate_sector(layout, &c, exec)?.states)
}

/// Enumerates a double-space sector.
pub fn enumerate_double_sector(layout: &LatticeLayout, constraint: &DoubleConstraint, exec: Exec) -> Result<DoubleSectorBasis> {
    let kets = hilbert_states(layout, constraint.n_ket, exec)?;
    let bras = hilbert_states(layout, constraint.n_bra, exec)?;
    let spins = layout.total_spins();
    let Some(shift) = &constraint.gauge_shift2 else {
        if constraint.ket_gauge_total2.is_some() {
            return Err(Error::InvalidParameter("ket_gauge_total2 requires gauge_shift2".into()));
        }
        let pairs = kets.iter().flat_map(|&a| bras.iter().map(move |&b| (a, b))).collect();
        return Ok(DoubleSectorBasis::from_blocks(spins, constraint.clone(), vec![(vec![], vec![], pairs)]));
    };
    if shift.len() != layout.num_sites() {
        return Err(Error::InvalidParameter(format!("{} gauge shifts for {} sites", shift.len(), layout.num_sites())));
    }
    let ket_groups = group_by_gauge(layout, &kets);
    let bra_groups = group_by_gauge(layout, &bras);
    let keys: Vec<&Vec<i32>> = ket_groups.keys().filter(|g| constraint.ket_gauge_total2.is_none_or(|t| g.iter().sum::<i32>() == t)).collect();
    let groups = exec.map(&keys, |g| {
        let bra_key: Vec<i32> = g.iter().zip(shift).map(|(a, d)| a - d).collect();
        let bs = bra_groups.get(&bra_key)?;
        let ks = &ket_groups[*g];
        let pairs = ks.iter().flat_map(|&a| bs.iter().map(move |&b| (a, b))).collect::<Vec<_>>();
        Some(((*g).clone(), bra_key, pairs))
    });
    Ok(DoubleSectorBasis::from_blocks(spins, constraint.clone(), groups.into_iter().flatten().collect()))
}

/// Which conserved labels to use when splitting the whole double space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockSymmetry {
    /// Weak gauge symmetry plus the strong total charge (`N`, or the sum of
    /// gauge charges on the hierarchical ladder).
    WeakGauge,
    /// Strong `N` only (ket and bra particle numbers).
    StrongN,
}

/// Splits the full double space into disjoint blocks invariant under any
/// Liouvillian with the given symmetry. The blocks cover every pair exactly
/// once.
pub fn partition_double_space(layout: &LatticeLayout, symmetry: BlockSymmetry, exec: Exec) -> Result<Vec<DoubleSectorBasis>> {
    let states: Vec<BasisState> = (0..layout.hilbert_dim() as BasisState).collect();
    let spins = layout.total_spins();
    match symmetry {
        BlockSymmetry::StrongN => {
            let n_form = charge_form(layout, Charge::N)?;
            let mut by_n: BTreeMap<i32, Vec<BasisState>> = BTreeMap::new();
            for &s in &states {
                by_n.entry(n_form.eval2(s)).or_default().push(s);
            }
            let mut out = Vec::new();
            for (nk, ks) in &by_n {
                for (nb, bs) in &by_n {
                    let pairs = ks.iter().flat_map(|&a| bs.iter().map(move |&b| (a, b))).collect();
                    let c = DoubleConstraint { n_ket: Some((*nk / 2) as u32), n_bra: Some((*nb / 2) as u32), ..Default::default() };
                    out.push(DoubleSectorBasis::from_blocks(spins, c, vec![(vec![], vec![], pairs)]));
                }
            }
            Ok(out)
        }
        BlockSymmetry::WeakGauge => {
            let groups = group_by_gauge(layout, &states);
            let n_form: Option<ChargeForm> = charge_form(layout, Charge::N).ok();
            // (ket total, shift) -> list of (ket key, bra key)
            type KeyPairs<'a> = Vec<(&'a Vec<i32>, &'a Vec<i32>)>;
            let mut labels: BTreeMap<(i32, Vec<i32>), KeyPairs> = BTreeMap::new();
            for gk in groups.keys() {
                for gb in groups.keys() {
                    let shift: Vec<i32> = gk.iter().zip(gb).map(|(a, b)| a - b).collect();
                    labels.entry((gk.iter().sum(), shift)).or_default().push((gk, gb));
                }
            }
            let labels: Vec<_> = labels.into_iter().collect();
            Ok(exec.map(&labels, |((total, shift), members)| {
                let blocks = members
                    .iter()
                    .map(|(gk, gb)| {
                        let pairs = groups[*gk].iter().flat_map(|&a| groups[*gb].iter().map(move |&b| (a, b))).collect();
                        ((*gk).clone(), (*gb).clone(), pairs)
                    })
                    .collect();
                let (n_ket, n_bra) = match &n_form {
                    Some(f) => {
                        let (a, b) = (groups[members[0].0][0], groups[members[0].1][0]);
                        (Some((f.eval2(a) / 2) as u32), Some((f.eval2(b) / 2) as u32))
                    }
                    None => (None, None),
                };
                let c = DoubleConstraint { n_ket, n_bra, gauge_shift2: Some(shift.clone()), ket_gauge_total2: Some(*total) };
                DoubleSectorBasis::from_blocks(spins, c, blocks)
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeLayout;
    use crate::spin::{single_spin_operator, SpinOp};

    #[test]
    fn particle_sector_dimension() {
        let layout = LatticeLayout::chain_obc(7).unwrap();
        let s = enumerate_sector(&layout, &SectorConstraint::particles(2), Exec::default()).unwrap();
        assert_eq!(s.dim(), 21 * 64);
        assert!(s.states().windows(2).all(|w| w[0] < w[1]));
        for (i, &st) in s.states().iter().enumerate() {
            assert_eq!(s.index_of(st), Some(i));
        }
    }

    #[test]
    fn empty_sector_is_not_an_error() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let s = enumerate_sector(&layout, &SectorConstraint::gauge(vec![3, 3, 3]), Exec::Sequential).unwrap();
        assert!(s.is_empty());
        assert!(enumerate_sector(&layout, &SectorConstraint::gauge(vec![0, 0]), Exec::Sequential).is_err());
        assert!(enumerate_sector(&layout, &SectorConstraint::particles(4), Exec::Sequential).is_err());
    }

    #[test]
    fn jump_operator_leaks_out_of_gauge_sector() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let s = enumerate_sector(&layout, &SectorConstraint::gauge(vec![0, -1, -2]), Exec::Sequential).unwrap();
        assert!(!s.is_empty());
        let up = single_spin_operator(&layout, 3, SpinOp::Raise).unwrap();
        assert!(matches!(project_operator(&up, &s, Some(DEFAULT_LEAKAGE_TOL)), Err(Error::Leakage { .. })));
        assert!(project_operator(&up, &s, None).is_ok());
    }

    #[test]
    fn weak_gauge_partition_covers_double_space() {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let blocks = partition_double_space(&layout, BlockSymmetry::WeakGauge, Exec::default()).unwrap();
        let total: usize = blocks.iter().map(|b| b.dim()).sum();
        assert_eq!(total, 32 * 32);
        let n_blocks = partition_double_space(&layout, BlockSymmetry::StrongN, Exec::default()).unwrap();
        assert_eq!(n_blocks.len(), 16);
        assert_eq!(n_blocks.iter().map(|b| b.dim()).sum::<usize>(), 32 * 32);
    }

    #[test]
    fn double_sector_is_block_major() {
        let layout = LatticeLayout::chain_obc(4).unwrap();
        let d = enumerate_double_sector(&layout, &DoubleConstraint::weak_gauge_zero(&layout, 2), Exec::default()).unwrap();
        let mut covered = 0;
        for b in d.blocks() {
            assert_eq!(b.start, covered);
            assert_eq!(b.ket_gauge2, b.bra_gauge2);
            covered += b.len;
        }
        assert_eq!(covered, d.dim());
        // d_g^2 summed over gauge sectors with N = 2
        let hs = enumerate_sector(&layout, &SectorConstraint::particles(2), Exec::default()).unwrap();
        let summary = hs.summary(&layout);
        assert_eq!(summary.gauge_blocks.iter().map(|(_, d)| d * d).sum::<usize>(), d.dim());
        assert_eq!(summary.gauge_blocks.iter().map(|(_, d)| d).sum::<usize>(), hs.dim());
    }
}
