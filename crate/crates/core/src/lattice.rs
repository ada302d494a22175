//! Lattice geometries and the global spin register.
//!
//! Every spin-1/2 degree of freedom (matter sites and gauge links alike) owns
//! one slot of the register. A computational basis state is a `u64` bit string
//! with slot 0 as the least-significant bit; bit 1 means spin up (an occupied
//! site, `τ^z = +1/2`). Basis states are ordered as unsigned integers.
//!
//! Indices are 0-based throughout: chain site `n` is the physical site `n + 1`
//! and chain link `n` joins sites `n` and `n + 1` (mod `L` for the periodic
//! chain, so link `L - 1` is the boundary link `(L, 1)`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A computational basis state of the register.
pub type BasisState = u64;

/// Hard limit on the register size; basis states are `u64` bit strings.
pub const MAX_SPINS: usize = 63;

#[inline]
pub fn is_up(state: BasisState, slot: usize) -> bool {
    (state >> slot) & 1 == 1
}

/// `2 s^z` of a slot: `+1` for up, `-1` for down.
#[inline]
pub fn sz2(state: BasisState, slot: usize) -> i32 {
    if is_up(state, slot) {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    ChainObc,
    ChainPbc,
    Hierarchical,
    Square2d,
}

impl LayoutKind {
    pub fn is_chain(self) -> bool {
        matches!(self, LayoutKind::ChainObc | LayoutKind::ChainPbc)
    }
}

/// What a register slot represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotRole {
    /// Chain matter site `n`.
    Site(usize),
    /// Chain link `n` between sites `n` and `n + 1` (mod `L` under PBC).
    Link(usize),
    /// Hierarchical top layer `σ_n`.
    Top(usize),
    /// Hierarchical middle layer `τ_{n,n+1}`.
    Middle(usize),
    /// Hierarchical bottom layer; index `k` is the physical `s_{k+2}`.
    Bottom(usize),
    /// 2D matter site `(x, y)`.
    Site2d(usize, usize),
    /// 2D horizontal link `(x + 1/2, y)`.
    HLink(usize, usize),
    /// 2D vertical link `(x, y + 1/2)`.
    VLink(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub kind: LayoutKind,
    /// Sites per chain / top-layer spins / `L_x` for the square lattice.
    #[serde(rename = "L")]
    pub l: usize,
    /// `L_y` for the square lattice; ignored otherwise.
    #[serde(rename = "L_y", default, skip_serializing_if = "Option::is_none")]
    pub l_y: Option<usize>,
}

impl LayoutSpec {
    pub fn build(&self) -> Result<LatticeLayout> {
        LatticeLayout::new(self.kind, self.l, self.l_y)
    }
}

/// Geometry plus the slot map of the spin register. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeLayout {
    kind: LayoutKind,
    lx: usize,
    ly: usize,
    roles: Vec<SlotRole>,
}

impl LatticeLayout {
    pub fn new(kind: LayoutKind, l: usize, l_y: Option<usize>) -> Result<Self> {
        let ly = match kind {
            LayoutKind::Square2d => l_y.unwrap_or(l),
            _ => 1,
        };
        let min = if kind == LayoutKind::Hierarchical { 3 } else { 2 };
        if l < min || (kind == LayoutKind::Square2d && ly < 2) {
            return Err(Error::SizeTooSmall(format!(
                "{kind:?} needs L >= {min}{}; got L = {l}{}",
                if kind == LayoutKind::Square2d { " and L_y >= 2" } else { "" },
                if kind == LayoutKind::Square2d { format!(", L_y = {ly}") } else { String::new() },
            )));
        }
        let mut roles = Vec::new();
        match kind {
            LayoutKind::ChainObc => {
                roles.extend((0..l).map(SlotRole::Site));
                roles.extend((0..l - 1).map(SlotRole::Link));
            }
            LayoutKind::ChainPbc => {
                roles.extend((0..l).map(SlotRole::Site));
                roles.extend((0..l).map(SlotRole::Link));
            }
            LayoutKind::Hierarchical => {
                roles.extend((0..l).map(SlotRole::Top));
                roles.extend((0..l - 1).map(SlotRole::Middle));
                roles.extend((0..l - 2).map(SlotRole::Bottom));
            }
            LayoutKind::Square2d => {
                for y in 0..ly {
                    for x in 0..l {
                        roles.push(SlotRole::Site2d(x, y));
                    }
                }
                for y in 0..ly {
                    for x in 0..l - 1 {
                        roles.push(SlotRole::HLink(x, y));
                    }
                }
                for y in 0..ly - 1 {
                    for x in 0..l {
                        roles.push(SlotRole::VLink(x, y));
                    }
                }
            }
        }
        if roles.len() > MAX_SPINS {
            return Err(Error::UnsupportedLayout(format!("{} spins exceed the {MAX_SPINS}-spin register", roles.len())));
        }
        Ok(LatticeLayout { kind, lx: l, ly, roles })
    }

    pub fn chain_obc(l: usize) -> Result<Self> {
        Self::new(LayoutKind::ChainObc, l, None)
    }

    pub fn chain_pbc(l: usize) -> Result<Self> {
        Self::new(LayoutKind::ChainPbc, l, None)
    }

    pub fn hierarchical(l: usize) -> Result<Self> {
        Self::new(LayoutKind::Hierarchical, l, None)
    }

    pub fn square(lx: usize, ly: usize) -> Result<Self> {
        Self::new(LayoutKind::Square2d, lx, Some(ly))
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    /// `L` (chains, hierarchical) or `L_x` (square lattice).
    pub fn l(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn spec(&self) -> LayoutSpec {
        LayoutSpec { kind: self.kind, l: self.lx, l_y: (self.kind == LayoutKind::Square2d).then_some(self.ly) }
    }

    pub fn total_spins(&self) -> usize {
        self.roles.len()
    }

    /// Dimension of the full Hilbert space, `2^total_spins`.
    pub fn hilbert_dim(&self) -> usize {
        1usize << self.roles.len()
    }

    pub fn role(&self, slot: usize) -> Result<SlotRole> {
        self.roles.get(slot).copied().ok_or(Error::SlotOutOfRange { slot, total: self.roles.len() })
    }

    pub fn roles(&self) -> &[SlotRole] {
        &self.roles
    }

    /// Number of Gauss-law generators: one per matter site (top-layer spin for
    /// the hierarchical ladder).
    pub fn num_sites(&self) -> usize {
        match self.kind {
            LayoutKind::Square2d => self.lx * self.ly,
            _ => self.lx,
        }
    }

    /// Slot of matter site `n` (top-layer `σ_n` for the hierarchical ladder).
    /// For the square lattice `n = y * L_x + x`.
    pub fn site_slot(&self, n: usize) -> Result<usize> {
        if n >= self.num_sites() {
            return Err(Error::InvalidSite { index: n, sites: self.num_sites() });
        }
        Ok(n)
    }

    pub fn site_slots(&self) -> Vec<usize> {
        (0..self.num_sites()).collect()
    }

    /// Slot of chain link `n` (between sites `n` and `n + 1`).
    pub fn link_slot(&self, n: usize) -> Option<usize> {
        match self.kind {
            LayoutKind::ChainObc if n + 1 < self.lx => Some(self.lx + n),
            LayoutKind::ChainPbc if n < self.lx => Some(self.lx + n),
            _ => None,
        }
    }

    /// Slot of the middle-layer spin `τ_{n,n+1}` (hierarchical only).
    pub fn middle_slot(&self, n: usize) -> Option<usize> {
        (self.kind == LayoutKind::Hierarchical && n + 1 < self.lx).then_some(self.lx + n)
    }

    /// Slot of the bottom-layer spin sitting below middle-layer junction `n`,
    /// i.e. the physical `s_{n+1}` for 1-based `n`; valid for `1 <= n <= L - 2`.
    pub fn bottom_slot(&self, n: usize) -> Option<usize> {
        (self.kind == LayoutKind::Hierarchical && n >= 1 && n + 1 < self.lx).then(|| 2 * self.lx - 1 + (n - 1))
    }

    pub fn site2d_slot(&self, x: usize, y: usize) -> Option<usize> {
        (self.kind == LayoutKind::Square2d && x < self.lx && y < self.ly).then_some(y * self.lx + x)
    }

    pub fn hlink_slot(&self, x: usize, y: usize) -> Option<usize> {
        (self.kind == LayoutKind::Square2d && x + 1 < self.lx && y < self.ly).then_some(self.lx * self.ly + y * (self.lx - 1) + x)
    }

    pub fn vlink_slot(&self, x: usize, y: usize) -> Option<usize> {
        (self.kind == LayoutKind::Square2d && x < self.lx && y + 1 < self.ly).then_some(self.lx * self.ly + self.ly * (self.lx - 1) + y * self.lx + x)
    }

    /// The spins the bath couples to: chain links, 2D links, or the bottom
    /// layer of the hierarchical ladder.
    pub fn dissipative_slots(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, SlotRole::Link(_) | SlotRole::Bottom(_) | SlotRole::HLink(..) | SlotRole::VLink(..)))
            .map(|(s, _)| s)
            .collect()
    }

    pub fn check_slot(&self, slot: usize) -> Result<()> {
        if slot < self.roles.len() {
            Ok(())
        } else {
            Err(Error::SlotOutOfRange { slot, total: self.roles.len() })
        }
    }

    /// Renders a state as `sites|links` using `•`/`◦` for sites and `↑`/`↓`
    /// for everything else, in slot order.
    pub fn describe(&self, state: BasisState) -> String {
        let mut out = String::new();
        for (slot, role) in self.roles.iter().enumerate() {
            let up = is_up(state, slot);
            let matter = matches!(role, SlotRole::Site(_) | SlotRole::Site2d(..));
            if slot > 0 && matter != matches!(self.roles[slot - 1], SlotRole::Site(_) | SlotRole::Site2d(..)) {
                out.push('|');
            }
            out.push(match (matter, up) {
                (true, true) => '•',
                (true, false) => '◦',
                (false, true) => '↑',
                (false, false) => '↓',
            });
        }
        out
    }
}
