//! Superoperators on vectorized density matrices.
//!
//! Convention: `A ρ B ↦ (A ⊗ Bᵀ) vec(ρ)`, with `vec(|i⟩⟨j|)` the pair `(i, j)`.
//! On the unconstrained double space the pair `(i, j)` sits at `i * d + j`;
//! on a double sector it sits at its position in the sector's pair list.
//!
//! Every Liouvillian is stored in the sandwich form
//! `L[ρ] = A ρ + ρ B + Σ_k c_k X_k ρ Y_k`, which covers the Lindblad
//! generator (`A = -iH - K`, `B = iH - K`, `K = Σ L†L`, sandwiches
//! `2 L ρ L†`), its adjoint, and the double-space twisted construction.

mod checks;
mod twist;

pub use checks::{conjugation_defect, detailed_balance_defect, hermiticity_preservation_defect, trace_functional_defect, weak_symmetry_defect};
pub use twist::{assemble_twisted, twisted_form, TwistVariant};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{BasisState, LatticeLayout};
use crate::models::{build_hamiltonian, build_jump_set, Jump, ModelSpec};
use crate::sparse::{BasisTag, CsrMatrix, SparseOperator};
use crate::symmetry::{DoubleSectorBasis, DEFAULT_LEAKAGE_TOL};

/// Human-readable statement of the vectorization convention.
pub const CONVENTION: &str = "A rho B -> (A kron B^T) vec(rho); vec(|i><j|) = pair (i, j), ket index major";

/// Double-space dimension above which callers should prefer matrix-free
/// application over assembly.
pub const ASSEMBLY_LIMIT: usize = 200_000;

/// `c · X ρ Y`.
#[derive(Clone, Debug)]
pub struct Sandwich {
    pub left: SparseOperator,
    pub right: SparseOperator,
    pub coeff: C64,
}

/// `L[ρ] = A ρ + ρ B + Σ c X ρ Y` on full-register operators.
#[derive(Clone, Debug)]
pub struct LindbladForm {
    pub ket: SparseOperator,
    pub bra: SparseOperator,
    pub sandwiches: Vec<Sandwich>,
}

fn i_times(op: &SparseOperator, sign: f64) -> SparseOperator {
    op.scale(C64::new(0.0, sign))
}

fn decay_operator(basis: BasisTag, jumps: &[SparseOperator]) -> Result<SparseOperator> {
    let mut k = SparseOperator::zero(basis);
    for l in jumps {
        k = k.add(&l.adjoint().mul(l)?)?;
    }
    Ok(k)
}

impl LindbladForm {
    /// `-i[H, ρ] + Σ (2 L ρ L† - {L†L, ρ})`.
    pub fn lindblad(h: &SparseOperator, jumps: &[SparseOperator]) -> Result<Self> {
        let k = decay_operator(h.basis(), jumps)?;
        let ket = i_times(h, -1.0).sub(&k)?;
        let bra = i_times(h, 1.0).sub(&k)?;
        let sandwiches = jumps.iter().map(|l| Sandwich { left: l.clone(), right: l.adjoint(), coeff: C64::new(2.0, 0.0) }).collect();
        Ok(LindbladForm { ket, bra, sandwiches })
    }

    /// The Heisenberg-picture dissipator `Σ (2 L† ρ L - {L†L, ρ})`.
    pub fn dissipator_adjoint(basis: BasisTag, jumps: &[SparseOperator]) -> Result<Self> {
        let k = decay_operator(basis, jumps)?;
        let sandwiches = jumps.iter().map(|l| Sandwich { left: l.adjoint(), right: l.clone(), coeff: C64::new(2.0, 0.0) }).collect();
        Ok(LindbladForm { ket: k.scale_re(-1.0), bra: k.scale_re(-1.0), sandwiches })
    }

    pub fn from_model(spec: &ModelSpec, layout: &LatticeLayout, exec: Exec) -> Result<Self> {
        let h = build_hamiltonian(spec, layout, exec)?;
        let jumps: Vec<SparseOperator> = build_jump_set(spec, layout, exec)?.into_iter().map(|j: Jump| j.op).collect();
        Self::lindblad(&h, &jumps)
    }

    pub fn basis(&self) -> BasisTag {
        self.ket.basis()
    }

    /// Matrix-free application to an operator.
    pub fn apply(&self, rho: &SparseOperator) -> Result<SparseOperator> {
        let mut out = self.ket.mul(rho)?.add(&rho.mul(&self.bra)?)?;
        for s in &self.sandwiches {
            out = out.add(&s.left.mul(rho)?.mul(&s.right)?.scale(s.coeff))?;
        }
        Ok(out)
    }

    /// Matrix-free application to a vector on a double sector.
    pub fn apply_vec(&self, basis: &DoubleSectorBasis, v: &[C64]) -> Result<Vec<C64>> {
        let rho = devectorize(v, basis)?;
        Ok(vectorize(&self.apply(&rho)?, basis)?.data)
    }

    /// `‖L[ρ] - λρ‖_F / ‖ρ‖_F`.
    pub fn relative_residual(&self, rho: &SparseOperator, lambda: C64) -> Result<f64> {
        let r = self.apply(rho)?.sub(&rho.scale(lambda))?;
        Ok(r.frobenius_norm() / rho.frobenius_norm())
    }
}

/// A vectorized operator with its diagnostics.
#[derive(Clone, Debug)]
pub struct VectorizedState {
    pub data: Vec<C64>,
    pub trace: C64,
    pub hermiticity_defect: f64,
}

fn trace_of(v: &[C64], basis: &DoubleSectorBasis) -> C64 {
    basis.diagonal_positions().iter().map(|&(i, _)| v[i]).sum()
}

fn hermiticity_of(v: &[C64], basis: &DoubleSectorBasis) -> f64 {
    let mut worst = 0.0f64;
    for (i, &(a, b)) in basis.pairs().iter().enumerate() {
        let partner = basis.index_of(b, a).map_or(C64::new(0.0, 0.0), |j| v[j]);
        worst = worst.max((v[i] - partner.conj()).norm());
    }
    worst
}

/// Vectorizes `ρ` onto a double sector. Entries outside the sector must
/// vanish (up to the leakage tolerance relative to `‖ρ‖_F`).
pub fn vectorize(rho: &SparseOperator, basis: &DoubleSectorBasis) -> Result<VectorizedState> {
    check_spins(rho, basis)?;
    let mut data = vec![C64::new(0.0, 0.0); basis.dim()];
    let mut leak = 0.0;
    for (r, c, v) in rho.matrix().triplets() {
        match basis.index_of(r as BasisState, c as BasisState) {
            Some(i) => data[i] = v,
            None => leak += v.norm_sqr(),
        }
    }
    let tol = DEFAULT_LEAKAGE_TOL * rho.frobenius_norm().max(1.0);
    if leak.sqrt() > tol {
        return Err(Error::Leakage { norm: leak.sqrt(), tolerance: tol });
    }
    let trace = trace_of(&data, basis);
    let hermiticity_defect = hermiticity_of(&data, basis);
    Ok(VectorizedState { data, trace, hermiticity_defect })
}

pub fn devectorize(v: &[C64], basis: &DoubleSectorBasis) -> Result<SparseOperator> {
    if v.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!("vector of length {} on a {}-pair basis", v.len(), basis.dim())));
    }
    let d = 1usize << basis.spins();
    let triplets = basis.pairs().iter().zip(v).map(|(&(a, b), &x)| (a as usize, b as usize, x)).collect();
    SparseOperator::new(BasisTag::Full { spins: basis.spins() }, CsrMatrix::from_triplets(d, d, triplets, 0.0))
}

fn check_spins(rho: &SparseOperator, basis: &DoubleSectorBasis) -> Result<()> {
    match rho.basis() {
        BasisTag::Full { spins } if spins == basis.spins() => Ok(()),
        other => Err(Error::BasisMismatch(format!("{other:?} operator on a {}-spin double basis", basis.spins()))),
    }
}

/// An assembled superoperator on a double sector.
#[derive(Clone, Debug)]
pub struct Superoperator {
    matrix: CsrMatrix,
    fingerprint: u64,
    spins: usize,
    blocks: usize,
    leakage: f64,
}

/// JSON-exportable superoperator description.
#[derive(Clone, Debug, Serialize)]
pub struct SuperoperatorMeta {
    pub dimension: usize,
    pub nnz: usize,
    pub convention: &'static str,
    pub spins: usize,
    pub basis_fingerprint: String,
    pub pair_blocks: usize,
    pub leakage: f64,
}

impl Superoperator {
    /// Wraps an explicit matrix acting on `basis`.
    pub fn from_matrix(matrix: CsrMatrix, basis: &DoubleSectorBasis) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a double basis of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim()
            )));
        }
        Ok(Superoperator { matrix, fingerprint: basis.fingerprint(), spins: basis.spins(), blocks: basis.blocks().len(), leakage: 0.0 })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Norm of the discarded out-of-sector part.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector of length {} for dimension {}", v.len(), self.dim())));
        }
        Ok(self.matrix.matvec(v))
    }

    pub fn metadata(&self) -> SuperoperatorMeta {
        SuperoperatorMeta {
            dimension: self.dim(),
            nnz: self.nnz(),
            convention: CONVENTION,
            spins: self.spins,
            basis_fingerprint: format!("{:016x}", self.fingerprint),
            pair_blocks: self.blocks,
            leakage: self.leakage,
        }
    }
}

/// Assembles the form on a double sector. With `leakage_tol` set, any
/// coupling out of the sector larger than the tolerance is an error;
/// otherwise out-of-sector entries are dropped.
pub fn assemble(form: &LindbladForm, basis: &DoubleSectorBasis, leakage_tol: Option<f64>, exec: Exec) -> Result<Superoperator> {
    if form.basis() != (BasisTag::Full { spins: basis.spins() }) {
        return Err(Error::BasisMismatch(format!("{:?} form on a {}-spin double basis", form.basis(), basis.spins())));
    }
    // columns of A and X are rows of their transposes
    let ket_t = form.ket.matrix().transpose();
    let bra = form.bra.matrix();
    let sandwiches: Vec<(CsrMatrix, &CsrMatrix, C64)> =
        form.sandwiches.iter().map(|s| (s.left.matrix().transpose(), s.right.matrix(), s.coeff)).collect();
    let n = basis.dim();
    let chunk = 256;
    let parts = exec.map_range(n.div_ceil(chunk), |k| {
        let mut triplets = Vec::new();
        let mut leak = 0.0;
        let mut push =
            |a: usize, b: usize, col: usize, v: C64, t: &mut Vec<(usize, usize, C64)>| match basis.index_of(a as BasisState, b as BasisState) {
                Some(row) => t.push((row, col, v)),
                None => leak += v.norm_sqr(),
            };
        for col in (k * chunk)..((k + 1) * chunk).min(n) {
            let (a, b) = basis.pairs()[col];
            let (a, b) = (a as usize, b as usize);
            for (a2, v) in ket_t.row(a) {
                push(a2, b, col, v, &mut triplets);
            }
            for (b2, v) in bra.row(b) {
                push(a, b2, col, v, &mut triplets);
            }
            for (xt, y, c) in &sandwiches {
                for (a2, x) in xt.row(a) {
                    for (b2, yv) in y.row(b) {
                        push(a2, b2, col, c * x * yv, &mut triplets);
                    }
                }
            }
        }
        (triplets, leak)
    });
    let mut triplets = Vec::new();
    let mut leak = 0.0;
    for (t, l) in parts {
        triplets.extend(t);
        leak += l;
    }
    let leakage = leak.sqrt();
    if let Some(tol) = leakage_tol {
        if leakage > tol {
            return Err(Error::Leakage { norm: leakage, tolerance: tol });
        }
    }
    Ok(Superoperator {
        matrix: CsrMatrix::from_triplets(n, n, triplets, 0.0),
        fingerprint: basis.fingerprint(),
        spins: basis.spins(),
        blocks: basis.blocks().len(),
        leakage,
    })
}

/// Builds and assembles a model on a double sector with the default leakage
/// check.
pub fn assemble_model(spec: &ModelSpec, layout: &LatticeLayout, basis: &DoubleSectorBasis, exec: Exec) -> Result<Superoperator> {
    let form = LindbladForm::from_model(spec, layout, exec)?;
    assemble(&form, basis, Some(DEFAULT_LEAKAGE_TOL), exec)
}
