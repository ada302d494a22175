//! Structural checks on assembled and matrix-free superoperators.

use num_complex::Complex64 as C64;

use super::{assemble, LindbladForm, Superoperator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lattice::{BasisState, LatticeLayout};
use crate::sparse::{BasisTag, CsrMatrix, SparseOperator};
use crate::symmetry::{ChargeForm, DoubleSectorBasis};

/// `max_j |Σ_a L_{(a,a), j}|`, i.e. the sup-norm of `L† vec(I)`.
pub fn trace_functional_defect(m: &Superoperator, basis: &DoubleSectorBasis) -> f64 {
    let mut w = vec![C64::new(0.0, 0.0); m.dim()];
    for (row, _) in basis.diagonal_positions() {
        for (col, v) in m.matrix().row(row) {
            w[col] += v;
        }
    }
    w.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Hermiticity defect of `L[ρ]` for a Hermitian `ρ`.
pub fn hermiticity_preservation_defect(form: &LindbladForm, rho: &SparseOperator) -> Result<f64> {
    if rho.hermiticity_defect() > 0.0 {
        return Err(Error::InvalidParameter("input operator is not Hermitian".into()));
    }
    Ok(form.apply(rho)?.hermiticity_defect())
}

/// `max |[𝒢, L]|` entrywise, where `𝒢` acts on pairs as `G(a) - G(b)`.
pub fn weak_symmetry_defect(m: &Superoperator, basis: &DoubleSectorBasis, generator: &ChargeForm) -> f64 {
    let g = |i: usize| {
        let (a, b) = basis.pairs()[i];
        (generator.eval2(a) - generator.eval2(b)) as f64 / 2.0
    };
    m.matrix().triplets().map(|(r, c, v)| ((g(r) - g(c)) * v).norm()).fold(0.0, f64::max)
}

/// `max |t_r / t_c · A_{rc} - B_{rc}|` over all entries of either matrix.
pub fn conjugation_defect(a: &CsrMatrix, b: &CsrMatrix, t: &[f64]) -> Result<f64> {
    let scaled: Vec<(usize, usize, C64)> = a.triplets().map(|(r, c, v)| (r, c, v * (t[r] / t[c]))).collect();
    let sa = CsrMatrix::from_triplets(a.nrows(), a.ncols(), scaled, 0.0);
    Ok(sa.add(&b.scale(C64::new(-1.0, 0.0)))?.max_abs())
}

/// Relative defect of `𝒯 L_D 𝒯⁻¹ = L_D†` with `𝒯[ρ] = T ρ` and
/// `T = diag(exp(log_t(a)))`, on the full double space.
pub fn detailed_balance_defect(layout: &LatticeLayout, jumps: &[SparseOperator], log_t: impl Fn(BasisState) -> f64, exec: Exec) -> Result<f64> {
    let basis = DoubleSectorBasis::full(layout);
    let tag = BasisTag::Full { spins: layout.total_spins() };
    let zero = SparseOperator::zero(tag);
    let ld = assemble(&LindbladForm::lindblad(&zero, jumps)?, &basis, None, exec)?;
    let ld_adj = assemble(&LindbladForm::dissipator_adjoint(tag, jumps)?, &basis, None, exec)?;
    let t: Vec<f64> = basis.pairs().iter().map(|&(a, _)| log_t(a).exp()).collect();
    Ok(conjugation_defect(ld.matrix(), ld_adj.matrix(), &t)? / ld.matrix().max_abs().max(f64::MIN_POSITIVE))
}
