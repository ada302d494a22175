//! Dense eigendecomposition of superoperator blocks and kernel extraction.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigVals, EigValsh, SVD, UPLO};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::liouvillian::{devectorize, Superoperator};
use crate::sparse::{CsrMatrix, SparseOperator};
use crate::symmetry::DoubleSectorBasis;

/// Default dimension cap for dense diagonalization.
pub const DENSE_CAP: usize = 6000;

/// Eigenvalues with `|λ|` below this are counted as kernel.
pub const KERNEL_TOL: f64 = 1e-9;

/// Eigenvalues (sorted by real part descending, then imaginary part
/// ascending) with optional right eigenvectors as matching columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    pub vectors: Option<Array2<C64>>,
    pub diagnostics: SpectrumDiagnostics,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SpectrumDiagnostics {
    pub dimension: usize,
    /// `max ‖M v - λ v‖ / ‖v‖`, when vectors were computed.
    pub residual_max: Option<f64>,
    pub blocks: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Concatenates eigenvalues of several blocks; vectors are dropped.
    pub fn merge(parts: Vec<Spectrum>) -> Spectrum {
        let blocks = parts.iter().map(|p| p.diagnostics.blocks.max(1)).sum();
        let residual_max = parts.iter().map(|p| p.diagnostics.residual_max).try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)));
        let mut eigenvalues: Vec<C64> = parts.into_iter().flat_map(|p| p.eigenvalues).collect();
        sort_canonical(&mut eigenvalues);
        let dimension = eigenvalues.len();
        Spectrum { eigenvalues, vectors: None, diagnostics: SpectrumDiagnostics { dimension, residual_max, blocks } }
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of eigenvalues within `radius` of `target`.
    pub fn count_near(&self, target: C64, radius: f64) -> usize {
        self.eigenvalues.iter().filter(|z| (*z - target).norm() < radius).count()
    }
}

fn canonical_cmp(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im))
}

pub fn sort_canonical(z: &mut [C64]) {
    z.sort_by(canonical_cmp);
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::OverDenseCap { dim: n, cap })
    } else {
        Ok(())
    }
}

/// Full spectrum of a general complex matrix (LAPACK `zgeev`).
pub fn eig_dense(m: &CsrMatrix, vectors: bool, cap: usize) -> Result<Spectrum> {
    super::single_threaded_blas();
    let n = m.nrows();
    check_cap(n, cap)?;
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![], vectors: None, diagnostics: SpectrumDiagnostics::default() });
    }
    let dense = m.to_dense();
    if !vectors {
        let vals = dense.eigvals().map_err(|e| Error::Solver(e.to_string()))?;
        let mut eigenvalues = vals.to_vec();
        sort_canonical(&mut eigenvalues);
        return Ok(Spectrum { eigenvalues, vectors: None, diagnostics: SpectrumDiagnostics { dimension: n, residual_max: None, blocks: 1 } });
    }
    let (vals, vecs) = dense.eig().map_err(|e| Error::Solver(e.to_string()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| canonical_cmp(&vals[i], &vals[j]));
    let eigenvalues: Vec<C64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted = Array2::<C64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        sorted.column_mut(new).assign(&vecs.column(old));
    }
    let mut residual_max = 0.0f64;
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        let v: Vec<C64> = sorted.column(k).to_vec();
        let mv = m.matvec(&v);
        let num: f64 = mv.iter().zip(&v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        residual_max = residual_max.max(num / den);
    }
    Ok(Spectrum {
        eigenvalues,
        vectors: Some(sorted),
        diagnostics: SpectrumDiagnostics { dimension: n, residual_max: Some(residual_max), blocks: 1 },
    })
}

/// Spectra of independent blocks, diagonalized concurrently and merged.
pub fn eig_blocks(blocks: &[Superoperator], cap: usize, exec: Exec) -> Result<Spectrum> {
    let parts = exec.try_map(blocks, |b| eig_dense(b.matrix(), false, cap))?;
    Ok(Spectrum::merge(parts))
}

/// Number of singular values below `tol · σ_max` (LAPACK SVD).
pub fn kernel_dimension_svd(m: &CsrMatrix, tol: f64, cap: usize) -> Result<usize> {
    super::single_threaded_blas();
    check_cap(m.nrows(), cap)?;
    let (_, s, _) = m.to_dense().svd(false, false).map_err(|e| Error::Solver(e.to_string()))?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    Ok(s.iter().filter(|&&x| x <= tol * smax.max(1.0)).count())
}

/// A numerically extracted kernel element.
#[derive(Clone, Debug)]
pub struct KernelState {
    pub rho: SparseOperator,
    pub eigenvalue: C64,
    /// Trace before normalization (zero traces are left unnormalized).
    pub raw_trace: C64,
    /// Lowest eigenvalue of the Hermitized state, per block.
    pub min_eigenvalue: f64,
}

/// Modified Gram-Schmidt; keeps the input index of every retained vector.
fn orthonormalize(cols: Vec<Vec<C64>>) -> Vec<(usize, Vec<C64>)> {
    let mut out: Vec<(usize, Vec<C64>)> = Vec::new();
    for (i, mut v) in cols.into_iter().enumerate() {
        for (_, q) in &out {
            let overlap: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= overlap * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push((i, v.into_iter().map(|x| x / norm).collect()));
        }
    }
    out
}

/// Smallest eigenvalue of a Hermitian operator stored on a double sector,
/// computed block by block.
pub fn min_eigenvalue(rho: &SparseOperator, basis: &DoubleSectorBasis) -> Result<f64> {
    super::single_threaded_blas();
    let mut worst = f64::INFINITY;
    for b in basis.blocks() {
        if b.ket_gauge2 != b.bra_gauge2 {
            continue;
        }
        let pairs = &basis.pairs()[b.start..b.start + b.len];
        let mut kets: Vec<u64> = pairs.iter().flat_map(|&(a, c)| [a, c]).collect();
        kets.sort_unstable();
        kets.dedup();
        let d = kets.len();
        let mut dense = Array2::<C64>::zeros((d, d));
        for (i, &a) in kets.iter().enumerate() {
            for (j, &c) in kets.iter().enumerate() {
                dense[[i, j]] = rho.get(a as usize, c as usize);
            }
        }
        let ev: Array1<f64> = dense.eigvalsh(UPLO::Lower).map_err(|e| Error::Solver(e.to_string()))?;
        worst = worst.min(ev.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(worst)
}

/// Kernel of an assembled block: eigenvectors with `|λ| < KERNEL_TOL`,
/// orthonormalized, devectorized, Hermitized when the sector is closed under
/// `(a, b) -> (b, a)`, and trace-normalized when the trace is nonzero.
pub fn steady_states(m: &Superoperator, basis: &DoubleSectorBasis, cap: usize) -> Result<Vec<KernelState>> {
    let spec = eig_dense(m.matrix(), true, cap)?;
    let vecs = spec.vectors.as_ref().expect("requested vectors");
    let kernel: Vec<usize> = (0..spec.len()).filter(|&k| spec.eigenvalues[k].norm() < KERNEL_TOL).collect();
    if kernel.is_empty() {
        let gap = spec.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        return Err(Error::EmptyKernel(gap));
    }
    let cols = kernel.iter().map(|&k| vecs.column(k).to_vec()).collect();
    let symmetric = basis.pairs().iter().all(|&(a, b)| basis.index_of(b, a).is_some());
    let mut out = Vec::new();
    for (i, v) in orthonormalize(cols) {
        let k = kernel[i];
        let mut rho = devectorize(&v, basis)?;
        if symmetric {
            rho = rho.add(&rho.adjoint())?.scale_re(0.5);
        }
        let raw_trace = rho.trace();
        if raw_trace.norm() > 1e-12 * rho.frobenius_norm() {
            rho = rho.scale(1.0 / raw_trace);
        }
        let min_eigenvalue = if symmetric { min_eigenvalue(&rho, basis)? } else { f64::NAN };
        out.push(KernelState { rho, eigenvalue: spec.eigenvalues[k], raw_trace, min_eigenvalue });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_matrix_eigenvalues_are_its_diagonal() {
        let t = vec![
            (0, 0, C64::new(1.0, 2.0)),
            (0, 1, C64::new(3.0, 0.0)),
            (0, 2, C64::new(0.5, -1.0)),
            (1, 1, C64::new(-2.0, 0.5)),
            (1, 2, C64::new(4.0, 4.0)),
            (2, 2, C64::new(0.25, 0.0)),
        ];
        let m = CsrMatrix::from_triplets(3, 3, t, 0.0);
        let s = eig_dense(&m, true, DENSE_CAP).unwrap();
        let expect = [C64::new(1.0, 2.0), C64::new(0.25, 0.0), C64::new(-2.0, 0.5)];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(s.diagnostics.residual_max.unwrap() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let m = CsrMatrix::identity(10);
        assert!(matches!(eig_dense(&m, false, 5), Err(Error::OverDenseCap { dim: 10, cap: 5 })));
    }

    #[test]
    fn svd_kernel_count() {
        let m = CsrMatrix::from_diagonal(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(kernel_dimension_svd(&m, 1e-12, DENSE_CAP).unwrap(), 2);
    }
}
