//! Dense eigensolvers, kernel extraction, spectral comparison and time
//! integration.
//!
//! One eigendecomposition runs on a single LAPACK call; independent blocks
//! and flux values are distributed over [`Exec`](crate::exec::Exec).

pub mod compare;
pub mod eig;
pub mod evolve;
pub mod winding;

pub use compare::{
    conjugation_asymmetry, convex_hull, degeneracy_bins, hausdorff, hull_distance, hull_excess, multiset_distance, DegeneracyBin, MatchMethod,
    MultisetDistance, BOTTLENECK_LIMIT, DEGENERACY_RADIUS,
};
pub use eig::{
    eig_blocks, eig_dense, kernel_dimension_svd, min_eigenvalue, sort_canonical, steady_states, KernelState, Spectrum, SpectrumDiagnostics,
    DENSE_CAP, KERNEL_TOL,
};
pub use evolve::{evolve, fidelity, DiagonalObservable, EvolveOptions, StateSeries};
pub use winding::{phi_grid, summarize, winding_scan, WindingPoint, WindingSummary};

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Pins OpenBLAS to one thread. Parallelism lives in [`Exec`](crate::exec::Exec)
/// across blocks, and a threaded BLAS would make reductions order-dependent.
pub(crate) fn single_threaded_blas() {
    static PIN: std::sync::Once = std::sync::Once::new();
    // SAFETY: plain setter with no preconditions, called once before any dense call.
    PIN.call_once(|| unsafe { openblas_set_num_threads(1) });
}
