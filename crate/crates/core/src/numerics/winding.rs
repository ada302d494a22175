//! Spectra under a twisted boundary phase.

use serde::Serialize;

use super::eig::{eig_dense, Spectrum};
use crate::error::Result;
use crate::exec::Exec;
use crate::lattice::LatticeLayout;
use crate::liouvillian::{assemble_twisted, TwistVariant};
use crate::models::ModelSpec;
use crate::symmetry::DoubleSectorBasis;

#[derive(Clone, Debug)]
pub struct WindingPoint {
    pub phi: f64,
    pub spectrum: Spectrum,
}

#[derive(Clone, Debug, Serialize)]
pub struct WindingSummary {
    pub phi: f64,
    /// Multiset distance to the `φ = 0` spectrum.
    pub distance_to_first: f64,
    pub hausdorff_to_first: f64,
}

/// `φ_k = 2π k / steps` for `k = 0..=steps`.
pub fn phi_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| 2.0 * std::f64::consts::PI * k as f64 / steps as f64).collect()
}

/// One dense spectrum per flux value, computed concurrently.
pub fn winding_scan(
    spec: &ModelSpec,
    layout: &LatticeLayout,
    phis: &[f64],
    variant: TwistVariant,
    basis: &DoubleSectorBasis,
    cap: usize,
    exec: Exec,
) -> Result<Vec<WindingPoint>> {
    exec.try_map(phis, |&phi| {
        let m = assemble_twisted(spec, layout, phi, variant, basis, Exec::Sequential)?;
        Ok(WindingPoint { phi, spectrum: eig_dense(m.matrix(), false, cap)? })
    })
}

/// Distances of each scan point to the first one.
pub fn summarize(points: &[WindingPoint]) -> Result<Vec<WindingSummary>> {
    let Some(first) = points.first() else { return Ok(vec![]) };
    points
        .iter()
        .map(|p| {
            Ok(WindingSummary {
                phi: p.phi,
                distance_to_first: super::compare::multiset_distance(&p.spectrum.eigenvalues, &first.spectrum.eigenvalues)?.distance,
                hausdorff_to_first: super::compare::hausdorff(&p.spectrum.eigenvalues, &first.spectrum.eigenvalues),
            })
        })
        .collect()
}
