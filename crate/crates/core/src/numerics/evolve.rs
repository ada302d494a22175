//! Adaptive Dormand-Prince 5(4) integration of `dv/dt = M v`.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::eig::min_eigenvalue;
use crate::error::{Error, Result};
use crate::lattice::BasisState;
use crate::liouvillian::{devectorize, Superoperator};
use crate::sparse::{CsrMatrix, SparseOperator};
use crate::symmetry::DoubleSectorBasis;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvolveOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Initial step; chosen from `‖M v‖` when absent.
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// Record the lowest eigenvalue of `ρ(t)` at every grid point.
    pub check_positivity: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { atol: 1e-9, rtol: 1e-9, h0: None, max_steps: 50_000_000, check_positivity: true }
    }
}

/// `tr(O ρ)` for an operator diagonal in the computational basis, stored as
/// its values on the basis diagonal.
#[derive(Clone, Debug)]
pub struct DiagonalObservable {
    pub name: String,
    entries: Vec<(usize, f64)>,
}

impl DiagonalObservable {
    pub fn from_fn(name: impl Into<String>, basis: &DoubleSectorBasis, f: impl Fn(BasisState) -> f64) -> Self {
        let entries = basis.diagonal_positions().into_iter().map(|(i, s)| (i, f(s))).filter(|&(_, v)| v != 0.0).collect();
        DiagonalObservable { name: name.into(), entries }
    }

    pub fn trace(basis: &DoubleSectorBasis) -> Self {
        Self::from_fn("trace", basis, |_| 1.0)
    }

    pub fn value(&self, v: &[C64]) -> C64 {
        self.entries.iter().map(|&(i, w)| v[i] * w).sum()
    }
}

/// Observables on a time grid; `values[k][j]` is observable `j` at `times[k]`.
#[derive(Clone, Debug, Serialize)]
pub struct StateSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// `|tr ρ(t) - tr ρ(0)|`.
    pub trace_defect: Vec<f64>,
    /// `max(0, -λ_min(ρ(t)))`, NaN when not checked.
    pub positivity_defect: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl StateSeries {
    pub fn max_trace_defect(&self) -> f64 {
        self.trace_defect.iter().copied().fold(0.0, f64::max)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

// Dormand-Prince tableau; the generator is autonomous, so the nodes c_i
// never enter
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri<'a> {
    m: &'a CsrMatrix,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
}

impl<'a> Dopri<'a> {
    fn new(m: &'a CsrMatrix) -> Self {
        let n = m.nrows();
        let z = vec![C64::new(0.0, 0.0); n];
        Dopri { m, k: std::array::from_fn(|_| z.clone()), tmp: z.clone(), y_new: z }
    }

    fn combine(&mut self, y: &[C64], h: f64, coeffs: &[(usize, f64)]) {
        for (i, t) in self.tmp.iter_mut().enumerate() {
            let mut acc = y[i];
            for &(s, a) in coeffs {
                acc += self.k[s][i] * (h * a);
            }
            *t = acc;
        }
    }

    /// One trial step from `y` (with `k[0] = M y`); returns the scaled error
    /// norm and leaves the candidate in `y_new` and `M y_new` in `k[6]`.
    fn trial(&mut self, y: &[C64], h: f64, atol: f64, rtol: f64) -> f64 {
        let stages: [&[(usize, f64)]; 5] = [
            &[(0, A21)],
            &[(0, A31), (1, A32)],
            &[(0, A41), (1, A42), (2, A43)],
            &[(0, A51), (1, A52), (2, A53), (3, A54)],
            &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
        ];
        for (s, coeffs) in stages.iter().enumerate() {
            self.combine(y, h, coeffs);
            let (_, tail) = self.k.split_at_mut(s + 1);
            self.m.matvec_into(&self.tmp, &mut tail[0]);
        }
        for i in 0..y.len() {
            let k = &self.k;
            self.y_new[i] = y[i] + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
        }
        let (_, tail) = self.k.split_at_mut(6);
        self.m.matvec_into(&self.y_new, &mut tail[0]);
        let k = &self.k;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let err = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let scale = atol + rtol * y[i].norm().max(self.y_new[i].norm());
            acc += (err.norm() / scale).powi(2);
        }
        (acc / y.len() as f64).sqrt()
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Integrates `dv/dt = M v` from `times[0]` through every grid point, landing
/// on each exactly. Returns the series and the final vector.
pub fn evolve(
    m: &Superoperator,
    basis: &DoubleSectorBasis,
    v0: &[C64],
    times: &[f64],
    observables: &[DiagonalObservable],
    opts: &EvolveOptions,
) -> Result<(StateSeries, Vec<C64>)> {
    if v0.len() != m.dim() || basis.dim() != m.dim() {
        return Err(Error::DimensionMismatch(format!("state {} vs superoperator {}", v0.len(), m.dim())));
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be nonempty and strictly increasing".into()));
    }
    let trace = DiagonalObservable::trace(basis);
    let tr0 = trace.value(v0);
    let mut series = StateSeries {
        times: times.to_vec(),
        names: observables.iter().map(|o| o.name.clone()).collect(),
        values: Vec::with_capacity(times.len()),
        trace_defect: Vec::with_capacity(times.len()),
        positivity_defect: Vec::with_capacity(times.len()),
        steps_accepted: 0,
        steps_rejected: 0,
    };
    let record = |series: &mut StateSeries, v: &[C64]| -> Result<()> {
        series.values.push(observables.iter().map(|o| o.value(v).re).collect());
        series.trace_defect.push((trace.value(v) - tr0).norm());
        let pos = if opts.check_positivity {
            let rho = devectorize(v, basis)?;
            (-min_eigenvalue(&rho, basis)?).max(0.0)
        } else {
            f64::NAN
        };
        series.positivity_defect.push(pos);
        Ok(())
    };

    let mut y = v0.to_vec();
    let mut t = times[0];
    record(&mut series, &y)?;
    let mut stepper = Dopri::new(m.matrix());
    m.matrix().matvec_into(&y, &mut stepper.k[0]);
    let mut h = opts.h0.unwrap_or_else(|| {
        let ratio = norm(&stepper.k[0]) / norm(&y).max(f64::MIN_POSITIVE);
        if ratio > 0.0 {
            0.01 / ratio
        } else {
            times[times.len() - 1] - times[0]
        }
    });
    let mut steps = 0usize;
    for &target in &times[1..] {
        while t < target {
            let remaining = target - t;
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !landing {
                return Err(Error::StepUnderflow { t });
            }
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Tolerance(format!("more than {} steps before t = {target}", opts.max_steps)));
            }
            let err = stepper.trial(&y, step, opts.atol, opts.rtol);
            if !err.is_finite() {
                return Err(Error::Tolerance(format!("non-finite error estimate at t = {t}")));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                std::mem::swap(&mut y, &mut stepper.y_new);
                stepper.k.swap(0, 6); // FSAL
                t = if landing { target } else { t + step };
                series.steps_accepted += 1;
                if !landing || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                series.steps_rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        record(&mut series, &y)?;
    }
    Ok((series, y))
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²` between two Hermitian PSD operators,
/// evaluated densely on the union of their supports.
pub fn fidelity(rho: &SparseOperator, sigma: &SparseOperator) -> Result<f64> {
    super::single_threaded_blas();
    let mut support: Vec<usize> = rho.matrix().triplets().chain(sigma.matrix().triplets()).flat_map(|(r, c, _)| [r, c]).collect();
    support.sort_unstable();
    support.dedup();
    let d = support.len();
    let dense = |op: &SparseOperator| Array2::from_shape_fn((d, d), |(i, j)| op.get(support[i], support[j]));
    let sqrt_psd = |a: &Array2<C64>| -> Result<Array2<C64>> {
        let (w, v) = a.eigh(UPLO::Lower).map_err(|e| Error::Solver(e.to_string()))?;
        let mut vs = v.clone();
        for (j, &x) in w.iter().enumerate() {
            let s = x.max(0.0).sqrt();
            vs.column_mut(j).mapv_inplace(|z| z * s);
        }
        Ok(vs.dot(&v.t().mapv(|z| z.conj())))
    };
    let sr = sqrt_psd(&dense(rho))?;
    let inner = sr.dot(&dense(sigma)).dot(&sr);
    let inner = (&inner + &inner.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let (w, _) = inner.eigh(UPLO::Lower).map_err(|e| Error::Solver(e.to_string()))?;
    let root: f64 = w.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok(root * root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::BasisTag;

    fn one_spin_decay() -> (Superoperator, DoubleSectorBasis) {
        // dv/dt = diag(-1, -2, -3, 0) v on the single-spin pair basis
        let basis = DoubleSectorBasis::from_pairs(1, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let diag = [C64::new(-1.0, 0.0), C64::new(-2.0, 1.0), C64::new(-3.0, -1.0), C64::new(0.0, 0.0)];
        let m = Superoperator::from_matrix(CsrMatrix::from_diagonal(&diag), &basis).unwrap();
        (m, basis)
    }

    #[test]
    fn diagonal_generator_matches_exponentials() {
        let (m, basis) = one_spin_decay();
        let v0 = vec![C64::new(1.0, 0.0); 4];
        let times: Vec<f64> = (0..6).map(|k| k as f64 * 0.7).collect();
        let obs = [DiagonalObservable::from_fn("p0", &basis, |s| if s == 0 { 1.0 } else { 0.0 })];
        let opts = EvolveOptions { check_positivity: false, ..Default::default() };
        let (series, y) = evolve(&m, &basis, &v0, &times, &obs, &opts).unwrap();
        for (t, row) in times.iter().zip(&series.values) {
            assert!((row[0] - (-t).exp()).abs() < 1e-8);
        }
        let t = times[5];
        assert!((y[1] - (C64::new(-2.0, 1.0) * t).exp()).norm() < 1e-8);
        assert!(series.steps_accepted > 0);
    }

    #[test]
    fn bad_grid_rejected() {
        let (m, basis) = one_spin_decay();
        let v0 = vec![C64::new(1.0, 0.0); 4];
        assert!(evolve(&m, &basis, &v0, &[0.0, 0.0], &[], &EvolveOptions::default()).is_err());
    }

    #[test]
    fn fidelity_of_commuting_states() {
        let tag = BasisTag::Full { spins: 1 };
        let p = SparseOperator::diagonal(tag, &[C64::new(0.25, 0.0), C64::new(0.75, 0.0)]).unwrap();
        let q = SparseOperator::diagonal(tag, &[C64::new(0.5, 0.0), C64::new(0.5, 0.0)]).unwrap();
        let expect = ((0.125f64).sqrt() + (0.375f64).sqrt()).powi(2);
        assert!((fidelity(&p, &q).unwrap() - expect).abs() < 1e-14);
        assert!((fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-14);
    }
}
