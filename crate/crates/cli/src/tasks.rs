//! The six tasks. Each writes its CSVs through [`Artifacts`] and returns
//! diagnostics for the manifest.

use std::path::Path;

use dqlm::exact::{
    centered_moment, ensemble_marginals, exact_eigenoperator, exact_steady_state, profile_rows, special_steady_states, DiagonalEnsemble, Marginals,
    SpecialFamily, SteadyParams,
};
use dqlm::exec::Exec;
use dqlm::io::{Cell, CsvTable};
use dqlm::lattice::{is_up, sz2, BasisState, LatticeLayout, LayoutKind};
use dqlm::liouvillian::{assemble_model, LindbladForm, Superoperator};
use dqlm::models::{Hamiltonian, JumpFamily, ModelSpec};
use dqlm::numerics::{
    conjugation_asymmetry, eig_blocks, evolve, fidelity, hausdorff, hull_excess, multiset_distance, phi_grid, steady_states, summarize, winding_scan,
    DiagonalObservable, EvolveOptions, KernelState, Spectrum, KERNEL_TOL,
};
use dqlm::sparse::SparseOperator;
use dqlm::symmetry::{enumerate_double_sector, partition_double_space, BlockSymmetry, DoubleConstraint, DoubleSectorBasis, SectorConstraint};
use dqlm::C64;
use serde_json::{json, Map, Value};

use crate::config::{half_units, Settings, Task};
use crate::fail::{CliError, Exit};
use crate::output::{git_blob_hash, Artifacts, Manifest, Stopwatch};

/// Residual tolerance of the exact-state checks.
const RESIDUAL_TOL: f64 = 1e-10;
/// Tolerance of the identity steady states of x-like and dephasing jumps.
const IDENTITY_TOL: f64 = 1e-12;

struct Report {
    diagnostics: Value,
    /// Set when the run completed but a verification did not pass.
    failure: Option<String>,
}

impl Report {
    fn ok(diagnostics: Value) -> Self {
        Report { diagnostics, failure: None }
    }
}

fn exec() -> Exec {
    Exec::default()
}

fn cap(s: &Settings) -> usize {
    s.dense_cap.unwrap_or(dqlm::numerics::DENSE_CAP)
}

/// Runs the resolved task, writes every artifact and the manifest.
pub fn run(s: &Settings) -> Result<(), CliError> {
    let task = s.task.ok_or_else(|| CliError::new(Exit::Schema, "schema", "no task"))?;
    let mut clock = Stopwatch::start();
    let mut out = Artifacts::create(Path::new(s.output_dir.as_deref().unwrap_or("out")))?;
    let report = match task {
        Task::Spectrum => spectrum(s, &mut out, &mut clock),
        Task::SteadyState => steady_state(s, &mut out, &mut clock),
        Task::Dynamics => dynamics(s, &mut out, &mut clock),
        Task::Winding => winding(s, &mut out, &mut clock),
        Task::VerifyExact => verify_exact(s, &mut out, &mut clock),
        Task::Profile => profile(s, &mut out, &mut clock),
    }?;
    let config = s.canonical_json();
    let config_hash = git_blob_hash(config.to_string().as_bytes());
    let task_name = serde_json::to_value(task).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let manifest = Manifest {
        tool: "dqlm",
        version: env!("CARGO_PKG_VERSION"),
        task: &task_name,
        status: if report.failure.is_some() { "failed" } else { "ok" },
        config,
        config_hash,
        outputs: out.files(),
        timings: clock.finish(),
        diagnostics: report.diagnostics,
    };
    manifest.write(out.dir())?;
    for f in out.files() {
        println!("{}: {} rows, sha1 {}", out.dir().join(&f.file).display(), f.rows, f.sha1);
    }
    println!("{}", out.dir().join("manifest.json").display());
    match report.failure {
        Some(msg) => Err(CliError::new(Exit::Solver, "verification-failed", msg)),
        None => Ok(()),
    }
}

fn weak_gauge_preserved(spec: &ModelSpec) -> bool {
    spec.jumps.iter().all(JumpFamily::preserves_weak_gauge)
}

/// The double-space blocks selected by the sector keys.
fn ed_blocks(s: &Settings, layout: &LatticeLayout, spec: &ModelSpec) -> Result<Vec<DoubleSectorBasis>, CliError> {
    if s.full_space == Some(true) {
        let sym = if weak_gauge_preserved(spec) { BlockSymmetry::WeakGauge } else { BlockSymmetry::StrongN };
        return Ok(partition_double_space(layout, sym, exec())?);
    }
    let shift = match &s.weak_gauge {
        Some(g) if weak_gauge_preserved(spec) => Some(half_units(g, "weak_gauge")?),
        Some(_) => return Err(CliError::new(Exit::Schema, "schema", "the jump operators break the weak gauge symmetry")),
        None => None,
    };
    let constraint = DoubleConstraint { n_ket: s.n, n_bra: s.n, gauge_shift2: shift, ket_gauge_total2: None };
    let basis = enumerate_double_sector(layout, &constraint, exec())?;
    if basis.is_empty() {
        return Err(dqlm::Error::EmptySector(format!("{constraint:?}")).into());
    }
    Ok(vec![basis])
}

type DenseJob = (&'static str, LatticeLayout, ModelSpec, Vec<DoubleSectorBasis>);

/// Every selected layout with its model and blocks, cap-checked up front so
/// an oversized boundary fails before any other is diagonalized.
fn dense_jobs(s: &Settings) -> Result<Vec<DenseJob>, CliError> {
    let mut jobs = Vec::new();
    for (tag, layout) in s.layouts()? {
        let spec = s.model(&layout)?;
        let blocks = ed_blocks(s, &layout, &spec)?;
        jobs.push((tag, layout, spec, blocks));
    }
    for (_, _, _, blocks) in &jobs {
        check_cap(s, blocks)?;
    }
    Ok(jobs)
}

/// Fails before assembly when a block cannot be diagonalized densely.
fn check_cap(s: &Settings, blocks: &[DoubleSectorBasis]) -> Result<(), CliError> {
    match blocks.iter().map(DoubleSectorBasis::dim).max() {
        Some(dim) if dim > cap(s) => Err(dqlm::Error::OverDenseCap { dim, cap: cap(s) }.into()),
        _ => Ok(()),
    }
}

fn assemble_all(spec: &ModelSpec, layout: &LatticeLayout, blocks: &[DoubleSectorBasis]) -> Result<Vec<Superoperator>, CliError> {
    if let [b] = blocks {
        return Ok(vec![assemble_model(spec, layout, b, exec())?]);
    }
    Ok(exec().try_map(blocks, |b| assemble_model(spec, layout, b, Exec::Sequential))?)
}

fn spectrum_table(z: &[C64]) -> CsvTable {
    let mut t = CsvTable::new(["index [1]", "re_lambda [J]", "im_lambda [J]"]);
    for (i, v) in z.iter().enumerate() {
        t.push(vec![Cell::from(i), Cell::from(v.re), Cell::from(v.im)]);
    }
    t
}

fn spectrum_diagnostics(sp: &Spectrum) -> Result<Value, CliError> {
    Ok(json!({
        "dimension": sp.diagnostics.dimension,
        "blocks": sp.diagnostics.blocks,
        "max_re_lambda": sp.max_real(),
        "kernel_count": sp.eigenvalues.iter().filter(|z| z.norm() < KERNEL_TOL).count(),
        "kernel_tol": KERNEL_TOL,
        "conjugation_asymmetry": conjugation_asymmetry(&sp.eigenvalues)?,
    }))
}

fn spectrum(s: &Settings, out: &mut Artifacts, clock: &mut Stopwatch) -> Result<Report, CliError> {
    let mut diag = Map::new();
    let mut spectra = Vec::new();
    for (tag, layout, spec, blocks) in dense_jobs(s)? {
        let ops = assemble_all(&spec, &layout, &blocks)?;
        clock.lap(&format!("assemble_{tag}"));
        let sp = eig_blocks(&ops, cap(s), exec())?;
        clock.lap(&format!("eig_{tag}"));
        out.csv(&format!("spectrum_{tag}.csv"), &spectrum_table(&sp.eigenvalues))?;
        diag.insert(tag.into(), spectrum_diagnostics(&sp)?);
        spectra.push((tag, sp));
    }
    if let [(_, obc), (_, pbc)] = &spectra[..] {
        diag.insert("obc_hull_excess_over_pbc".into(), json!(hull_excess(&obc.eigenvalues, &pbc.eigenvalues)));
    }
    Ok(Report::ok(Value::Object(diag)))
}

/// `⟨s^z⟩` per slot of a diagonal-carrying operator.
fn slot_sz(layout: &LatticeLayout, rho: &SparseOperator) -> Vec<f64> {
    let diag = rho.matrix().diagonal();
    (0..layout.total_spins()).map(|slot| diag.iter().enumerate().map(|(st, w)| w.re * sz2(st as BasisState, slot) as f64 / 2.0).sum()).collect()
}

/// The exact state matching a numerically extracted kernel, when the model
/// and sector admit one.
fn exact_reference(s: &Settings, layout: &LatticeLayout, spec: &ModelSpec) -> Result<Option<DiagonalEnsemble>, CliError> {
    let biased = matches!(spec.jumps.first(), Some(JumpFamily::Biased { .. }));
    let gauge_zero = s.weak_gauge.as_ref().is_some_and(|g| g.iter().all(|&x| x == 0.0));
    let strong = s.n.is_some();
    if !biased || !gauge_zero || !strong || layout.kind() == LayoutKind::ChainPbc || s.full_space == Some(true) {
        return Ok(None);
    }
    let (gu, gd) = (s.gamma_u.unwrap_or(2.4), s.gamma_d.unwrap_or(1.6));
    let beta_prime = match (s.gamma_u_v, s.gamma_d_v) {
        (Some(u), Some(d)) => Some(u / d),
        _ => None,
    };
    let params = SteadyParams { alpha: 1.0, beta: gu / gd, alpha_prime: 1.0, beta_prime };
    let constraint = SectorConstraint { n_particles: s.n, ..Default::default() };
    Ok(Some(exact_steady_state(layout, &params)?.with_constraint(constraint)))
}

fn steady_state(s: &Settings, out: &mut Artifacts, clock: &mut Stopwatch) -> Result<Report, CliError> {
    let mut diag = Map::new();
    for (tag, layout, spec, blocks) in dense_jobs(s)? {
        let ops = assemble_all(&spec, &layout, &blocks)?;
        clock.lap(&format!("assemble_{tag}"));
        let mut states: Vec<KernelState> = Vec::new();
        for (m, b) in ops.iter().zip(&blocks) {
            match steady_states(m, b, cap(s)) {
                Ok(k) => states.extend(k),
                // blocks of the full space without a kernel are expected
                Err(dqlm::Error::EmptyKernel(_)) if blocks.len() > 1 => {}
                Err(e) => return Err(e.into()),
            }
        }
        clock.lap(&format!("kernel_{tag}"));
        let exact = if states.len() == 1 { exact_reference(s, &layout, &spec)? } else { None };
        let exact_sz = exact.as_ref().map(ensemble_marginals).transpose()?;
        let exact_rows = exact_sz.as_ref().map(|m| profile_rows(&layout, m));
        let mut t = CsvTable::new(["state [index]", "layer [label]", "n [site]", "value_ed [1]", "value_exact [1]"]);
        let mut per_state = Vec::new();
        let mut worst_dev = 0.0f64;
        for (k, st) in states.iter().enumerate() {
            let rows = profile_rows(&layout, &Marginals { sz: slot_sz(&layout, &st.rho), log_z: 0.0 });
            for (i, r) in rows.iter().enumerate() {
                let reference = exact_rows.as_ref().map(|e| e[i].value);
                if let Some(x) = reference {
                    worst_dev = worst_dev.max((x - r.value).abs());
                }
                t.push(vec![Cell::from(k), Cell::from(r.layer), Cell::from(r.n), Cell::from(r.value), reference.map_or(Cell::from(""), Cell::from)]);
            }
            let fid = match &exact {
                Some(e) => Some(fidelity(&st.rho, &e.to_operator(exec())?)?),
                None => None,
            };
            per_state.push(json!({
                "eigenvalue": [st.eigenvalue.re, st.eigenvalue.im],
                "raw_trace": [st.raw_trace.re, st.raw_trace.im],
                "min_eigenvalue": st.min_eigenvalue,
                "fidelity_exact": fid,
            }));
        }
        out.csv(&format!("steady_state_{tag}.csv"), &t)?;
        diag.insert(
            tag.into(),
            json!({
                "kernel_dimension": states.len(),
                "states": per_state,
                "max_deviation_from_exact": exact.as_ref().map(|_| worst_dev),
            }),
        );
    }
    Ok(Report::ok(Value::Object(diag)))
}

fn dynamics(s: &Settings, out: &mut Artifacts, clock: &mut Stopwatch) -> Result<Report, CliError> {
    let mut diag = Map::new();
    let sites = s.initial_sites.clone().unwrap_or_default();
    let mut distinct = sites.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != sites.len() || sites.contains(&0) {
        return Err(CliError::new(Exit::Schema, "schema", "initial_sites must be distinct 1-based site numbers"));
    }
    let t_final = s.t_final.unwrap_or(100.0);
    let points = s.t_points.unwrap_or(101);
    let times: Vec<f64> = (0..points).map(|k| t_final * k as f64 / (points - 1) as f64).collect();
    let opts = EvolveOptions { atol: s.atol.unwrap_or(1e-9), rtol: s.rtol.unwrap_or(1e-9), ..Default::default() };
    for (tag, layout) in s.layouts()? {
        let spec = s.model(&layout)?;
        let mut start: BasisState = 0;
        for &n in &sites {
            start |= 1 << layout.site_slot(n - 1)?;
        }
        let shift = weak_gauge_preserved(&spec).then(|| vec![0; layout.num_sites()]);
        let constraint = DoubleConstraint { n_ket: s.n, n_bra: s.n, gauge_shift2: shift, ket_gauge_total2: None };
        let basis = enumerate_double_sector(&layout, &constraint, exec())?;
        let m = assemble_model(&spec, &layout, &basis, exec())?;
        clock.lap(&format!("assemble_{tag}"));
        let mut v0 = vec![C64::new(0.0, 0.0); basis.dim()];
        let i0 = basis.index_of(start, start).ok_or_else(|| CliError::new(Exit::Infeasible, "empty-sector", "initial state outside the sector"))?;
        v0[i0] = C64::new(1.0, 0.0);
        let site_slots = layout.site_slots();
        let obs: Vec<DiagonalObservable> = site_slots
            .iter()
            .enumerate()
            .map(|(n, &slot)| DiagonalObservable::from_fn(format!("N_{}", n + 1), &basis, |st| if is_up(st, slot) { 1.0 } else { 0.0 }))
            .collect();
        let (series, _) = evolve(&m, &basis, &v0, &times, &obs, &opts)?;
        clock.lap(&format!("evolve_{tag}"));
        let mut header = vec!["t [1/J]".to_string()];
        header.extend(series.names.iter().map(|n| format!("{n} [1]")));
        header.extend(["trace_defect [1]".to_string(), "positivity_defect [1]".to_string()]);
        let mut t = CsvTable::new(header);
        for (k, row) in series.values.iter().enumerate() {
            let mut cells = vec![Cell::from(series.times[k])];
            cells.extend(row.iter().map(|&x| Cell::from(x)));
            cells.push(Cell::from(series.trace_defect[k]));
            cells.push(Cell::from(series.positivity_defect[k]));
            t.push(cells);
        }
        out.csv(&format!("dynamics_{tag}.csv"), &t)?;
        let last = series.values.last().cloned().unwrap_or_default();
        let reference: Option<Vec<f64>> = match layout.kind() {
            LayoutKind::ChainPbc => s.n.map(|n| vec![n as f64 / layout.num_sites() as f64; layout.num_sites()]),
            _ => {
                let sel = Settings { weak_gauge: Some(vec![0.0; layout.num_sites()]), full_space: Some(false), ..s.clone() };
                match exact_reference(&sel, &layout, &spec)? {
                    Some(e) => {
                        let sz = ensemble_marginals(&e)?.sz;
                        Some(site_slots.iter().map(|&slot| sz[slot] + 0.5).collect())
                    }
                    None => None,
                }
            }
        };
        let late_dev = reference.as_ref().map(|r| r.iter().zip(&last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        diag.insert(
            tag.into(),
            json!({
                "dimension": basis.dim(),
                "steps_accepted": series.steps_accepted,
                "steps_rejected": series.steps_rejected,
                "max_trace_defect": series.max_trace_defect(),
                "max_positivity_defect": series.positivity_defect.iter().copied().fold(0.0, f64::max),
                "final_profile": last,
                "steady_profile": reference,
                "final_deviation_from_steady": late_dev,
            }),
        );
    }
    Ok(Report::ok(Value::Object(diag)))
}

fn winding(s: &Settings, out: &mut Artifacts, clock: &mut Stopwatch) -> Result<Report, CliError> {
    if s.full_space == Some(true) {
        return Err(CliError::new(Exit::Schema, "schema", "winding scans a single sector"));
    }
    let layouts = s.layouts()?;
    let (_, layout) = &layouts[0];
    let spec = s.model(layout)?;
    let blocks = ed_blocks(s, layout, &spec)?;
    check_cap(s, &blocks)?;
    let phis = phi_grid(s.phi_steps.unwrap_or(8));
    let points = winding_scan(&spec, layout, &phis, s.variant(), &blocks[0], cap(s), exec())?;
    clock.lap("scan");
    for (k, p) in points.iter().enumerate() {
        out.csv(&format!("winding_phi_{k:03}.csv"), &spectrum_table(&p.spectrum.eigenvalues))?;
    }
    let summary = summarize(&points)?;
    let mut t = CsvTable::new(["k [1]", "phi [rad]", "distance_to_first [J]", "hausdorff_to_first [J]", "max_re_lambda [J]"]);
    for (k, (row, p)) in summary.iter().zip(&points).enumerate() {
        t.push(vec![
            Cell::from(k),
            Cell::from(row.phi),
            Cell::from(row.distance_to_first),
            Cell::from(row.hausdorff_to_first),
            Cell::from(p.spectrum.max_real()),
        ]);
    }
    out.csv("winding_summary.csv", &t)?;
    clock.lap("compare");
    let steps = phis.len() - 1;
    let half_turn = if steps.is_multiple_of(2) {
        let (a, b) = (&points[0].spectrum.eigenvalues, &points[steps / 2].spectrum.eigenvalues);
        Some(json!({ "multiset_distance": multiset_distance(a, b)?.distance, "hausdorff": hausdorff(a, b) }))
    } else {
        None
    };
    Ok(Report::ok(json!({
        "dimension": blocks[0].dim(),
        "variant": s.variant,
        "phi_0_vs_pi": half_turn,
        "max_distance_to_first": summary.iter().map(|r| r.distance_to_first).fold(0.0, f64::max),
    })))
}

struct Check {
    name: String,
    layout: &'static str,
    size: String,
    lambda: f64,
    residual: f64,
    tolerance: f64,
}

fn residual(spec: &ModelSpec, layout: &LatticeLayout, ens: &DiagonalEnsemble, lambda: f64) -> Result<f64, CliError> {
    let rho = ens.to_operator(exec())?;
    Ok(LindbladForm::from_model(spec, layout, exec())?.relative_residual(&rho, C64::new(lambda, 0.0))?)
}

fn verify_exact(s: &Settings, out: &mut Artifacts, clock: &mut Stopwatch) -> Result<Report, CliError> {
    let l = s.l.unwrap_or(5);
    let (gu, gd) = (s.gamma_u.unwrap_or(2.4), s.gamma_d.unwrap_or(1.6));
    let j = s.j.unwrap_or(1.0);
    let alpha = s.alpha.unwrap_or(1.0);
    let gamma_fix = s.gauge_fixing.filter(|&g| g > 0.0).unwrap_or(1.0);
    let chain = LatticeLayout::chain_obc(l)?;
    let size = format!("{l}");
    let mut checks = Vec::new();
    let mut push = |name: String, layout: &'static str, size: String, lambda: f64, residual: f64, tolerance: f64| {
        checks.push(Check { name, layout, size, lambda, residual, tolerance });
    };

    let base = ModelSpec::biased_chain(chain.spec(), j, gu, gd);
    let steady = exact_steady_state(&chain, &SteadyParams::new(alpha, gu / gd))?;
    push("steady-state".into(), "chain-obc", size.clone(), 0.0, residual(&base, &chain, &steady, 0.0)?, RESIDUAL_TOL);
    let mut disordered = base.clone();
    disordered.disorder = s.model(&chain)?.disorder.or_else(|| Some(dqlm::models::Disorder::new(20_240 + l as u64)));
    push("steady-state+disorder".into(), "chain-obc", size.clone(), 0.0, residual(&disordered, &chain, &steady, 0.0)?, RESIDUAL_TOL);
    let mut fixed = base.clone();
    fixed.jumps.push(JumpFamily::GaugeFixing { gamma: gamma_fix });
    push("steady-state+gauge-fixing".into(), "chain-obc", size.clone(), 0.0, residual(&fixed, &chain, &steady, 0.0)?, RESIDUAL_TOL);
    clock.lap("steady");

    let xlike = ModelSpec { jumps: vec![JumpFamily::XLike { gamma_u: gu, gamma_d: gd }], ..base.clone() };
    for bits in 0u32..(1 << (l - 1)) {
        let k: Vec<bool> = (0..l - 1).map(|i| (bits >> i) & 1 == 1).collect();
        let label: String = k.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let (ens, lambda) = exact_eigenoperator(&chain, &k, alpha, gu, gd)?;
        push(format!("eigenoperator k={label}"), "chain-obc", size.clone(), lambda, residual(&base, &chain, &ens, lambda)?, RESIDUAL_TOL);
        push(format!("x-like eigenoperator k={label}"), "chain-obc", size.clone(), lambda, residual(&xlike, &chain, &ens, lambda)?, RESIDUAL_TOL);
    }
    clock.lap("eigenoperators");

    let g = 0.5 * (gu + gd);
    let symmetric = ModelSpec { jumps: vec![JumpFamily::XLike { gamma_u: g, gamma_d: g }], ..base.clone() };
    for (n, ens) in special_steady_states(&chain, SpecialFamily::XLikeSymmetric)?.iter().enumerate() {
        push(format!("x-like identity N={n}"), "chain-obc", size.clone(), 0.0, residual(&symmetric, &chain, ens, 0.0)?, IDENTITY_TOL);
    }
    let dephasing = ModelSpec { jumps: vec![JumpFamily::Dephasing { gamma: s.gamma.unwrap_or(1.0) }], ..base.clone() };
    let sectors = special_steady_states(&chain, SpecialFamily::Dephasing)?;
    let mut worst = 0.0f64;
    for ens in &sectors {
        worst = worst.max(residual(&dephasing, &chain, ens, 0.0)?);
    }
    push(format!("dephasing identities max over {} gauge sectors", sectors.len()), "chain-obc", size, 0.0, worst, IDENTITY_TOL);
    clock.lap("identities");

    let lh = l.min(5);
    let ladder = LatticeLayout::hierarchical(lh)?;
    let hspec = ModelSpec {
        layout: ladder.spec(),
        hamiltonian: Hamiltonian::Hierarchical { j1: s.j1.unwrap_or(j), j2: s.j2.unwrap_or(j) },
        jumps: vec![JumpFamily::biased(gu, gd)],
        disorder: None,
    };
    let hparams = SteadyParams { alpha, beta: gu / gd, alpha_prime: s.alpha_prime.unwrap_or(1.0), beta_prime: None };
    let hstate = exact_steady_state(&ladder, &hparams)?;
    push("steady-state".into(), "hierarchical", format!("{lh}"), 0.0, residual(&hspec, &ladder, &hstate, 0.0)?, RESIDUAL_TOL);
    let mut hfixed = hspec.clone();
    hfixed.jumps.push(JumpFamily::GaugeFixing { gamma: gamma_fix });
    push("steady-state+gauge-fixing".into(), "hierarchical", format!("{lh}"), 0.0, residual(&hfixed, &ladder, &hstate, 0.0)?, RESIDUAL_TOL);
    clock.lap("hierarchical");

    let (guv, gdv) = (s.gamma_u_v.unwrap_or(gu), s.gamma_d_v.unwrap_or(gd));
    for (lx, ly) in [(2, 2), (2, 3)] {
        let sq = LatticeLayout::square(lx, ly)?;
        let sspec = ModelSpec {
            layout: sq.spec(),
            hamiltonian: Hamiltonian::Qlm2d { j1: s.j1.unwrap_or(j), j2: s.j2.unwrap_or(j) },
            jumps: vec![JumpFamily::Biased { gamma_u: gu, gamma_d: gd, gamma_u_v: Some(guv), gamma_d_v: Some(gdv) }],
            disorder: None,
        };
        let params = SteadyParams { alpha, beta: gu / gd, alpha_prime: 1.0, beta_prime: Some(guv / gdv) };
        let st = exact_steady_state(&sq, &params)?;
        push("steady-state".into(), "square", format!("{lx}x{ly}"), 0.0, residual(&sspec, &sq, &st, 0.0)?, RESIDUAL_TOL);
        let mut sfixed = sspec.clone();
        sfixed.jumps.push(JumpFamily::GaugeFixing { gamma: gamma_fix });
        push("steady-state+gauge-fixing".into(), "square", format!("{lx}x{ly}"), 0.0, residual(&sfixed, &sq, &st, 0.0)?, RESIDUAL_TOL);
    }
    clock.lap("square");

    let mut t = CsvTable::new(["check [label]", "layout [label]", "size [site]", "lambda [J]", "residual [1]", "tolerance [1]", "pass [bool]"]);
    let mut failed = Vec::new();
    for c in &checks {
        let pass = c.residual < c.tolerance;
        if !pass {
            failed.push(format!("{} ({} {})", c.name, c.layout, c.size));
        }
        t.push(vec![
            Cell::from(c.name.as_str()),
            Cell::from(c.layout),
            Cell::from(c.size.as_str()),
            Cell::from(c.lambda),
            Cell::from(c.residual),
            Cell::from(c.tolerance),
            Cell::from(if pass { "true" } else { "false" }),
        ]);
    }
    out.csv("verify_exact.csv", &t)?;
    let diagnostics = json!({
        "checks": checks.len(),
        "failed": failed,
        "max_residual": checks.iter().map(|c| c.residual).fold(0.0, f64::max),
    });
    let failure = (!failed.is_empty()).then(|| format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join("; ")));
    Ok(Report { diagnostics, failure })
}

fn profile(s: &Settings, out: &mut Artifacts, clock: &mut Stopwatch) -> Result<Report, CliError> {
    let layouts = s.layouts()?;
    let (_, layout) = &layouts[0];
    let ensemble = exact_steady_state(layout, &s.steady_params())?;
    // (label, filling, N, constraint)
    let mut cases: Vec<(String, Option<f64>, Option<u32>, SectorConstraint)> = Vec::new();
    if layout.kind() == LayoutKind::Hierarchical {
        let sec = half_units(s.sector.as_deref().unwrap_or(&[0.0, 0.0]), "sector")?;
        let label = format!("NH={} DH={}", sec[0] as f64 / 2.0, sec[1] as f64 / 2.0);
        cases.push((label, None, None, SectorConstraint { hierarchical2: Some((sec[0], sec[1])), ..Default::default() }));
    } else if let Some(n) = s.n {
        cases.push((format!("N={n}"), None, Some(n), SectorConstraint::particles(n)));
    } else {
        let sites = layout.num_sites() as f64;
        for &f in s.fillings.as_deref().unwrap_or(&[]) {
            let n = (f * sites).round() as u32;
            cases.push((format!("N={n}"), Some(f), Some(n), SectorConstraint::particles(n)));
        }
    }
    let mut t = CsvTable::new(["case [label]", "filling [1]", "N [1]", "layer [label]", "n [site]", "value [1]"]);
    let mut moments = CsvTable::new(["case [label]", "layer [label]", "dipole [site]", "quadrupole [site^2]"]);
    let mut diag = Vec::new();
    let opt = |x: Option<Cell>| x.unwrap_or_else(|| Cell::from(""));
    for (label, filling, n, constraint) in cases {
        let ens = ensemble.clone().with_constraint(constraint.clone());
        let m = ensemble_marginals(&ens)?;
        if !m.log_z.is_finite() {
            return Err(dqlm::Error::EmptySector(format!("{constraint:?}")).into());
        }
        let rows = profile_rows(layout, &m);
        for r in &rows {
            t.push(vec![
                Cell::from(label.as_str()),
                opt(filling.map(Cell::from)),
                opt(n.map(|x| Cell::from(x as usize))),
                Cell::from(r.layer),
                Cell::from(r.n),
                Cell::from(r.value),
            ]);
        }
        let mut layers: Vec<&str> = rows.iter().map(|r| r.layer).collect();
        layers.dedup();
        let mut per_layer = Map::new();
        for layer in layers {
            let values: Vec<f64> = rows.iter().filter(|r| r.layer == layer).map(|r| r.value).collect();
            let (d, q) = (centered_moment(&values, 1), centered_moment(&values, 2));
            moments.push(vec![Cell::from(label.as_str()), Cell::from(layer), Cell::from(d), Cell::from(q)]);
            per_layer.insert(layer.into(), json!({ "dipole": d, "quadrupole": q }));
        }
        diag.push(json!({ "case": label, "log_z": m.log_z, "moments": per_layer }));
    }
    clock.lap("marginals");
    out.csv("profile.csv", &t)?;
    out.csv("moments.csv", &moments)?;
    Ok(Report::ok(json!({ "cases": diag })))
}
