//! Structural invariants checked on randomized inputs.

use dqlm::exact::{ensemble_marginals, exact_steady_state, SteadyParams};
use dqlm::exec::Exec;
use dqlm::io::{fmt_f64, Cell, CsvTable};
use dqlm::lattice::{sz2, BasisState, LatticeLayout};
use dqlm::liouvillian::{
    assemble_model, devectorize, hermiticity_preservation_defect, trace_functional_defect, vectorize, weak_symmetry_defect, LindbladForm,
};
use dqlm::models::{build_hamiltonian, Hamiltonian, JumpFamily, ModelSpec};
use dqlm::numerics::multiset_distance;
use dqlm::sparse::{BasisTag, CsrMatrix, SparseOperator};
use dqlm::spin::{operator_from_terms, single_spin_operator, ProductTerm, SpinOp};
use dqlm::symmetry::{enumerate_sector, gauss_form, gauss_forms, gauss_generator, DoubleSectorBasis, GaugeCharges, SectorConstraint};
use dqlm::C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn spin_op() -> impl Strategy<Value = SpinOp> {
    prop_oneof![Just(SpinOp::Raise), Just(SpinOp::Lower), Just(SpinOp::Z)]
}

fn product_term(spins: usize) -> impl Strategy<Value = ProductTerm> {
    (-2.0..2.0f64, -2.0..2.0f64, prop::collection::vec((0..spins, spin_op()), 0..4))
        .prop_map(|(re, im, factors)| ProductTerm::new(c(re, im), factors))
}

fn layout() -> impl Strategy<Value = LatticeLayout> {
    prop_oneof![
        (2usize..5).prop_map(|l| LatticeLayout::chain_obc(l).unwrap()),
        (3usize..5).prop_map(|l| LatticeLayout::chain_pbc(l).unwrap()),
        Just(LatticeLayout::hierarchical(3).unwrap()),
        Just(LatticeLayout::square(2, 2).unwrap()),
    ]
}

fn hamiltonian_for(layout: &LatticeLayout, j1: f64, j2: f64, phi: f64) -> Hamiltonian {
    use dqlm::lattice::LayoutKind::*;
    match layout.kind() {
        ChainObc => Hamiltonian::Qlm1d { j: j1, phi: 0.0 },
        ChainPbc => Hamiltonian::Qlm1d { j: j1, phi },
        Hierarchical => Hamiltonian::Hierarchical { j1, j2 },
        Square2d => Hamiltonian::Qlm2d { j1, j2 },
    }
}

fn family() -> impl Strategy<Value = JumpFamily> {
    let rate = 0.1..3.0f64;
    prop_oneof![
        (rate.clone(), rate.clone()).prop_map(|(u, d)| JumpFamily::biased(u, d)),
        (rate.clone(), rate.clone()).prop_map(|(u, d)| JumpFamily::XLike { gamma_u: u, gamma_d: d }),
        rate.clone().prop_map(|g| JumpFamily::Dephasing { gamma: g }),
        rate.prop_map(|g| JumpFamily::GaugeFixing { gamma: g }),
    ]
}

/// `X + X†` for a random sparse `X`, which is exactly Hermitian in floating point.
fn hermitian(spins: usize, entries: &[(usize, usize, f64, f64)]) -> SparseOperator {
    let d = 1usize << spins;
    let triplets = entries.iter().map(|&(r, col, re, im)| (r % d, col % d, c(re, im))).collect();
    let x = SparseOperator::new(BasisTag::Full { spins }, CsrMatrix::from_triplets(d, d, triplets, 0.0)).unwrap();
    x.add(&x.adjoint()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn adjoint_is_an_involution(term in product_term(5)) {
        prop_assert_eq!(term.adjoint().adjoint(), term.clone());
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let a = operator_from_terms(&layout, std::slice::from_ref(&term), Exec::Sequential).unwrap();
        let b = operator_from_terms(&layout, &[term.adjoint()], Exec::Sequential).unwrap();
        prop_assert!(a.adjoint().max_abs_diff(&b).unwrap() < 1e-14);
    }

    #[test]
    fn spin_algebra(slot in 0usize..5) {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let up = single_spin_operator(&layout, slot, SpinOp::Raise).unwrap();
        let dn = single_spin_operator(&layout, slot, SpinOp::Lower).unwrap();
        let z = single_spin_operator(&layout, slot, SpinOp::Z).unwrap();
        prop_assert!(up.commutator(&dn).unwrap().max_abs_diff(&z.scale_re(2.0)).unwrap() < 1e-15);
        prop_assert!(z.commutator(&up).unwrap().max_abs_diff(&up).unwrap() < 1e-15);
        prop_assert!(up.mul(&up).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn gauss_generators_commute_with_h_and_each_other(
        layout in layout(), j1 in -2.0..2.0f64, j2 in -2.0..2.0f64, phi in 0.0..6.3f64,
    ) {
        let spec = ModelSpec { layout: layout.spec(), hamiltonian: hamiltonian_for(&layout, j1, j2, phi), jumps: vec![], disorder: None };
        let h = build_hamiltonian(&spec, &layout, Exec::Sequential).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-14);
        let gs: Vec<_> = (0..layout.num_sites()).map(|n| gauss_generator(&layout, n).unwrap()).collect();
        for (a, ga) in gs.iter().enumerate() {
            prop_assert!(ga.commutator(&h).unwrap().max_abs() < 1e-13, "G_{} vs H", a);
            for gb in &gs[a + 1..] {
                prop_assert!(ga.commutator(gb).unwrap().max_abs() == 0.0);
            }
        }
    }

    #[test]
    fn sector_enumeration_matches_brute_force(layout in layout(), seed in any::<u64>()) {
        let dim = layout.hilbert_dim() as BasisState;
        let forms = gauss_forms(&layout);
        let pivot = seed % dim;
        let target = GaugeCharges::of(&forms, pivot);
        let sector = enumerate_sector(&layout, &SectorConstraint::gauge(target.0.clone()), Exec::default()).unwrap();
        let brute: Vec<BasisState> = (0..dim).filter(|&s| GaugeCharges::of(&forms, s) == target).collect();
        prop_assert_eq!(sector.states(), &brute[..]);
        if layout.kind().is_chain() || layout.kind() == dqlm::lattice::LayoutKind::Square2d {
            let n = (seed % (layout.num_sites() as u64 + 1)) as u32;
            let sector = enumerate_sector(&layout, &SectorConstraint::particles(n), Exec::default()).unwrap();
            let sites = layout.site_slots();
            let brute: Vec<BasisState> =
                (0..dim).filter(|&s| sites.iter().filter(|&&k| sz2(s, k) > 0).count() as u32 == n).collect();
            prop_assert_eq!(sector.states(), &brute[..]);
        }
        let g0 = gauss_form(&layout, 0).unwrap();
        prop_assert_eq!(g0.eval2(pivot), target.0[0]);
    }

    #[test]
    fn lindbladians_preserve_trace_and_hermiticity(
        l in 2usize..4,
        fam in family(),
        j in -2.0..2.0f64,
        entries in prop::collection::vec((0usize..64, 0usize..64, -1.0..1.0f64, -1.0..1.0f64), 1..12),
    ) {
        let layout = LatticeLayout::chain_obc(l).unwrap();
        let spec = ModelSpec { layout: layout.spec(), hamiltonian: Hamiltonian::Qlm1d { j, phi: 0.0 }, jumps: vec![fam.clone()], disorder: None };
        let basis = DoubleSectorBasis::full(&layout);
        let m = assemble_model(&spec, &layout, &basis, Exec::Sequential).unwrap();
        prop_assert!(trace_functional_defect(&m, &basis) < 1e-12);
        let form = LindbladForm::from_model(&spec, &layout, Exec::Sequential).unwrap();
        let rho = hermitian(layout.total_spins(), &entries);
        prop_assert!(hermiticity_preservation_defect(&form, &rho).unwrap() < 1e-12);
        if fam.preserves_weak_gauge() {
            for n in 0..layout.num_sites() {
                prop_assert!(weak_symmetry_defect(&m, &basis, &gauss_form(&layout, n).unwrap()) < 1e-12);
            }
        } else {
            // s^+ ρ s^+ moves ket and bra link charges in opposite directions
            let worst = (0..layout.num_sites()).map(|n| weak_symmetry_defect(&m, &basis, &gauss_form(&layout, n).unwrap())).fold(0.0, f64::max);
            prop_assert!(worst > 1e-3);
        }
    }

    #[test]
    fn vectorization_matches_direct_application(
        fam in family(),
        entries in prop::collection::vec((0usize..32, 0usize..32, -1.0..1.0f64, -1.0..1.0f64), 1..12),
    ) {
        let layout = LatticeLayout::chain_obc(3).unwrap();
        let spec = ModelSpec { layout: layout.spec(), hamiltonian: Hamiltonian::Qlm1d { j: 0.7, phi: 0.0 }, jumps: vec![fam], disorder: None };
        let basis = DoubleSectorBasis::full(&layout);
        let m = assemble_model(&spec, &layout, &basis, Exec::Sequential).unwrap();
        let form = LindbladForm::from_model(&spec, &layout, Exec::Sequential).unwrap();
        let rho = hermitian(layout.total_spins(), &entries);
        let direct = form.apply(&rho).unwrap();
        let via = devectorize(&m.apply(&vectorize(&rho, &basis).unwrap().data).unwrap(), &basis).unwrap();
        prop_assert!(direct.max_abs_diff(&via).unwrap() < 1e-12);
    }

    #[test]
    fn dp_marginals_match_enumeration(l in 2usize..7, alpha in 0.2..3.0f64, beta in 0.2..3.0f64, seed in any::<u32>()) {
        let layout = LatticeLayout::chain_obc(l).unwrap();
        let n = seed % (l as u32 + 1);
        let ens = exact_steady_state(&layout, &SteadyParams::new(alpha, beta)).unwrap().with_constraint(SectorConstraint::particles(n));
        let dp = ensemble_marginals(&ens).unwrap();
        let rho = ens.to_operator(Exec::Sequential).unwrap();
        let diag = rho.matrix().diagonal();
        prop_assert_eq!(dp.sz.len(), layout.total_spins());
        for slot in 0..layout.total_spins() {
            let brute: f64 = diag.iter().enumerate().map(|(s, w)| w.re * sz2(s as BasisState, slot) as f64 / 2.0).sum();
            prop_assert!((dp.sz[slot] - brute).abs() < 1e-12, "slot {}: {} vs {}", slot, dp.sz[slot], brute);
        }
    }

    #[test]
    fn projected_profiles_ignore_the_chemical_potential(l in 2usize..9, a1 in 0.1..5.0f64, a2 in 0.1..5.0f64, beta in 0.3..3.0f64, seed in any::<u32>()) {
        let layout = LatticeLayout::chain_obc(l).unwrap();
        let n = SectorConstraint::particles(seed % (l as u32 + 1));
        let p1 = ensemble_marginals(&exact_steady_state(&layout, &SteadyParams::new(a1, beta)).unwrap().with_constraint(n.clone())).unwrap();
        let p2 = ensemble_marginals(&exact_steady_state(&layout, &SteadyParams::new(a2, beta)).unwrap().with_constraint(n)).unwrap();
        for (x, y) in p1.sz.iter().zip(&p2.sz) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_floats_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
        let mut t = CsvTable::new(["k [1]", "x [1]"]);
        for (k, &x) in values.iter().enumerate() {
            t.push(vec![Cell::from(k), Cell::from(x)]);
        }
        let text = t.render();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next(), Some("k [1],x [1]"));
        for (line, &x) in lines.zip(&values) {
            let parsed: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            prop_assert!(parsed == x, "{} -> {}", x, fmt_f64(x));
        }
    }

    #[test]
    fn multiset_distance_is_symmetric_and_permutation_blind(
        pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..40),
        shift in prop::collection::vec((-0.1..0.1f64, -0.1..0.1f64), 40),
        rot in 0usize..40,
    ) {
        let a: Vec<C64> = pts.iter().map(|&(x, y)| c(x, y)).collect();
        let b: Vec<C64> = a.iter().zip(&shift).map(|(z, &(dx, dy))| z + c(dx, dy)).collect();
        let mut p = a.clone();
        p.rotate_left(rot % a.len());
        prop_assert_eq!(multiset_distance(&a, &p).unwrap().distance, 0.0);
        let ab = multiset_distance(&a, &b).unwrap().distance;
        let ba = multiset_distance(&b, &a).unwrap().distance;
        prop_assert!((ab - ba).abs() < 1e-15);
        let bound = shift.iter().take(a.len()).map(|&(dx, dy)| c(dx, dy).norm()).fold(0.0, f64::max);
        prop_assert!(ab <= bound + 1e-15);
    }
}
