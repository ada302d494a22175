use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dqlm::exec::Exec;
use dqlm::lattice::LatticeLayout;
use dqlm::liouvillian::assemble_model;
use dqlm::models::ModelSpec;
use dqlm::numerics::{eig_blocks, DENSE_CAP};
use dqlm::symmetry::{enumerate_double_sector, enumerate_sector, partition_double_space, BlockSymmetry, DoubleConstraint, SectorConstraint};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn assembly(c: &mut Criterion) {
    let layout = LatticeLayout::chain_obc(7).unwrap();
    let spec = ModelSpec::biased_chain(layout.spec(), 1.0, 3.0, 1.0);
    let basis = enumerate_double_sector(&layout, &DoubleConstraint::weak_gauge_zero(&layout, 3), Exec::default()).unwrap();
    let mut g = c.benchmark_group("assemble_L7_N3");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| assemble_model(&spec, &layout, &basis, exec).unwrap()));
    }
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let layout = LatticeLayout::chain_obc(10).unwrap();
    let constraint = SectorConstraint::particles(5);
    let mut g = c.benchmark_group("enumerate_L10_N5");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| enumerate_sector(&layout, &constraint, exec).unwrap()));
    }
    g.finish();
}

fn block_spectra(c: &mut Criterion) {
    let layout = LatticeLayout::chain_obc(4).unwrap();
    let spec = ModelSpec::biased_chain(layout.spec(), 1.0, 3.0, 1.0);
    let blocks = partition_double_space(&layout, BlockSymmetry::WeakGauge, Exec::default()).unwrap();
    let ops: Vec<_> = blocks.iter().map(|b| assemble_model(&spec, &layout, b, Exec::Sequential).unwrap()).collect();
    let mut g = c.benchmark_group("eig_blocks_L4");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| eig_blocks(&ops, DENSE_CAP, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, enumeration, block_spectra);
criterion_main!(benches);
