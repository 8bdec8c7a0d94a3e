use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ramified::fredholm::{commutator_matrix, singular_values, Multiplier};
use ramified::hilbert_module::HodgeBasis;
use ramified::pressure::{pressure_exact, MatrixEnsemble, MatrixNorm};
use ramified::resistance_form::VertexFunction;
use ramified::self_similar::SelfSimilarStructure;
use ramified::spectral::{laplacian_eigen, BoundaryCondition, VertexMeasure};

fn bench_harmonic_extension(c: &mut Criterion) {
    let ss = SelfSimilarStructure::gasket();
    let form = ss.decimate(5).unwrap().1;
    let f = VertexFunction::new(0, vec![1.0, 0.0, 0.0]);
    c.bench_function("harmonic_extension gasket 0->5", |b| {
        b.iter(|| form.harmonic_extension(&f, 5).unwrap())
    });
}

fn bench_trace(c: &mut Criterion) {
    let ss = SelfSimilarStructure::gasket();
    let form = ss.decimate(4).unwrap().1;
    let fine = form.level_network(4);
    let boundary: Vec<usize> = (0..form.structure().vertex_count(3)).collect();
    c.bench_function("schur_trace gasket 4->3", |b| {
        b.iter(|| fine.trace_to(&boundary).unwrap())
    });
}

fn bench_hodge_assembly(c: &mut Criterion) {
    let ss = SelfSimilarStructure::gasket();
    let form = ss.decimate(3).unwrap().1;
    c.bench_function("hodge_basis gasket level 3", |b| {
        b.iter(|| HodgeBasis::assemble(&form, 3).unwrap())
    });
}

fn bench_commutator_spectrum(c: &mut Criterion) {
    let ss = SelfSimilarStructure::gasket();
    let form = ss.decimate(3).unwrap().1;
    let basis = HodgeBasis::assemble(&form, 3).unwrap();
    let a = Multiplier {
        level: 1,
        values: vec![1.0, -0.5, 0.25],
    };
    c.bench_function("commutator_svd gasket level 3", |b| {
        b.iter_batched(
            || (),
            |_| {
                let m = commutator_matrix(&form, &basis, &a).unwrap();
                singular_values(&m)
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_pressure(c: &mut Criterion) {
    let ens = MatrixEnsemble::from_structure(&SelfSimilarStructure::gasket()).unwrap();
    c.bench_function("pressure_exact gasket m=8", |b| {
        b.iter(|| pressure_exact(&ens, 1.5, 8, MatrixNorm::EnergyHs).unwrap())
    });
}

fn bench_eigensolve(c: &mut Criterion) {
    let ss = SelfSimilarStructure::gasket();
    let form = ss.decimate(4).unwrap().1;
    let measure = VertexMeasure::assemble(&form, ss.measure_weights(), 4).unwrap();
    c.bench_function("laplacian_eigen gasket level 4", |b| {
        b.iter(|| laplacian_eigen(&form, &measure, BoundaryCondition::Dirichlet).unwrap())
    });
}

criterion_group!(
    benches,
    bench_harmonic_extension,
    bench_trace,
    bench_hodge_assembly,
    bench_commutator_spectrum,
    bench_pressure,
    bench_eigensolve
);
criterion_main!(benches);
