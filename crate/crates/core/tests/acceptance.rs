//! Acceptance suite: every criterion prints one pass/fail line and asserts
//! its stated tolerance. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use ramified::builtins::builtin;
use ramified::fredholm::{
    commutator_matrix, localization_residual, multiplication_matrix, operator_f,
    oscillation_bound_check, rank_check, singular_values, Multiplier,
};
use ramified::hilbert_module::{
    dimension_report, eta_projection, project_p, project_p_perp, HodgeBasis, ModuleElement,
};
use ramified::pressure::{critical_exponent, pressure_exact, MatrixEnsemble, MatrixNorm};
use ramified::resistance_form::{Network, ResistanceForm, VertexFunction};
use ramified::self_similar::SelfSimilarStructure;
use ramified::spectral::{
    eigenbasis_projection_sum, laplacian_eigen, weyl_fit, BoundaryCondition, EigenSystem,
    VertexMeasure,
};
use ramified::VertexId;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {tag} ({detail})");
    assert!(pass, "criterion {criterion}: {detail}");
}

fn gasket_form(depth: usize) -> &'static ResistanceForm {
    static FORMS: OnceLock<Vec<ResistanceForm>> = OnceLock::new();
    let forms = FORMS.get_or_init(|| {
        (0..=6)
            .map(|d| SelfSimilarStructure::gasket().decimate(d).unwrap().1)
            .collect()
    });
    &forms[depth]
}

fn gasket_basis(level: usize) -> HodgeBasis {
    HodgeBasis::assemble(gasket_form(level), level).unwrap()
}

fn random_element(form: &ResistanceForm, level: usize, rng: &mut ChaCha8Rng) -> ModuleElement {
    let cells = form
        .structure()
        .cells(level)
        .iter()
        .map(|c| {
            (0..c.vertices.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    ModuleElement::from_cell_values(level, cells)
}

#[test]
fn criterion_01_renormalization_fixed_point() {
    let form = gasket_form(6);
    let mut worst = 0.0f64;
    for n in 0..=5 {
        worst = worst.max(form.check_compatibility(n).unwrap());
    }
    verdict(
        "01 renormalization-fixed-point",
        worst <= 1e-10,
        &format!("max conductance deviation {worst:.3e} <= 1e-10 for n <= 5"),
    );
}

#[test]
fn criterion_02_hodge_dimension_formulas() {
    let basis = gasket_basis(3);
    let mut pass = true;
    let mut detail = String::new();
    for n in 1..=3usize {
        let three_n = 3usize.pow(n as u32);
        let expect = (2 * three_n, (3 * three_n).div_ceil(2), (three_n - 1) / 2);
        let got = basis.dims_at(n);
        pass &= got == expect;
        detail.push_str(&format!("n={n}: {got:?} vs {expect:?}; "));
    }
    // projector ranks: the diagonal F matrix must carry exactly those signs
    let f = operator_f(&basis);
    let plus = (0..basis.dim()).filter(|&i| f[(i, i)] > 0.0).count();
    let minus = basis.dim() - plus;
    pass &= plus == basis.gradient_dim() && minus == basis.form_dim();
    verdict("02 hodge-dimension-formulas", pass, detail.trim_end());
}

#[test]
fn criterion_03_tree_dichotomy() {
    let mut pass = true;
    let mut detail = String::new();
    for (name, depth, expect_trivial) in [
        ("interval", 4usize, true),
        ("vicsek", 2, true),
        ("gasket", 3, false),
        ("theta", 3, false),
    ] {
        let model = builtin(name, depth).unwrap();
        let rows = dimension_report(model.form.structure(), depth).unwrap();
        let trivial = rows.iter().all(|r| r.dim_form == 0);
        let max_form = rows.iter().map(|r| r.dim_form).max().unwrap();
        pass &= trivial == expect_trivial;
        if !expect_trivial {
            pass &= max_form >= 1;
        }
        detail.push_str(&format!("{name}: max form dim {max_form}; "));
    }
    verdict("03 tree-dichotomy", pass, detail.trim_end());
}

#[test]
fn criterion_04_projection_cross_algorithm() {
    let form = gasket_form(3);
    let structure = form.structure();
    let mut worst = 0.0f64;
    for level in 1..=3usize {
        for idx in 0..structure.cells(level).len() {
            let cell = structure.cell(level, idx).clone();
            for &p in &cell.vertices {
                let eta = eta_projection(form, p, level, idx).unwrap();
                let mut u = ModuleElement::zero(form, level);
                u.cells[idx][cell.local_index(p).unwrap()] = 1.0;
                u.canonicalize();
                let perp = project_p_perp(form, &u).unwrap();
                let mut diff = eta;
                diff.axpy(-1.0, &perp);
                worst = worst.max(diff.norm(form));
            }
        }
    }
    verdict(
        "04 projection-cross-algorithm",
        worst <= 1e-10,
        &format!("split-vertex vs Neumann max deviation {worst:.3e} over levels 1-3"),
    );
}

#[test]
fn criterion_05_localization() {
    let form = gasket_form(3);
    let basis = gasket_basis(3);
    let h1 = basis.indices_in(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = random_element(form, 3, &mut rng);
        let mut c = basis.coefficients(&u, form).unwrap();
        for &i in &h1 {
            c[i] = 0.0;
        }
        let v = basis.element_from_coefficients(form, &c);
        for idx in 0..3 {
            worst = worst.max(localization_residual(form, &basis, &v, 1, idx).unwrap());
        }
    }
    verdict(
        "05 localization",
        worst <= 1e-9,
        &format!("max residual {worst:.3e} over 100 elements x 3 cells"),
    );
}

#[test]
fn criterion_06_commutator_rank_bound() {
    let form = gasket_form(3);
    let basis = gasket_basis(3);
    let a = Multiplier {
        level: 1,
        values: vec![1.0, -0.7, 0.4],
    };
    let (rank, bound) = rank_check(form, &basis, &a).unwrap();
    verdict(
        "06 commutator-rank-bound",
        rank <= 6 && bound == 6,
        &format!("numerical rank {rank} <= dim H_1 = {bound}"),
    );
}

#[test]
fn criterion_07_oscillation_bound() {
    let form = gasket_form(4);
    let basis = HodgeBasis::assemble(form, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pass = true;
    let mut margin = f64::INFINITY;
    for k in 0..20 {
        let level = if k % 2 == 0 { 1 } else { 2 };
        let a = Multiplier {
            level,
            values: (0..form.structure().cells(level).len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        };
        for p in [1.2, 1.5, 1.8] {
            let (lhs, rhs) = oscillation_bound_check(form, &basis, &a, p).unwrap();
            pass &= lhs <= rhs;
            margin = margin.min(rhs - lhs);
        }
    }
    verdict(
        "07 oscillation-bound",
        pass,
        &format!("lhs <= rhs for 20 multipliers x 3 exponents, min slack {margin:.3e}"),
    );
}

#[test]
fn criterion_08_interval_pressure_exact() {
    let ens = MatrixEnsemble::from_structure(&SelfSimilarStructure::interval()).unwrap();
    let ps: Vec<f64> = (0..25).map(|k| 0.1 + 2.4 * k as f64 / 24.0).collect();
    let mut worst = 0.0f64;
    for m in 1..=16 {
        for &p in &ps {
            let v = pressure_exact(&ens, p, m, MatrixNorm::EnergyHs).unwrap();
            worst = worst.max((v + p * 2f64.ln()).abs());
        }
    }
    let ce = critical_exponent(&ens, &[1, 2, 4, 8, 16], MatrixNorm::EnergyHs).unwrap();
    let q_err = ce
        .entries
        .iter()
        .map(|&(_, q)| (q - 1.0).abs())
        .fold(0.0f64, f64::max);
    verdict(
        "08 interval-pressure-exact",
        worst <= 1e-12 && q_err <= 1e-9,
        &format!("max |P_m(p) + p log 2| = {worst:.3e}, max |q_m - 1| = {q_err:.3e}"),
    );
}

#[test]
fn criterion_09_gasket_second_moment() {
    let ens = MatrixEnsemble::from_structure(&SelfSimilarStructure::gasket()).unwrap();
    let target = 0.2f64.ln();
    let mut values = Vec::new();
    for m in 1..=8 {
        values.push(pressure_exact(&ens, 2.0, m, MatrixNorm::EnergyHs).unwrap());
    }
    let above = values.iter().all(|&v| v >= target - 1e-9);
    let gap = (values[7] - target).abs();
    // non-increasing along the doubling schedule
    let doubling = [values[0], values[1], values[3], values[7]];
    let decreasing = doubling.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    verdict(
        "09 gasket-second-moment",
        above && gap <= 0.02 && decreasing,
        &format!(
            "P_8(2) = {:.6} vs log(1/5) = {target:.6} (gap {gap:.2e}); all P_m(2) >= limit: {above}",
            values[7]
        ),
    );
}

#[test]
fn criterion_10_strict_convexity_and_critical_exponent() {
    let ens = MatrixEnsemble::from_structure(&SelfSimilarStructure::gasket()).unwrap();
    let table = ens.enumerate_words(8, MatrixNorm::EnergyHs).unwrap();
    let jensen = 2.0 * table.log_mean() - table.pressure(2.0);
    let ce = critical_exponent(&ens, &[1, 2, 4, 8], MatrixNorm::EnergyHs).unwrap();
    let d_s = 2.0 * 3f64.ln() / 5f64.ln();
    let q8 = ce.entries.last().unwrap().1;
    let monotone = ce.entries.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    verdict(
        "10 strict-convexity-critical-exponent",
        jensen < -0.01 && q8 < d_s && monotone,
        &format!(
            "jensen gap {jensen:.4}; q_8 = {q8:.6} < d_S = {d_s:.6} (margin {:.4}); monotone {monotone}",
            d_s - q8
        ),
    );
}

#[test]
fn criterion_11_self_similar_identity() {
    let gasket = SelfSimilarStructure::gasket();
    let rg = gasket
        .harmonic_matrices()
        .unwrap()
        .self_similar_identity_residual(gasket.resistance_factors())
        .unwrap();
    let interval = SelfSimilarStructure::interval();
    let ri = interval
        .harmonic_matrices()
        .unwrap()
        .self_similar_identity_residual(interval.resistance_factors())
        .unwrap();
    verdict(
        "11 self-similar-identity",
        rg <= 1e-10 && ri <= 1e-12,
        &format!("gasket residual {rg:.3e} <= 1e-10, interval residual {ri:.3e} <= 1e-12"),
    );
}

fn dirichlet_system(ss: &SelfSimilarStructure, level: usize) -> (ResistanceForm, EigenSystem) {
    let form = ss.decimate(level).unwrap().1;
    let m = VertexMeasure::assemble(&form, ss.measure_weights(), level).unwrap();
    let sys = laplacian_eigen(&form, &m, BoundaryCondition::Dirichlet).unwrap();
    (form, sys)
}

#[test]
fn criterion_12_weyl_slopes() {
    let interval = SelfSimilarStructure::interval();
    let systems: Vec<EigenSystem> = (4..=7).map(|n| dirichlet_system(&interval, n).1).collect();
    let fit_i = weyl_fit(&systems, None).unwrap();

    let gasket = SelfSimilarStructure::gasket();
    let systems: Vec<EigenSystem> = (3..=6).map(|n| dirichlet_system(&gasket, n).1).collect();
    let fit_g = weyl_fit(&systems, None).unwrap();
    let target = 3f64.ln() / 5f64.ln();
    let pass = (fit_i.slope - 0.5).abs() <= 0.05 && (fit_g.slope - target).abs() <= 0.07;
    verdict(
        "12 weyl-slopes",
        pass,
        &format!(
            "interval {:.4} (0.50 +- 0.05), gasket {:.4} ({target:.4} +- 0.07)",
            fit_i.slope, fit_g.slope
        ),
    );
}

#[test]
fn criterion_13_eigenbasis_gram_identity() {
    let gasket = SelfSimilarStructure::gasket();
    let (form, sys) = dirichlet_system(&gasket, 3);
    let basis = HodgeBasis::assemble(&form, 3).unwrap();
    let h = form
        .harmonic_extension(&VertexFunction::new(0, vec![1.0, 0.0, 0.0]), 3)
        .unwrap();
    let ds = gasket.spectral_dimension().unwrap();
    let check = eigenbasis_projection_sum(&form, &basis, &sys, &h, 2.0, Some(ds)).unwrap();
    verdict(
        "13 eigenbasis-gram-identity",
        check.gram_residual <= 1e-8,
        &format!("Gram deviation {:.3e} <= 1e-8", check.gram_residual),
    );
}

#[test]
fn criterion_14_property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let form = gasket_form(2);
    let structure = form.structure();

    // Gauss-Green residuals over random cells and data
    let mut gg = 0.0f64;
    for _ in 0..100 {
        let level = rng.random_range(1..=2usize);
        let idx = rng.random_range(0..structure.cells(level).len());
        let n = structure.cell(level, idx).vertices.len();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = form.cell_energy(level, idx, &u, &h).unwrap();
        let rhs: f64 = structure
            .cell(level, idx)
            .vertices
            .clone()
            .iter()
            .enumerate()
            .map(|(k, &p)| u[k] * form.normal_derivative(level, idx, &h, p).unwrap())
            .sum();
        gg = gg.max((lhs - rhs).abs());
    }

    // trace idempotence on random connected networks
    let mut trace_dev = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(5..9usize);
        let mut edges: Vec<(usize, usize, f64)> = (1..n)
            .map(|v| (v - 1, v, rng.random_range(0.2..2.0)))
            .collect();
        for _ in 0..n {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                edges.push((a.min(b), a.max(b), rng.random_range(0.1..1.0)));
            }
        }
        let net = Network::new(n, &edges).unwrap();
        let u2: Vec<usize> = (0..n.min(4)).collect();
        let u1: Vec<usize> = vec![0, 1];
        let direct = net.trace_to(&u1).unwrap();
        let via = net.trace_to(&u2).unwrap().trace_to(&[0, 1]).unwrap();
        trace_dev = trace_dev.max(ramified::resistance_form::max_edge_deviation(&direct, &via));
    }

    // Pythagoras for the two projections
    let mut pyth = 0.0f64;
    for _ in 0..100 {
        let u = random_element(form, 2, &mut rng);
        let (_, pu) = project_p(form, &u).unwrap();
        let perp = project_p_perp(form, &u).unwrap();
        let n2 = u.inner(&u, form).unwrap();
        pyth = pyth.max(
            (n2 - pu.inner(&pu, form).unwrap() - perp.inner(&perp, form).unwrap()).abs()
                / n2.max(1.0),
        );
    }

    // F^2 = I exactly in Hodge coordinates
    let basis = gasket_basis(2);
    let f = operator_f(&basis);
    let f2 = &f * &f;
    let fsq_exact = f2 == nalgebra::DMatrix::identity(basis.dim(), basis.dim());

    // ||[F, a - a']||_op <= 4 ||a - a'||_inf over 100 random pairs
    let mut ratio = 0.0f64;
    for _ in 0..100 {
        let a = Multiplier {
            level: 1,
            values: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let b = Multiplier {
            level: 1,
            values: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let diff_norm = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        if diff_norm < 1e-12 {
            continue;
        }
        let ca = commutator_matrix(form, &basis, &a).unwrap();
        let cb = commutator_matrix(form, &basis, &b).unwrap();
        let opnorm = singular_values(&(ca - cb)).values[0];
        ratio = ratio.max(opnorm / diff_norm);
    }

    // the commutator identity [F,a] = 2(PaPperp - PperpaP) on one instance
    let a = Multiplier {
        level: 1,
        values: vec![0.3, -0.9, 0.5],
    };
    let c = commutator_matrix(form, &basis, &a).unwrap();
    let m = multiplication_matrix(form, &basis, &a).unwrap();
    let id = nalgebra::DMatrix::identity(basis.dim(), basis.dim());
    let p = (&id + &f) * 0.5;
    let q = (&id - &f) * 0.5;
    let alt = (&p * &m * &q - &q * &m * &p) * 2.0;
    let comm_dev = (c - alt).iter().fold(0.0f64, |mx, &v| mx.max(v.abs()));

    let pass = gg <= 1e-10
        && trace_dev <= 1e-10
        && pyth <= 1e-10
        && fsq_exact
        && ratio <= 4.0 + 1e-9
        && comm_dev <= 1e-10;
    verdict(
        "14 property-suites",
        pass,
        &format!(
            "gauss-green {gg:.2e}; trace idempotence {trace_dev:.2e}; pythagoras {pyth:.2e}; \
             F^2=I {fsq_exact}; commutator continuity ratio {ratio:.3} <= 4; \
             commutator identity {comm_dev:.2e}"
        ),
    );
}

#[test]
fn effective_resistance_is_a_metric() {
    // triangle inequality on random vertex triples of the level-3 gasket network
    let form = gasket_form(3);
    let net = form.level_network(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nv = form.structure().vertex_count(3);
    for _ in 0..100 {
        let x = VertexId(rng.random_range(0..nv)).0;
        let y = rng.random_range(0..nv);
        let z = rng.random_range(0..nv);
        if x == y || y == z || x == z {
            continue;
        }
        let rxy = net.effective_resistance(x, y).unwrap();
        let ryz = net.effective_resistance(y, z).unwrap();
        let rxz = net.effective_resistance(x, z).unwrap();
        assert!(
            rxz <= rxy + ryz + 1e-10,
            "triangle violated: {rxz} > {rxy} + {ryz}"
        );
    }
}
