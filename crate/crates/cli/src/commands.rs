use crate::report::{emit, fmt_f64, Csv, Report};
use crate::{OutputOpts, Target};
use ramified::builtins::{builtin, BuiltinModel};
use ramified::error::{Error, Result};
use ramified::fredholm::{
    commutator_matrix, oscillation_bound_check, rank_check, singular_values, summability_report,
    Multiplier,
};
use ramified::hilbert_module::{
    dimension_report, eta_projection, project_p, project_p_perp, HodgeBasis, ModuleElement,
};
use ramified::io::{OverrideFile, SelfSimilarFile, StructureFile};
use ramified::pressure::{
    convexity_report, critical_exponent, lyapunov, pressure_curve, pressure_exact, pressure_mc,
    pressure_row_mc, MatrixEnsemble, MatrixNorm,
};
use ramified::resistance_form::VertexFunction;
use ramified::spectral::{
    eigenbasis_projection_sum, laplacian_eigen, weyl_fit, BoundaryCondition, EigenSystem,
    VertexMeasure,
};
use ramified::{CellStructure, SelfSimilarStructure};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// A resolved target: either a full model or a bare rule expansion.
enum Model {
    WithForm(BuiltinModel),
    RuleOnly { name: String, cs: CellStructure },
}

impl Model {
    fn name(&self) -> &str {
        match self {
            Model::WithForm(m) => &m.name,
            Model::RuleOnly { name, .. } => name,
        }
    }

    fn structure(&self) -> &CellStructure {
        match self {
            Model::WithForm(m) => m.form.structure(),
            Model::RuleOnly { cs, .. } => cs,
        }
    }

    fn require_form(&self) -> Result<&BuiltinModel> {
        match self {
            Model::WithForm(m) => Ok(m),
            Model::RuleOnly { name, .. } => Err(Error::InvalidParameter(format!(
                "{name}: the file describes only a subdivision rule; conductances are needed here"
            ))),
        }
    }
}

fn load(target: &Target) -> Result<Model> {
    let mut model = match (&target.builtin, &target.file) {
        (Some(name), None) => Model::WithForm(builtin(name, target.depth)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            match SelfSimilarFile::from_json(&text) {
                Ok(file) => {
                    let ss = file.to_structure()?;
                    let (_, form) = ss.decimate(target.depth)?;
                    let measure_weights = ss.measure_weights().to_vec();
                    Model::WithForm(BuiltinModel {
                        name: file.name.clone(),
                        form,
                        self_similar: Some(ss),
                        measure_weights,
                    })
                }
                Err(_) => {
                    let file = StructureFile::from_json(&text)?;
                    let rule = file.to_rule()?;
                    let cs = ramified::build_structure(&rule, target.depth)?;
                    Model::RuleOnly {
                        name: file.name.clone(),
                        cs,
                    }
                }
            }
        }
        _ => {
            return Err(Error::InvalidParameter(
                "pass exactly one of --builtin or --file".into(),
            ))
        }
    };
    if let Some(path) = &target.overrides {
        let text = std::fs::read_to_string(path)?;
        let over = OverrideFile::from_json(&text)?;
        match &mut model {
            Model::WithForm(m) => over.apply(&mut m.form)?,
            Model::RuleOnly { .. } => {
                return Err(Error::InvalidParameter(
                    "conductance overrides need a structure with a form".into(),
                ))
            }
        }
    }
    Ok(model)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "grid spec {spec:?} is not start:end:count"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad grid start {:?}", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad grid end {:?}", parts[1])))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad grid count {:?}", parts[2])))?;
        if n < 2 || hi <= lo {
            return Err(Error::InvalidParameter(
                "grid needs end > start, count >= 2".into(),
            ));
        }
        Ok((0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad exponent {s:?}")))
            })
            .collect()
    }
}

fn parse_multiplier(spec: &str, model: &BuiltinModel, level: usize) -> Result<Multiplier> {
    let form = &model.form;
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[0] {
        "constant" => {
            let v: f64 = parts
                .get(1)
                .unwrap_or(&"1.0")
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad constant in {spec:?}")))?;
            Ok(Multiplier::constant(form, level, v))
        }
        "indicator" => {
            let lvl: usize = parts
                .get(1)
                .ok_or_else(|| Error::InvalidParameter("indicator:<level>:<cell>".into()))?
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad level in {spec:?}")))?;
            let cell: usize = parts
                .get(2)
                .ok_or_else(|| Error::InvalidParameter("indicator:<level>:<cell>".into()))?
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad cell in {spec:?}")))?;
            if cell >= form.structure().cells(lvl).len() {
                return Err(Error::InvalidParameter(format!(
                    "cell {cell} out of range at level {lvl}"
                )));
            }
            Ok(Multiplier::indicator(form, lvl, cell))
        }
        "harmonic" => {
            let k: usize = parts
                .get(1)
                .unwrap_or(&"0")
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad vertex in {spec:?}")))?;
            let v0 = form.structure().vertex_count(0);
            if k >= v0 {
                return Err(Error::InvalidParameter(format!(
                    "boundary vertex {k} out of range (|V_0| = {v0})"
                )));
            }
            let mut values = vec![0.0; v0];
            values[k] = 1.0;
            Multiplier::from_vertex_average(form, &VertexFunction::new(0, values), level)
        }
        "cells" => {
            let values: Vec<f64> = parts
                .get(1)
                .ok_or_else(|| Error::InvalidParameter("cells:<v0,v1,...>".into()))?
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad value {s:?}")))
                })
                .collect::<Result<_>>()?;
            let expect = form.structure().cells(level).len();
            if values.len() != expect {
                return Err(Error::SizeMismatch {
                    expected: expect,
                    got: values.len(),
                });
            }
            Ok(Multiplier { level, values })
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown multiplier kind {other:?}"
        ))),
    }
}

fn finish(report: Report, output: &OutputOpts, csv: Option<Csv>) -> Result<bool> {
    let pass = report.all_pass();
    match output.format.as_str() {
        "json" => {
            let rendered = serde_json::to_string_pretty(&report.to_json()).expect("serializable");
            emit(&rendered, output.out.as_deref())?;
        }
        "csv" => {
            let table = csv
                .ok_or_else(|| Error::InvalidParameter("this command has no CSV payload".into()))?;
            emit(&table.render(), output.out.as_deref())?;
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown format {other:?} (json | csv)"
            )))
        }
    }
    Ok(pass)
}

pub fn cmd_structure(target: &Target, output: &OutputOpts) -> Result<bool> {
    let model = load(target)?;
    let cs = model.structure();
    let mut report = Report::new(
        "structure",
        model.name(),
        target.depth,
        !output.no_timestamp,
    );

    let mut levels = Vec::new();
    let mut ranks = Vec::new();
    for n in 0..=cs.depth() {
        let rank = cs.cycle_rank(n)?;
        ranks.push(rank);
        levels.push(json!({
            "level": n,
            "cells": cs.cells(n).len(),
            "vertices": cs.vertex_count(n),
            "cycle_rank": rank,
        }));
    }
    let validation = cs.validate_frcs();
    let tree = cs.is_tree()?;
    report.insert("levels", json!(levels));
    report.insert("tree", json!(tree));
    report.insert(
        "violations",
        json!(validation
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()),
    );
    report.check_flag("frcs_valid", validation.is_valid());

    let mut csv = Csv::new(&["level", "cells", "vertices", "cycle_rank"]);
    for (n, rank) in ranks.iter().enumerate() {
        csv.row(&[
            n.to_string(),
            cs.cells(n).len().to_string(),
            cs.vertex_count(n).to_string(),
            rank.to_string(),
        ]);
    }
    finish(report, output, Some(csv))
}

pub fn cmd_validate(target: &Target, output: &OutputOpts) -> Result<bool> {
    let model = load(target)?;
    let cs = model.structure();
    let validation = cs.validate_frcs();
    let mut report = Report::new("validate", model.name(), target.depth, !output.no_timestamp);
    report.insert(
        "violations",
        json!(validation
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()),
    );
    report.check_flag("frcs_valid", validation.is_valid());
    finish(report, output, None)
}

pub fn cmd_tree_check(target: &Target, output: &OutputOpts) -> Result<bool> {
    let model = load(target)?;
    let cs = model.structure();
    let mut report = Report::new(
        "tree-check",
        model.name(),
        target.depth,
        !output.no_timestamp,
    );
    let ranks: Vec<usize> = (0..=cs.depth())
        .map(|n| cs.cycle_rank(n))
        .collect::<Result<_>>()?;
    let tree = ranks.iter().all(|&r| r == 0);
    report.insert("cycle_ranks", json!(ranks));
    report.insert("tree", json!(tree));
    report.check_flag("ranks_computed", true);
    finish(report, output, None)
}

pub fn cmd_hodge(target: &Target, output: &OutputOpts, level: Option<usize>) -> Result<bool> {
    let model = load(target)?;
    let model = model.require_form()?;
    let form = &model.form;
    let n_level = level.unwrap_or(target.depth);
    let mut report = Report::new("hodge", &model.name, target.depth, !output.no_timestamp);

    let basis = HodgeBasis::assemble(form, n_level)?;
    let rows = dimension_report(form.structure(), n_level)?;
    let mut dim_table = Vec::new();
    let mut dims_match = true;
    for row in &rows {
        let (h, g, f) = basis.dims_at(row.level);
        dims_match &= h == row.dim_h && g == row.dim_gradient && f == row.dim_form;
        dim_table.push(json!({
            "level": row.level,
            "dim_h": row.dim_h,
            "dim_gradient": row.dim_gradient,
            "dim_form": row.dim_form,
            "assembled": [h, g, f],
        }));
    }
    report.insert("dimensions", json!(dim_table));
    report.check_flag("dimension_formulas", dims_match);

    let gram = basis.gram_residual(form)?;
    report.check_residual("gram_identity", gram, 1e-9);

    // compatibility of the form under one trace step
    if form.depth() > 0
        && form
            .structure()
            .vertex_count(n_level.min(form.depth() - 1) + 1)
            <= 3000
    {
        let lvl = n_level.min(form.depth() - 1);
        let dev = form.check_compatibility(lvl)?;
        report.check_residual("trace_compatibility", dev, 1e-9);
    }

    // Pythagoras and projector idempotence on a deterministic sample
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pyth = 0.0f64;
    let mut idem = 0.0f64;
    for _ in 0..10 {
        let u = random_element(form, n_level, &mut rng);
        let (_, pu) = project_p(form, &u)?;
        let perp = project_p_perp(form, &u)?;
        let n2 = u.inner(&u, form)?;
        let p2 = pu.inner(&pu, form)?;
        let q2 = perp.inner(&perp, form)?;
        pyth = pyth.max((n2 - p2 - q2).abs() / n2.max(1.0));
        let (_, ppu) = project_p(form, &pu)?;
        let mut drift = ppu.clone();
        drift.axpy(-1.0, &pu);
        idem = idem.max(drift.norm(form));
        let (_, p_of_perp) = project_p(form, &perp)?;
        idem = idem.max(p_of_perp.norm(form));
    }
    report.check_residual("pythagoras", pyth, 1e-10);
    report.check_residual("projector_idempotence", idem, 1e-10);

    // split-vertex cross-check at the first refinement level
    if n_level >= 1 {
        let eta_dev = eta_cross_check(form, 1)?;
        report.check_residual("eta_vs_neumann", eta_dev, 1e-10);
    }

    let mut csv = Csv::new(&["level", "dim_h", "dim_gradient", "dim_form"]);
    for row in &rows {
        csv.row(&[
            row.level.to_string(),
            row.dim_h.to_string(),
            row.dim_gradient.to_string(),
            row.dim_form.to_string(),
        ]);
    }
    finish(report, output, Some(csv))
}

fn random_element(
    form: &ramified::ResistanceForm,
    level: usize,
    rng: &mut ChaCha8Rng,
) -> ModuleElement {
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

fn eta_cross_check(form: &ramified::ResistanceForm, level: usize) -> Result<f64> {
    let structure = form.structure_arc();
    let mut worst = 0.0f64;
    for idx in 0..structure.cells(level).len() {
        let cell = structure.cell(level, idx).clone();
        for &p in &cell.vertices {
            let eta = eta_projection(form, p, level, idx)?;
            let mut u = ModuleElement::zero(form, level);
            u.cells[idx][cell.local_index(p).expect("member")] = 1.0;
            u.canonicalize();
            let perp = project_p_perp(form, &u)?;
            let mut diff = eta;
            diff.axpy(-1.0, &perp);
            worst = worst.max(diff.norm(form));
        }
    }
    Ok(worst)
}

pub fn cmd_project(
    target: &Target,
    output: &OutputOpts,
    level: Option<usize>,
    seed: u64,
) -> Result<bool> {
    let model = load(target)?;
    let model = model.require_form()?;
    let form = &model.form;
    let level = level.unwrap_or(target.depth.min(2));
    if level > form.depth() {
        return Err(Error::LevelOutOfRange {
            level,
            depth: form.depth(),
        });
    }
    let mut report = Report::new("project", &model.name, target.depth, !output.no_timestamp);
    report.insert("level", json!(level));

    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    if level >= 1 {
        let structure = form.structure_arc();
        for idx in 0..structure.cells(level).len() {
            let cell = structure.cell(level, idx).clone();
            for &p in &cell.vertices {
                let eta = eta_projection(form, p, level, idx)?;
                let mut u = ModuleElement::zero(form, level);
                u.cells[idx][cell.local_index(p).expect("member")] = 1.0;
                u.canonicalize();
                let perp = project_p_perp(form, &u)?;
                let mut diff = eta.clone();
                diff.axpy(-1.0, &perp);
                let residual = diff.norm(form);
                worst = worst.max(residual);
                rows.push(json!({
                    "cell": cell.address.to_string(),
                    "vertex": p.0,
                    "residual": residual,
                    "form_part_norm": perp.norm(form),
                }));
            }
        }
    }
    report.insert("pairs", json!(rows));
    report.check_residual("eta_vs_neumann", worst, 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pyth = 0.0f64;
    for _ in 0..20 {
        let u = random_element(form, level, &mut rng);
        let (_, pu) = project_p(form, &u)?;
        let perp = project_p_perp(form, &u)?;
        let n2 = u.inner(&u, form)?;
        pyth = pyth.max((n2 - pu.inner(&pu, form)? - perp.inner(&perp, form)?).abs() / n2.max(1.0));
    }
    report.check_residual("pythagoras", pyth, 1e-10);
    finish(report, output, None)
}

pub fn cmd_commutator(
    target: &Target,
    output: &OutputOpts,
    multiplier: &str,
    level: usize,
    p_spec: &str,
) -> Result<bool> {
    let model = load(target)?;
    let model = model.require_form()?;
    let form = &model.form;
    let ps = parse_grid(p_spec)?;
    let mult = parse_multiplier(multiplier, model, level)?;
    let basis = HodgeBasis::assemble(form, target.depth)?;
    let mut report = Report::new(
        "commutator",
        &model.name,
        target.depth,
        !output.no_timestamp,
    );
    report.insert("multiplier", json!(multiplier));
    report.insert("multiplier_level", json!(mult.level));

    let c = commutator_matrix(form, &basis, &mult)?;
    let spectrum = singular_values(&c);
    let summary = summability_report(&spectrum, &ps)?;
    report.insert(
        "p_sums",
        json!(summary
            .entries
            .iter()
            .map(|e| json!({"p": e.p, "p_sum": e.p_sum, "weak_sum": e.weak_sum}))
            .collect::<Vec<_>>()),
    );
    report.insert(
        "dixmier_partial_last",
        json!(summary.dixmier_partials.last().copied().unwrap_or(0.0)),
    );

    // singular values of the antisymmetric block structure pair up
    let s0 = spectrum.values.first().copied().unwrap_or(0.0);
    let significant: Vec<f64> = spectrum
        .values
        .iter()
        .copied()
        .filter(|&v| v > 1e-9 * s0)
        .collect();
    let paired = significant.len().is_multiple_of(2)
        && significant
            .chunks(2)
            .all(|c| (c[0] - c[1]).abs() <= 1e-9 * s0.max(1.0));
    report.check_flag("singular_values_pair", paired || s0 == 0.0);

    let (rank, bound) = rank_check(form, &basis, &mult)?;
    report.insert("rank", json!(rank));
    report.insert("rank_bound", json!(bound));
    report.check_flag("rank_within_bound", rank <= bound);

    let mut osc_rows = Vec::new();
    let mut osc_ok = true;
    for &p in ps.iter().filter(|&&p| p < 2.0) {
        let (lhs, rhs) = oscillation_bound_check(form, &basis, &mult, p)?;
        osc_ok &= lhs <= rhs + 1e-12;
        osc_rows.push(json!({"p": p, "lhs": lhs, "rhs": rhs}));
    }
    report.insert("oscillation_bound", json!(osc_rows));
    report.check_flag("oscillation_bound_holds", osc_ok);

    let mut csv = Csv::new(&["k", "s_k"]);
    for (k, s) in spectrum.values.iter().enumerate() {
        csv.row(&[k.to_string(), fmt_f64(*s)]);
    }
    finish(report, output, Some(csv))
}

pub fn cmd_spectral(
    target: &Target,
    output: &OutputOpts,
    level: Option<usize>,
    p_spec: &str,
    boundary: &str,
) -> Result<bool> {
    let model = load(target)?;
    let model = model.require_form()?;
    let form = &model.form;
    let depth = target.depth;
    let lo = level.unwrap_or(depth.saturating_sub(3)).max(1);
    if lo > depth {
        return Err(Error::InvalidParameter(format!(
            "--level {lo} above --depth {depth}"
        )));
    }
    let bc = match boundary {
        "dirichlet" => BoundaryCondition::Dirichlet,
        "neumann" => BoundaryCondition::Neumann,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown boundary condition {other:?}"
            )))
        }
    };
    let ps = parse_grid(p_spec)?;
    let mut report = Report::new("spectral", &model.name, depth, !output.no_timestamp);
    report.insert("boundary", json!(boundary));
    report.insert("fit_levels", json!((lo..=depth).collect::<Vec<_>>()));

    let mut systems: Vec<EigenSystem> = Vec::new();
    let mut relation = 0.0f64;
    let mut ortho = 0.0f64;
    for n in lo..=depth {
        let measure = VertexMeasure::assemble(form, &model.measure_weights, n)?;
        let sys = laplacian_eigen(form, &measure, bc)?;
        let lam_max = sys.eigenvalues.last().copied().unwrap_or(1.0);
        relation = relation.max(sys.relation_residual(form) / lam_max.max(1.0));
        ortho = ortho.max(sys.orthonormality_residual());
        systems.push(sys);
    }
    report.check_residual("eigen_relation", relation, 1e-9);
    report.check_residual("eigen_orthonormality", ortho, 1e-9);
    match bc {
        BoundaryCondition::Dirichlet => {
            let lam1 = systems
                .iter()
                .map(|s| s.eigenvalues[0])
                .fold(f64::INFINITY, f64::min);
            report.insert("lambda_1_min", json!(lam1));
            report.check_flag("dirichlet_gap_positive", lam1 > 0.0);
        }
        BoundaryCondition::Neumann => {
            let lam0 = systems
                .iter()
                .map(|s| s.eigenvalues[0].abs())
                .fold(0.0f64, f64::max);
            report.check_residual("neumann_ground_state", lam0, 1e-8);
        }
    }

    if systems.len() >= 2 {
        let fit = weyl_fit(&systems, None)?;
        report.insert(
            "weyl_fit",
            json!({
                "slope": fit.slope,
                "intercept": fit.intercept,
                "residual": fit.residual,
                "points": fit.points,
                "window": [fit.window.0, fit.window.1],
            }),
        );
        if let Some(ss) = &model.self_similar {
            let ds = ss.spectral_dimension()?;
            report.insert("spectral_dimension", json!(ds));
            report.insert("expected_slope", json!(ds / 2.0));
        }
    }

    // eigenbasis projection trend at the lowest fitted level
    if bc == BoundaryCondition::Dirichlet && lo >= 1 {
        let measure = VertexMeasure::assemble(form, &model.measure_weights, lo)?;
        let sys = laplacian_eigen(form, &measure, bc)?;
        let basis = HodgeBasis::assemble(form, lo)?;
        let v0 = form.structure().vertex_count(0);
        let mut values = vec![0.0; v0];
        values[0] = 1.0;
        let a = VertexFunction::new(0, values);
        let ds = match &model.self_similar {
            Some(ss) => Some(ss.spectral_dimension()?),
            None => None,
        };
        let mut trend = Vec::new();
        let mut gram = 0.0f64;
        for &p in &ps {
            let check = eigenbasis_projection_sum(form, &basis, &sys, &a, p, ds)?;
            gram = gram.max(check.gram_residual);
            trend.push(json!({
                "p": p,
                "sum": check.sum,
                "energy_ratio": check.energy_ratio,
                "below_critical": check.below_critical,
            }));
        }
        report.insert("eigenbasis_trend", json!(trend));
        report.check_residual("eigenbasis_gram", gram, 1e-8);
    }

    let mut csv = Csv::new(&["level", "k", "lambda"]);
    for sys in &systems {
        for (k, lam) in sys.eigenvalues.iter().enumerate() {
            csv.row(&[sys.level.to_string(), k.to_string(), fmt_f64(*lam)]);
        }
    }
    finish(report, output, Some(csv))
}

pub fn cmd_pressure(
    target: &Target,
    output: &OutputOpts,
    p_spec: &str,
    seed: u64,
    norm_spec: &str,
    samples: u64,
) -> Result<bool> {
    // --depth bounds the product length; the structure itself is only needed
    // at one subdivision to extract the harmonic matrices
    let shallow = Target {
        depth: 1,
        ..target.clone()
    };
    let model = load(&shallow)?;
    let model = model.require_form()?;
    let ss: &SelfSimilarStructure = model.self_similar.as_ref().ok_or_else(|| {
        Error::InvalidParameter("pressure statistics need a self-similar structure".into())
    })?;
    let norm: MatrixNorm = norm_spec.parse()?;
    let ps = parse_grid(p_spec)?;
    let mut report = Report::new("pressure", &model.name, target.depth, !output.no_timestamp);
    report.insert("norm", json!(norm_spec));
    report.insert("seed", json!(seed));

    let ens = MatrixEnsemble::from_structure(ss)?;
    if let Some(r) = ens.uniform_r() {
        let hm = ss.harmonic_matrices()?;
        let residual = hm.self_similar_identity_residual(ss.resistance_factors())?;
        report.insert("resistance_factor", json!(r));
        report.check_residual("self_similar_identity", residual, 1e-10);
    }

    // doubling schedule up to the requested depth, bounded by the cap
    let mut schedule = Vec::new();
    let mut m = 1usize;
    while m <= target.depth.max(1) {
        if (ens.arity() as f64).powi(m as i32) > ramified::pressure::ENUMERATION_CAP as f64 {
            break;
        }
        schedule.push(m);
        m *= 2;
    }
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("no feasible product length".into()));
    }
    let m_max = *schedule.last().expect("nonempty");

    let mut curve = pressure_curve(&ens, &ps, &schedule, norm)?;
    // one sampled row past the exact schedule when it was depth-limited
    if 2 * m_max <= target.depth {
        curve.rows.push(pressure_row_mc(
            &ens,
            &ps,
            2 * m_max,
            samples.max(100),
            seed,
            norm,
        )?);
    }
    // under a submultiplicative norm the small-m roots can sit outside the
    // bracket; report those lengths as null instead of failing the run
    let mut entries: Vec<(usize, Option<f64>)> = Vec::new();
    for &m in &schedule {
        match critical_exponent(&ens, &[m], norm) {
            Ok(ce) => entries.push((m, Some(ce.entries[0].1))),
            Err(Error::NoSignChange { .. }) => entries.push((m, None)),
            Err(e) => return Err(e),
        }
    }
    let present: Vec<(usize, f64)> = entries
        .iter()
        .filter_map(|&(m, q)| q.map(|q| (m, q)))
        .collect();
    if present.is_empty() {
        return Err(Error::NoSignChange { lo: 0.1, hi: 2.5 });
    }
    let extrapolated = if present.len() >= 3 {
        let k = present.len();
        let (q0, q1, q2) = (present[k - 3].1, present[k - 2].1, present[k - 1].1);
        let denom = q2 - 2.0 * q1 + q0;
        (denom.abs() > 1e-14).then(|| q2 - (q2 - q1) * (q2 - q1) / denom)
    } else {
        None
    };
    report.insert(
        "critical_exponent",
        json!({
            "entries": entries,
            "extrapolated": extrapolated,
        }),
    );
    let monotone = present.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    report.check_flag("critical_exponent_monotone", monotone);
    if let Some(ds) = model
        .self_similar
        .as_ref()
        .map(|s| s.spectral_dimension())
        .transpose()?
    {
        report.insert("spectral_dimension", json!(ds));
        report.insert(
            "margin_below_spectral_dimension",
            json!(ds - present.last().expect("nonempty").1),
        );
    }

    let ly = lyapunov(&ens, m_max, samples.max(100), seed, norm)?;
    report.insert(
        "lyapunov",
        json!({
            "estimate": ly.estimate,
            "stderr": ly.stderr,
            "derivative_at_zero": ly.derivative_at_zero,
        }),
    );
    if let Some(fd) = ly.derivative_at_zero {
        // the one-sided difference carries O(1e-6) quotient noise
        let agree = (ly.estimate - fd).abs() <= (3.0 * ly.stderr).max(1e-6);
        report.check_flag("lyapunov_consistent", agree);
    }

    let lyap = ly.derivative_at_zero.unwrap_or(ly.estimate);
    let p2 = pressure_exact(&ens, 2.0, m_max, norm)?;
    // convexity on a uniform grid; rebuild one if the user grid is not uniform
    let uniform = ps.len() >= 3
        && ps
            .windows(2)
            .all(|w| ((w[1] - w[0]) - (ps[1] - ps[0])).abs() < 1e-9);
    let grid: Vec<f64> = if uniform {
        ps.clone()
    } else {
        (0..25).map(|k| 0.1 + 2.4 * k as f64 / 24.0).collect()
    };
    let last_row = pressure_curve(&ens, &grid, &[m_max], norm)?;
    let conv = convexity_report(&grid, &last_row.rows[0].values, lyap, p2, 1e-6)?;
    report.insert(
        "convexity",
        json!({
            "convex": conv.convex,
            "strictly_convex": conv.strictly_convex,
            "min_second_difference": conv.min_second_difference,
            "jensen_gap": conv.jensen_gap,
        }),
    );
    report.check_flag("pressure_convex", conv.convex);

    // Monte Carlo cross-check at the largest exact length
    let (mc, se) = pressure_mc(&ens, 2.0, m_max, samples.max(100), seed, norm)?;
    report.insert("mc_p2", json!({"estimate": mc, "stderr": se, "exact": p2}));
    report.check_flag("mc_matches_exact", (mc - p2).abs() <= (3.0 * se).max(1e-9));

    let mut csv = Csv::new(&["p", "m", "pressure", "stderr"]);
    for row in &curve.rows {
        for (i, (p, v)) in curve.ps.iter().zip(&row.values).enumerate() {
            let se = row
                .stderr
                .as_ref()
                .map(|s| fmt_f64(s[i]))
                .unwrap_or_default();
            csv.row(&[fmt_f64(*p), row.m.to_string(), fmt_f64(*v), se]);
        }
    }
    finish(report, output, Some(csv))
}
