//! The subcommands as library functions, so they can be driven from tests.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use tfm_core::experiments::{
    add_noise_with, compare_models, estimate_noise_from_margin, force_ring, force_spots, l2_norm, relative_error_with,
    GridData,
};
use tfm_core::fem::{FeFunction, FeSpace};
use tfm_core::forward25d::Forward25;
use tfm_core::forward2d::{LinearOperator2d, NonlinearOperator2d, Problem2d};
use tfm_core::inversion::{cgne, newton_cg, InversionConfig, SolveReport, StopReason};
use tfm_core::linalg::{CgOptions, CsrMatrix};
use tfm_core::mesh::{build_box_mesh, build_rect_mesh_with, BoundaryTag, Mesh};
use tfm_core::selfcheck::{SelfCheck, CHECKS};

use crate::config::{ExperimentConfig, ForceSource, ModelKind, NoiseSpec, TruthSource};
use crate::io::{fmt_f64, read_grid_csv, write_field_csv, write_field_vtk, write_matrix_market, write_mesh_vtk};
use crate::report::{report_values, write_history_csv, KeyValues, Manifest};
use crate::CliError;

/// What a command produced. `failure` is set when a solver failed after
/// artifacts were written; the process then exits with status 1.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub summary: KeyValues,
    pub failure: Option<String>,
}

/// A loaded configuration together with its source text.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub text: String,
}

impl Loaded {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let (config, text) = ExperimentConfig::load(path)?;
        Ok(Self { config, text })
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self, CliError> {
        Ok(Self {
            config: ExperimentConfig::from_str_in(text, base)?,
            text: text.to_string(),
        })
    }
}

enum Forward {
    Box(Forward25),
    Plane(Problem2d),
}

impl Forward {
    fn build(cfg: &ExperimentConfig, cells: &[usize], flipped: bool) -> Result<Self, CliError> {
        let d = &cfg.domain;
        let cg = CgOptions::with_tol(cfg.cg_tol);
        Ok(match cfg.model {
            ModelKind::Linear25d => {
                let mesh = build_box_mesh(d.half_width, d.depth, cells[0], cells[1], cells[2])?;
                Forward::Box(Forward25::new(Arc::new(mesh), d.order, cfg.material)?.with_cg(cg))
            }
            _ => {
                let mesh = build_rect_mesh_with(d.half_width, cells[0], cells[1], flipped)?;
                Forward::Plane(Problem2d::new(Arc::new(mesh), d.order, cfg.material)?.with_cg(cg))
            }
        })
    }

    fn param_space(&self) -> &Arc<FeSpace> {
        match self {
            Forward::Box(f) => f.trace_space(),
            Forward::Plane(p) => p.space(),
        }
    }

    fn data_space(&self) -> &Arc<FeSpace> {
        match self {
            Forward::Box(f) => f.space(),
            Forward::Plane(p) => p.space(),
        }
    }

    fn param_mass(&self) -> &CsrMatrix {
        match self {
            Forward::Box(f) => f.trace_mass(),
            Forward::Plane(p) => p.mass(),
        }
    }

    fn data_mass(&self) -> &CsrMatrix {
        match self {
            Forward::Box(f) => f.mass(),
            Forward::Plane(p) => p.mass(),
        }
    }

    fn mesh(&self) -> &Arc<Mesh> {
        self.data_space().mesh()
    }

    /// Parameter coefficients of an analytic field: traction for 2.5D, force
    /// density `t / h` in 2D.
    fn analytic_param(&self, force: &ForceSource, thickness: f64) -> Option<Vec<f64>> {
        let scale = match self {
            Forward::Box(_) => 1.0,
            Forward::Plane(_) => 1.0 / thickness,
        };
        let field = |x: &[f64; 3]| -> [f64; 3] {
            let t = match *force {
                ForceSource::Ring(a) => force_ring(a, x),
                ForceSource::Spots(b) => force_spots(b, x),
                ForceSource::Csv(_) => [0.0; 3],
            };
            [scale * t[0], scale * t[1], scale * t[2]]
        };
        match force {
            ForceSource::Csv(_) => None,
            _ => Some(self.param_space().interpolate(field)),
        }
    }

    fn to_traction(&self, param: &[f64], thickness: f64) -> Vec<f64> {
        match self {
            Forward::Box(_) => param.to_vec(),
            Forward::Plane(_) => param.iter().map(|v| v * thickness).collect(),
        }
    }

    fn param_from_traction(&self, traction: &[f64], thickness: f64) -> Vec<f64> {
        match self {
            Forward::Box(_) => traction.to_vec(),
            Forward::Plane(_) => traction.iter().map(|v| v / thickness).collect(),
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn describe_mesh(kv: &mut KeyValues, prefix: &str, fwd: &Forward) {
    let mesh = fwd.mesh();
    kv.push(&format!("{prefix}_cells"), mesh.num_cells())
        .push(&format!("{prefix}_dofs"), fwd.data_space().num_dofs())
        .push(&format!("{prefix}_param_dofs"), fwd.param_space().num_dofs())
        .push(&format!("{prefix}_mesh_hash"), format!("{:016x}", mesh.fingerprint()));
}

/// Forward simulation on the data mesh, with noise.
pub fn simulate(loaded: &Loaded) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    if matches!(cfg.force, ForceSource::Csv(_)) {
        return Err(CliError::Usage("simulate needs an analytic force field (ring or spots)".into()));
    }
    let fwd = Forward::build(cfg, &cfg.domain.data_cells, false)?;
    let param = fwd.analytic_param(&cfg.force, cfg.thickness).expect("analytic force");
    let exact = match &fwd {
        Forward::Box(f) => f.apply_coeffs(&param)?,
        Forward::Plane(p) if cfg.model == ModelKind::Linear2d => p.solve_linear(&param)?,
        Forward::Plane(p) => p.solve_nonlinear(&param, &cfg.newton, None).map_err(|f| CliError::Core(f.error))?.u.into_coeffs(),
    };
    let space = fwd.data_space().clone();
    let exact_fn = FeFunction::new(space.clone(), exact)?;
    let mut out = Outcome::default();
    let norm = l2_norm(fwd.data_mass(), exact_fn.coeffs());
    let (noisy, delta, level) = match cfg.noise {
        NoiseSpec::Level { percent, seed } => {
            let n = add_noise_with(fwd.data_mass(), &exact_fn, percent, seed)?;
            (n.field, n.delta, n.level_percent)
        }
        NoiseSpec::Delta { delta, seed } => {
            if delta > 0.0 && norm == 0.0 {
                return Err(CliError::Core(tfm_core::Error::InvalidArgument("cannot add noise to a zero field")));
            }
            let percent = if delta == 0.0 { 0.0 } else { 100.0 * delta / norm };
            let n = add_noise_with(fwd.data_mass(), &exact_fn, percent, seed)?;
            (n.field, n.delta, n.level_percent)
        }
        NoiseSpec::Margin(_) => {
            out.warnings.push("margin noise only applies to measured data; simulated data stay noise-free".into());
            (exact_fn.clone(), 0.0, 0.0)
        }
    };

    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut manifest = Manifest::new("simulate", &loaded.text);
    manifest
        .values
        .push("model", cfg.model.name())
        .push("seed", cfg.noise.seed())
        .push("delta", fmt_f64(delta))
        .push("level_percent", fmt_f64(level))
        .push("exact_l2_norm", fmt_f64(norm));
    describe_mesh(&mut manifest.values, "data", &fwd);

    let traction = fwd.to_traction(&param, cfg.thickness);
    let files = [
        ("truth_traction.csv", fwd.param_space().clone(), traction.clone(), "t"),
        ("displacement.csv", space.clone(), exact_fn.coeffs().to_vec(), "u"),
        ("noisy_displacement.csv", space.clone(), noisy.coeffs().to_vec(), "u"),
    ];
    for (name, sp, values, prefix) in &files {
        let p = dir.join(name);
        write_field_csv(&p, sp, values, prefix)?;
        manifest.add_file(p);
    }
    let p = dir.join("displacement.vtk");
    write_field_vtk(&p, "tfm displacement", &space, &[("displacement", exact_fn.coeffs()), ("noisy_displacement", noisy.coeffs())])?;
    manifest.add_file(p);
    let p = dir.join("traction.vtk");
    write_field_vtk(&p, "tfm traction", fwd.param_space(), &[("traction", &traction)])?;
    manifest.add_file(p);

    let mp = dir.join("manifest.txt");
    manifest.write(&mp)?;
    out.files = manifest.files().to_vec();
    out.files.push(mp);
    out.summary = manifest.values;
    Ok(out)
}

fn axes_match(grid: &GridData, space: &FeSpace) -> bool {
    let dim = grid.dim();
    (0..dim).all(|d| {
        let mut a: Vec<f64> = space.nodes().iter().map(|x| x[d]).collect();
        a.sort_by(f64::total_cmp);
        a.dedup_by(|p, q| (*p - *q).abs() <= 1e-9 * (1.0 + q.abs()));
        let g = grid.axis(d);
        a.len() == g.len() && a.iter().zip(g).all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + q.abs()))
    })
}

/// `δ ≈ p ‖u^δ‖ / √(1 + p²)` for relative level `p`, assuming the noise is
/// uncorrelated with the exact data.
pub fn delta_from_level(noisy_norm: f64, percent: f64) -> f64 {
    let p = percent / 100.0;
    p * noisy_norm / (1.0 + p * p).sqrt()
}

/// Inversion of displacement data on the reconstruction mesh.
pub fn reconstruct(loaded: &Loaded, data: Option<&Path>) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let data_path = match (data, &cfg.force) {
        (Some(p), _) => p.to_path_buf(),
        (None, ForceSource::Csv(p)) => p.clone(),
        (None, _) => return Err(CliError::Usage("reconstruct needs --data or a csv force source".into())),
    };
    let fwd = Forward::build(cfg, &cfg.domain.recon_cells, cfg.domain.flip_recon)?;
    let space = fwd.data_space().clone();
    let dim = space.mesh().dim();
    let grid = read_grid_csv(&data_path, dim, "u", space.value_dim())?;
    let (lo, hi) = space.mesh().bounds();
    let tol = 1e-6 * cfg.domain.half_width;
    if !grid.covers(&lo[..dim], &hi[..dim], tol) {
        return Err(CliError::Input(format!(
            "{}: data grid does not cover the configured domain",
            data_path.display()
        )));
    }
    let u_delta = grid.interpolate_onto(&space)?;
    let mut out = Outcome::default();
    if cfg.noise.is_noise_free() && axes_match(&grid, &space) {
        out.warnings.push(
            "inverse crime: noise-free data sampled on the reconstruction mesh itself; use a different mesh for a fair test".into(),
        );
    }

    let noisy_norm = l2_norm(fwd.data_mass(), &u_delta);
    let (delta, delta_source) = match cfg.noise {
        NoiseSpec::Level { percent, .. } => (delta_from_level(noisy_norm, percent), "level"),
        NoiseSpec::Delta { delta, .. } => (delta, "delta"),
        NoiseSpec::Margin(region) => {
            let f = FeFunction::new(space.clone(), u_delta.clone())?;
            (estimate_noise_from_margin(&f, &region)?, "margin")
        }
    };

    let truth = match &cfg.truth {
        None => None,
        Some(TruthSource::Analytic) => fwd.analytic_param(&cfg.force, cfg.thickness),
        Some(TruthSource::File(p)) => {
            let pspace = fwd.param_space();
            let g = read_grid_csv(p, 2, "t", pspace.value_dim())?;
            Some(fwd.param_from_traction(&g.interpolate_onto(pspace)?, cfg.thickness))
        }
    };
    let initial = match &cfg.inversion.initial_guess {
        None => None,
        Some(p) if cfg.model == ModelKind::Nonlinear2d => {
            let pspace = fwd.param_space();
            let g = read_grid_csv(p, 2, "t", pspace.value_dim())?;
            Some(fwd.param_from_traction(&g.interpolate_onto(pspace)?, cfg.thickness))
        }
        Some(_) => {
            out.warnings.push("initial_guess is only used by the nonlinear model; ignored".into());
            None
        }
    };

    let inv = InversionConfig {
        tau: cfg.inversion.tau,
        delta,
        rho: cfg.inversion.rho,
        max_outer: cfg.inversion.max_outer,
        max_inner: cfg.inversion.max_inner,
        param_space: cfg.inversion.param_space,
        seed: cfg.noise.seed(),
        residual_floor: cfg.inversion.residual_floor,
    };
    let param_mass = fwd.param_mass().clone();
    let monitor_fn = truth
        .as_ref()
        .map(|t| move |x: &[f64]| relative_error_with(&param_mass, x, t).unwrap_or(f64::NAN));
    let monitor: Option<&dyn Fn(&[f64]) -> f64> = monitor_fn.as_ref().map(|f| f as &dyn Fn(&[f64]) -> f64);

    let start = Instant::now();
    let (x, mut report): (Vec<f64>, SolveReport) = match &fwd {
        Forward::Box(f) => cgne(f, &u_delta, &inv, monitor)?,
        Forward::Plane(p) if cfg.model == ModelKind::Linear2d => {
            let op = LinearOperator2d {
                problem: p,
                space: cfg.inversion.param_space,
            };
            cgne(&op, &u_delta, &inv, monitor)?
        }
        Forward::Plane(p) => {
            let op = NonlinearOperator2d {
                problem: p,
                space: cfg.inversion.param_space,
                options: cfg.newton,
            };
            newton_cg(&op, &u_delta, &inv, initial.as_deref(), monitor)?
        }
    };
    report.wall_time_seconds = Some(start.elapsed().as_secs_f64());

    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut manifest = Manifest::new("reconstruct", &loaded.text);
    manifest
        .values
        .push("model", cfg.model.name())
        .push("data_file", data_path.display())
        .push("seed", cfg.noise.seed())
        .push("delta", fmt_f64(delta))
        .push("delta_source", delta_source)
        .push("estimated_level_percent", fmt_f64(if noisy_norm > 0.0 { 100.0 * delta / noisy_norm } else { 0.0 }))
        .push("param_space", cfg.inversion.param_space.name());
    describe_mesh(&mut manifest.values, "recon", &fwd);

    let traction = fwd.to_traction(&x, cfg.thickness);
    let p = dir.join("reconstruction.csv");
    write_field_csv(&p, fwd.param_space(), &traction, "t")?;
    manifest.add_file(p);
    let truth_traction = truth.as_ref().map(|t| fwd.to_traction(t, cfg.thickness));
    let mut fields: Vec<(&str, &[f64])> = vec![("traction", &traction)];
    if let Some(t) = &truth_traction {
        fields.push(("truth_traction", t));
    }
    let p = dir.join("reconstruction.vtk");
    write_field_vtk(&p, "tfm reconstruction", fwd.param_space(), &fields)?;
    manifest.add_file(p);
    let p = dir.join("report.csv");
    write_history_csv(&p, &report)?;
    manifest.add_file(p);

    let mut kv = report_values(&report, delta, cfg.inversion.tau);
    kv.push("model", cfg.model.name()).push("param_space", cfg.inversion.param_space.name());
    for w in &out.warnings {
        kv.push("warning", w);
    }
    let rp = dir.join("report.txt");
    kv.write(&rp)?;
    let mp = dir.join("manifest.txt");
    manifest.write(&mp)?;

    out.files = manifest.files().to_vec();
    out.files.extend([rp, mp]);
    if report.stop_reason == StopReason::Aborted {
        out.failure = Some(match &report.failure {
            Some(e) => format!("forward solve failed: {e}"),
            None => "inversion aborted".into(),
        });
    }
    out.summary = kv;
    Ok(out)
}

/// Linear against nonlinear forward model over a magnitude sweep, plus the
/// optional two-stage reconstruction.
pub fn compare(loaded: &Loaded) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    if cfg.model.is_3d() {
        return Err(CliError::Usage("compare works on the 2D models".into()));
    }
    if cfg.compare.magnitudes.is_empty() {
        return Err(CliError::Usage("empty magnitude sweep".into()));
    }
    let Forward::Plane(problem) = Forward::build(cfg, &cfg.domain.recon_cells, cfg.domain.flip_recon)? else {
        unreachable!()
    };
    let mut out = Outcome::default();
    if !matches!(cfg.force, ForceSource::Ring(_)) {
        out.warnings.push("the comparison sweep always uses the ring field".into());
    }
    let rows = compare_models(&cfg.compare.magnitudes, &problem, &cfg.newton)?;

    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut manifest = Manifest::new("compare", &loaded.text);
    manifest.values.push("model", cfg.model.name()).push("recon_dofs", problem.space().num_dofs());

    let path = dir.join("comparison.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    w.write_record(["magnitude", "relative_force_norm", "discrepancy_percent", "homotopy_steps", "newton_iterations", "status"])
        .map_err(|e| CliError::io(&path, e))?;
    for r in &rows {
        let status = r.error.as_ref().map_or("ok".to_string(), |e| e.to_string());
        w.write_record([
            fmt_f64(r.magnitude),
            fmt_f64(r.relative_force_norm),
            fmt_f64(r.discrepancy_percent),
            r.homotopy_steps.to_string(),
            r.newton_iterations.to_string(),
            status,
        ])
        .map_err(|e| CliError::io(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    manifest.add_file(path);

    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let monotone = rows.windows(2).all(|p| p[1].discrepancy_percent >= p[0].discrepancy_percent);
    let mut kv = KeyValues::default();
    kv.push("magnitudes", rows.len())
        .push("failed_rows", failed)
        .push("monotone", monotone)
        .push("first_discrepancy_percent", fmt_f64(rows[0].discrepancy_percent))
        .push("last_discrepancy_percent", fmt_f64(rows[rows.len() - 1].discrepancy_percent));
    if failed > 0 {
        out.failure = Some(format!("{failed} nonlinear solve(s) failed in the sweep"));
    }

    if let Some(ts) = &cfg.compare.two_stage {
        let (lin, nl) = two_stage(cfg, &problem, ts.magnitude, ts.linear_iterations, ts.refine_iterations)?;
        let path = dir.join("two_stage.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(["stage", "iteration", "residual", "error"]).map_err(|e| CliError::io(&path, e))?;
        for (stage, rep) in [("linear", &lin), ("nonlinear", &nl)] {
            for (k, r) in rep.residual_history.iter().enumerate() {
                w.write_record([stage.to_string(), k.to_string(), fmt_f64(*r), fmt_f64(rep.error_history[k])])
                    .map_err(|e| CliError::io(&path, e))?;
            }
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        manifest.add_file(path);
        let best = |r: &SolveReport| r.best_iteration().map_or(f64::NAN, |b| r.error_history[b]);
        kv.push("two_stage_magnitude", fmt_f64(ts.magnitude))
            .push("linear_min_error_percent", fmt_f64(best(&lin)))
            .push("nonlinear_min_error_percent", fmt_f64(best(&nl)))
            .push("nonlinear_stop_reason", nl.stop_reason.name());
        if nl.stop_reason == StopReason::Aborted {
            out.failure = Some("nonlinear refinement aborted".into());
        }
    }
    for w in &out.warnings {
        kv.push("warning", w);
    }
    let sp = dir.join("summary.txt");
    kv.write(&sp)?;
    let mp = dir.join("manifest.txt");
    manifest.write(&mp)?;
    out.files = manifest.files().to_vec();
    out.files.extend([sp, mp]);
    out.summary = kv;
    Ok(out)
}

/// Noise-free ring data from the hyperelastic model on the data mesh,
/// reconstructed linearly and then refined with Newton-CG.
pub fn two_stage(
    cfg: &ExperimentConfig,
    problem: &Problem2d,
    magnitude: f64,
    linear_iterations: usize,
    refine_iterations: usize,
) -> Result<(SolveReport, SolveReport), CliError> {
    let Forward::Plane(fine) = Forward::build(cfg, &cfg.domain.data_cells, false)? else {
        unreachable!()
    };
    let t_fine = fine.space().interpolate(|x| force_ring(magnitude / cfg.thickness, x));
    let state = fine.solve_nonlinear(&t_fine, &cfg.newton, None).map_err(|f| CliError::Core(f.error))?;
    let data = problem.space().transfer_from(fine.space(), state.u.coeffs());
    let truth = problem.space().interpolate(|x| force_ring(magnitude / cfg.thickness, x));
    let mass = problem.mass();
    let monitor = |x: &[f64]| relative_error_with(mass, x, &truth).unwrap_or(f64::NAN);

    let lin_cfg = InversionConfig {
        tau: cfg.inversion.tau,
        delta: 0.0,
        max_inner: linear_iterations,
        param_space: cfg.inversion.param_space,
        residual_floor: cfg.inversion.residual_floor,
        ..Default::default()
    };
    let op = LinearOperator2d {
        problem,
        space: cfg.inversion.param_space,
    };
    let (x0, lin) = cgne(&op, &data, &lin_cfg, Some(&monitor))?;
    let nl_cfg = InversionConfig {
        max_outer: refine_iterations,
        max_inner: cfg.inversion.max_inner,
        rho: cfg.inversion.rho,
        ..lin_cfg
    };
    let op = NonlinearOperator2d {
        problem,
        space: cfg.inversion.param_space,
        options: cfg.newton,
    };
    let (_, nl) = newton_cg(&op, &data, &nl_cfg, Some(&x0), Some(&monitor))?;
    Ok((lin, nl))
}

/// One line per built-in check.
#[derive(Debug, Clone)]
pub struct SelfTestLine {
    pub module: &'static str,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub fn selftest() -> Result<Vec<SelfTestLine>, CliError> {
    let material = tfm_core::MaterialParams::from_young_poisson(10_000.0, 0.45)?;
    let suite = SelfCheck::new(material);
    Ok(CHECKS
        .iter()
        .enumerate()
        .map(|(i, (module, invariant))| {
            let start = Instant::now();
            let o = suite.run(i);
            SelfTestLine {
                module,
                invariant,
                passed: o.passed,
                detail: o.detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

/// Mesh statistics for the data and reconstruction meshes; with an output
/// directory also the meshes as VTK and the reconstruction matrices in
/// Matrix Market format.
pub fn mesh_info(loaded: &Loaded, export: Option<&Path>) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let mut out = Outcome::default();
    let data = Forward::build(cfg, &cfg.domain.data_cells, false)?;
    let recon = Forward::build(cfg, &cfg.domain.recon_cells, cfg.domain.flip_recon)?;
    for (prefix, fwd) in [("data", &data), ("recon", &recon)] {
        let mesh = fwd.mesh();
        let kv = &mut out.summary;
        kv.push(&format!("{prefix}_kind"), format!("{:?}", mesh.kind()))
            .push(&format!("{prefix}_vertices"), mesh.vertices().len())
            .push(&format!("{prefix}_volume"), fmt_f64(mesh.total_volume()));
        for tag in [BoundaryTag::Dirichlet, BoundaryTag::Top, BoundaryTag::Bottom, BoundaryTag::Side] {
            let n = mesh.boundary_facets().iter().filter(|f| f.tag == tag).count();
            if n > 0 {
                kv.push(&format!("{prefix}_facets_{}", tag.name()), n);
            }
        }
        let constrained = fwd.data_space().constrained_dofs().iter().filter(|c| **c).count();
        kv.push(&format!("{prefix}_constrained_dofs"), constrained);
        describe_mesh(kv, prefix, fwd);
    }
    if let Some(dir) = export {
        prepare_dir(dir)?;
        for (name, fwd) in [("data_mesh.vtk", &data), ("recon_mesh.vtk", &recon)] {
            let p = dir.join(name);
            write_mesh_vtk(&p, name, fwd.mesh())?;
            out.files.push(p);
        }
        let (k, m) = match &recon {
            Forward::Box(f) => (f.stiffness(), f.mass()),
            Forward::Plane(p) => (p.stiffness(), p.mass()),
        };
        for (name, mat) in [("recon_stiffness.mtx", k), ("recon_mass.mtx", m)] {
            let p = dir.join(name);
            write_matrix_market(&p, mat)?;
            out.files.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_from_level_inverts_orthogonal_noise() {
        // ‖u + n‖² = ‖u‖² + ‖n‖² for orthogonal noise
        let (u, p) = (2.0_f64, 0.05);
        let noisy = (u * u + (p * u) * (p * u)).sqrt();
        assert!((delta_from_level(noisy, 5.0) - p * u).abs() < 1e-15);
        assert_eq!(delta_from_level(3.0, 0.0), 0.0);
    }
}
