//! Batch front end behind the `casimir` binary.
//!
//! Parses strict JSON configs, builds scenes, runs energy pipelines or
//! solver comparisons, and writes CSV reports. Output is deterministic for a
//! fixed config and seed: files carry no timestamps and all parallel
//! reductions are ordered.

mod config;

pub use config::{
    BodySpec, QuadratureSpec, RunConfig, SolverSpec, SweepMode, SweepSpec, TransformSpec,
};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU8, Ordering};

use nalgebra::{Matrix3, Vector3};

use crate::bem::{assemble, AssemblyConfig, ImagWavenumber, P1Space};
use crate::energy::{
    compute_energy, effective_cutoff, fit_decay, make_plan, richardson, CasimirResult,
    EnergyConfig,
};
use crate::geometry::{load_mesh, make_box, make_ellipsoid, make_sphere, make_torus, min_distance,
    save_mesh, Scene, SurfaceMesh};
use crate::solvers::{
    base_eigs, default_s_exp, logdet_dense, matvec_budget, recycle_from, recycled_step,
    xi_from_pairs, KrylovKind, OperatorPair, RecycleState,
};
use crate::{Error, Result};

static LOG_LEVEL: AtomicU8 = AtomicU8::new(1);

/// 0 = quiet, 1 = info, 2 = debug.
pub fn set_log_level(level: &str) -> Result<()> {
    let v = match level {
        "quiet" => 0,
        "info" => 1,
        "debug" => 2,
        other => {
            return Err(Error::Config(format!(
                "unknown log level `{other}` (quiet|info|debug)"
            )))
        }
    };
    LOG_LEVEL.store(v, Ordering::Relaxed);
    Ok(())
}

pub(crate) fn info(msg: &str) {
    if LOG_LEVEL.load(Ordering::Relaxed) >= 1 {
        eprintln!("[casimir] {msg}");
    }
}

/// Configure the global worker pool. `CASIMIR_THREADS` overrides both the
/// CLI flag and the config value.
pub fn init_workers(cli_workers: Option<usize>, config_workers: Option<usize>) {
    let env = std::env::var("CASIMIR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = env.or(cli_workers).or(config_workers) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn rotation_of(spec: &TransformSpec) -> Result<Matrix3<f64>> {
    match (spec.rotation_axis, spec.rotation_deg) {
        (None, None) => Ok(Matrix3::identity()),
        (Some(axis), Some(deg)) => {
            let v = Vector3::new(axis[0], axis[1], axis[2]);
            if v.norm() == 0.0 {
                return Err(Error::Config("rotation axis must be nonzero".into()));
            }
            let unit = nalgebra::Unit::new_normalize(v);
            Ok(*nalgebra::Rotation3::from_axis_angle(&unit, deg.to_radians()).matrix())
        }
        _ => Err(Error::Config(
            "rotation needs both rotation_axis and rotation_deg".into(),
        )),
    }
}

fn translation_of(spec: &TransformSpec) -> Vector3<f64> {
    spec.translation
        .map(|t| Vector3::new(t[0], t[1], t[2]))
        .unwrap_or_else(Vector3::zeros)
}

fn base_mesh(spec: &BodySpec, h: f64) -> Result<SurfaceMesh<f64>> {
    match spec {
        BodySpec::Sphere { radius, .. } => make_sphere(*radius, h),
        BodySpec::Ellipsoid { semi_axes, .. } => make_ellipsoid(*semi_axes, h),
        BodySpec::Torus { major, minor, .. } => make_torus(*major, *minor, h),
        BodySpec::Box { edges, .. } => make_box(*edges, h),
        BodySpec::Mesh { path, .. } => load_mesh(path),
    }
}

/// Build the scene for one sweep point at one mesh size. Bodies with equal
/// geometry keys share a base mesh and are declared identical.
pub fn build_scene(
    bodies: &[BodySpec],
    h: f64,
    sweep: Option<(&SweepSpec, f64)>,
) -> Result<Scene<f64>> {
    let mut key_to_base: HashMap<String, usize> = HashMap::new();
    let mut bases: Vec<SurfaceMesh<f64>> = Vec::new();
    let mut placements = Vec::with_capacity(bodies.len());
    for (i, spec) in bodies.iter().enumerate() {
        let key = spec.geometry_key();
        let base_idx = match key_to_base.get(&key) {
            Some(&idx) => idx,
            None => {
                let mesh = base_mesh(spec, h).map_err(|e| match e {
                    Error::InvalidGeometry(msg) => {
                        Error::InvalidGeometry(format!("body {i}: {msg}"))
                    }
                    other => other,
                })?;
                bases.push(mesh);
                key_to_base.insert(key, bases.len() - 1);
                bases.len() - 1
            }
        };
        let mut rotation = rotation_of(spec.transform())?;
        let mut translation = translation_of(spec.transform());
        if let Some((sw, value)) = sweep {
            if sw.body == i {
                let axis = Vector3::new(sw.axis[0], sw.axis[1], sw.axis[2]);
                match sw.mode {
                    SweepMode::Translate => translation += axis * value,
                    SweepMode::Rotate => {
                        if axis.norm() == 0.0 {
                            return Err(Error::Config("sweep axis must be nonzero".into()));
                        }
                        let unit = nalgebra::Unit::new_normalize(axis);
                        rotation = nalgebra::Rotation3::from_axis_angle(
                            &unit,
                            value.to_radians(),
                        )
                        .matrix()
                            * rotation;
                    }
                }
            }
        }
        placements.push((base_idx, rotation, translation));
    }
    Scene::assemble(&bases, &placements)
}

fn energy_config(cfg: &RunConfig) -> EnergyConfig<f64> {
    EnergyConfig {
        assembly: AssemblyConfig::default(),
        solver: cfg.solver.method,
        recycle: cfg.solver.recycle,
        m: cfg.solver.m,
        s_exp: cfg.solver.s_exp,
        rho: cfg.solver.rho,
        seed: cfg.solver.seed,
        n_q: cfg.quadrature.n_q,
        eps: cfg.quadrature.eps,
        kappa: cfg.quadrature.kappa,
    }
}

fn fmt_e(v: f64) -> String {
    format!("{v:.12e}")
}

fn method_label(r: &crate::solvers::SolverReport<f64>) -> String {
    let base = r.method.label();
    if r.method.recycled() {
        format!("{base}_recycled")
    } else {
        base.to_string()
    }
}

struct PointResult {
    param_value: Option<f64>,
    per_h: Vec<CasimirResult<f64>>,
    extrapolated: Option<f64>,
}

/// Outcome of a batch run, for the CLI to report.
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub summary: String,
}

/// Execute the energy pipeline for every sweep point and mesh size, then
/// write `integrand.csv`, `energy.csv` and the effective config.
pub fn run(cfg: &RunConfig, out_override: Option<PathBuf>) -> Result<RunOutcome> {
    cfg.validate()?;
    let out_dir = resolve_out_dir(cfg, out_override);
    std::fs::create_dir_all(&out_dir)?;
    echo_config(cfg, &out_dir)?;
    let ecfg = energy_config(cfg);

    let points: Vec<Option<f64>> = match &cfg.sweep {
        Some(sw) => sw.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut results: Vec<PointResult> = Vec::with_capacity(points.len());
    for value in &points {
        let sweep = cfg.sweep.as_ref().map(|sw| (sw, value.unwrap()));
        let mut per_h = Vec::with_capacity(cfg.h.len());
        for &h in &cfg.h {
            let scene = build_scene(&cfg.bodies, h, sweep)?;
            info(&format!(
                "point {:?}, h={h}: {} bodies, computing energy",
                value,
                scene.body_count()
            ));
            per_h.push(compute_energy(&scene, h, &ecfg)?);
        }
        let extrapolated = if per_h.len() >= 2 {
            let c = &per_h[per_h.len() - 2];
            let f = &per_h[per_h.len() - 1];
            Some(richardson(
                c.energy_normalized,
                f.energy_normalized,
                c.h,
                f.h,
            )?)
        } else {
            None
        };
        results.push(PointResult {
            param_value: *value,
            per_h,
            extrapolated,
        });
    }

    write_integrand_csv(cfg, &results, &out_dir)?;
    write_energy_csv(cfg, &results, &out_dir)?;

    let mut summary = String::new();
    for pr in &results {
        let label = match (cfg.sweep.as_ref(), pr.param_value) {
            (Some(sw), Some(v)) => format!("{}={v}", sw.name),
            _ => "single point".to_string(),
        };
        let finest = pr.per_h.last().expect("at least one mesh size");
        let _ = writeln!(
            summary,
            "{label}: finest-mesh energy {:.6e}{}",
            finest.energy_normalized,
            match pr.extrapolated {
                Some(e) => format!(", extrapolated {e:.6e}"),
                None => String::new(),
            }
        );
    }
    Ok(RunOutcome { out_dir, summary })
}

fn resolve_out_dir(cfg: &RunConfig, out_override: Option<PathBuf>) -> PathBuf {
    out_override
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("casimir_out").join(&cfg.config_id))
}

fn echo_config(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let text =
        serde_json::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out_dir.join("effective_config.json"), text + "\n")?;
    Ok(())
}

fn write_integrand_csv(
    cfg: &RunConfig,
    results: &[PointResult],
    out_dir: &Path,
) -> Result<()> {
    let mut text = String::from("# casimir integrand report\n");
    text.push_str("config_id,h,node_index,k,y,xi,solver,matvecs,retained\n");
    for pr in results {
        for res in &pr.per_h {
            for (idx, report) in res.reports.iter().enumerate() {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{},{},{}",
                    cfg.config_id,
                    fmt_e(res.h),
                    idx,
                    fmt_e(report.k),
                    fmt_e(res.plan.ys[idx]),
                    fmt_e(report.xi),
                    method_label(report),
                    report.matvecs,
                    report.retained.len(),
                );
            }
        }
    }
    std::fs::write(out_dir.join("integrand.csv"), text)?;
    Ok(())
}

fn write_energy_csv(cfg: &RunConfig, results: &[PointResult], out_dir: &Path) -> Result<()> {
    let param_name = cfg
        .sweep
        .as_ref()
        .map(|s| s.name.clone())
        .unwrap_or_default();
    let mut text = String::from("# casimir energy report\n");
    text.push_str("config_id,param_name,param_value,h,energy_normalized,integral,kappa,N_q,extrapolated\n");
    for pr in results {
        let pv = pr.param_value.map(fmt_e).unwrap_or_default();
        for res in &pr.per_h {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},false",
                cfg.config_id,
                param_name,
                pv,
                fmt_e(res.h),
                fmt_e(res.energy_normalized),
                fmt_e(res.integral),
                fmt_e(res.plan.kappa),
                res.plan.len(),
            );
        }
        if let Some(e) = pr.extrapolated {
            let _ = writeln!(
                text,
                "{},{},{},{},{},,,{},true",
                cfg.config_id,
                param_name,
                pv,
                fmt_e(0.0),
                fmt_e(e),
                cfg.quadrature.n_q,
            );
        }
    }
    std::fs::write(out_dir.join("energy.csv"), text)?;
    Ok(())
}

/// Dense reference becomes impractical beyond this dimension.
const DENSE_REFERENCE_LIMIT: usize = 8000;

/// Compare the Krylov variants against the dense reference node by node and
/// write `solver.csv` (per-node relative errors, measured and budgeted
/// operator counts, subspace dimensions).
pub fn compare(cfg: &RunConfig, out_override: Option<PathBuf>) -> Result<RunOutcome> {
    cfg.validate()?;
    let kinds = cfg
        .methods
        .clone()
        .unwrap_or_else(|| vec![KrylovKind::InverseFree, KrylovKind::Arnoldi]);
    if kinds.len() < 2 {
        return Err(Error::Config(
            "solver comparison requests at least two methods".into(),
        ));
    }
    let out_dir = resolve_out_dir(cfg, out_override);
    std::fs::create_dir_all(&out_dir)?;
    echo_config(cfg, &out_dir)?;

    let mut text = String::from("# casimir solver comparison\n");
    text.push_str(
        "config_id,h,node_index,k,method,recycled,rel_err_vs_dense,matvecs_measured,matvecs_budget,subspace_dim\n",
    );
    let mut summary = String::new();

    for &h in &cfg.h {
        let sweep = cfg
            .sweep
            .as_ref()
            .map(|sw| (sw, sw.values[0]));
        let scene = build_scene(&cfg.bodies, h, sweep)?;
        let space = P1Space::new(&scene);
        let n = space.dim();
        if n > DENSE_REFERENCE_LIMIT {
            return Err(Error::Config(format!(
                "dense reference infeasible at n={n}; use a smaller mesh (larger h)"
            )));
        }
        let z = min_distance(&scene)?;
        let s_exp = cfg.solver.s_exp.unwrap_or_else(|| default_s_exp(z));
        let m = cfg.solver.m.min(n);
        let acfg = AssemblyConfig::default();
        let groups = scene.group_ids().to_vec();

        // cutoff from dense pilot evaluations unless fixed
        let kappa = match cfg.quadrature.kappa {
            Some(k) => k,
            None => {
                let mut samples = Vec::new();
                for k in [0.0, 0.5, 1.0] {
                    let v = assemble(&space, ImagWavenumber::new(k)?, &acfg)?;
                    let vt = v.diagonal_part();
                    samples.push((k, logdet_dense(&v, &vt, &groups, k)?.xi));
                }
                effective_cutoff(&fit_decay(&samples, z)?, cfg.quadrature.eps)?
            }
        };
        let plan = make_plan(kappa, cfg.quadrature.n_q)?;

        let mut states: HashMap<&'static str, Option<RecycleState<f64>>> = HashMap::new();
        let mut totals: HashMap<String, u64> = HashMap::new();
        let mut s_lists: HashMap<&'static str, Vec<usize>> = HashMap::new();
        for (idx, &k) in plan.ks.iter().enumerate() {
            let v = assemble(&space, ImagWavenumber::new(k)?, &acfg)?;
            let vt = v.diagonal_part();
            let dense = logdet_dense(&v, &vt, &groups, k)?;
            let _ = writeln!(
                text,
                "{},{},{},{},dense,false,{},0,0,0",
                cfg.config_id,
                fmt_e(h),
                idx,
                fmt_e(k),
                fmt_e(0.0),
            );
            for &kind in &kinds {
                let kind_key = match kind {
                    KrylovKind::Arnoldi => "arnoldi",
                    KrylovKind::InverseFree => "inverse_free",
                };
                // non-recycled variant
                {
                    let pair = OperatorPair::new(&v, &vt, &groups)?;
                    let before = pair.matvec_count();
                    let pairs = base_eigs(&pair, kind, m, cfg.solver.rho, cfg.solver.seed)?;
                    let xi = xi_from_pairs(&pairs.values, s_exp);
                    let measured = pair.matvec_count() - before;
                    let budget = matvec_budget(kind, false, m, 1, &[]);
                    let rel = rel_err(xi, dense.xi);
                    *totals.entry(kind_key.to_string()).or_insert(0) += measured;
                    let _ = writeln!(
                        text,
                        "{},{},{},{},{},false,{},{},{},{}",
                        cfg.config_id,
                        fmt_e(h),
                        idx,
                        fmt_e(k),
                        kind_key,
                        fmt_e(rel),
                        measured,
                        budget,
                        m,
                    );
                }
                // recycled variant
                {
                    let pair = OperatorPair::new(&v, &vt, &groups)?;
                    let before = pair.matvec_count();
                    let state = states.entry(kind_key).or_insert(None);
                    let (pairs, dim, s_in) = match (idx, state.as_ref()) {
                        (0, _) | (_, None) => {
                            let pairs =
                                base_eigs(&pair, kind, m, cfg.solver.rho, cfg.solver.seed)?;
                            (pairs, m, 0usize)
                        }
                        (_, Some(st)) => {
                            let out = recycled_step(&pair, st, kind)?;
                            (out.pairs, out.subspace_dim, out.s_in)
                        }
                    };
                    let xi = xi_from_pairs(&pairs.values, s_exp);
                    let measured = pair.matvec_count() - before;
                    if idx > 0 {
                        s_lists.entry(kind_key).or_default().push(s_in);
                    }
                    let budget = if idx == 0 {
                        matvec_budget(kind, false, m, 1, &[])
                    } else {
                        matvec_budget(kind, true, m, 1, &[s_in])
                            - matvec_budget(kind, false, m, 1, &[])
                    };
                    *states.get_mut(kind_key).unwrap() = recycle_from(&pairs, s_exp);
                    let rel = rel_err(xi, dense.xi);
                    *totals.entry(format!("{kind_key}_recycled")).or_insert(0) += measured;
                    let _ = writeln!(
                        text,
                        "{},{},{},{},{},true,{},{},{},{}",
                        cfg.config_id,
                        fmt_e(h),
                        idx,
                        fmt_e(k),
                        kind_key,
                        fmt_e(rel),
                        measured,
                        budget,
                        dim,
                    );
                }
            }
        }
        for &kind in &kinds {
            let kind_key = match kind {
                KrylovKind::Arnoldi => "arnoldi",
                KrylovKind::InverseFree => "inverse_free",
            };
            let s_list = s_lists.get(kind_key).cloned().unwrap_or_default();
            let plain_budget = matvec_budget(kind, false, m, plan.len(), &[]);
            let rec_budget = matvec_budget(kind, true, m, plan.len(), &s_list);
            let plain = totals.get(kind_key).copied().unwrap_or(0);
            let rec = totals
                .get(&format!("{kind_key}_recycled"))
                .copied()
                .unwrap_or(0);
            let _ = writeln!(
                summary,
                "h={h} {kind_key}: measured {plain} (budget {plain_budget}), recycled {rec} (budget {rec_budget})"
            );
            if !s_list.windows(2).all(|w| w[1] <= w[0]) {
                let _ = writeln!(
                    summary,
                    "warning: recycled subspace sizes not non-increasing for {kind_key}: {s_list:?}"
                );
            }
        }
    }
    std::fs::write(out_dir.join("solver.csv"), text)?;
    Ok(RunOutcome { out_dir, summary })
}

fn rel_err(got: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        got.abs()
    } else {
        (got - reference).abs() / reference.abs()
    }
}

/// `casimir mesh` support: generate one body and write it as OFF.
pub fn generate_mesh(
    kind: &str,
    h: f64,
    radius: Option<f64>,
    semi_axes: Option<[f64; 3]>,
    major: Option<f64>,
    minor: Option<f64>,
    edges: Option<[f64; 3]>,
    out: &Path,
) -> Result<()> {
    let mesh: SurfaceMesh<f64> = match kind {
        "sphere" => make_sphere(
            radius.ok_or_else(|| Error::Config("sphere needs --radius".into()))?,
            h,
        )?,
        "ellipsoid" => make_ellipsoid(
            semi_axes.ok_or_else(|| Error::Config("ellipsoid needs --semi-axes".into()))?,
            h,
        )?,
        "torus" => make_torus(
            major.ok_or_else(|| Error::Config("torus needs --major".into()))?,
            minor.ok_or_else(|| Error::Config("torus needs --minor".into()))?,
            h,
        )?,
        "box" => make_box(
            edges.ok_or_else(|| Error::Config("box needs --edges".into()))?,
            h,
        )?,
        other => {
            return Err(Error::Config(format!(
                "unknown mesh kind `{other}` (sphere|ellipsoid|torus|box)"
            )))
        }
    };
    save_mesh(&mesh, out)?;
    info(&format!(
        "wrote {} ({} vertices, {} triangles)",
        out.display(),
        mesh.vertex_count(),
        mesh.triangle_count()
    ));
    Ok(())
}

/// Exit code mapping of the CLI: 2 config, 3 geometry, 4 numerical.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io(_) => 2,
        Error::InvalidGeometry(_)
        | Error::SceneInvalid(_)
        | Error::InvalidTransform(_)
        | Error::ResourceLimit(_)
        | Error::Parse { .. } => 3,
        Error::DimensionMismatch(_) | Error::SingularEval(_) | Error::Numerical(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_pair_config(h: f64) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{
                "config_id": "test",
                "bodies": [
                    {{"kind": "sphere", "radius": 1.0}},
                    {{"kind": "sphere", "radius": 1.0, "transform": {{"translation": [0, 0, -2.7]}}}}
                ],
                "h": [{h}],
                "solver": {{"method": "dense"}},
                "quadrature": {{"n_q": 6, "kappa": 2.0}}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn scene_building_groups_identical_bodies() {
        let cfg = sphere_pair_config(0.8);
        let scene = build_scene(&cfg.bodies, 0.8, None).unwrap();
        assert_eq!(scene.group_ids(), &[0, 0]);
        assert_eq!(scene.body_count(), 2);
    }

    #[test]
    fn sweep_translates_body() {
        let cfg = sphere_pair_config(0.8);
        let sweep = SweepSpec {
            name: "Z".into(),
            body: 1,
            mode: SweepMode::Translate,
            axis: [0.0, 0.0, -1.0],
            values: vec![1.0],
        };
        let scene = build_scene(&cfg.bodies, 0.8, Some((&sweep, 1.0))).unwrap();
        let c = scene.body(1).centroid();
        assert!((c.z - (-3.7)).abs() < 1e-12);
    }

    #[test]
    fn run_writes_deterministic_reports() {
        let cfg = sphere_pair_config(0.8);
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let out1 = run(&cfg, Some(dir1.path().to_path_buf())).unwrap();
        let out2 = run(&cfg, Some(dir2.path().to_path_buf())).unwrap();
        for file in ["integrand.csv", "energy.csv", "effective_config.json"] {
            let a = std::fs::read(out1.out_dir.join(file)).unwrap();
            let b = std::fs::read(out2.out_dir.join(file)).unwrap();
            assert_eq!(a, b, "{file} must be byte identical");
        }
        let energy = std::fs::read_to_string(out1.out_dir.join("energy.csv")).unwrap();
        assert!(energy.lines().count() >= 3);
        assert!(energy.contains("false"));
    }

    #[test]
    fn rerun_from_effective_config_reproduces() {
        let cfg = sphere_pair_config(0.8);
        let dir = tempfile::tempdir().unwrap();
        let out = run(&cfg, Some(dir.path().join("a"))).unwrap();
        let echoed = RunConfig::load(out.out_dir.join("effective_config.json")).unwrap();
        let out2 = run(&echoed, Some(dir.path().join("b"))).unwrap();
        let a = std::fs::read(out.out_dir.join("energy.csv")).unwrap();
        let b = std::fs::read(out2.out_dir.join("energy.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exit_codes_map_error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::SceneInvalid("x".into())), 3);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 4);
    }
}
