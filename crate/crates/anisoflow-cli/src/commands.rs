//! Subcommand implementations and the error-to-exit-code mapping.

use crate::study::{StudyAxis, StudySpec};
use anisoflow::bench::{fit_convergence, l2_error, EllipseExact};
use anisoflow::energy::{
    check_positive_definite, evaluate_d_field, evaluate_gamma_field, EnergyError, EnergyModel,
};
use anisoflow::fem::FemError;
use anisoflow::levelset::{init_circle, init_ellipse, normals};
use anisoflow::mesh::{generate_rect_mesh, write_vtk};
use anisoflow::sim::{self, CaseConfig, RunOutput, SimConfig, SimError};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: config, flags, unknown models. Exit 2.
    Validation(String),
    /// The anisotropic tensor is not positive definite. Exit 3.
    Inadmissible(String),
    /// Everything else. Exit 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Inadmissible(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Runtime(m) | CliError::Validation(m) | CliError::Inadmissible(m) => m,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::Config(_) => CliError::Validation(e.to_string()),
            SimError::Step {
                source: FemError::InadmissibleModel { .. },
                ..
            } => CliError::Inadmissible(e.to_string()),
            SimError::Energy(EnergyError::UnknownModel(_))
            | SimError::Energy(EnergyError::InvalidParams(_)) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut config: SimConfig = toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    // Paths inside the config resolve relative to the config file.
    if let Some(dir) = path.parent() {
        if let CaseConfig::Custom { contour } = &mut config.case {
            if contour.is_relative() {
                *contour = dir.join(&contour);
            }
        }
        if let Some(table) = &mut config.model.table {
            if table.is_relative() {
                *table = dir.join(&table);
            }
        }
    }
    Ok(config)
}

/// `ANISOFLOW_OUT`, when set, overrides the configured output root.
fn effective_output_dir(config: &SimConfig) -> PathBuf {
    match std::env::var_os("ANISOFLOW_OUT") {
        Some(root) => PathBuf::from(root),
        None => config.output.dir.clone(),
    }
}

fn apply_overrides(
    config: &mut SimConfig,
    snapshot_every: Option<usize>,
    force_inadmissible: bool,
) {
    if let Some(n) = snapshot_every {
        config.output.snapshot_every = n;
    }
    if force_inadmissible {
        config.model.force = true;
    }
    config.output.dir = effective_output_dir(config);
}

fn write_run_outputs(out: &RunOutput, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    out.record
        .write_csv(dir.join("run.csv"))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(contour) = &out.final_contour {
        contour
            .write_csv(dir.join("contour_final.csv"))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn summary_line(config: &SimConfig, out: &RunOutput, wall: std::time::Duration) -> String {
    let last = out.record.rows.last();
    let b_final = last.map(|r| r.b_bar).unwrap_or(f64::NAN);
    let oracle_part = match (&config.case, last) {
        (CaseConfig::Ellipse { a0, r, .. }, Some(row)) => {
            let oracle = EllipseExact::new(*a0, a0 / r, config.model.mu);
            let exact = oracle.state(row.t).b;
            format!(" e_b={:.3e}", (exact - row.b_bar).abs())
        }
        _ => String::new(),
    };
    let status = match out.record.status {
        anisoflow::bench::RunStatus::Completed => "completed".to_string(),
        anisoflow::bench::RunStatus::Vanished { step } => format!("vanished@{step}"),
    };
    format!(
        "{status}: b_bar={b_final:.6}{oracle_part} steps={} wall={:.2?}",
        out.record.rows.len(),
        wall
    )
}

pub fn cmd_run(
    config_path: &Path,
    snapshot_every: Option<usize>,
    force_inadmissible: bool,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    apply_overrides(&mut config, snapshot_every, force_inadmissible);
    let start = Instant::now();
    let out = sim::run(&config)?;
    let dir = config.output.dir.clone();
    write_run_outputs(&out, &dir)?;
    println!("{}", summary_line(&config, &out, start.elapsed()));
    Ok(())
}

pub fn cmd_study(study_path: &Path, jobs: usize) -> Result<(), CliError> {
    let spec = StudySpec::load(study_path)?;
    let base = load_config(&spec.base)?;
    if !matches!(base.case, CaseConfig::Ellipse { .. }) {
        return Err(CliError::Validation(
            "studies need an ellipse base case (the analytic oracle)".to_string(),
        ));
    }
    let out_root = match std::env::var_os("ANISOFLOW_OUT") {
        Some(root) => PathBuf::from(root),
        None => spec.outputs.clone(),
    };
    std::fs::create_dir_all(&out_root)?;

    let members: Vec<(f64, SimConfig, PathBuf)> = spec
        .values
        .iter()
        .map(|&value| {
            let mut config = base.clone();
            let label = match spec.axis {
                StudyAxis::MeshSize => {
                    config.numerics.h = value;
                    format!("meshSize_{value}")
                }
                StudyAxis::TimeStep => {
                    config.numerics.dt = value;
                    format!("timeStep_{value}")
                }
                StudyAxis::Ratio => {
                    if let CaseConfig::Ellipse { r, .. } = &mut config.case {
                        *r = value;
                    }
                    format!("ratio_{value}")
                }
            };
            let dir = out_root.join(label);
            config.output.dir = dir.clone();
            (value, config, dir)
        })
        .collect();

    // Fixed-size worker pool; results keep member order.
    let jobs = jobs.max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let abort = std::sync::atomic::AtomicBool::new(false);
    let results: Vec<std::sync::Mutex<Option<Result<f64, CliError>>>> =
        members.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(members.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= members.len() || abort.load(std::sync::atomic::Ordering::SeqCst) {
                    break;
                }
                let (_, config, dir) = &members[k];
                let outcome = (|| -> Result<f64, CliError> {
                    let out = sim::run(config)?;
                    write_run_outputs(&out, dir)?;
                    let (a0, r) = match &config.case {
                        CaseConfig::Ellipse { a0, r, .. } => (*a0, *r),
                        _ => unreachable!("validated above"),
                    };
                    let oracle = EllipseExact::new(a0, a0 / r, config.model.mu);
                    l2_error(&out.record, &oracle).map_err(|e| CliError::Runtime(e.to_string()))
                })();
                if outcome.is_err() {
                    abort.store(true, std::sync::atomic::Ordering::SeqCst);
                }
                *results[k].lock().unwrap() = Some(outcome);
            });
        }
    });

    // Flush whatever completed, then fail on the first error if any.
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut first_error: Option<CliError> = None;
    for ((value, _, _), cell) in members.iter().zip(&results) {
        match cell.lock().unwrap().take() {
            Some(Ok(err)) => pairs.push((*value, err)),
            Some(Err(e)) if first_error.is_none() => first_error = Some(e),
            _ => {}
        }
    }
    let slope = match spec.axis {
        StudyAxis::Ratio => None,
        _ => fit_convergence(&pairs).ok(),
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(out_root.join("study.csv"))?);
    writeln!(w, "# axis: {:?}, base: {}", spec.axis, spec.base.display())?;
    writeln!(w, "value,l2_error")?;
    for (value, err) in &pairs {
        writeln!(w, "{value},{err}")?;
    }
    if let Some(slope) = slope {
        writeln!(w, "# fit_slope: {slope}")?;
        println!("study {:?}: {} runs, fit slope {slope:.3}", spec.axis, pairs.len());
    } else {
        println!("study {:?}: {} runs", spec.axis, pairs.len());
    }
    w.flush()?;
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(())
}

pub fn cmd_compare(
    config_path: &Path,
    snapshot_every: Option<usize>,
    force_inadmissible: bool,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    apply_overrides(&mut config, snapshot_every, force_inadmissible);
    let root = config.output.dir.clone();
    let start = Instant::now();
    let cmp = sim::compare_iso_aniso(&config)?;
    write_run_outputs(&cmp.iso, &root.join("iso"))?;
    write_run_outputs(&cmp.aniso, &root.join("aniso"))?;
    std::fs::create_dir_all(&root)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(root.join("lambda_compare.csv"))?);
    writeln!(w, "t,lambda_iso,lambda_aniso")?;
    for (t, li, la) in &cmp.lambda_table {
        writeln!(w, "{t},{li},{la}")?;
    }
    w.flush()?;
    let last = cmp.lambda_table.last().cloned().unwrap_or((0.0, 0.0, 0.0));
    println!(
        "compare: {} matched steps, final lambda iso={:.6} aniso={:.6} wall={:.2?}",
        cmp.lambda_table.len(),
        last.1,
        last.2,
        start.elapsed()
    );
    Ok(())
}

pub fn cmd_check_model(
    name: &str,
    params: &[f64],
    table: Option<&Path>,
) -> Result<(), CliError> {
    let model = match (name, table) {
        ("tabulated", Some(path)) => {
            EnergyModel::tabulated_from_csv(path).map_err(|e| CliError::Validation(e.to_string()))?
        }
        ("tabulated", None) => {
            return Err(CliError::Validation(
                "tabulated model needs --table <csv>".to_string(),
            ))
        }
        _ => EnergyModel::by_name(name, params).map_err(|e| CliError::Validation(e.to_string()))?,
    };
    let report = check_positive_definite(&model, 3600);
    println!(
        "model {}: admissible={} worst_eigenvalue={:.6} at angle {:.6} dxy_margin_min={:.6}",
        model.name(),
        report.admissible,
        report.worst_eigenvalue,
        report.worst_angle,
        report.dxy_margin_min
    );
    if report.admissible {
        Ok(())
    } else {
        Err(CliError::Inadmissible(format!(
            "model {} is not positive definite (worst eigenvalue {:.4})",
            model.name(),
            report.worst_eigenvalue
        )))
    }
}

pub fn cmd_export_vtk(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    config.validate()?;
    let mesh = generate_rect_mesh(config.domain.width, config.domain.height, config.numerics.h)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let ls = match &config.case {
        CaseConfig::Ellipse { a0, r, center } => init_ellipse(&mesh, *center, *a0, a0 / r),
        CaseConfig::Circle { radius, center } => init_circle(&mesh, *center, *radius),
        CaseConfig::Custom { .. } => {
            return Err(CliError::Validation(
                "export-vtk supports ellipse and circle cases".to_string(),
            ))
        }
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let model = EnergyModel::by_name(&config.model.name, &config.model.params)
        .or_else(|_| match &config.case {
            CaseConfig::Ellipse { a0, r, .. } if config.model.name == "ellipse" => {
                EnergyModel::ellipse(*r, a0 / r)
            }
            _ => EnergyModel::by_name(&config.model.name, &config.model.params),
        })
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let nrm = normals(&mesh, &ls);
    let gamma = evaluate_gamma_field(&model, &nrm);
    let d = evaluate_d_field(&model, &nrm, config.model.variant)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let phi = ls.as_field();
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_vtk(
        out,
        &mesh,
        &[("phi", &phi), ("gamma", &gamma), ("normal", &nrm.field), ("D", &d)],
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("wrote {}", out.display());
    Ok(())
}
