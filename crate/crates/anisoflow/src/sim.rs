//! End-to-end simulation driver: initialization, the time loop
//! (assemble, solve, reinitialize, refresh fields), per-step measurements,
//! snapshots and termination.

use crate::bench::{
    efficiency_of_contour, interface_energy, measure_a, measure_b, series_velocity, BenchError,
    EllipseExact, RunRecord, RunRow, RunStatus,
};
use crate::energy::{
    check_positive_definite, evaluate_gamma_field, DVariant, EnergyError, EnergyModel,
};
use crate::fem::{advance, FemError, StepParams};
use crate::levelset::{
    extract_contour, init_circle, init_ellipse, init_polyline, normals, Contour, LevelSet,
    LevelSetError,
};
use crate::mesh::{generate_rect_mesh, write_vtk, MeshError, TriMesh};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    Step { step: usize, source: FemError },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    LevelSet(#[from] LevelSetError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_rel_tol")]
    pub solver_rel_tol: f64,
    #[serde(default = "default_max_iter")]
    pub solver_max_iter: usize,
    #[serde(default = "default_true")]
    pub supg: bool,
}

fn default_rel_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    2000
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CaseConfig {
    Ellipse {
        a0: f64,
        r: f64,
        center: [f64; 2],
    },
    Circle {
        #[serde(rename = "R")]
        radius: f64,
        center: [f64; 2],
    },
    Custom {
        contour: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    /// CSV table for the `tabulated` model.
    #[serde(default)]
    pub table: Option<PathBuf>,
    pub variant: DVariant,
    pub mu: f64,
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Write a VTK snapshot every N steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub domain: DomainConfig,
    pub numerics: NumericsConfig,
    pub case: CaseConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: String| Err(SimError::Config(msg));
        let (w, h) = (self.domain.width, self.domain.height);
        if !(w > 0.0 && h > 0.0) {
            return err(format!("domain must be positive, got {w} x {h}"));
        }
        let hs = self.numerics.h;
        if !(hs > 0.0 && hs <= w.min(h) / 2.0) {
            return err(format!("mesh size h = {hs} invalid for {w} x {h} domain"));
        }
        if !(self.numerics.dt > 0.0) {
            return err(format!("dt must be positive, got {}", self.numerics.dt));
        }
        if !(self.numerics.t_end > 0.0) {
            return err(format!("t_end must be positive, got {}", self.numerics.t_end));
        }
        if !(self.model.mu >= 0.0) {
            return err(format!("mu must be >= 0, got {}", self.model.mu));
        }
        let margin = 4.0 * hs;
        let fits = |lo: [f64; 2], hi: [f64; 2]| -> bool {
            lo[0] >= margin && lo[1] >= margin && hi[0] <= w - margin && hi[1] <= h - margin
        };
        match &self.case {
            CaseConfig::Ellipse { a0, r, center } => {
                if !(*a0 > 0.0 && *r >= 1.0) {
                    return err(format!("ellipse case needs a0 > 0 and r >= 1, got a0={a0}, r={r}"));
                }
                let b0 = a0 / r;
                if !fits(
                    [center[0] - a0, center[1] - b0],
                    [center[0] + a0, center[1] + b0],
                ) {
                    return err("ellipse does not fit inside the domain with 4h margin".into());
                }
            }
            CaseConfig::Circle { radius, center } => {
                if !(*radius > 0.0) {
                    return err(format!("circle case needs R > 0, got {radius}"));
                }
                if !fits(
                    [center[0] - radius, center[1] - radius],
                    [center[0] + radius, center[1] + radius],
                ) {
                    return err("circle does not fit inside the domain with 4h margin".into());
                }
            }
            CaseConfig::Custom { contour } => {
                if !contour.exists() {
                    return err(format!("contour file {} not found", contour.display()));
                }
            }
        }
        let model = self.build_model(self.initial_small_axis())?;
        if matches!(self.model.variant, DVariant::Aniso) && !self.model.force {
            let report = check_positive_definite(&model, 3600);
            if !report.admissible {
                return Err(SimError::Step {
                    step: 0,
                    source: FemError::InadmissibleModel {
                        worst_eigenvalue: report.worst_eigenvalue,
                        worst_angle: report.worst_angle,
                    },
                });
            }
        }
        Ok(())
    }

    fn initial_small_axis(&self) -> f64 {
        match &self.case {
            CaseConfig::Ellipse { a0, r, .. } => a0 / r,
            CaseConfig::Circle { radius, .. } => *radius,
            CaseConfig::Custom { .. } => 1.0,
        }
    }

    /// Instantiate the configured energy model. For the benchmark `ellipse`
    /// model the small axis `b` tracks the measured field, so the model is
    /// rebuilt each step with the current value.
    fn build_model(&self, current_b: f64) -> Result<EnergyModel, SimError> {
        match self.model.name.as_str() {
            "ellipse" => {
                let r = match (&self.case, self.model.params.first()) {
                    (_, Some(&r)) => r,
                    (CaseConfig::Ellipse { r, .. }, None) => *r,
                    _ => {
                        return Err(SimError::Config(
                            "ellipse model outside an ellipse case needs params = [r]".into(),
                        ))
                    }
                };
                Ok(EnergyModel::ellipse(r, current_b)?)
            }
            "tabulated" => {
                let path = self.model.table.as_ref().ok_or_else(|| {
                    SimError::Config("tabulated model needs a `table` path".into())
                })?;
                Ok(EnergyModel::tabulated_from_csv(path)?)
            }
            name => Ok(EnergyModel::by_name(name, &self.model.params)?),
        }
    }

    fn model_tracks_small_axis(&self) -> bool {
        self.model.name == "ellipse"
    }

    pub fn step_params(&self) -> StepParams {
        StepParams {
            dt: self.numerics.dt,
            mu: self.model.mu,
            solver_rel_tol: self.numerics.solver_rel_tol,
            solver_max_iter: self.numerics.solver_max_iter,
            supg_enabled: self.numerics.supg,
        }
    }

    pub fn echo(&self) -> String {
        let case = match &self.case {
            CaseConfig::Ellipse { a0, r, center } => {
                format!("case=ellipse a0={a0} r={r} center=({},{})", center[0], center[1])
            }
            CaseConfig::Circle { radius, center } => {
                format!("case=circle R={radius} center=({},{})", center[0], center[1])
            }
            CaseConfig::Custom { contour } => format!("case=custom contour={}", contour.display()),
        };
        format!(
            "domain={}x{} h={} dt={} t_end={} {} model={} params={:?} variant={:?} mu={} supg={}",
            self.domain.width,
            self.domain.height,
            self.numerics.h,
            self.numerics.dt,
            self.numerics.t_end,
            case,
            self.model.name,
            self.model.params,
            self.model.variant,
            self.model.mu,
            self.numerics.supg,
        )
    }
}

fn read_polyline_csv(path: &std::path::Path) -> Result<Vec<[f64; 2]>, SimError> {
    let text = std::fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let mut it = line.split(',');
        let x: f64 = it
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| SimError::Config(format!("bad contour row '{line}'")))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| SimError::Config(format!("bad contour row '{line}'")))?;
        pts.push([x, y]);
    }
    if pts.len() < 3 {
        return Err(SimError::Config("contour file has fewer than 3 points".into()));
    }
    Ok(pts)
}

/// The full simulation product: the measured time series plus the final
/// field, for downstream exports.
pub struct RunOutput {
    pub record: RunRecord,
    pub mesh: TriMesh,
    pub final_level_set: LevelSet,
    pub final_contour: Option<Contour>,
}

/// Execute the configured run: initial signed-distance field, then per step
/// assemble/solve/reinitialize with the energy and diffusion fields refreshed
/// from the current normals. Measurements are recorded every step; a
/// vanished interface terminates early with a signalled status.
pub fn run(config: &SimConfig) -> Result<RunOutput, SimError> {
    config.validate()?;
    let mesh = generate_rect_mesh(config.domain.width, config.domain.height, config.numerics.h)?;
    run_on_mesh(config, mesh)
}

/// As [`run`], reusing an existing mesh (the mesh must match the configured
/// domain and target size).
pub fn run_on_mesh(config: &SimConfig, mesh: TriMesh) -> Result<RunOutput, SimError> {
    let params = config.step_params();
    let n_steps = (config.numerics.t_end / config.numerics.dt).round() as usize;
    if n_steps == 0 {
        return Err(SimError::Config(
            "t_end shorter than one time step".to_string(),
        ));
    }

    let (mut ls, ellipse_meta): (LevelSet, Option<(f64, [f64; 2], EllipseExact)>) =
        match &config.case {
            CaseConfig::Ellipse { a0, r, center } => {
                let b0 = a0 / r;
                let ls = init_ellipse(&mesh, *center, *a0, b0)?;
                let oracle = EllipseExact::new(*a0, b0, config.model.mu);
                (ls, Some((*a0, *center, oracle)))
            }
            CaseConfig::Circle { radius, center } => (init_circle(&mesh, *center, *radius)?, None),
            CaseConfig::Custom { contour } => {
                let pts = read_polyline_csv(contour)?;
                (init_polyline(&mesh, &pts)?, None)
            }
        };

    let mut record = RunRecord::new(config.echo());
    let snapshot_dir = &config.output.dir;
    if config.output.snapshot_every > 0 {
        std::fs::create_dir_all(snapshot_dir)?;
    }

    let mut model = config.build_model(config.initial_small_axis())?;
    for step in 0..=n_steps {
        let t = step as f64 * config.numerics.dt;

        let b_bar = match measure_b(&ls) {
            Ok(b) => b,
            Err(BenchError::AllNegative) => {
                record.status = RunStatus::Vanished { step };
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let contour = match extract_contour(&mesh, &ls) {
            Ok(c) => c,
            Err(LevelSetError::UniformSign) => {
                record.status = RunStatus::Vanished { step };
                break;
            }
            Err(e) => return Err(e.into()),
        };
        // The benchmark energy scales with the current small axis; refresh
        // it from the measurement before the fields are rebuilt.
        if config.model_tracks_small_axis() {
            model = config.build_model(b_bar)?;
        }

        let mut row = RunRow {
            t,
            b_bar,
            ..RunRow::default()
        };
        let (length, energy) = interface_energy(&contour, &model);
        row.length = length;
        row.energy = energy;
        row.lambda = efficiency_of_contour(&contour, &model);
        if let Some((a0, center, oracle)) = &ellipse_meta {
            let a_bar = measure_a(&mesh, &ls, *a0, *center)?;
            row.a_bar = Some(a_bar);
            row.r_bar = Some(a_bar / b_bar);
            let exact = oracle.state(t);
            row.e_a = Some((exact.a - a_bar).abs());
            row.e_b = Some((exact.b - b_bar).abs());
        }
        record.rows.push(row);

        if config.output.snapshot_every > 0 && step % config.output.snapshot_every == 0 {
            let nrm = normals(&mesh, &ls);
            let gamma = evaluate_gamma_field(&model, &nrm);
            let phi = ls.as_field();
            write_vtk(
                snapshot_dir.join(format!("snap_{step:06}.vtk")),
                &mesh,
                &[("phi", &phi), ("gamma", &gamma)],
            )?;
        }

        if step == n_steps {
            break;
        }
        ls = match advance(
            &mesh,
            &ls,
            &model,
            config.model.variant,
            &params,
            config.model.force,
        ) {
            Ok(next) => next,
            Err(FemError::LevelSet(LevelSetError::UniformSign)) => {
                record.status = RunStatus::Vanished { step: step + 1 };
                break;
            }
            Err(source) => return Err(SimError::Step { step, source }),
        };
    }

    if record.rows.len() >= 2 {
        series_velocity(&mut record)?;
        if let Some((_, _, oracle)) = &ellipse_meta {
            for k in 0..record.rows.len() {
                let exact = oracle.state(record.rows[k].t);
                if let Some(va) = record.rows[k].va_bar {
                    record.rows[k].e_va = Some((-exact.va - va).abs());
                }
                if let Some(vb) = record.rows[k].vb_bar {
                    record.rows[k].e_vb = Some((-exact.vb - vb).abs());
                }
            }
        }
    }

    let final_contour = extract_contour(&mesh, &ls).ok();
    Ok(RunOutput {
        record,
        mesh,
        final_level_set: ls,
        final_contour,
    })
}

/// Paired iso/aniso runs from the identical initial state, with the aligned
/// efficiency table over the steps both runs recorded.
pub struct CompareOutput {
    pub iso: RunOutput,
    pub aniso: RunOutput,
    /// Rows (t, lambda_iso, lambda_aniso) over matched recorded steps.
    pub lambda_table: Vec<(f64, f64, f64)>,
}

pub fn compare_iso_aniso(config: &SimConfig) -> Result<CompareOutput, SimError> {
    let mut iso_config = config.clone();
    iso_config.model.variant = DVariant::Iso;
    iso_config.output.dir = config.output.dir.join("iso");
    let mut aniso_config = config.clone();
    aniso_config.model.variant = DVariant::Aniso;
    aniso_config.output.dir = config.output.dir.join("aniso");
    let iso = run(&iso_config)?;
    let aniso = run(&aniso_config)?;
    let n = iso.record.rows.len().min(aniso.record.rows.len());
    let lambda_table = (0..n)
        .map(|k| {
            (
                iso.record.rows[k].t,
                iso.record.rows[k].lambda,
                aniso.record.rows[k].lambda,
            )
        })
        .collect();
    Ok(CompareOutput {
        iso,
        aniso,
        lambda_table,
    })
}
