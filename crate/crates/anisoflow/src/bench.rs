//! The shrinking-ellipse oracle, geometry measurements on level sets, error
//! norms, the interface energy-efficiency metric and convergence-rate fits.
//!
//! The benchmark flow shrinks an ellipse homothetically: both semi-axes decay
//! as `exp(-3 mu G t)`, the eccentricity is conserved, and the small axis is
//! read off a positive-inside distance field as its maximum value.

use crate::energy::{inclination, EnergyModel};
use crate::levelset::{extract_contour, Contour, LevelSet, LevelSetError};
use crate::mesh::TriMesh;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("field is non-positive everywhere: interface gone")]
    AllNegative,
    #[error("probe point ({0}, {1}) lies outside the mesh")]
    ProbeOutsideMesh(f64, f64),
    #[error("need at least {need} data rows, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("degenerate fit data: {0}")]
    DegenerateData(String),
    #[error(transparent)]
    LevelSet(#[from] LevelSetError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Closed-form state of the shrinking ellipse with `mu G` the product of
/// mobility and the constant metric factor of the benchmark energy.
#[derive(Debug, Clone, Copy)]
pub struct EllipseExact {
    pub a0: f64,
    pub b0: f64,
    pub mu_g: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ExactState {
    pub a: f64,
    pub b: f64,
    /// Inward tip speeds (positive while shrinking).
    pub va: f64,
    pub vb: f64,
    pub eccentricity: f64,
}

impl EllipseExact {
    pub fn new(a0: f64, b0: f64, mu_g: f64) -> Self {
        assert!(a0 >= b0 && b0 > 0.0 && mu_g > 0.0);
        Self { a0, b0, mu_g }
    }

    pub fn state(&self, t: f64) -> ExactState {
        let decay = (-3.0 * self.mu_g * t).exp();
        ExactState {
            a: self.a0 * decay,
            b: self.b0 * decay,
            va: 3.0 * self.mu_g * self.a0 * decay,
            vb: 3.0 * self.mu_g * self.b0 * decay,
            eccentricity: (1.0 - (self.b0 / self.a0).powi(2)).sqrt(),
        }
    }
}

/// Small semi-axis measure: the maximum nodal value of the reinitialized
/// positive-inside field.
pub fn measure_b(ls: &LevelSet) -> Result<f64, BenchError> {
    let m = ls.max_value();
    if m <= 0.0 {
        return Err(BenchError::AllNegative);
    }
    Ok(m)
}

/// Large semi-axis probe: `a0 + phi(center + (a0, 0))`, P1-interpolated in
/// the containing triangle.
pub fn measure_a(
    mesh: &TriMesh,
    ls: &LevelSet,
    a0: f64,
    center: [f64; 2],
) -> Result<f64, BenchError> {
    let probe = [center[0] + a0, center[1]];
    let t = mesh
        .locate(probe)
        .ok_or(BenchError::ProbeOutsideMesh(probe[0], probe[1]))?;
    Ok(a0 + mesh.interpolate_in(ls.values(), t, probe))
}

/// One recorded time-series row. Oracle-dependent entries are present only
/// for runs with an analytic reference; the large-axis probe only for
/// ellipse runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRow {
    pub t: f64,
    pub a_bar: Option<f64>,
    pub b_bar: f64,
    pub r_bar: Option<f64>,
    pub va_bar: Option<f64>,
    pub vb_bar: Option<f64>,
    pub e_a: Option<f64>,
    pub e_b: Option<f64>,
    pub e_va: Option<f64>,
    pub e_vb: Option<f64>,
    pub lambda: f64,
    pub length: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The interface disappeared at this step; the run ended early.
    Vanished { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub status: RunStatus,
    /// One-line echo of the run configuration, written into the CSV header.
    pub config_echo: String,
}

impl RunRecord {
    pub fn new(config_echo: String) -> Self {
        Self {
            rows: Vec::new(),
            status: RunStatus::Completed,
            config_echo,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), BenchError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# config: {}", self.config_echo)?;
        writeln!(
            w,
            "t,a_bar,b_bar,r_bar,va_bar,vb_bar,e_a,e_b,e_va,e_vb,lambda,length,energy,status"
        )?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},ok",
                row.t,
                opt(row.a_bar),
                row.b_bar,
                opt(row.r_bar),
                opt(row.va_bar),
                opt(row.vb_bar),
                opt(row.e_a),
                opt(row.e_b),
                opt(row.e_va),
                opt(row.e_vb),
                row.lambda,
                row.length,
                row.energy
            )?;
        }
        if let RunStatus::Vanished { step } = &self.status {
            writeln!(
                w,
                "{},,,,,,,,,,,,,vanished@{step}",
                self.rows.last().map(|r| r.t).unwrap_or(0.0)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fill the velocity columns by differencing the recorded series: central
/// differences interiorly, one-sided at the ends.
pub fn series_velocity(record: &mut RunRecord) -> Result<(), BenchError> {
    let n = record.rows.len();
    if n < 2 {
        return Err(BenchError::InsufficientData { need: 2, got: n });
    }
    let t: Vec<f64> = record.rows.iter().map(|r| r.t).collect();
    let b: Vec<f64> = record.rows.iter().map(|r| r.b_bar).collect();
    let a: Vec<Option<f64>> = record.rows.iter().map(|r| r.a_bar).collect();
    let have_a = a.iter().all(|x| x.is_some());
    let diff = |v: &[f64], k: usize| -> f64 {
        if k == 0 {
            (v[1] - v[0]) / (t[1] - t[0])
        } else if k == n - 1 {
            (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2])
        } else {
            (v[k + 1] - v[k - 1]) / (t[k + 1] - t[k - 1])
        }
    };
    let av: Vec<f64> = a.iter().map(|x| x.unwrap_or(0.0)).collect();
    for k in 0..n {
        record.rows[k].vb_bar = Some(diff(&b, k));
        if have_a {
            record.rows[k].va_bar = Some(diff(&av, k));
        }
    }
    Ok(())
}

/// Scalar run error: trapezoidal integral of `(b(t) - b_bar(t))^2`.
pub fn l2_error(record: &RunRecord, exact: &EllipseExact) -> Result<f64, BenchError> {
    let n = record.rows.len();
    if n < 2 {
        return Err(BenchError::InsufficientData { need: 2, got: n });
    }
    let sq = |row: &RunRow| {
        let e = exact.state(row.t).b - row.b_bar;
        e * e
    };
    let mut acc = 0.0;
    for w in record.rows.windows(2) {
        acc += 0.5 * (sq(&w[0]) + sq(&w[1])) * (w[1].t - w[0].t);
    }
    Ok(acc)
}

/// Interface length and energy `int gamma dC` over a discrete contour, with
/// gamma evaluated at each segment's inside-pointing normal.
pub fn interface_energy(contour: &Contour, model: &EnergyModel) -> (f64, f64) {
    let mut length = 0.0;
    let mut energy = 0.0;
    for s in &contour.segments {
        let len = s.length();
        if len == 0.0 {
            continue;
        }
        let lambda = inclination(s.normal()).expect("segment normals are unit");
        length += len;
        energy += model.gamma(lambda) * len;
    }
    (length, energy)
}

/// Energy efficiency of the interface geometry: the inverse length-averaged
/// energy `(int dC) / (int gamma dC)`.
pub fn efficiency(mesh: &TriMesh, ls: &LevelSet, model: &EnergyModel) -> Result<f64, BenchError> {
    let contour = extract_contour(mesh, ls)?;
    Ok(efficiency_of_contour(&contour, model))
}

pub fn efficiency_of_contour(contour: &Contour, model: &EnergyModel) -> f64 {
    let (length, energy) = interface_energy(contour, model);
    length / energy
}

/// Least-squares slope of `ln(error)` against `ln(discretization)`.
pub fn fit_convergence(pairs: &[(f64, f64)]) -> Result<f64, BenchError> {
    if pairs.len() < 3 {
        return Err(BenchError::InsufficientData {
            need: 3,
            got: pairs.len(),
        });
    }
    for &(x, y) in pairs {
        if !(x > 0.0 && y > 0.0) {
            return Err(BenchError::DegenerateData(format!(
                "non-positive entry ({x}, {y})"
            )));
        }
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx < 1e-24 {
        return Err(BenchError::DegenerateData(
            "identical abscissae".to_string(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
