use std::path::{Path, PathBuf};
use std::time::Instant;

use cascadia::cumulant::solve_ce2;
use cascadia::doppler::{doppler_profile, DopplerParams};
use cascadia::io::{fmt_f64, write_csv, write_json};
use cascadia::{build_chain, field_observables, solve_steady_state, Complex64, Error, SolverOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::spec::{CellParams, Format, SweepModel, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Unresolved,
    Unstable,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Unresolved => "unresolved",
            Status::Unstable => "unstable",
        }
    }
}

/// Scalar observables of one cell.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Scalars {
    pub s0: f64,
    pub s_out_right: f64,
    pub s_out_left: f64,
    pub j_z: f64,
    pub s_ie: f64,
}

impl Scalars {
    fn nan(s0: f64) -> Self {
        Scalars { s0, s_out_right: f64::NAN, s_out_left: f64::NAN, j_z: f64::NAN, s_ie: f64::NAN }
    }
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub values: Vec<f64>,
    pub status: Status,
    pub scalars: Scalars,
    /// `(index, D, a, b)` rows; column meaning depends on the model.
    pub profile: Vec<(usize, f64, f64, f64)>,
}

fn profile_columns(model: SweepModel) -> [&'static str; 4] {
    match model {
        SweepModel::Ce2Uwm => ["site", "D_i", "sigma_z", "s_ie_over_s0"],
        SweepModel::Doppler => ["point", "D", "s", "s_over_s0"],
        _ => ["site", "D_i", "sigma_z", "s_i"],
    }
}

fn classify(e: &Error) -> Status {
    match e {
        Error::NumericalInstability { .. } => Status::Unstable,
        _ => Status::Unresolved,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn run_cell(spec: &SweepSpec, values: &[f64], opts: &SolverOptions) -> CellOutput {
    let CellParams { params, d_max } = spec.cell_params(values).expect("validated before the run");
    let s0 = params.s0();
    let beta = params.beta();
    let failed = |status| CellOutput { values: values.to_vec(), status, scalars: Scalars::nan(s0), profile: Vec::new() };

    match spec.model {
        SweepModel::Doppler => {
            let mut dp = DopplerParams::new(spec.params.xi_delta, s0, d_max);
            dp.grid = spec.params.grid;
            match doppler_profile(&dp) {
                Ok(prof) => {
                    let end = prof.last().map_or(f64::NAN, |x| x.1);
                    CellOutput {
                        values: values.to_vec(),
                        status: Status::Ok,
                        scalars: Scalars { s0, s_out_right: end, s_out_left: 0.0, j_z: f64::NAN, s_ie: f64::NAN },
                        profile: prof.iter().enumerate().map(|(k, (d, s))| (k, *d, *s, s / s0)).collect(),
                    }
                }
                Err(e) => failed(classify(&e)),
            }
        }
        SweepModel::Ce2Uwm => match solve_ce2(&params, params.n_emitters, opts) {
            Ok(sol) => {
                let prof = sol.inelastic_profile();
                let n = sol.len();
                let total: Complex64 = sol.sigma_minus.iter().sum();
                let right = 0.5 * params.rabi - Complex64::i() * beta * total;
                CellOutput {
                    values: values.to_vec(),
                    status: Status::Ok,
                    scalars: Scalars {
                        s0,
                        s_out_right: 8.0 * right.norm_sqr(),
                        s_out_left: 0.0,
                        j_z: mean(&sol.sigma_z),
                        s_ie: prof[n - 1],
                    },
                    profile: (0..n).map(|i| (i + 1, 4.0 * beta * (i + 1) as f64, sol.sigma_z[i], prof[i] / s0)).collect(),
                }
            }
            Err(e) => failed(classify(&e)),
        },
        m => {
            let tag = m.mean_field_tag().expect("mean-field model");
            let chain = (m == SweepModel::Bwm).then(|| build_chain(&params));
            let sol = match solve_steady_state(tag, &params, chain.as_ref(), opts) {
                Ok(s) => s,
                Err(e) => return failed(classify(&e)),
            };
            let obs = match field_observables(&sol, &params, chain.as_ref()) {
                Ok(o) => o,
                Err(e) => return failed(classify(&e)),
            };
            CellOutput {
                values: values.to_vec(),
                status: Status::Ok,
                scalars: Scalars {
                    s0,
                    s_out_right: obs.s_out_right,
                    s_out_left: obs.s_out_left,
                    j_z: mean(&sol.sigma_z),
                    s_ie: f64::NAN,
                },
                profile: (0..sol.len())
                    .map(|i| (i + 1, 4.0 * beta * (i + 1) as f64, sol.sigma_z[i], obs.s_profile[i]))
                    .collect(),
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub command: &'a str,
    pub spec: &'a T,
    pub version: &'a str,
    pub wall_time_s: f64,
    pub cells: usize,
    pub unresolved_cells: usize,
    pub unstable_cells: usize,
    pub outputs: Vec<String>,
}

pub struct SweepSummary {
    pub unstable: usize,
    pub unresolved: usize,
    pub files: Vec<PathBuf>,
}

pub fn run_sweep(spec: &SweepSpec) -> std::io::Result<SweepSummary> {
    let start = Instant::now();
    let opts = spec.solver.options();
    let grid = spec.grid();
    let cells: Vec<CellOutput> = grid.par_iter().map(|v| run_cell(spec, v, &opts)).collect();

    let dir = Path::new(&spec.output.path);
    std::fs::create_dir_all(dir)?;
    let axis_names: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    let files = match spec.output.format {
        Format::Csv => write_sweep_csv(dir, spec.model, &axis_names, &cells)?,
        Format::Json => write_sweep_json(dir, spec.model, &axis_names, &cells)?,
    };
    let unstable = cells.iter().filter(|c| c.status == Status::Unstable).count();
    let unresolved = cells.iter().filter(|c| c.status == Status::Unresolved).count();
    let manifest_path = dir.join("manifest.json");
    let manifest = Manifest {
        command: "sweep",
        spec,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        cells: cells.len(),
        unresolved_cells: unresolved,
        unstable_cells: unstable,
        outputs: files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect(),
    };
    write_json(&manifest_path, &manifest)?;
    let mut all = files;
    all.push(manifest_path);
    Ok(SweepSummary { unstable, unresolved, files: all })
}

fn write_sweep_csv(dir: &Path, model: SweepModel, axes: &[&str], cells: &[CellOutput]) -> std::io::Result<Vec<PathBuf>> {
    let scalar_path = dir.join("scalars.csv");
    let mut header: Vec<&str> = vec!["cell"];
    header.extend_from_slice(axes);
    header.extend_from_slice(&["status", "s0_in", "s_out_right", "s_out_left", "j_z", "s_ie"]);
    let rows = cells.iter().enumerate().map(|(k, c)| {
        let mut r = vec![k.to_string()];
        r.extend(c.values.iter().map(|v| fmt_f64(*v)));
        r.push(c.status.as_str().to_string());
        let s = &c.scalars;
        r.extend([s.s0, s.s_out_right, s.s_out_left, s.j_z, s.s_ie].iter().map(|v| fmt_f64(*v)));
        r
    });
    write_csv(&scalar_path, &header, rows)?;

    let profile_path = dir.join("profiles.csv");
    let mut header: Vec<&str> = vec!["cell"];
    header.extend_from_slice(axes);
    header.extend_from_slice(&profile_columns(model));
    let rows = cells.iter().enumerate().flat_map(|(k, c)| {
        c.profile.iter().map(move |(i, d, a, b)| {
            let mut r = vec![k.to_string()];
            r.extend(c.values.iter().map(|v| fmt_f64(*v)));
            r.extend([i.to_string(), fmt_f64(*d), fmt_f64(*a), fmt_f64(*b)]);
            r
        })
    });
    write_csv(&profile_path, &header, rows)?;
    Ok(vec![scalar_path, profile_path])
}

fn write_sweep_json(dir: &Path, model: SweepModel, axes: &[&str], cells: &[CellOutput]) -> std::io::Result<Vec<PathBuf>> {
    let cols = profile_columns(model);
    let records: Vec<serde_json::Value> = cells
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let axis_values: serde_json::Map<String, serde_json::Value> =
                axes.iter().zip(&c.values).map(|(n, v)| (n.to_string(), serde_json::json!(v))).collect();
            let profile: Vec<serde_json::Value> = c
                .profile
                .iter()
                .map(|(i, d, a, b)| serde_json::json!({ cols[0]: i, cols[1]: d, cols[2]: a, cols[3]: b }))
                .collect();
            serde_json::json!({
                "cell": k,
                "axes": axis_values,
                "status": c.status,
                "scalars": c.scalars,
                "profile": profile,
            })
        })
        .collect();
    let path = dir.join("sweep.json");
    write_json(&path, &records)?;
    Ok(vec![path])
}
