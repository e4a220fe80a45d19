//! Canned parameter sets for the figure data, reduced to desk scale where
//! the full size is out of reach (CE2 site counts, ensemble sizes).

use std::path::{Path, PathBuf};

use cascadia::analytic::{dicke_bistability_window, mean_polarization};
use cascadia::cumulant::solve_ce2;
use cascadia::doppler::{doppler_width, transmission, DopplerParams};
use cascadia::ensemble::run_ensemble;
use cascadia::io::{fmt_f64, write_csv};
use cascadia::{
    build_chain, field_observables, solve_steady_state, Error, ModelParams, ModelTag, SolverOptions,
};
use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigName {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig7,
    Fig8,
}

/// Overrides shared by all figures; `None` keeps the figure default.
#[derive(Debug, Clone, Default)]
pub struct FigOverrides {
    pub s0: Vec<f64>,
    pub sites: Option<usize>,
    pub n_emitters: Option<usize>,
    pub beta: Option<f64>,
    pub realizations: Option<usize>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
}

pub struct FigOutput {
    pub files: Vec<PathBuf>,
    pub unresolved: usize,
    pub unstable: usize,
    pub params: serde_json::Value,
}

#[derive(Default)]
struct Tally {
    unresolved: usize,
    unstable: usize,
}

impl Tally {
    fn record(&mut self, e: &Error) {
        match e {
            Error::NumericalInstability { .. } => self.unstable += 1,
            _ => self.unresolved += 1,
        }
    }
}

fn lin(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn log(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    lin(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn params(beta: f64, n: usize, s0: f64) -> Result<ModelParams, String> {
    ModelParams::from_beta(beta, n, s0).map_err(|e| e.to_string())
}

pub fn run(name: FigName, o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    
    match name {
        FigName::Fig2 => fig2(o, dir),
        FigName::Fig3 => fig3(o, dir),
        FigName::Fig4 => fig4(o, dir),
        FigName::Fig5 => fig5(o, dir),
        FigName::Fig7 => fig7(o, dir),
        FigName::Fig8 => fig8(o, dir),
    }
}

fn io<T>(r: std::io::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Unidirectional profiles `s(D)/s0`, `<σᶻ(D)>` against `D/s0`, and `j_z(s~)`.
fn fig2(o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    let n = o.n_emitters.unwrap_or(2000);
    let beta = o.beta.unwrap_or(0.005);
    let s0s = if o.s0.is_empty() { log(2.4, 80.0, 7) } else { o.s0.clone() };
    let opts = SolverOptions::default();
    let mut tally = Tally::default();
    let runs: Vec<_> = s0s
        .par_iter()
        .map(|&s0| {
            let p = params(beta, n, s0)?;
            Ok((p, solve_steady_state(ModelTag::Uwm, &p, None, &opts)))
        })
        .collect::<Result<_, String>>()?;
    let mut rows = Vec::new();
    let mut jz_rows = Vec::new();
    let d_total = 4.0 * beta * n as f64;
    for (p, r) in &runs {
        let s0 = p.s0();
        match r.as_ref().map_err(|e| e.clone()).and_then(|sol| field_observables(sol, p, None).map(|o| (sol, o))) {
            Ok((sol, obs)) => {
                for i in 0..n {
                    let d = 4.0 * beta * (i + 1) as f64;
                    rows.push(vec![f(s0), (i + 1).to_string(), f(d), f(d / s0), f(obs.s_profile[i] / s0), f(sol.sigma_z[i])]);
                }
                let jz = sol.sigma_z.iter().sum::<f64>() / n as f64;
                jz_rows.push(vec!["mean_field".into(), f(d_total), f(s0 / d_total), f(jz)]);
            }
            Err(e) => tally.record(&e),
        }
    }
    for st in lin(0.02, 4.0, o.points.unwrap_or(200)) {
        jz_rows.push(vec!["analytic".into(), f(d_total), f(st), f(mean_polarization(st * d_total, d_total))]);
    }
    let a = dir.join("fig2_profiles.csv");
    io(write_csv(&a, &["s0", "site", "D_i", "D_over_s0", "s_over_s0", "sigma_z"], rows))?;
    let b = dir.join("fig2_jz.csv");
    io(write_csv(&b, &["source", "D", "s_tilde", "j_z"], jz_rows))?;
    Ok(FigOutput {
        files: vec![a, b],
        unresolved: tally.unresolved,
        unstable: tally.unstable,
        params: json!({ "model": "UWM", "N": n, "beta": beta, "s0": s0s }),
    })
}

/// EAM inversion map over disorder, plus realization statistics.
fn fig3(o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    let n = o.n_emitters.unwrap_or(2000);
    let beta = o.beta.unwrap_or(0.005);
    let s0 = o.s0.first().copied().unwrap_or(20.0);
    let m = o.realizations.unwrap_or(20);
    let seed = o.seed.unwrap_or(0);
    let etas = log(1e-3, 1.0, o.points.unwrap_or(13));
    let opts = SolverOptions::default();
    let mut tally = Tally::default();

    let maps: Vec<_> = etas
        .par_iter()
        .map(|&eta| params(beta, n, s0).map(|p| (eta, solve_steady_state(ModelTag::Eam, &p.with_eta(eta), None, &opts))))
        .collect::<Result<_, String>>()?;
    let mut rows = Vec::new();
    for (eta, r) in &maps {
        match r {
            Ok(sol) if sol.converged => {
                for (i, z) in sol.sigma_z.iter().enumerate() {
                    rows.push(vec![f(*eta), (i + 1).to_string(), f(4.0 * beta * (i + 1) as f64), f(*z)]);
                }
            }
            Ok(_) => tally.unresolved += 1,
            Err(e) => tally.record(e),
        }
    }
    let a = dir.join("fig3_eam_map.csv");
    io(write_csv(&a, &["eta", "site", "D_i", "sigma_z"], rows))?;

    let ens_etas = [1e-3, 3e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.3, 1.0];
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &eta in &ens_etas {
        let p = params(beta, n, s0)?.with_eta(eta).with_seed(seed);
        match run_ensemble(&p, m, &opts) {
            Ok(rep) => {
                for i in 0..n {
                    rows.push(vec![
                        f(eta),
                        (i + 1).to_string(),
                        f(4.0 * beta * (i + 1) as f64),
                        f(rep.mean_diff[i]),
                        f(rep.variance[i]),
                    ]);
                }
                excluded.push(json!({ "eta": eta, "excluded": rep.excluded }));
            }
            Err(e) => tally.record(&e),
        }
    }
    let b = dir.join("fig3_ensemble.csv");
    io(write_csv(&b, &["eta", "site", "D_i", "mean_diff", "variance"], rows))?;
    Ok(FigOutput {
        files: vec![a, b],
        unresolved: tally.unresolved,
        unstable: tally.unstable,
        params: json!({ "N": n, "beta": beta, "s0": s0, "M": m, "seed": seed, "eta_map": etas, "eta_ensemble": ens_etas, "excluded": excluded }),
    })
}

/// Coherent outputs of the averaged model over disorder and drive, with
/// cuts for single realizations and the two limits.
fn fig4(o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    let n = o.n_emitters.unwrap_or(1000);
    let beta = o.beta.unwrap_or(0.005);
    let pts = o.points.unwrap_or(24);
    let d_total = 4.0 * beta * n as f64;
    let etas = log(1e-3, 1.0, (pts / 2).max(1));
    let s_tildes = lin(0.05, 4.0, pts);
    let opts = SolverOptions::default();
    let mut tally = Tally::default();

    let cells: Vec<(f64, f64)> = etas.iter().flat_map(|&e| s_tildes.iter().map(move |&s| (e, s))).collect();
    let solve = |tag: ModelTag, eta: f64, st: f64| -> Result<(f64, f64), Error> {
        let p = ModelParams::from_beta(beta, n, st * d_total)?.with_eta(eta);
        let chain = (tag == ModelTag::Bwm).then(|| build_chain(&p));
        let sol = solve_steady_state(tag, &p, chain.as_ref(), &opts)?;
        let obs = field_observables(&sol, &p, chain.as_ref())?;
        Ok((obs.s_out_right, obs.s_out_left))
    };
    let heat: Vec<_> = cells.par_iter().map(|&(e, s)| solve(ModelTag::Eam, e, s)).collect();
    let mut rows = Vec::new();
    for ((eta, st), r) in cells.iter().zip(&heat) {
        let (status, (a, b)) = match r {
            Ok(v) => ("ok", *v),
            Err(e) => {
                tally.record(e);
                ("unresolved", (f64::NAN, f64::NAN))
            }
        };
        rows.push(vec![f(*eta), f(*st), f(st * d_total), status.into(), f(a), f(b)]);
    }
    let a = dir.join("fig4_outputs.csv");
    io(write_csv(&a, &["eta", "s_tilde", "s0", "status", "s_out_right", "s_out_left"], rows))?;

    let mut cut_cells = Vec::new();
    for eta in [1e-3, 1e-2, 0.1] {
        cut_cells.push(("BWM", ModelTag::Bwm, eta));
        cut_cells.push(("EAM", ModelTag::Eam, eta));
    }
    cut_cells.push(("DM", ModelTag::Dm, 0.0));
    cut_cells.push(("UWM", ModelTag::Uwm, 0.0));
    let jobs: Vec<_> = cut_cells.iter().flat_map(|c| s_tildes.iter().map(move |&s| (*c, s))).collect();
    let cuts: Vec<_> = jobs.par_iter().map(|&((_, tag, eta), s)| solve(tag, eta, s)).collect();
    let mut rows = Vec::new();
    for (((label, _, eta), st), r) in jobs.iter().zip(&cuts) {
        let (status, (a, b)) = match r {
            Ok(v) => ("ok", *v),
            Err(e) => {
                tally.record(e);
                ("unresolved", (f64::NAN, f64::NAN))
            }
        };
        rows.push(vec![label.to_string(), f(*eta), f(*st), status.into(), f(a), f(b)]);
    }
    let b = dir.join("fig4_cuts.csv");
    io(write_csv(&b, &["model", "eta", "s_tilde", "status", "s_out_right", "s_out_left"], rows))?;
    let w = dicke_bistability_window(d_total);
    Ok(FigOutput {
        files: vec![a, b],
        unresolved: tally.unresolved,
        unstable: tally.unstable,
        params: json!({ "N": n, "beta": beta, "D_N": d_total, "dicke_s_minus": w.s_minus, "dicke_s_plus": w.s_plus }),
    })
}

/// Mean polarization against the intensive drive for three depths.
fn fig5(o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    let depths = [10.0, 40.0, 160.0];
    let st = lin(0.01, 4.0, o.points.unwrap_or(400));
    let rows: Vec<Vec<String>> = depths
        .iter()
        .flat_map(|&d| st.iter().map(move |&s| vec![f(d), f(s), f(mean_polarization(s * d, d))]))
        .collect();
    let a = dir.join("fig5_jz.csv");
    io(write_csv(&a, &["D", "s_tilde", "j_z"], rows))?;
    Ok(FigOutput { files: vec![a], unresolved: 0, unstable: 0, params: json!({ "D": depths }) })
}

/// Cumulant maps and inelastic profiles. The chain is scaled so the last
/// site sits at `D = 2 s0`.
fn fig7(o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    let sites = o.sites.unwrap_or(200);
    let (map_s0, prof_s0) = if o.s0.is_empty() { (vec![8.0, 80.0], vec![2.4, 8.0, 80.0]) } else { (o.s0.clone(), o.s0.clone()) };
    let mut all: Vec<f64> = prof_s0.clone();
    for s in &map_s0 {
        if !all.contains(s) {
            all.push(*s);
        }
    }
    // one chain for all drives, reaching D = 2 s0 for the strongest
    let s_top = all.iter().cloned().fold(0.0, f64::max);
    let beta = o.beta.unwrap_or(2.0 * s_top / (4.0 * sites as f64));
    let opts = SolverOptions::default();
    let mut tally = Tally::default();
    let mut files = Vec::new();
    let mut sie_rows = Vec::new();
    for s0 in all.iter().cloned() {
        let p = params(beta, sites, s0)?;
        let sol = match solve_ce2(&p, sites, &opts) {
            Ok(s) => s,
            Err(e) => {
                tally.record(&e);
                continue;
            }
        };
        if map_s0.contains(&s0) {
            let path = dir.join(format!("fig7_cumulant_s0_{s0}.csv"));
            io(sol.write_cumulant_map(&path))?;
            files.push(path);
        }
        if prof_s0.contains(&s0) {
            for (i, v) in sol.inelastic_profile().iter().enumerate() {
                let d = 4.0 * beta * (i + 1) as f64;
                sie_rows.push(vec![f(s0), (i + 1).to_string(), f(d), f(d / s0), f(v / s0)]);
            }
        }
    }
    let path = dir.join("fig7_sie.csv");
    io(write_csv(&path, &["s0", "site", "D_i", "D_over_s0", "s_ie_over_s0"], sie_rows))?;
    files.push(path);
    Ok(FigOutput {
        files,
        unresolved: tally.unresolved,
        unstable: tally.unstable,
        params: json!({ "sites": sites, "beta": beta, "s0": all }),
    })
}

/// Doppler-broadened transmission against the intensive drive.
fn fig8(o: &FigOverrides, dir: &Path) -> Result<FigOutput, String> {
    let d_max = 1e6;
    let xis = [0.0, 1.0, 10.0, 37.0];
    let st = lin(0.05, 3.0, o.points.unwrap_or(120));
    let cells: Vec<(f64, f64)> = xis.iter().flat_map(|&x| st.iter().map(move |&s| (x, s))).collect();
    let res: Vec<_> = cells.par_iter().map(|&(x, s)| transmission(&DopplerParams::new(x, s * d_max, d_max))).collect();
    let mut tally = Tally::default();
    let mut rows = Vec::new();
    for ((x, s), r) in cells.iter().zip(&res) {
        match r {
            Ok(t) => rows.push(vec![f(*x), f(*s), f(s * d_max), f(*t)]),
            Err(e) => tally.record(e),
        }
    }
    let a = dir.join("fig8_transmission.csv");
    io(write_csv(&a, &["xi_delta", "s_tilde", "s0", "transmission"], rows))?;
    let rb = doppler_width(384.230_484_468_5e12, 293.0, 86.909) / 6.0666e6;
    Ok(FigOutput {
        files: vec![a],
        unresolved: tally.unresolved,
        unstable: tally.unstable,
        params: json!({ "D_max": d_max, "xi_delta": xis, "rb87_d2_xi_at_293K": rb }),
    })
}
