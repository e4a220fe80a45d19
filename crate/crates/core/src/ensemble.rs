//! Disorder ensembles: bidirectional realizations against the averaged model.
//!
//! `variance` here is the mean squared deviation of the realizations from
//! the ensemble-averaged (EAM) profile, not the sample variance about the
//! sample mean. The two coincide only when `mean_diff` vanishes.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv, write_json};
use crate::meanfield::{field_observables, solve_steady_state, SolverOptions};
use crate::model::{build_chain_realization, ModelParams, ModelTag};

pub const DEFAULT_REALIZATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutput {
    /// Stream index of the realization.
    pub mu: u64,
    pub converged: bool,
    pub s_out_right: f64,
    pub s_out_left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub eta: f64,
    pub n_realizations: usize,
    pub seed: u64,
    pub beta: f64,
    /// Per site `(1/M') sum_mu (z_mu - z_EAM)` over the `M'` kept realizations.
    pub mean_diff: Vec<f64>,
    /// Per site `(1/M') sum_mu (z_mu - z_EAM)²`.
    pub variance: Vec<f64>,
    pub per_realization_outputs: Vec<RealizationOutput>,
    /// Realizations left out of the statistics because they did not converge.
    pub excluded: usize,
    /// `<σᶻ>` profile of the averaged model.
    pub eam_sigma_z: Vec<f64>,
    /// `<σᶻ>` profiles of the kept realizations, in stream order.
    #[serde(skip)]
    pub realization_sigma_z: Vec<Vec<f64>>,
}

struct Realization {
    out: RealizationOutput,
    sigma_z: Option<Vec<f64>>,
}

fn solve_realization(params: &ModelParams, mu: u64, opts: &SolverOptions) -> Result<Realization> {
    let chain = build_chain_realization(params, mu);
    let failed = || Realization {
        out: RealizationOutput { mu, converged: false, s_out_right: f64::NAN, s_out_left: f64::NAN },
        sigma_z: None,
    };
    let sol = match solve_steady_state(ModelTag::Bwm, params, Some(&chain), opts) {
        Ok(s) => s,
        Err(Error::NumericalInstability { .. } | Error::NonConvergence { .. }) => return Ok(failed()),
        Err(e) => return Err(e),
    };
    if !sol.converged {
        return Ok(failed());
    }
    let obs = field_observables(&sol, params, Some(&chain))?;
    Ok(Realization {
        out: RealizationOutput { mu, converged: true, s_out_right: obs.s_out_right, s_out_left: obs.s_out_left },
        sigma_z: Some(sol.sigma_z),
    })
}

/// Solves `m` seeded bidirectional realizations (streams `0..m` of
/// `params.seed`) and the averaged model once, and compares the profiles.
///
/// Realizations run on the current rayon pool; the reduction is in stream
/// order, so results do not depend on the thread count.
pub fn run_ensemble(params: &ModelParams, m: usize, opts: &SolverOptions) -> Result<EnsembleReport> {
    params.validate()?;
    opts.validate()?;
    if m == 0 {
        return Err(Error::InvalidParams("need at least one realization".into()));
    }
    let eam = solve_steady_state(ModelTag::Eam, params, None, opts)?;
    if !eam.converged {
        return Err(Error::NonConvergence { residual: eam.residual, t: eam.t_final });
    }
    let runs: Vec<Realization> =
        (0..m as u64).into_par_iter().map(|mu| solve_realization(params, mu, opts)).collect::<Result<_>>()?;

    let n = params.n_emitters;
    let mut mean_diff = vec![0.0; n];
    let mut variance = vec![0.0; n];
    let mut kept = Vec::new();
    for r in &runs {
        if let Some(z) = &r.sigma_z {
            for i in 0..n {
                let d = z[i] - eam.sigma_z[i];
                mean_diff[i] += d;
                variance[i] += d * d;
            }
            kept.push(z.clone());
        }
    }
    let excluded = m - kept.len();
    if !kept.is_empty() {
        let k = kept.len() as f64;
        mean_diff.iter_mut().for_each(|v| *v /= k);
        variance.iter_mut().for_each(|v| *v /= k);
    } else {
        mean_diff.fill(f64::NAN);
        variance.fill(f64::NAN);
    }
    Ok(EnsembleReport {
        eta: params.eta,
        n_realizations: m,
        seed: params.seed,
        beta: params.beta(),
        mean_diff,
        variance,
        per_realization_outputs: runs.into_iter().map(|r| r.out).collect(),
        excluded,
        eam_sigma_z: eam.sigma_z,
        realization_sigma_z: kept,
    })
}

impl EnsembleReport {
    pub fn max_variance(&self) -> f64 {
        self.variance.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_mean_diff(&self) -> f64 {
        self.mean_diff.iter().map(|v| v.abs()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV `site,D_i,mean_diff,variance` (1-based sites).
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let rows = self.mean_diff.iter().zip(&self.variance).enumerate().map(|(i, (m, v))| {
            vec![(i + 1).to_string(), fmt_f64(4.0 * self.beta * (i + 1) as f64), fmt_f64(*m), fmt_f64(*v)]
        });
        write_csv(path, &["site", "D_i", "mean_diff", "variance"], rows)
    }

    pub fn write_sidecar(&self, path: &Path) -> std::io::Result<()> {
        let meta = serde_json::json!({
            "eta": self.eta,
            "M": self.n_realizations,
            "seed": self.seed,
            "excluded_count": self.excluded,
            "realizations": self.per_realization_outputs,
        });
        write_json(path, &meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_disorder_means_no_spread() {
        let p = ModelParams::from_beta(0.01, 100, 3.0).unwrap().with_eta(0.0).with_seed(5);
        let rep = run_ensemble(&p, 3, &SolverOptions::default().with_residual(1e-12)).unwrap();
        assert_eq!(rep.excluded, 0);
        assert!(rep.max_abs_mean_diff() < 1e-10);
        assert!(rep.max_variance() < 1e-10);
    }

    #[test]
    fn rejects_empty_ensemble() {
        let p = ModelParams::from_beta(0.01, 10, 3.0).unwrap();
        assert!(run_ensemble(&p, 0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn mean_square_bounds_mean() {
        let p = ModelParams::from_beta(0.02, 200, 8.0).unwrap().with_eta(0.05).with_seed(11);
        let rep = run_ensemble(&p, 6, &SolverOptions::default()).unwrap();
        for (m, v) in rep.mean_diff.iter().zip(&rep.variance) {
            assert!(*v >= 0.0);
            assert!(m * m <= v * (1.0 + 1e-12) + 1e-300);
        }
    }
}
