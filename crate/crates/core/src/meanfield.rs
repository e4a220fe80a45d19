//! Mean-field steady states of the four waveguide models.
//!
//! Every model integrates the same single-site Bloch equations
//!
//! ```text
//! d<σ⁻_i>/dt = i α_i <σᶻ_i> - <σ⁻_i>/2 + i Δ_i <σ⁻_i>
//! d<σᶻ_i>/dt = 2i α_i* <σ⁻_i> - 2i α_i <σ⁺_i> - (1 + <σᶻ_i>)
//! ```
//!
//! and differs only in the effective drive `α_i`. Drives are evaluated in
//! O(N) per call for all models: the upstream part is a running sum, the
//! attenuated backward sum of the averaged model obeys a one-term
//! recurrence, and the phased backward sum of a concrete chain factorizes as
//! `exp(-2ik0 z_i) * sum_{j>i} exp(2ik0 z_j) <σ⁻_j>`.

use std::cell::RefCell;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv, write_json};
use crate::model::{hop_attenuation, EmitterChain, ModelParams, ModelTag};
use crate::ode::{integrate_to_steady_state, Method, OdeSystem, Outcome, StepOptions};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Linear drive ramp `s0(t)` from `s0_start` to `s0_end` over `duration`.
///
/// When present the ramp overrides the drive in the parameters: after the
/// ramp the chain is driven at `s0_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub s0_start: f64,
    pub s0_end: f64,
    pub duration: f64,
}

impl Ramp {
    pub fn s0_at(&self, t: f64) -> f64 {
        if t >= self.duration || self.duration <= 0.0 {
            self.s0_end
        } else {
            let x = (t / self.duration).max(0.0);
            self.s0_start + (self.s0_end - self.s0_start) * x
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Integration stops once the max-norm of the right-hand side drops
    /// below this value.
    pub steady_state_residual: f64,
    pub t_max: f64,
    pub ramp: Option<Ramp>,
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            steady_state_residual: 1e-9,
            t_max: 1e4,
            ramp: None,
            method: Method::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_residual(mut self, r: f64) -> Self {
        self.steady_state_residual = r;
        self
    }

    pub fn with_ramp(mut self, ramp: Ramp) -> Self {
        self.ramp = Some(ramp);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.abs_tol, self.rel_tol, self.steady_state_residual, self.t_max];
        if !pos.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidParams("solver tolerances and t_max must be positive".into()));
        }
        if let Some(r) = self.ramp {
            if !(r.s0_start >= 0.0 && r.s0_end >= 0.0 && r.duration >= 0.0) || !r.duration.is_finite() {
                return Err(Error::InvalidParams("ramp needs non-negative s0 values and duration".into()));
            }
            if r.duration >= self.t_max {
                return Err(Error::InvalidParams("ramp duration must be shorter than t_max".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn step_options(&self) -> StepOptions {
        StepOptions { rtol: self.rel_tol, atol: self.abs_tol, method: self.method, ..StepOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    pub sigma_minus: Vec<C64>,
    pub sigma_z: Vec<f64>,
    pub alpha: Vec<C64>,
    pub converged: bool,
    pub residual: f64,
    pub model_tag: ModelTag,
    /// Time at which integration stopped.
    pub t_final: f64,
}

impl MeanFieldSolution {
    pub fn len(&self) -> usize {
        self.sigma_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_z.is_empty()
    }

    /// Largest `4|<σ⁻>|² + <σᶻ>²` over the chain.
    pub fn max_bloch_norm(&self) -> f64 {
        self.sigma_minus
            .iter()
            .zip(&self.sigma_z)
            .map(|(s, z)| 4.0 * s.norm_sqr() + z * z)
            .fold(0.0, f64::max)
    }

    /// Columnar CSV, one row per site (1-based), `D_i = 4 beta i`.
    pub fn write_csv(&self, params: &ModelParams, path: &Path) -> std::io::Result<()> {
        let beta = params.beta();
        let rows = (0..self.len()).map(|i| {
            let site = i + 1;
            vec![
                site.to_string(),
                fmt_f64(4.0 * beta * site as f64),
                fmt_f64(self.sigma_minus[i].re),
                fmt_f64(self.sigma_minus[i].im),
                fmt_f64(self.sigma_z[i]),
                fmt_f64(self.alpha[i].re),
                fmt_f64(self.alpha[i].im),
                fmt_f64(8.0 * self.alpha[i].norm_sqr()),
            ]
        });
        write_csv(
            path,
            &["site", "D_i", "re_sigma_minus", "im_sigma_minus", "sigma_z", "re_alpha", "im_alpha", "s_i"],
            rows,
        )
    }

    /// JSON sidecar with parameters and convergence metadata.
    pub fn write_sidecar(&self, params: &ModelParams, path: &Path) -> std::io::Result<()> {
        let meta = serde_json::json!({
            "model": self.model_tag,
            "params": params,
            "residual": self.residual,
            "converged": self.converged,
            "t_final": self.t_final,
        });
        write_json(path, &meta)
    }
}

/// Backward (left-going) part of the drive.
#[derive(Debug, Clone)]
enum Backward {
    None,
    /// `sum_{j>i} r^{j-i} <σ⁻_j>`; `r = 1` is the collective Dicke drive.
    Attenuated(f64),
    /// `exp(2ik0 z_j)` per site.
    Phased(Vec<C64>),
}

#[derive(Debug, Clone)]
struct Coupling {
    beta: f64,
    backward: Backward,
}

impl Coupling {
    fn new(model: ModelTag, params: &ModelParams, chain: Option<&EmitterChain>) -> Result<Self> {
        let backward = match model {
            ModelTag::Uwm => Backward::None,
            ModelTag::Dm => Backward::Attenuated(1.0),
            ModelTag::Eam => Backward::Attenuated(hop_attenuation(params.eta)),
            ModelTag::Bwm => Backward::Phased(chain.ok_or(Error::ChainRequired)?.round_trip_phases()),
        };
        Ok(Coupling { beta: params.beta(), backward })
    }

    fn fill_drive(&self, omega_half: f64, sigma: &[C64], out: &mut [C64]) {
        let n = sigma.len();
        let mib = -I * self.beta;
        let mut up = C64::new(0.0, 0.0);
        for i in 0..n {
            out[i] = omega_half + mib * up;
            up += sigma[i];
        }
        match &self.backward {
            Backward::None => {}
            Backward::Attenuated(r) => {
                let mut b = C64::new(0.0, 0.0);
                for i in (0..n).rev() {
                    out[i] += mib * b;
                    b = (sigma[i] + b) * *r;
                }
            }
            Backward::Phased(p) => {
                let mut s = C64::new(0.0, 0.0);
                for i in (0..n).rev() {
                    out[i] += mib * p[i].conj() * s;
                    s += p[i] * sigma[i];
                }
            }
        }
    }

    /// Left-going output amplitude weights relative to site 1.
    fn left_weights(&self, model: ModelTag, n: usize) -> Vec<C64> {
        match (&self.backward, model) {
            (Backward::None, _) => vec![C64::new(0.0, 0.0); n],
            (Backward::Attenuated(r), _) => {
                let mut w = Vec::with_capacity(n);
                let mut x = 1.0;
                for _ in 0..n {
                    w.push(C64::new(x, 0.0));
                    x *= r;
                }
                w
            }
            (Backward::Phased(p), _) => {
                let p0 = p.first().copied().unwrap_or(C64::new(1.0, 0.0)).conj();
                p.iter().map(|pj| pj * p0).collect()
            }
        }
    }
}

fn detunings_for(params: &ModelParams, chain: Option<&EmitterChain>) -> Result<Vec<f64>> {
    let n = params.n_emitters;
    match chain {
        Some(c) => {
            if c.positions.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: c.positions.len() });
            }
            if c.detunings.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: c.detunings.len() });
            }
            Ok(c.detunings.clone())
        }
        None => Ok(vec![params.detuning; n]),
    }
}

/// Effective drive `α_i` of every site for the given coherences.
///
/// The Dicke model uses the permutation-symmetric collective drive
/// `Ω/2 - iβ sum_{j≠i} <σ⁻_j>`, which reduces to `Ω/2 - iβ(N-1)<σ⁻>` for a
/// uniform state.
pub fn effective_drive(
    model: ModelTag,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
    sigma_minus: &[C64],
) -> Result<Vec<C64>> {
    if sigma_minus.len() != params.n_emitters {
        return Err(Error::LengthMismatch { expected: params.n_emitters, got: sigma_minus.len() });
    }
    if let Some(c) = chain {
        if c.positions.len() != params.n_emitters {
            return Err(Error::LengthMismatch { expected: params.n_emitters, got: c.positions.len() });
        }
    }
    let coupling = Coupling::new(model, params, chain)?;
    let mut out = vec![C64::new(0.0, 0.0); sigma_minus.len()];
    coupling.fill_drive(0.5 * params.rabi, sigma_minus, &mut out);
    Ok(out)
}

/// Local Bloch right-hand side for one site.
#[inline]
fn bloch_rhs(alpha: C64, sigma: C64, z: f64, detuning: f64) -> (C64, f64) {
    let ds = I * alpha * z - 0.5 * sigma + I * detuning * sigma;
    // 2i α* σ - 2i α σ* = -4 Im(α* σ)
    let dz = -4.0 * (alpha.conj() * sigma).im - (1.0 + z);
    (ds, dz)
}

fn omega_half_at(ramp: Option<Ramp>, rabi: f64, t: f64) -> f64 {
    match ramp {
        Some(r) => 0.5 * (0.5 * r.s0_at(t)).sqrt(),
        None => 0.5 * rabi,
    }
}

struct ChainOde<'a> {
    coupling: &'a Coupling,
    detunings: &'a [f64],
    rabi: f64,
    ramp: Option<Ramp>,
    sigma: RefCell<Vec<C64>>,
    alpha: RefCell<Vec<C64>>,
}

impl OdeSystem for ChainOde<'_> {
    fn dim(&self) -> usize {
        3 * self.detunings.len()
    }

    fn autonomous(&self) -> bool {
        self.ramp.is_none()
    }

    fn rhs(&self, t: f64, y: &[f64], d: &mut [f64]) {
        let mut sigma = self.sigma.borrow_mut();
        let mut alpha = self.alpha.borrow_mut();
        for (i, s) in sigma.iter_mut().enumerate() {
            *s = C64::new(y[3 * i], y[3 * i + 1]);
        }
        self.coupling.fill_drive(omega_half_at(self.ramp, self.rabi, t), &sigma, &mut alpha);
        for i in 0..sigma.len() {
            let (ds, dz) = bloch_rhs(alpha[i], sigma[i], y[3 * i + 2], self.detunings[i]);
            d[3 * i] = ds.re;
            d[3 * i + 1] = ds.im;
            d[3 * i + 2] = dz;
        }
    }
}

/// Permutation-symmetric Dicke dynamics reduced to one site, with
/// collective coupling `kappa = beta (N - 1)`.
struct DickeOde {
    kappa: f64,
    detuning: f64,
    rabi: f64,
    ramp: Option<Ramp>,
}

impl DickeOde {
    fn drive(&self, t: f64, sigma: C64) -> C64 {
        omega_half_at(self.ramp, self.rabi, t) - I * self.kappa * sigma
    }
}

impl OdeSystem for DickeOde {
    fn dim(&self) -> usize {
        3
    }

    fn autonomous(&self) -> bool {
        self.ramp.is_none()
    }

    fn rhs(&self, t: f64, y: &[f64], d: &mut [f64]) {
        let sigma = C64::new(y[0], y[1]);
        let (ds, dz) = bloch_rhs(self.drive(t, sigma), sigma, y[2], self.detuning);
        d[0] = ds.re;
        d[1] = ds.im;
        d[2] = dz;
    }
}

fn check_bloch(y: &[f64]) {
    if cfg!(debug_assertions) {
        for c in y.chunks_exact(3) {
            let norm = 4.0 * (c[0] * c[0] + c[1] * c[1]) + c[2] * c[2];
            debug_assert!(norm <= 1.0 + 1e-6, "Bloch vector left the ball: {norm}");
        }
    }
}

/// Steady state reached by integrating from the ground state.
pub fn solve_steady_state(
    model: ModelTag,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
    opts: &SolverOptions,
) -> Result<MeanFieldSolution> {
    solve_inner(model, params, chain, opts, None)
}

/// Steady state reached by integrating from `initial`, typically the
/// solution at a neighbouring drive, combined with a [`Ramp`] to follow a
/// branch adiabatically.
pub fn solve_steady_state_from(
    model: ModelTag,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
    opts: &SolverOptions,
    initial: &MeanFieldSolution,
) -> Result<MeanFieldSolution> {
    if initial.len() != params.n_emitters || initial.sigma_minus.len() != params.n_emitters {
        return Err(Error::LengthMismatch { expected: params.n_emitters, got: initial.len() });
    }
    solve_inner(model, params, chain, opts, Some(initial))
}

fn solve_inner(
    model: ModelTag,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
    opts: &SolverOptions,
    initial: Option<&MeanFieldSolution>,
) -> Result<MeanFieldSolution> {
    params.validate()?;
    opts.validate()?;
    let n = params.n_emitters;
    let coupling = Coupling::new(model, params, chain)?;
    let detunings = detunings_for(params, chain)?;
    let t_min = opts.ramp.map_or(0.0, |r| r.duration);
    let step = opts.step_options();

    let final_rabi = match opts.ramp {
        Some(r) => (0.5 * r.s0_end).sqrt(),
        None => params.rabi,
    };

    let (sigma_minus, sigma_z, report) = if model == ModelTag::Dm {
        let mut y = match initial {
            // a non-uniform start is projected onto the symmetric manifold
            Some(s) => {
                let m = n as f64;
                let sm: C64 = s.sigma_minus.iter().sum::<C64>() / m;
                let sz: f64 = s.sigma_z.iter().sum::<f64>() / m;
                [sm.re, sm.im, sz]
            }
            None => [0.0, 0.0, -1.0],
        };
        let sys = DickeOde {
            kappa: params.beta() * (n as f64 - 1.0),
            detuning: params.detuning,
            rabi: params.rabi,
            ramp: opts.ramp,
        };
        let rep = integrate_to_steady_state(&sys, &mut y, 0.0, opts.steady_state_residual, t_min, opts.t_max, &step, |_, y| {
            check_bloch(y)
        });
        (vec![C64::new(y[0], y[1]); n], vec![y[2]; n], rep)
    } else {
        let mut y = vec![0.0; 3 * n];
        match initial {
            Some(s) => {
                for i in 0..n {
                    y[3 * i] = s.sigma_minus[i].re;
                    y[3 * i + 1] = s.sigma_minus[i].im;
                    y[3 * i + 2] = s.sigma_z[i];
                }
            }
            None => {
                for i in 0..n {
                    y[3 * i + 2] = -1.0;
                }
            }
        }
        let sys = ChainOde {
            coupling: &coupling,
            detunings: &detunings,
            rabi: params.rabi,
            ramp: opts.ramp,
            sigma: RefCell::new(vec![C64::new(0.0, 0.0); n]),
            alpha: RefCell::new(vec![C64::new(0.0, 0.0); n]),
        };
        let rep = integrate_to_steady_state(&sys, &mut y, 0.0, opts.steady_state_residual, t_min, opts.t_max, &step, |_, y| {
            check_bloch(y)
        });
        let sm = (0..n).map(|i| C64::new(y[3 * i], y[3 * i + 1])).collect();
        let sz = (0..n).map(|i| y[3 * i + 2]).collect();
        (sm, sz, rep)
    };

    if report.outcome == Outcome::Unstable {
        return Err(Error::NumericalInstability { t: report.t });
    }
    let mut alpha = vec![C64::new(0.0, 0.0); n];
    coupling.fill_drive(0.5 * final_rabi, &sigma_minus, &mut alpha);
    Ok(MeanFieldSolution {
        sigma_minus,
        sigma_z,
        alpha,
        converged: report.outcome == Outcome::Done && report.residual < opts.steady_state_residual,
        residual: report.residual,
        model_tag: model,
        t_final: report.t,
    })
}

/// Steady state of the symmetric Dicke mean-field dynamics at collective
/// depth `4 beta (N - 1) = depth`.
pub(crate) fn solve_dicke_reduced(
    depth: f64,
    s0: f64,
    start: (C64, f64),
    opts: &SolverOptions,
) -> Result<(C64, f64, bool)> {
    opts.validate()?;
    let sys = DickeOde { kappa: depth / 4.0, detuning: 0.0, rabi: (0.5 * s0).sqrt(), ramp: opts.ramp };
    let mut y = [start.0.re, start.0.im, start.1];
    let t_min = opts.ramp.map_or(0.0, |r| r.duration);
    let rep = integrate_to_steady_state(&sys, &mut y, 0.0, opts.steady_state_residual, t_min, opts.t_max, &opts.step_options(), |_, _| {});
    if rep.outcome == Outcome::Unstable {
        return Err(Error::NumericalInstability { t: rep.t });
    }
    Ok((C64::new(y[0], y[1]), y[2], rep.outcome == Outcome::Done))
}

/// Local field profile and coherent output saturations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldObservables {
    pub alpha_profile: Vec<C64>,
    /// `s_i = 8 |α_i|²`.
    pub s_profile: Vec<f64>,
    /// Saturation a hypothetical emitter right of the chain would see.
    pub s_out_right: f64,
    /// Same for the reflected field, seen from left of site 1.
    pub s_out_left: f64,
}

pub fn field_observables(
    solution: &MeanFieldSolution,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
) -> Result<FieldObservables> {
    if !solution.converged {
        return Err(Error::NotConverged);
    }
    let n = params.n_emitters;
    if solution.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: solution.len() });
    }
    let coupling = Coupling::new(solution.model_tag, params, chain)?;
    let beta = params.beta();
    let total: C64 = solution.sigma_minus.iter().sum();
    let right = 0.5 * params.rabi - I * beta * total;
    let weights = coupling.left_weights(solution.model_tag, n);
    let left: C64 = weights.iter().zip(&solution.sigma_minus).map(|(w, s)| w * s).sum::<C64>() * beta;
    Ok(FieldObservables {
        alpha_profile: solution.alpha.clone(),
        s_profile: solution.alpha.iter().map(|a| 8.0 * a.norm_sqr()).collect(),
        s_out_right: 8.0 * right.norm_sqr(),
        s_out_left: 8.0 * left.norm_sqr(),
    })
}

/// Saturation profile `s_1 = s0, s_{i+1} = s_i - 4 beta s_i / (1 + s_i)`,
/// the first-order (small `beta`) form of the cascaded steady state.
pub fn uwm_saturation_recursion(s0: f64, beta: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut s = s0;
    for _ in 0..n {
        out.push(s);
        s -= 4.0 * beta * s / (1.0 + s);
    }
    out
}

/// Saturation profile of the resonant unidirectional chain without the
/// small-`beta` expansion: `s_{i+1} = s_i (1 - 2 beta / (1 + s_i))²`.
///
/// This is the exact site-to-site map of the mean-field fixed point.
pub fn uwm_saturation_recursion_exact(s0: f64, beta: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut s = s0;
    for _ in 0..n {
        out.push(s);
        s *= (1.0 - 2.0 * beta / (1.0 + s)).powi(2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zeros(n: usize) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); n]
    }

    #[test]
    fn transparent_when_unexcited() {
        let p = ModelParams::from_beta(0.1, 5, 3.0).unwrap().with_eta(0.2);
        let chain = crate::model::build_chain(&p);
        for m in ModelTag::ALL {
            let a = effective_drive(m, &p, Some(&chain), &zeros(5)).unwrap();
            assert!(a.iter().all(|x| *x == C64::new(0.5 * p.rabi, 0.0)));
        }
    }

    #[test]
    fn drive_sums_match_direct_evaluation() {
        let p = ModelParams::from_beta(0.2, 7, 2.0).unwrap().with_eta(0.07).with_seed(3);
        let chain = crate::model::build_chain(&p);
        let sigma: Vec<C64> = (0..7).map(|k| C64::new(0.1 * k as f64 - 0.2, 0.05 * (k as f64).sin())).collect();
        let r = (-2.0 * (0.07 * PI).powi(2)).exp();
        let phase = |z: f64| C64::from_polar(1.0, 4.0 * PI * z);
        for m in ModelTag::ALL {
            let fast = effective_drive(m, &p, Some(&chain), &sigma).unwrap();
            for i in 0..7 {
                let mut a = C64::new(0.5 * p.rabi, 0.0);
                for j in 0..7 {
                    let c = match m {
                        _ if j < i => C64::new(1.0, 0.0),
                        _ if j == i => C64::new(0.0, 0.0),
                        ModelTag::Uwm => C64::new(0.0, 0.0),
                        ModelTag::Dm => C64::new(1.0, 0.0),
                        ModelTag::Eam => C64::new(r.powi((j - i) as i32), 0.0),
                        ModelTag::Bwm => phase(chain.positions[j] - chain.positions[i]),
                    };
                    a += -I * 0.2 * c * sigma[j];
                }
                assert!((a - fast[i]).norm() < 1e-14, "{m} site {i}");
            }
        }
    }

    #[test]
    fn strongly_disordered_average_is_cascaded() {
        let p = ModelParams::from_beta(0.1, 3, 2.0).unwrap().with_eta(1.0);
        let s = vec![C64::new(0.0, -0.1); 3];
        let a = effective_drive(ModelTag::Eam, &p, None, &s).unwrap();
        let r = (-2.0 * PI * PI).exp();
        let expect = 0.5 * p.rabi - 0.1 * 0.1 * (r + r * r);
        assert!((a[0].re - expect).abs() < 1e-20);
        assert!(a[0].im.abs() < 1e-20);
        assert!((a[0].re - 0.5 * p.rabi + 0.1 * 0.1 * 2.68e-9).abs() < 1e-12);
    }

    #[test]
    fn length_and_chain_errors() {
        let p = ModelParams::from_beta(0.1, 3, 2.0).unwrap();
        assert!(matches!(effective_drive(ModelTag::Uwm, &p, None, &zeros(2)), Err(Error::LengthMismatch { .. })));
        assert_eq!(effective_drive(ModelTag::Bwm, &p, None, &zeros(3)), Err(Error::ChainRequired));
    }

    #[test]
    fn single_emitter_resonance_fluorescence() {
        for s0 in [0.1, 2.0, 50.0] {
            let p = ModelParams::from_beta(0.3, 1, s0).unwrap();
            for m in [ModelTag::Uwm, ModelTag::Dm, ModelTag::Eam] {
                let sol = solve_steady_state(m, &p, None, &SolverOptions::default().with_residual(1e-12)).unwrap();
                assert!(sol.converged);
                assert!((sol.sigma_z[0] + 1.0 / (1.0 + s0)).abs() < 1e-10, "{m} {s0}");
                let a = 0.5 * p.rabi;
                let expect = -I * 2.0 * a / (1.0 + 8.0 * a * a);
                assert!((sol.sigma_minus[0] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cascaded_fixed_point_matches_exact_recursion() {
        let p = ModelParams::from_beta(0.05, 60, 8.0).unwrap();
        let sol = solve_steady_state(ModelTag::Uwm, &p, None, &SolverOptions::default().with_residual(1e-12)).unwrap();
        let s = uwm_saturation_recursion_exact(8.0, 0.05, 60);
        for i in 0..60 {
            assert!((sol.sigma_z[i] + 1.0 / (1.0 + s[i])).abs() < 1e-8, "site {i}");
        }
        let f = field_observables(&sol, &p, None).unwrap();
        assert_eq!(f.s_out_left, 0.0);
        for w in f.s_profile.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn recursions() {
        assert!(uwm_saturation_recursion(0.0, 0.1, 5).iter().all(|s| *s == 0.0));
        let r = uwm_saturation_recursion(1e4, 0.005, 10);
        for (i, s) in r.iter().enumerate() {
            assert!((s - (1e4 - 0.02 * i as f64)).abs() < 1e-4);
        }
    }

    #[test]
    fn dicke_reduction_matches_full_symmetric_chain() {
        let p = ModelParams::from_beta(0.05, 40, 5.0).unwrap();
        let o = SolverOptions::default().with_residual(1e-12);
        let dm = solve_steady_state(ModelTag::Dm, &p, None, &o).unwrap();
        let eam = solve_steady_state(ModelTag::Eam, &p, None, &o).unwrap();
        for i in 0..40 {
            assert!((dm.sigma_z[i] - eam.sigma_z[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn unconverged_is_flagged_not_fatal() {
        let p = ModelParams::from_beta(0.05, 20, 5.0).unwrap();
        let o = SolverOptions { t_max: 0.5, ..Default::default() };
        let sol = solve_steady_state(ModelTag::Uwm, &p, None, &o).unwrap();
        assert!(!sol.converged);
        assert_eq!(field_observables(&sol, &p, None), Err(Error::NotConverged));
    }

    #[test]
    fn ramp_sets_final_drive() {
        let p = ModelParams::from_beta(0.1, 1, 0.0).unwrap();
        let o = SolverOptions::default()
            .with_residual(1e-12)
            .with_ramp(Ramp { s0_start: 0.0, s0_end: 2.0, duration: 20.0 });
        let sol = solve_steady_state(ModelTag::Uwm, &p, None, &o).unwrap();
        assert!(sol.t_final >= 20.0);
        assert!((sol.sigma_z[0] + 1.0 / 3.0).abs() < 1e-10);
    }
}
