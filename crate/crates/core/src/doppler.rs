//! Saturable-absorber propagation with Doppler-broadened emitters.
//!
//! The saturation parameter obeys `ds/dD = -s <1/(1 + s + 4Δ²)>_Δ` with Δ
//! normally distributed with standard deviation `xi_delta`. In real space
//! `D = σ₀ n z / A` with the resonant cross section `σ₀ = 3λ²/2π`, line
//! density `n` and mode area `A`; see [`optical_depth`].

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv};
use crate::ode::{integrate, Method, OdeSystem, Outcome, StepOptions};
use crate::quad::{gauss_hermite, gaussian_average};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How the cross section is averaged over the detuning distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Averaging {
    /// Closed-form Gaussian average of the Lorentzian (Voigt profile).
    #[default]
    Voigt,
    /// `n_nodes`-point Gauss–Hermite rule. Only accurate while the
    /// Lorentzian half width `sqrt(1+s)/2` is not small against `xi_delta`.
    GaussHermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerParams {
    /// Standard deviation of the detuning, in units of the decay rate.
    pub xi_delta: f64,
    pub n_nodes: usize,
    pub s0: f64,
    pub d_max: f64,
    /// Number of uniformly spaced output points on `[0, d_max]`.
    pub grid: usize,
    #[serde(default)]
    pub averaging: Averaging,
}

impl DopplerParams {
    pub fn new(xi_delta: f64, s0: f64, d_max: f64) -> Self {
        DopplerParams { xi_delta, n_nodes: 64, s0, d_max, grid: 101, averaging: Averaging::Voigt }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.xi_delta >= 0.0 && self.xi_delta.is_finite()) {
            return bad("xi_delta must be finite and >= 0");
        }
        if self.n_nodes < 8 || !self.n_nodes.is_multiple_of(2) {
            return bad("n_nodes must be even and >= 8");
        }
        if !(self.s0 >= 0.0 && self.s0.is_finite()) {
            return bad("s0 must be finite and >= 0");
        }
        if !(self.d_max >= 0.0 && self.d_max.is_finite()) {
            return bad("d_max must be finite and >= 0");
        }
        if self.grid < 2 {
            return bad("grid needs at least 2 points");
        }
        Ok(())
    }

    pub fn d_grid(&self) -> Vec<f64> {
        let n = self.grid - 1;
        (0..=n).map(|k| self.d_max * k as f64 / n as f64).collect()
    }
}

/// Scaled complementary error function `exp(y²) erfc(y)` for `y >= 0`.
pub fn erfcx(y: f64) -> f64 {
    if y < 26.0 {
        libm::erfc(y) * (y * y).exp()
    } else {
        // asymptotic series, terms decrease monotonically this far out
        let inv = 1.0 / (2.0 * y * y);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * inv;
            sum += term;
        }
        sum / (y * std::f64::consts::PI.sqrt())
    }
}

/// Absorption factor `<1/(1 + s + 4Δ²)>` over Δ ~ N(0, xi²).
pub fn voigt_factor(s: f64, xi: f64) -> f64 {
    let b = 0.5 * (1.0 + s).sqrt();
    if xi == 0.0 {
        return 1.0 / (1.0 + s);
    }
    let y = b / (xi * std::f64::consts::SQRT_2);
    0.25 * (std::f64::consts::PI / 2.0).sqrt() / (xi * b) * erfcx(y)
}

struct Absorber {
    xi: f64,
    rule: Option<(Vec<f64>, Vec<f64>)>,
}

impl Absorber {
    fn new(p: &DopplerParams) -> Self {
        let rule = (p.averaging == Averaging::GaussHermite && p.xi_delta > 0.0).then(|| gauss_hermite(p.n_nodes));
        Absorber { xi: p.xi_delta, rule }
    }

    fn factor(&self, s: f64) -> f64 {
        match &self.rule {
            None => voigt_factor(s, self.xi),
            Some((x, w)) => gaussian_average(|d| 1.0 / (1.0 + s + 4.0 * d * d), self.xi, x, w),
        }
    }
}

// integrated in u = ln s, which keeps relative accuracy deep in the
// absorbing tail
impl OdeSystem for Absorber {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], d: &mut [f64]) {
        d[0] = -self.factor(y[0].exp());
    }
}

fn step_options() -> StepOptions {
    StepOptions { rtol: 1e-13, atol: 1e-13, method: Method::Explicit, ..StepOptions::default() }
}

/// `(D, s)` on the uniform grid of `p`.
pub fn doppler_profile(p: &DopplerParams) -> Result<Vec<(f64, f64)>> {
    p.validate()?;
    let grid = p.d_grid();
    if p.s0 == 0.0 {
        return Ok(grid.into_iter().map(|d| (d, 0.0)).collect());
    }
    let sys = Absorber::new(p);
    let opts = step_options();
    let mut u = [p.s0.ln()];
    let mut out = Vec::with_capacity(grid.len());
    out.push((0.0, p.s0));
    for w in grid.windows(2) {
        let rep = integrate(&sys, &mut u, w[0], w[1], &opts);
        if rep.outcome != Outcome::Done {
            return Err(Error::NumericalInstability { t: rep.t });
        }
        out.push((w[1], u[0].exp()));
    }
    Ok(out)
}

/// `s(d_max) / s0`.
pub fn transmission(p: &DopplerParams) -> Result<f64> {
    let mut q = p.clone();
    q.grid = 2;
    let prof = doppler_profile(&q)?;
    Ok(if p.s0 == 0.0 { 0.0 } else { prof[1].1 / p.s0 })
}

/// Per-atom sampled propagation: `round(d_max / 4 beta)` emitters, each with
/// its own detuning drawn from N(0, xi²), applied through the exact
/// single-emitter transfer `s -> s |1 + 2 beta z / (1 - 2iΔ)|²`.
/// Returns `(D_i, s_i)` after every emitter, starting with `(0, s0)`.
pub fn doppler_profile_sampled(p: &DopplerParams, beta: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    p.validate()?;
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(Error::InvalidParams("beta must be in (0, 0.5]".into()));
    }
    let n = (p.d_max / (4.0 * beta)).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, p.xi_delta).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut s = p.s0;
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, s));
    for i in 1..=n {
        let det: f64 = normal.sample(&mut rng);
        let z = -1.0 / (1.0 + s / (1.0 + 4.0 * det * det));
        let t = num_complex::Complex64::new(1.0, 0.0) + 2.0 * beta * z / num_complex::Complex64::new(1.0, -2.0 * det);
        s *= t.norm_sqr();
        out.push((4.0 * beta * i as f64, s));
    }
    Ok(out)
}

/// Doppler standard deviation `nu0 sqrt(k T / m c²)` in the units of `nu0`,
/// for a mass in atomic mass units.
pub fn doppler_width(nu0: f64, temperature: f64, mass_u: f64) -> f64 {
    nu0 * (BOLTZMANN * temperature / (mass_u * ATOMIC_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT)).sqrt()
}

/// Optical depth `σ₀ n L / A` of a length `L` at line density `n`, with the
/// resonant two-level cross section `σ₀ = 3λ²/2π` and mode area `A`.
pub fn optical_depth(wavelength: f64, mode_area: f64, line_density: f64, length: f64) -> f64 {
    3.0 * wavelength * wavelength / (2.0 * std::f64::consts::PI) * line_density * length / mode_area
}

/// CSV `D,s,s_over_s0,transmission`; the last column repeats the endpoint
/// transmission on every row.
pub fn write_profile_csv(p: &DopplerParams, profile: &[(f64, f64)], path: &Path) -> std::io::Result<()> {
    let t = profile.last().map_or(f64::NAN, |x| x.1 / p.s0);
    let rows = profile.iter().map(|(d, s)| vec![fmt_f64(*d), fmt_f64(*s), fmt_f64(s / p.s0), fmt_f64(t)]);
    write_csv(path, &["D", "s", "s_over_s0", "transmission"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::uwm_saturation;

    #[test]
    fn erfcx_branches_meet() {
        let q = erfcx(26.0 + 1e-12) / erfcx(26.0 - 1e-12);
        assert!((q - 1.0).abs() < 1e-12, "{q}");
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn voigt_factor_matches_quadrature() {
        for xi in [0.3, 1.0, 10.0, 37.0] {
            for s in [0.0, 1.0, 100.0, 1e4] {
                let f = |d: f64| {
                    let g = (-(d * d) / (2.0 * xi * xi)).exp() / (xi * (2.0 * std::f64::consts::PI).sqrt());
                    g / (1.0 + s + 4.0 * d * d)
                };
                let (v, _) = crate::quad::integrate(f, -12.0 * xi, 12.0 * xi, 1e-16, 1e-13);
                let w = voigt_factor(s, xi);
                assert!((v - w).abs() < 1e-11 * w, "xi {xi} s {s}: {v} {w}");
            }
        }
    }

    #[test]
    fn no_broadening_is_lambert_profile() {
        let p = DopplerParams::new(0.0, 50.0, 120.0);
        for (d, s) in doppler_profile(&p).unwrap() {
            let w = uwm_saturation(50.0, d);
            assert!((s - w).abs() < 1e-8 * w.max(1.0), "D {d}: {s} {w}");
        }
    }

    #[test]
    fn width_scaling() {
        assert_eq!(doppler_width(1e14, 0.0, 87.0), 0.0);
        let a = doppler_width(384.23e12, 293.0, 87.0);
        let b = doppler_width(384.23e12, 293.0, 174.0);
        assert!((a / b - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sampled_mode_without_broadening_is_exact_recursion() {
        let p = DopplerParams::new(0.0, 5.0, 8.0);
        let a = doppler_profile_sampled(&p, 0.02, 1).unwrap();
        let b = crate::meanfield::uwm_saturation_recursion_exact(5.0, 0.02, a.len());
        for ((_, x), y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        let mut p = DopplerParams::new(1.0, 5.0, 8.0);
        p.n_nodes = 7;
        assert!(doppler_profile(&p).is_err());
        p.n_nodes = 64;
        p.xi_delta = -1.0;
        assert!(doppler_profile(&p).is_err());
    }
}
