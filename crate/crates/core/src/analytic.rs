//! Closed-form steady states: the Lambert-W saturation profile of the
//! cascaded chain and the cubic of the driven Dicke model.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{solve_dicke_reduced, Ramp, SolverOptions};
use crate::model::ModelParams;
use crate::quad;

/// Principal branch of Lambert W for a non-negative argument given by its
/// natural logarithm: the `w >= 0` with `w + ln w = log_x`.
///
/// Works in `u = ln w` with Halley's method on `e^u + u - log_x`, which is
/// increasing and convex, so the iteration cannot overshoot into a wrong
/// branch.
pub fn lambert_w0(log_x: f64) -> Result<f64> {
    if log_x.is_nan() {
        return Err(Error::NanArgument);
    }
    if log_x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if log_x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let l = log_x;
    let mut u = if l < 0.0 {
        // W(x) ≈ x - x² near 0
        l - l.exp()
    } else if l < 2.0 {
        // W(e^l) = 1 at l = 1, ~0.567 at l = 0
        -0.567 + 0.567 * l
    } else {
        // w ≈ ln x - ln ln x
        (l - l.ln()).ln()
    };
    for _ in 0..100 {
        let eu = u.exp();
        let g = eu + u - l;
        let g1 = eu + 1.0;
        let g2 = eu;
        let du = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
        u -= du;
        if du.abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            break;
        }
    }
    Ok(u.exp())
}

/// Saturation after optical depth `d` in the cascaded chain,
/// `s(D) = W(s0 exp(s0 - D))`, solving `ds/dD = -s/(1 + s)` with `s(0) = s0`.
pub fn uwm_saturation(s0: f64, d: f64) -> f64 {
    if s0 <= 0.0 {
        return 0.0;
    }
    if d == 0.0 {
        return s0;
    }
    lambert_w0(s0.ln() + s0 - d).expect("finite log argument")
}

/// Steady-state inversion of an emitter seeing saturation `s`.
pub fn uwm_inversion(s: f64) -> f64 {
    -1.0 / (1.0 + s)
}

/// Chain-averaged inversion `(1/D) ∫_0^D <σᶻ(D')> dD'` by adaptive
/// quadrature.
pub fn mean_polarization(s0: f64, d: f64) -> f64 {
    if s0 <= 0.0 {
        return -1.0;
    }
    if d <= 0.0 {
        return uwm_inversion(s0);
    }
    let (v, _) = quad::integrate(|x| uwm_inversion(uwm_saturation(s0, x)), 0.0, d, 1e-9 * d.min(1.0), 1e-13);
    v / d
}

/// Large-depth limit of [`uwm_saturation`] at fixed `s_tilde = s0 / D`.
///
/// Below the critical point the light is fully absorbed; above it the
/// depletion is linear. At `s_tilde = 1` the finite-depth value `W(D)` is
/// returned.
pub fn thermodynamic_saturation(s_tilde: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if s_tilde < 1.0 {
        0.0
    } else if s_tilde > 1.0 {
        (s_tilde - 1.0) * d
    } else {
        lambert_w0(d.ln()).expect("finite depth")
    }
}

/// Collective optical depth `4 beta (N - 1)` felt by each emitter of the
/// Dicke mean-field model. The Dicke cubic in this depth is satisfied
/// exactly by the mean-field steady state.
pub fn collective_depth(params: &ModelParams) -> f64 {
    4.0 * params.beta() * (params.n_emitters as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DickeRoots {
    /// Physical roots in `[-1, 0]`, ascending.
    pub roots: Vec<f64>,
    pub stability: Vec<Stability>,
    pub bistable: bool,
}

/// Coefficients `[c3, c2, c1, c0]` of the Dicke cubic in `z = <σᶻ>`.
pub fn dicke_cubic_coefficients(d_total: f64, s0: f64) -> [f64; 4] {
    let q = d_total * d_total / 4.0;
    [q, q - d_total, s0 - d_total + 1.0, 1.0]
}

pub fn dicke_cubic(d_total: f64, s0: f64, z: f64) -> f64 {
    let c = dicke_cubic_coefficients(d_total, s0);
    ((c[0] * z + c[1]) * z + c[2]) * z + c[3]
}

fn dicke_cubic_derivative(d_total: f64, s0: f64, z: f64) -> f64 {
    let c = dicke_cubic_coefficients(d_total, s0);
    (3.0 * c[0] * z + 2.0 * c[1]) * z + c[2]
}

/// Real roots of the Dicke cubic in `[-1, 0]`: companion-matrix eigenvalues
/// polished by Newton.
pub fn dicke_roots(d_total: f64, s0: f64) -> Result<Vec<f64>> {
    let c = dicke_cubic_coefficients(d_total, s0);
    let companion = Matrix3::new(
        -c[1] / c[0], -c[2] / c[0], -c[3] / c[0],
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
    );
    let eig = companion.complex_eigenvalues();
    let mut roots: Vec<f64> = Vec::new();
    for ev in eig.iter() {
        let ev: C64 = *ev;
        if ev.im.abs() > 1e-6 * (1.0 + ev.re.abs()) {
            continue;
        }
        let mut z = ev.re;
        for _ in 0..8 {
            let d = dicke_cubic_derivative(d_total, s0, z);
            if d == 0.0 {
                break;
            }
            let step = dicke_cubic(d_total, s0, z) / d;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        if (-1.0 - 1e-12..=1e-12).contains(&z) && dicke_cubic(d_total, s0, z).abs() < 1e-10 {
            roots.push(z.clamp(-1.0, 0.0));
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if roots.is_empty() {
        return Err(Error::NoPhysicalRoot);
    }
    Ok(roots)
}

/// Roots of the Dicke cubic with their stability under the mean-field
/// dynamics.
///
/// A root is stable when a slow drive ramp ending at `s0` lands on it: one
/// ramp comes up from the undriven ground state, the other comes down from
/// a drive above the bistability window.
pub fn dicke_steady_states(d_total: f64, s0: f64) -> Result<DickeRoots> {
    if !(d_total > 0.0) || !(s0 >= 0.0) {
        return Err(Error::InvalidParams("need d_total > 0 and s0 >= 0".into()));
    }
    let roots = dicke_roots(d_total, s0)?;
    let mut stability = vec![Stability::Unstable; roots.len()];
    if roots.len() == 1 {
        stability[0] = Stability::Stable;
    } else {
        let window = dicke_bistability_window(d_total);
        let s_high = if window.exists { 1.5 * window.s_plus + 10.0 } else { 2.0 * s0 + 10.0 };
        for z in dicke_ramp_endpoints(d_total, s0, s_high)? {
            let nearest = roots
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - z).abs().total_cmp(&(b.1 - z).abs()))
                .map(|(k, _)| k)
                .expect("non-empty");
            stability[nearest] = Stability::Stable;
        }
    }
    let bistable = stability.iter().filter(|s| **s == Stability::Stable).count() >= 2;
    Ok(DickeRoots { roots, stability, bistable })
}

/// Inversion reached at drive `s0` by an upward ramp from the ground state
/// and by a downward ramp from `s_high`.
pub fn dicke_ramp_endpoints(d_total: f64, s0: f64, s_high: f64) -> Result<[f64; 2]> {
    let ramp_time = 400.0;
    let base = SolverOptions { steady_state_residual: 1e-11, t_max: 2e4, ..SolverOptions::default() };
    let ground = (C64::new(0.0, 0.0), -1.0);
    let up = base.with_ramp(Ramp { s0_start: 0.0, s0_end: s0, duration: ramp_time });
    let (_, z_up, _) = solve_dicke_reduced(d_total, s0, ground, &up)?;
    let (sm_hi, z_hi, _) = solve_dicke_reduced(d_total, s_high, ground, &base)?;
    let down = base.with_ramp(Ramp { s0_start: s_high, s0_end: s0, duration: ramp_time });
    let (_, z_down, _) = solve_dicke_reduced(d_total, s0, (sm_hi, z_hi), &down)?;
    Ok([z_up, z_down])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BistabilityWindow {
    pub s_minus: f64,
    pub s_plus: f64,
    /// `d_total > 16`.
    pub exists: bool,
    /// Large-depth expansion `2D - 4 - 8/D` of `s_minus`.
    pub s_minus_asymptote: f64,
    /// Large-depth expansion `D²/16 + D/2 + 2 + 8/D` of `s_plus`.
    pub s_plus_asymptote: f64,
}

/// Drive range with two stable Dicke steady states.
///
/// Below the threshold depth 16 the edges are NaN; at the threshold both
/// equal the fold value 27.
pub fn dicke_bistability_window(d_total: f64) -> BistabilityWindow {
    let d = d_total;
    let s_minus_asymptote = 2.0 * d - 4.0 - 8.0 / d;
    let s_plus_asymptote = d * d / 16.0 + d / 2.0 + 2.0 + 8.0 / d;
    let (s_minus, s_plus) = if d < 16.0 {
        (f64::NAN, f64::NAN)
    } else {
        let root = (d * (d - 16.0).powi(3)).sqrt();
        let base = -32.0 + d * (40.0 + d);
        ((base - root) / 32.0, (base + root) / 32.0)
    };
    BistabilityWindow { s_minus, s_plus, exists: d > 16.0, s_minus_asymptote, s_plus_asymptote }
}
