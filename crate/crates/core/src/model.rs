//! Shared domain types: physical parameters, derived dimensionless
//! quantities and random emitter chains.
//!
//! All rates are measured in units of the total single-emitter decay rate
//! (`gamma_1d + gamma_loss = 1`), the group velocity is 1 and positions are
//! measured in units of the resonant wavelength.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `gamma_1d + gamma_loss = 1`.
const NORMALIZATION_TOL: f64 = 1e-12;

/// The four waveguide models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    /// Single realization of a bidirectional chain.
    #[serde(rename = "BWM")]
    Bwm,
    /// Bidirectional chain averaged over Gaussian spacing disorder.
    #[serde(rename = "EAM")]
    Eam,
    /// Driven-dissipative Dicke model (perfect Bragg order).
    #[serde(rename = "DM")]
    Dm,
    /// Unidirectional (cascaded) model.
    #[serde(rename = "UWM")]
    Uwm,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [ModelTag::Bwm, ModelTag::Eam, ModelTag::Dm, ModelTag::Uwm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Bwm => "BWM",
            ModelTag::Eam => "EAM",
            ModelTag::Dm => "DM",
            ModelTag::Uwm => "UWM",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BWM" => Ok(ModelTag::Bwm),
            "EAM" => Ok(ModelTag::Eam),
            "DM" => Ok(ModelTag::Dm),
            "UWM" => Ok(ModelTag::Uwm),
            other => Err(Error::InvalidParams(format!("unknown model tag `{other}`"))),
        }
    }
}

fn default_k0_spacing() -> f64 {
    1.0
}

/// Physical parameters of a driven emitter chain.
///
/// Serializes to a flat JSON object; unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Waveguide coupling rate.
    pub gamma_1d: f64,
    /// Loss rate into non-guided modes.
    pub gamma_loss: f64,
    /// Drive amplitude Ω.
    pub rabi: f64,
    /// Laser detuning Δ.
    #[serde(default)]
    pub detuning: f64,
    pub n_emitters: usize,
    /// Spacing disorder, standard deviation of the spacing in units of λ/2.
    #[serde(default)]
    pub eta: f64,
    /// Mean spacing in units of λ/2.
    #[serde(default = "default_k0_spacing")]
    pub k0_spacing: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ModelParams {
    /// Parameters from the dimensionless description: per-direction
    /// coupling fraction `beta`, emitter count and input saturation `s0`.
    pub fn from_beta(beta: f64, n_emitters: usize, s0: f64) -> Result<Self> {
        let p = ModelParams {
            gamma_1d: 2.0 * beta,
            gamma_loss: 1.0 - 2.0 * beta,
            rabi: rabi_from_s0(s0),
            detuning: 0.0,
            n_emitters,
            eta: 0.0,
            k0_spacing: 1.0,
            seed: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.rabi = rabi_from_s0(s0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma_1d, self.gamma_loss, self.rabi, self.detuning, self.eta, self.k0_spacing]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.gamma_1d < 0.0 || self.gamma_loss < 0.0 {
            return Err(Error::InvalidParams("decay rates must be non-negative".into()));
        }
        if (self.gamma_1d + self.gamma_loss - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParams(format!(
                "gamma_1d + gamma_loss must equal 1 (got {})",
                self.gamma_1d + self.gamma_loss
            )));
        }
        if self.eta < 0.0 {
            return Err(Error::InvalidParams("eta must be non-negative".into()));
        }
        if self.n_emitters == 0 {
            return Err(Error::InvalidParams("n_emitters must be at least 1".into()));
        }
        Ok(())
    }

    /// Fraction of emission into one waveguide direction.
    pub fn beta(&self) -> f64 {
        self.gamma_1d / 2.0
    }

    pub fn s0(&self) -> f64 {
        2.0 * self.rabi * self.rabi
    }

    pub fn derive(&self) -> DerivedQuantities {
        derive(self)
    }
}

/// Ω such that `2 Ω² = s0`.
pub fn rabi_from_s0(s0: f64) -> f64 {
    (s0 / 2.0).sqrt()
}

/// Dimensionless combinations used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub beta: f64,
    /// Optical depth of the whole chain, `4 beta N`.
    pub d_total: f64,
    /// Input saturation `2 Ω²`.
    pub s0: f64,
    /// Scaled saturation `s0 / d_total`.
    pub s_tilde: f64,
}

impl DerivedQuantities {
    /// Optical depth after `i` emitters.
    pub fn d_at(&self, i: usize) -> f64 {
        4.0 * self.beta * i as f64
    }
}

pub fn derive(params: &ModelParams) -> DerivedQuantities {
    let beta = params.beta();
    let d_total = 4.0 * beta * params.n_emitters as f64;
    let s0 = params.s0();
    let s_tilde = if d_total > 0.0 { s0 / d_total } else { f64::INFINITY };
    DerivedQuantities { beta, d_total, s0, s_tilde }
}

/// Disorder-averaged backward propagation factor between sites `hop` apart,
/// `exp(-2 (eta pi)^2 hop)`.
pub fn averaged_phase_factor(eta: f64, hop: usize) -> f64 {
    (-2.0 * (eta * PI).powi(2) * hop as f64).exp()
}

/// Per-hop attenuation used by the ensemble-averaged model.
pub(crate) fn hop_attenuation(eta: f64) -> f64 {
    averaged_phase_factor(eta, 1)
}

/// A concrete realization of emitter positions (units of λ, site 0 leftmost)
/// and per-emitter detunings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterChain {
    pub positions: Vec<f64>,
    pub detunings: Vec<f64>,
}

impl EmitterChain {
    /// Perfect lattice with spacing `k0_spacing * λ/2`.
    pub fn regular(n: usize, k0_spacing: f64) -> Self {
        EmitterChain {
            positions: (0..n).map(|i| 0.5 * k0_spacing * i as f64).collect(),
            detunings: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `exp(2 i k0 z_j)` for every site.
    ///
    /// The phase is reduced modulo one turn before the trigonometric call so
    /// that lattice sites on multiples of λ/2 give exactly 1.
    pub fn round_trip_phases(&self) -> Vec<C64> {
        self.positions.iter().map(|&z| round_trip_phase(z)).collect()
    }
}

/// `exp(2 i k0 z)` with `k0 = 2 pi / λ` and `z` in units of λ.
pub fn round_trip_phase(z: f64) -> C64 {
    let turns = (2.0 * z).rem_euclid(1.0);
    C64::from_polar(1.0, 2.0 * PI * turns)
}

/// Random stream for realization `mu` of a master seed.
pub fn realization_rng(seed: u64, mu: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mu);
    rng
}

/// Chain for the parameters' seed (realization 0).
pub fn build_chain(params: &ModelParams) -> EmitterChain {
    build_chain_realization(params, 0)
}

/// Chain for realization `mu`: i.i.d. Gaussian spacings with mean
/// `k0_spacing * λ/2` and standard deviation `eta * λ/2`, first emitter at 0.
///
/// Negative spacings from the Gaussian tail are kept; site order is the
/// index order.
pub fn build_chain_realization(params: &ModelParams, mu: u64) -> EmitterChain {
    let n = params.n_emitters;
    let mean = 0.5 * params.k0_spacing;
    let sd = 0.5 * params.eta;
    let mut positions = Vec::with_capacity(n);
    if n > 0 {
        positions.push(0.0);
    }
    if sd == 0.0 {
        for i in 1..n {
            positions.push(mean * i as f64);
        }
    } else {
        let mut rng = realization_rng(params.seed, mu);
        let normal = Normal::new(mean, sd).expect("finite spacing distribution");
        let mut z = 0.0;
        for _ in 1..n {
            z += normal.sample(&mut rng);
            positions.push(z);
        }
    }
    EmitterChain { positions, detunings: vec![params.detuning; n] }
}
