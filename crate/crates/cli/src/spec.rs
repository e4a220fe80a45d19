use std::fmt;
use std::str::FromStr;

use cascadia::{ModelParams, ModelTag, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepModel {
    #[serde(rename = "BWM")]
    Bwm,
    #[serde(rename = "EAM")]
    Eam,
    #[serde(rename = "DM")]
    Dm,
    #[serde(rename = "UWM")]
    Uwm,
    #[serde(rename = "CE2-UWM")]
    Ce2Uwm,
    #[serde(rename = "DOPPLER")]
    Doppler,
}

impl SweepModel {
    pub fn mean_field_tag(self) -> Option<ModelTag> {
        match self {
            SweepModel::Bwm => Some(ModelTag::Bwm),
            SweepModel::Eam => Some(ModelTag::Eam),
            SweepModel::Dm => Some(ModelTag::Dm),
            SweepModel::Uwm => Some(ModelTag::Uwm),
            _ => None,
        }
    }
}

impl FromStr for SweepModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_uppercase()))
            .map_err(|_| format!("unknown model `{s}` (expected BWM, EAM, DM, UWM, CE2-UWM or DOPPLER)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Eta,
    S0,
    STilde,
    #[serde(rename = "D")]
    D,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Eta => "eta",
            AxisName::S0 => "s0",
            AxisName::STilde => "s_tilde",
            AxisName::D => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Lin,
    Log,
}

/// One grid axis, written `name=lin:lo..hi:n`, `name=log:lo..hi:n` or
/// `name=value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub name: AxisName,
    pub spacing: Spacing,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let m = (self.n - 1) as f64;
        (0..self.n)
            .map(|k| {
                let f = k as f64 / m;
                if k + 1 == self.n {
                    return self.hi;
                }
                match self.spacing {
                    Spacing::Lin => self.lo + (self.hi - self.lo) * f,
                    Spacing::Log => (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * f).exp(),
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, rest) = s.split_once('=').ok_or_else(|| format!("axis `{s}`: expected name=..."))?;
        let name: AxisName = serde_json::from_value(serde_json::Value::String(name.trim().to_string()))
            .map_err(|_| format!("axis `{s}`: unknown axis `{name}` (eta, s0, s_tilde, D)"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("axis `{s}`: bad number `{v}`"));
        let parts: Vec<&str> = rest.split(':').collect();
        let axis = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Axis { name, spacing: Spacing::Lin, lo: v, hi: v, n: 1 }
            }
            [kind, range, n] => {
                let spacing = match *kind {
                    "lin" => Spacing::Lin,
                    "log" => Spacing::Log,
                    k => return Err(format!("axis `{s}`: unknown spacing `{k}` (lin, log)")),
                };
                let (lo, hi) = range.split_once("..").ok_or_else(|| format!("axis `{s}`: expected lo..hi"))?;
                let n = n.trim().parse::<usize>().map_err(|_| format!("axis `{s}`: bad grid size `{n}`"))?;
                Axis { name, spacing, lo: num(lo)?, hi: num(hi)?, n }
            }
            _ => return Err(format!("axis `{s}`: expected kind:lo..hi:n or a single value")),
        };
        axis.check().map_err(|e| format!("axis `{s}`: {e}"))?;
        Ok(axis)
    }
}

impl Axis {
    fn check(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("grid size must be at least 1".into());
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err("bounds must be finite".into());
        }
        if self.spacing == Spacing::Log && !(self.lo > 0.0 && self.hi > 0.0) {
            return Err("log spacing needs positive bounds".into());
        }
        Ok(())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 1 {
            return write!(f, "{}={}", self.name.as_str(), self.lo);
        }
        let kind = match self.spacing {
            Spacing::Lin => "lin",
            Spacing::Log => "log",
        };
        write!(f, "{}={kind}:{}..{}:{}", self.name.as_str(), self.lo, self.hi, self.n)
    }
}

impl Serialize for Axis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Axis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fixed parameters of every grid cell; axes override some of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedParams {
    pub n_emitters: usize,
    pub beta: f64,
    pub s0: f64,
    pub eta: f64,
    pub detuning: f64,
    pub k0_spacing: f64,
    pub seed: u64,
    /// Doppler width in units of the decay rate.
    pub xi_delta: f64,
    /// Doppler propagation length; defaults to `4 beta n_emitters`.
    pub d_max: Option<f64>,
    /// Output points of a Doppler profile.
    pub grid: usize,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            n_emitters: 100,
            beta: 0.05,
            s0: 1.0,
            eta: 0.0,
            detuning: 0.0,
            k0_spacing: 1.0,
            seed: 0,
            xi_delta: 0.0,
            d_max: None,
            grid: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub residual: f64,
    pub t_max: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSpec { residual: d.steady_state_residual, t_max: d.t_max }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { steady_state_residual: self.residual, t_max: self.t_max, ..SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: String,
    pub format: Format,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { path: "cascadia-out".into(), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub model: SweepModel,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub params: FixedParams,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Worker count; not part of the physics, so not needed to reproduce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

/// Parameters of one grid cell after applying the axis values.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub params: ModelParams,
    pub d_max: f64,
}

impl SweepSpec {
    pub fn new(model: SweepModel) -> Self {
        SweepSpec {
            model,
            axes: Vec::new(),
            params: FixedParams::default(),
            solver: SolverSpec::default(),
            output: OutputSpec::default(),
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.axes.len() > 2 {
            return Err(format!("axes: at most two axes, got {}", self.axes.len()));
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(format!("axes: `{}` given twice", self.axes[0].name.as_str()));
        }
        for a in &self.axes {
            a.check().map_err(|e| format!("axes: `{a}`: {e}"))?;
        }
        let p = &self.params;
        if !(p.beta > 0.0 && p.beta <= 0.5) {
            return Err(format!("params.beta: must lie in (0, 0.5], got {}", p.beta));
        }
        if p.n_emitters == 0 {
            return Err("params.n_emitters: must be at least 1".into());
        }
        if !(p.s0 >= 0.0 && p.s0.is_finite()) {
            return Err(format!("params.s0: must be finite and >= 0, got {}", p.s0));
        }
        if !(self.solver.residual > 0.0 && self.solver.t_max > 0.0) {
            return Err("solver: residual and t_max must be positive".into());
        }
        if self.jobs == Some(0) {
            return Err("jobs: must be at least 1".into());
        }
        for cell in self.grid() {
            let c = self.cell_params(&cell).map_err(|e| format!("grid cell {cell:?}: {e}"))?;
            if self.model == SweepModel::Ce2Uwm && c.params.n_emitters > cascadia::cumulant::MAX_CE2_SITES {
                return Err(format!(
                    "params.n_emitters: CE2 handles at most {} sites, cell {cell:?} needs {}",
                    cascadia::cumulant::MAX_CE2_SITES,
                    c.params.n_emitters
                ));
            }
        }
        Ok(())
    }

    /// Grid points as axis values, first axis slowest.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![Vec::new()];
        for a in &self.axes {
            let vals = a.values();
            cells = cells.into_iter().flat_map(|c| vals.iter().map(move |v| [c.clone(), vec![*v]].concat())).collect();
        }
        cells
    }

    pub fn cell_params(&self, values: &[f64]) -> Result<CellParams, String> {
        let p = &self.params;
        let mut n = p.n_emitters;
        let mut s0 = p.s0;
        let mut eta = p.eta;
        let mut d_max = p.d_max.unwrap_or(4.0 * p.beta * n as f64);
        let get = |name: AxisName| self.axes.iter().position(|a| a.name == name).map(|k| values[k]);
        if let Some(d) = get(AxisName::D) {
            if self.model == SweepModel::Doppler {
                d_max = d;
            } else {
                n = ((d / (4.0 * p.beta)).round() as usize).max(1);
                d_max = 4.0 * p.beta * n as f64;
            }
        }
        if let Some(v) = get(AxisName::S0) {
            s0 = v;
        }
        if let Some(v) = get(AxisName::STilde) {
            s0 = v * d_max;
        }
        if let Some(v) = get(AxisName::Eta) {
            eta = v;
        }
        if !(s0 >= 0.0 && s0.is_finite()) {
            return Err(format!("s0 = {s0} must be finite and >= 0"));
        }
        let mut params = ModelParams::from_beta(p.beta, n, s0).map_err(|e| e.to_string())?;
        params.eta = eta;
        params.detuning = p.detuning;
        params.k0_spacing = p.k0_spacing;
        params.seed = p.seed;
        params.validate().map_err(|e| e.to_string())?;
        Ok(CellParams { params, d_max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_round_trip() {
        for s in ["s0=log:2.4..80:7", "eta=lin:0..1:3", "D=40"] {
            let a: Axis = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        let a: Axis = "s0=log:1..100:3".parse().unwrap();
        let v = a.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[2] == 100.0);
        assert!("x=1".parse::<Axis>().is_err());
        assert!("s0=log:0..1:3".parse::<Axis>().is_err());
        assert!("s0=lin:0..1:0".parse::<Axis>().is_err());
    }

    #[test]
    fn grid_is_row_major() {
        let mut s = SweepSpec::new(SweepModel::Uwm);
        s.axes = vec!["eta=lin:0..1:2".parse().unwrap(), "s0=lin:1..3:3".parse().unwrap()];
        let g = s.grid();
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![0.0, 2.0]);
        assert_eq!(g[3], vec![1.0, 1.0]);
    }

    #[test]
    fn s_tilde_uses_depth() {
        let mut s = SweepSpec::new(SweepModel::Uwm);
        s.params.beta = 0.005;
        s.params.n_emitters = 1000;
        s.axes = vec!["s_tilde=2".parse().unwrap()];
        let c = s.cell_params(&[2.0]).unwrap();
        assert!((c.params.s0() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_duplicate_axes() {
        let mut s = SweepSpec::new(SweepModel::Uwm);
        s.axes = vec!["s0=1".parse().unwrap(), "s0=2".parse().unwrap()];
        assert!(s.validate().is_err());
    }

    #[test]
    fn model_names() {
        assert_eq!("ce2-uwm".parse::<SweepModel>().unwrap(), SweepModel::Ce2Uwm);
        assert_eq!("DOPPLER".parse::<SweepModel>().unwrap(), SweepModel::Doppler);
        assert!("XYZ".parse::<SweepModel>().is_err());
    }
}
