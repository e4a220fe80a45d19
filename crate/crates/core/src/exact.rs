//! Dense Lindblad integration for a handful of emitters, used as ground
//! truth for the approximate solvers.
//!
//! All four models share one construction. The mean-field drive of site `k`
//! is `Ω/2 + sum_i c_ki <σ⁻_i>`; the master equation with Hermitian
//! coherent couplings `J` and decay matrix `Γ` reproduces it when
//!
//! ```text
//! J_ki = (c_ki + conj(c_ik)) / 2,   Γ_ik = i (c_ki - conj(c_ik)),   Γ_kk = 1,
//! ```
//!
//! with `H = sum_{k≠i} J_ki σ⁺_k σ⁻_i` and the dissipator
//! `sum_ik Γ_ik (σ⁻_i ρ σ⁺_k - {σ⁺_k σ⁻_i, ρ}/2)`.
//!
//! Basis states are bit strings; bit `k` set means site `k` is excited.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hop_attenuation, EmitterChain, ModelParams, ModelTag};
use crate::ode::{integrate_to_steady_state, Method, OdeSystem, Outcome, StepOptions};

pub const MAX_EXACT_EMITTERS: usize = 6;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Single-site operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    /// σ⁻
    Minus,
    /// σ⁺
    Plus,
    /// σᶻ
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::Minus, Pauli::Plus, Pauli::Z];

    /// Image of basis state `c` under the operator on `site`.
    #[inline]
    fn apply(self, site: usize, c: usize) -> Option<(usize, f64)> {
        let bit = 1usize << site;
        match self {
            Pauli::Minus => (c & bit != 0).then_some((c ^ bit, 1.0)),
            Pauli::Plus => (c & bit == 0).then_some((c | bit, 1.0)),
            Pauli::Z => Some((c, if c & bit != 0 { 1.0 } else { -1.0 })),
        }
    }
}

/// Mean-field coupling matrix `c_ki` (row `k` feels column `i`).
pub fn coupling_matrix(model: ModelTag, params: &ModelParams, chain: Option<&EmitterChain>) -> Result<DMatrix<C64>> {
    let n = params.n_emitters;
    let mib = -I * params.beta();
    let r = hop_attenuation(params.eta);
    let phases = match model {
        ModelTag::Bwm => {
            let c = chain.ok_or(Error::ChainRequired)?;
            if c.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: c.len() });
            }
            Some(c.round_trip_phases())
        }
        _ => None,
    };
    let mut c = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        for i in 0..n {
            c[(k, i)] = if i < k {
                mib
            } else if i == k {
                ZERO
            } else {
                match model {
                    ModelTag::Uwm => ZERO,
                    ModelTag::Dm => mib,
                    ModelTag::Eam => mib * r.powi((i - k) as i32),
                    ModelTag::Bwm => {
                        let p = phases.as_ref().expect("phases");
                        mib * p[i] * p[k].conj()
                    }
                }
            };
        }
    }
    Ok(c)
}

/// Coherent couplings `J` and decay matrix `Γ` of the master equation.
pub fn master_equation_matrices(
    model: ModelTag,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let c = coupling_matrix(model, params, chain)?;
    let n = params.n_emitters;
    let mut j = DMatrix::from_element(n, n, ZERO);
    let mut g = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        for i in 0..n {
            if i == k {
                g[(k, k)] = ONE;
            } else {
                j[(k, i)] = 0.5 * (c[(k, i)] + c[(i, k)].conj());
                g[(i, k)] = I * (c[(k, i)] - c[(i, k)].conj());
            }
        }
    }
    Ok((j, g))
}

/// The generator as a dense operator on `2^N x 2^N` matrices.
pub struct Generator {
    n: usize,
    dim: usize,
    h_eff: DMatrix<C64>,
    gamma: DMatrix<C64>,
}

impl Generator {
    pub fn new(model: ModelTag, params: &ModelParams, chain: Option<&EmitterChain>) -> Result<Self> {
        params.validate()?;
        let n = params.n_emitters;
        if n > MAX_EXACT_EMITTERS {
            return Err(Error::DimensionCap { n, cap: MAX_EXACT_EMITTERS });
        }
        let detunings = match chain {
            Some(c) if c.detunings.len() == n => c.detunings.clone(),
            Some(c) => return Err(Error::LengthMismatch { expected: n, got: c.detunings.len() }),
            None => vec![params.detuning; n],
        };
        let (j, gamma) = master_equation_matrices(model, params, chain)?;
        let dim = 1usize << n;
        let mut h_eff = DMatrix::from_element(dim, dim, ZERO);
        let half_omega = 0.5 * params.rabi;
        for c in 0..dim {
            for k in 0..n {
                // drive (Ω/2)(σ⁻ + σ⁺) and detuning -Δ σ⁺σ⁻
                let (a, _) = Pauli::Minus.apply(k, c).or_else(|| Pauli::Plus.apply(k, c)).expect("one applies");
                h_eff[(a, c)] += half_omega;
                if c & (1 << k) != 0 {
                    h_eff[(c, c)] -= detunings[k];
                }
            }
            // J_ab σ⁺_a σ⁻_b - (i/2) Γ_ba σ⁺_a σ⁻_b
            for b in 0..n {
                let Some((c1, _)) = Pauli::Minus.apply(b, c) else { continue };
                for a in 0..n {
                    let Some((c2, _)) = Pauli::Plus.apply(a, c1) else { continue };
                    let coeff = if a == b { ZERO } else { j[(a, b)] } - 0.5 * I * gamma[(b, a)];
                    h_eff[(c2, c)] += coeff;
                }
            }
        }
        Ok(Generator { n, dim, h_eff, gamma })
    }

    pub fn n_emitters(&self) -> usize {
        self.n
    }

    /// `L(rho)`.
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let a = &self.h_eff * rho;
        let mut out = DMatrix::from_fn(self.dim, self.dim, |r, c| -I * (a[(r, c)] - a[(c, r)].conj()));
        // sum_ik Γ_ik σ⁻_i ρ σ⁺_k
        for i in 0..self.n {
            let bi = 1usize << i;
            for k in 0..self.n {
                let g = self.gamma[(i, k)];
                if g == ZERO {
                    continue;
                }
                let bk = 1usize << k;
                for col in 0..self.dim {
                    if col & bk != 0 {
                        continue;
                    }
                    for row in 0..self.dim {
                        if row & bi != 0 {
                            continue;
                        }
                        out[(row, col)] += g * rho[(row | bi, col | bk)];
                    }
                }
            }
        }
        out
    }

    /// Superoperator matrix acting on column-major vectorized `rho`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let d2 = self.dim * self.dim;
        let mut m = DMatrix::from_element(d2, d2, ZERO);
        let mut basis = DMatrix::from_element(self.dim, self.dim, ZERO);
        for col in 0..d2 {
            basis[col] = ONE;
            let image = self.apply(&basis);
            for row in 0..d2 {
                m[(row, col)] = image[row];
            }
            basis[col] = ZERO;
        }
        m
    }
}

struct LindbladOde<'a> {
    gen: &'a Generator,
}

fn unpack(dim: usize, y: &[f64]) -> DMatrix<C64> {
    let m = dim * dim;
    DMatrix::from_fn(dim, dim, |r, c| {
        let k = r + c * dim;
        C64::new(y[k], y[m + k])
    })
}

impl OdeSystem for LindbladOde<'_> {
    fn dim(&self) -> usize {
        2 * self.gen.dim * self.gen.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], d: &mut [f64]) {
        let rho = unpack(self.gen.dim, y);
        let l = self.gen.apply(&rho);
        let m = self.gen.dim * self.gen.dim;
        for (k, v) in l.iter().enumerate() {
            d[k] = v.re;
            d[m + k] = v.im;
        }
    }
}

/// Density matrix of `n` emitters.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub n: usize,
    pub rho: DMatrix<C64>,
    /// Frobenius norm of `L(rho)` when the integration stopped.
    pub residual: f64,
}

impl DensityState {
    pub fn ground(n: usize) -> Self {
        let dim = 1usize << n;
        let mut rho = DMatrix::from_element(dim, dim, ZERO);
        rho[(0, 0)] = ONE;
        DensityState { n, rho, residual: 0.0 }
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.rho.nrows();
        let mut e = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                e = e.max((self.rho[(r, c)] - self.rho[(c, r)].conj()).norm());
            }
        }
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `<O_1 O_2 ...>` for operators on distinct or equal sites, applied
    /// right to left.
    pub fn moment(&self, ops: &[(usize, Pauli)]) -> C64 {
        let dim = self.rho.nrows();
        let mut acc = ZERO;
        for c in 0..dim {
            let mut state = Some((c, 1.0));
            for &(site, op) in ops.iter().rev() {
                state = state.and_then(|(s, w)| op.apply(site, s).map(|(s2, w2)| (s2, w * w2)));
            }
            if let Some((a, w)) = state {
                // tr(O rho) = sum_c O[a, c] rho[c, a]
                acc += w * self.rho[(c, a)];
            }
        }
        acc
    }
}

/// Steady state by integration from the ground state until the Frobenius
/// norm of `L(rho)` drops below `1e-10`.
pub fn exact_steady_state(model: ModelTag, params: &ModelParams, chain: Option<&EmitterChain>) -> Result<DensityState> {
    exact_steady_state_with(model, params, chain, 1e-10)
}

pub fn exact_steady_state_with(
    model: ModelTag,
    params: &ModelParams,
    chain: Option<&EmitterChain>,
    residual: f64,
) -> Result<DensityState> {
    let gen = Generator::new(model, params, chain)?;
    let n = params.n_emitters;
    let dim = gen.dim;
    let m = dim * dim;
    let mut y = vec![0.0; 2 * m];
    y[0] = 1.0;
    let sys = LindbladOde { gen: &gen };
    let opts = StepOptions { rtol: 1e-10, atol: 1e-13, method: Method::Auto, ..StepOptions::default() };
    // Frobenius <= dim * max-norm
    let max_norm_target = residual / dim as f64;
    let rep = integrate_to_steady_state(&sys, &mut y, 0.0, max_norm_target, 0.0, 1e5, &opts, |_, y| {
        if cfg!(debug_assertions) {
            let tr: f64 = (0..dim).map(|k| y[k * (dim + 1)]).sum();
            debug_assert!((tr - 1.0).abs() < 1e-10, "trace drifted to {tr}");
        }
    });
    match rep.outcome {
        Outcome::Unstable => return Err(Error::NumericalInstability { t: rep.t }),
        Outcome::TimeLimit => return Err(Error::NonConvergence { residual: rep.residual, t: rep.t }),
        Outcome::Done => {}
    }
    let rho = unpack(dim, &y);
    let res = gen.apply(&rho).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(DensityState { n, rho, residual: res })
}

/// All second moments `<A_i B_j>` of one pair `i < j`, indexed
/// `[A][B]` in the order σ⁻, σ⁺, σᶻ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub i: usize,
    pub j: usize,
    pub m: [[C64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactObservables {
    pub sigma_minus: Vec<C64>,
    pub sigma_z: Vec<f64>,
    pub pairs: Vec<PairMoments>,
    /// Coherent saturations of the two outputs.
    pub s_out_right: f64,
    pub s_out_left: f64,
    /// Incoherent (inelastic) part of the right output.
    pub s_ie: f64,
    pub s_ie_left: f64,
    /// Input flux, `s0`, in the same units.
    pub input: f64,
    /// Flux into channels other than the tracked waveguide outputs.
    pub loss: f64,
}

impl ExactObservables {
    /// `input - (coherent + inelastic outputs + loss)`.
    pub fn flux_imbalance(&self) -> f64 {
        self.input - (self.s_out_right + self.s_out_left + self.s_ie + self.s_ie_left + self.loss)
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairMoments> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }
}

/// Moments and output fluxes, all in saturation units (`8 beta` times the
/// photon flux).
///
/// The right output is `a_in - i sqrt(beta) sum_j σ⁻_j` and the left output
/// `-i sqrt(beta) sum_j w_j σ⁻_j` with the same weights as the decay
/// matrix. For the cascaded model the left-going emission is not a tracked
/// channel and counts as loss.
pub fn exact_observables(state: &DensityState, params: &ModelParams, chain: Option<&EmitterChain>, model: ModelTag) -> Result<ExactObservables> {
    let n = state.n;
    if n != params.n_emitters {
        return Err(Error::LengthMismatch { expected: params.n_emitters, got: n });
    }
    let beta = params.beta();
    let sigma_minus: Vec<C64> = (0..n).map(|k| state.moment(&[(k, Pauli::Minus)])).collect();
    let sigma_z: Vec<f64> = (0..n).map(|k| state.moment(&[(k, Pauli::Z)]).re).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut m = [[ZERO; 3]; 3];
            for (a, pa) in Pauli::ALL.iter().enumerate() {
                for (b, pb) in Pauli::ALL.iter().enumerate() {
                    m[a][b] = state.moment(&[(i, *pa), (j, *pb)]);
                }
            }
            pairs.push(PairMoments { i, j, m });
        }
    }

    // <σ⁺_a σ⁻_b> for all a, b
    let pm = |a: usize, b: usize| -> C64 { state.moment(&[(a, Pauli::Plus), (b, Pauli::Minus)]) };
    let weights: Vec<C64> = match model {
        ModelTag::Uwm => vec![ZERO; n],
        ModelTag::Dm => vec![ONE; n],
        ModelTag::Eam => {
            let r = hop_attenuation(params.eta);
            (0..n).map(|k| C64::new(r.powi(k as i32), 0.0)).collect()
        }
        ModelTag::Bwm => {
            let p = chain.ok_or(Error::ChainRequired)?.round_trip_phases();
            let p0 = p[0].conj();
            p.iter().map(|x| x * p0).collect()
        }
    };
    let mut ss = ZERO;
    let mut ll = ZERO;
    for a in 0..n {
        for b in 0..n {
            let v = pm(a, b);
            ss += v;
            ll += weights[a].conj() * weights[b] * v;
        }
    }
    let s_sum: C64 = sigma_minus.iter().sum();
    let l_sum: C64 = weights.iter().zip(&sigma_minus).map(|(w, s)| w * s).sum();
    let right = 0.5 * params.rabi - I * beta * s_sum;
    let scale = 8.0 * beta * beta;
    let populations: f64 = sigma_z.iter().map(|z| 0.5 * (1.0 + z)).sum();
    let loss_rate = match model {
        ModelTag::Uwm => 1.0 - beta,
        _ => params.gamma_loss,
    };
    Ok(ExactObservables {
        s_out_right: 8.0 * right.norm_sqr(),
        s_out_left: scale * l_sum.norm_sqr(),
        s_ie: scale * (ss.re - s_sum.norm_sqr()),
        s_ie_left: scale * (ll.re - l_sum.norm_sqr()),
        input: params.s0(),
        loss: 8.0 * beta * loss_rate * populations,
        sigma_minus,
        sigma_z,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_chain;

    #[test]
    fn single_emitter() {
        let p = ModelParams::from_beta(0.2, 1, 2.0).unwrap();
        let st = exact_steady_state(ModelTag::Uwm, &p, None).unwrap();
        let obs = exact_observables(&st, &p, None, ModelTag::Uwm).unwrap();
        assert!((obs.sigma_z[0] + 1.0 / 3.0).abs() < 1e-10);
        assert!(st.residual < 1e-10);
        assert!((st.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_state_moments() {
        let st = DensityState::ground(3);
        let p = ModelParams::from_beta(0.2, 3, 0.0).unwrap();
        let obs = exact_observables(&st, &p, None, ModelTag::Dm).unwrap();
        assert!(obs.sigma_z.iter().all(|z| *z == -1.0));
        assert!(obs.sigma_minus.iter().all(|s| *s == ZERO));
        assert_eq!(obs.s_out_right, 0.0);
        assert_eq!(obs.s_out_left, 0.0);
        assert_eq!(obs.pair(0, 2).unwrap().m[2][2], ONE);
    }

    #[test]
    fn cap() {
        let p = ModelParams::from_beta(0.2, 7, 1.0).unwrap();
        assert!(matches!(exact_steady_state(ModelTag::Uwm, &p, None), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity() {
        let p = ModelParams::from_beta(0.15, 3, 1.3).unwrap().with_eta(0.2).with_seed(5);
        let chain = build_chain(&p);
        let g = Generator::new(ModelTag::Bwm, &p, Some(&chain)).unwrap();
        let dim = 8;
        let rho = DMatrix::from_fn(dim, dim, |r, c| {
            let x = C64::new((r * 7 + c * 3) as f64 % 5.0, (r as f64 - c as f64) * 0.3);
            if r == c {
                C64::new(x.re, 0.0)
            } else {
                x
            }
        });
        let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let l = g.apply(&rho);
        assert!(l.trace().norm() < 1e-12);
        assert!((&l - l.adjoint()).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn decay_matrices_are_hermitian() {
        let p = ModelParams::from_beta(0.2, 4, 1.0).unwrap().with_eta(0.1);
        for m in [ModelTag::Uwm, ModelTag::Eam, ModelTag::Dm] {
            let (j, g) = master_equation_matrices(m, &p, None).unwrap();
            assert!((&j - j.adjoint()).iter().all(|v| v.norm() < 1e-15));
            assert!((&g - g.adjoint()).iter().all(|v| v.norm() < 1e-15));
            let herm = (&g + g.adjoint()) * C64::new(0.5, 0.0);
            let min = SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min > -1e-12, "{m}: {min}");
        }
    }
}
