//! Second-order cumulant expansion of the cascaded (unidirectional) chain.
//!
//! Moments are derived from the adjoint master equation
//!
//! ```text
//! dA/dt = sum_k L_k(A) + beta sum_{l<k} ( σ⁺_l [A, σ⁻_k] + [σ⁺_k, A] σ⁻_l )
//! ```
//!
//! where `L_k` is the single-site drive, detuning and decay generator, and
//! third-order cumulants are dropped:
//! `<ABC> ≈ <AB><C> + <AC><B> + <BC><A> - 2<A><B><C>`.
//!
//! Site `j` and its pairs `(i, j)`, `i < j`, form a block whose equations only
//! involve sites `<= j`. Given all upstream blocks the equations of block `j`
//! are linear, so blocks are integrated to steady state one after another.
//! The three-body sums over a spectator site are rewritten with prefix sums,
//! which makes one right-hand-side evaluation of block `j` cost O(j).

pub mod algebra;
pub mod reference;

use std::cell::RefCell;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv};
use crate::meanfield::SolverOptions;
use crate::model::ModelParams;
use crate::ode::{integrate_to_steady_state, OdeSystem, Outcome};
use algebra::{comm, expect1, expect2, local_generator, mul, Lc, ONE, SM, SP, SZ, ZERO};

/// Largest chain the cumulant solver accepts.
pub const MAX_CE2_SITES: usize = 512;

/// Stored second moments of a pair `i < j`. The remaining four follow by
/// conjugation: `<σ⁻_i σ⁺_j> = conj(pm)`, `<σ⁺_i σ⁺_j> = conj(mm)`,
/// `<σ⁺_i σᶻ_j> = conj(mz)`, `<σᶻ_i σ⁺_j> = conj(zm)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairMoments {
    /// `<σ⁻_i σ⁻_j>`
    pub mm: C64,
    /// `<σ⁺_i σ⁻_j>`
    pub pm: C64,
    /// `<σᶻ_i σ⁻_j>`
    pub zm: C64,
    /// `<σ⁻_i σᶻ_j>`
    pub mz: C64,
    /// `<σᶻ_i σᶻ_j>`
    pub zz: f64,
}

impl PairMoments {
    const REALS: usize = 9;

    fn read(y: &[f64]) -> Self {
        PairMoments {
            mm: C64::new(y[0], y[1]),
            pm: C64::new(y[2], y[3]),
            zm: C64::new(y[4], y[5]),
            mz: C64::new(y[6], y[7]),
            zz: y[8],
        }
    }

    fn write(&self, y: &mut [f64]) {
        y[0] = self.mm.re;
        y[1] = self.mm.im;
        y[2] = self.pm.re;
        y[3] = self.pm.im;
        y[4] = self.zm.re;
        y[5] = self.zm.im;
        y[6] = self.mz.re;
        y[7] = self.mz.im;
        y[8] = self.zz;
    }

    fn factorized(si: C64, zi: f64, sj: C64, zj: f64) -> Self {
        PairMoments { mm: si * sj, pm: si.conj() * sj, zm: zi * sj, mz: si * zj, zz: zi * zj }
    }

    /// Full table `<B_a,i B_b,j>` over the basis `(1, σ⁻, σ⁺, σᶻ)`.
    fn table(&self, si: C64, zi: f64, sj: C64, zj: f64) -> [[C64; 4]; 4] {
        let zi = C64::new(zi, 0.0);
        let zj = C64::new(zj, 0.0);
        [
            [ONE, sj, sj.conj(), zj],
            [si, self.mm, self.pm.conj(), self.mz],
            [si.conj(), self.pm, self.mm.conj(), self.mz.conj()],
            [zi, self.zm, self.zm.conj(), C64::new(self.zz, 0.0)],
        ]
    }
}

/// Index of pair `(i, j)`, `i < j`, in the packed pair array.
#[inline]
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

/// Number of real unknowns of an `n`-site second-order expansion:
/// `3 n + 9 n (n - 1) / 2`, i.e. `sum_{k=1,2} 3^k binom(n, k)`.
pub fn moment_count(n: usize) -> usize {
    3 * n + 9 * n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSolution {
    pub beta: f64,
    pub s0: f64,
    pub sigma_minus: Vec<C64>,
    pub sigma_z: Vec<f64>,
    /// Packed pairs, see [`pair_index`].
    pub pairs: Vec<PairMoments>,
    /// Final residual of each block.
    pub block_residuals: Vec<f64>,
}

/// Operator selector for [`CumulantSolution::moment`].
pub use crate::exact::Pauli;

impl CumulantSolution {
    pub fn len(&self) -> usize {
        self.sigma_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_z.is_empty()
    }

    fn check_sites(&self, i: usize, j: usize) -> Result<()> {
        let n = self.len();
        for k in [i, j] {
            if k >= n {
                return Err(Error::SiteOutOfRange { index: k, n });
            }
        }
        if i == j {
            return Err(Error::SameSite(i));
        }
        Ok(())
    }

    /// Full moment table `<B_a,i B_b,j>` for distinct sites in either order.
    pub fn table(&self, i: usize, j: usize) -> Result<[[C64; 4]; 4]> {
        self.check_sites(i, j)?;
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let t = self.pairs[pair_index(lo, hi)].table(self.sigma_minus[lo], self.sigma_z[lo], self.sigma_minus[hi], self.sigma_z[hi]);
        Ok(if i < j {
            t
        } else {
            let mut tt = [[ZERO; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    tt[a][b] = t[b][a];
                }
            }
            tt
        })
    }

    /// `<A_i B_j>` for distinct sites.
    pub fn moment(&self, i: usize, a: Pauli, j: usize, b: Pauli) -> Result<C64> {
        let idx = |p: Pauli| match p {
            Pauli::Minus => 1,
            Pauli::Plus => 2,
            Pauli::Z => 3,
        };
        Ok(self.table(i, j)?[idx(a)][idx(b)])
    }

    /// `<σˣ_i σˣ_j> - <σˣ_i><σˣ_j>` with `σˣ = σ⁻ + σ⁺`.
    pub fn sigma_xx_cumulant(&self, i: usize, j: usize) -> Result<f64> {
        let t = self.table(i, j)?;
        let x: Lc = [ZERO, ONE, ONE, ZERO];
        let full = expect2(&t, &x, &x);
        let xi = expect1(&x, self.sigma_minus[i], self.sigma_z[i]);
        let xj = expect1(&x, self.sigma_minus[j], self.sigma_z[j]);
        Ok((full - xi * xj).re)
    }

    /// `cov(σ⁺_i, σ⁻_j)`, including the same-site value `<σ⁺σ⁻> - |<σ⁻>|²`.
    fn covariance(&self, i: usize, j: usize) -> C64 {
        if i == j {
            C64::new(0.5 * (1.0 + self.sigma_z[i]) - self.sigma_minus[i].norm_sqr(), 0.0)
        } else if i < j {
            self.pairs[pair_index(i, j)].pm - self.sigma_minus[i].conj() * self.sigma_minus[j]
        } else {
            // <σ⁺_i σ⁻_j> = conj(<σ⁺_j σ⁻_i>)
            (self.pairs[pair_index(j, i)].pm - self.sigma_minus[j].conj() * self.sigma_minus[i]).conj()
        }
    }

    /// Inelastic saturation `8 beta² sum_{i,j < upto} cov(σ⁺_i, σ⁻_j)` of the
    /// field behind the first `upto` sites.
    pub fn inelastic_saturation(&self, upto: usize) -> Result<f64> {
        if upto > self.len() {
            return Err(Error::SiteOutOfRange { index: upto, n: self.len() });
        }
        let mut total = 0.0;
        for i in 0..upto {
            for j in 0..upto {
                total += self.covariance(i, j).re;
            }
        }
        Ok(8.0 * self.beta * self.beta * total)
    }

    /// `inelastic_saturation(k)` for `k = 1..=n`, in O(n²).
    pub fn inelastic_profile(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        let mut total = 0.0;
        for k in 0..n {
            let mut cross = 0.0;
            for i in 0..k {
                cross += self.covariance(i, k).re;
            }
            total += self.covariance(k, k).re + 2.0 * cross;
            out.push(8.0 * self.beta * self.beta * total);
        }
        out
    }

    /// Smallest same-site covariance `<σ⁺σ⁻> - |<σ⁻>|²`.
    pub fn min_diagonal_covariance(&self) -> f64 {
        (0..self.len()).map(|i| self.covariance(i, i).re).fold(f64::INFINITY, f64::min)
    }

    /// CSV `i,j,D_i,D_j,sigxx_cumulant` over all ordered pairs of distinct
    /// sites (1-based).
    pub fn write_cumulant_map(&self, path: &Path) -> std::io::Result<()> {
        let n = self.len();
        let d = |k: usize| fmt_f64(4.0 * self.beta * (k + 1) as f64);
        let rows = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| {
            vec![
                (i + 1).to_string(),
                (j + 1).to_string(),
                d(i),
                d(j),
                fmt_f64(self.sigma_xx_cumulant(i, j).expect("valid sites")),
            ]
        });
        write_csv(path, &["i", "j", "D_i", "D_j", "sigxx_cumulant"], rows)
    }

    /// CSV `site,D_i,s_ie_over_s0`.
    pub fn write_inelastic_profile(&self, path: &Path) -> std::io::Result<()> {
        let prof = self.inelastic_profile();
        let rows = prof.iter().enumerate().map(|(k, v)| {
            vec![(k + 1).to_string(), fmt_f64(4.0 * self.beta * (k + 1) as f64), fmt_f64(v / self.s0)]
        });
        write_csv(path, &["site", "D_i", "s_ie_over_s0"], rows)
    }
}

/// Upstream data block `j` needs, maintained as blocks complete.
struct Upstream {
    sigma: Vec<C64>,
    z: Vec<f64>,
    detuning: Vec<f64>,
    /// `P[i][A][b] = sum_{m<i} <A_m B_b,i>` for `A ∈ {σ⁻, σ⁺}`.
    p: Vec<[[C64; 4]; 2]>,
    /// `B[i][A][b] = sum_{i<m<j} <B_b,i A_m>` for the current block `j`.
    b: Vec<[[C64; 4]; 2]>,
    /// `S[i][A] = sum_{m<i} <A_m>`.
    s: Vec<[C64; 2]>,
}

/// Index of `A` in the basis: σ⁻ = 1, σ⁺ = 2.
const A_BASIS: [usize; 2] = [1, 2];

/// Per-operator constants used in the pair equations.
struct OpData {
    x: Lc,
    /// `[X, σ⁻]`
    c_p: Lc,
    /// `[σ⁺, X]`
    c_m: Lc,
    /// `σ⁺ X`
    pre: Lc,
    /// `X σ⁻`
    post: Lc,
}

impl OpData {
    fn new(x: Lc) -> Self {
        OpData { x, c_p: comm(&x, &SM), c_m: comm(&SP, &x), pre: mul(&SP, &x), post: mul(&x, &SM) }
    }
}

/// The five stored pair moments as `(X, Y)` operator choices.
const PAIR_OPS: [(usize, usize); 5] = [(0, 0), (1, 0), (2, 0), (0, 2), (2, 2)];

fn dot(v: &[C64; 4], x: &Lc) -> C64 {
    v[0] * x[0] + v[1] * x[1] + v[2] * x[2] + v[3] * x[3]
}

struct BlockOde<'a> {
    j: usize,
    omega_half: f64,
    beta: f64,
    up: &'a Upstream,
    ops: &'a [OpData; 3],
    factorize: bool,
    tables: RefCell<Vec<[[C64; 4]; 4]>>,
}

impl BlockOde<'_> {
    fn singles(y: &[f64]) -> (C64, f64) {
        (C64::new(y[0], y[1]), y[2])
    }
}

impl OdeSystem for BlockOde<'_> {
    fn dim(&self) -> usize {
        3 + PairMoments::REALS * self.j
    }

    fn rhs(&self, _t: f64, y: &[f64], d: &mut [f64]) {
        let j = self.j;
        let up = self.up;
        let beta = C64::new(self.beta, 0.0);
        let (sj, zj) = Self::singles(y);
        let mut tables = self.tables.borrow_mut();
        for i in 0..j {
            let p = if self.factorize {
                PairMoments::factorized(up.sigma[i], up.z[i], sj, zj)
            } else {
                PairMoments::read(&y[3 + PairMoments::REALS * i..])
            };
            tables[i] = p.table(up.sigma[i], up.z[i], sj, zj);
        }
        let mut qtot = [[ZERO; 4]; 2];
        for t in tables.iter() {
            for (q, &a) in qtot.iter_mut().zip(&A_BASIS) {
                for b in 0..4 {
                    q[b] += t[a][b];
                }
            }
        }
        let ej = |x: &Lc| expect1(x, sj, zj);
        let dj = up.detuning[j];

        // singles of site j
        for (slot, op) in [(0usize, &self.ops[0]), (2, &self.ops[2])] {
            let v = ej(&local_generator(&op.x, self.omega_half, dj)) + beta * (dot(&qtot[1], &op.c_p) + dot(&qtot[0], &op.c_m));
            if slot == 0 {
                d[0] = v.re;
                d[1] = v.im;
            } else {
                d[2] = v.re;
            }
        }

        if self.factorize {
            d[3..].iter_mut().for_each(|v| *v = 0.0);
            return;
        }

        let s_j = up.s[j];
        let mut qlt = [[ZERO; 4]; 2];
        for i in 0..j {
            let m = &tables[i];
            let (si, zi) = (up.sigma[i], up.z[i]);
            let ei = |x: &Lc| expect1(x, si, zi);
            let di = up.detuning[i];
            let s_i = up.s[i];
            let pb: [[C64; 4]; 2] = std::array::from_fn(|a| std::array::from_fn(|b| up.p[i][a][b] + up.b[i][a][b]));
            let base = 3 + PairMoments::REALS * i;
            for (slot, &(xo, yo)) in PAIR_OPS.iter().enumerate() {
                let (xd, yd) = (&self.ops[xo], &self.ops[yo]);
                let (x, yv) = (&xd.x, &yd.x);
                let mut v = expect2(m, &local_generator(x, self.omega_half, di), yv)
                    + expect2(m, x, &local_generator(yv, self.omega_half, dj));
                let exj = ej(yv);
                let eix = ei(x);
                // spectator m < i, cascade onto site i: (σ⁺_m, [X,σ⁻]_i), (σ⁻_m, [σ⁺,X]_i)
                for (ai, xp) in [(1usize, &xd.c_p), (0usize, &xd.c_m)] {
                    let eixp = ei(xp);
                    v += beta
                        * (dot(&up.p[i][ai], xp) * exj + dot(&qlt[ai], yv) * eixp + expect2(m, xp, yv) * s_i[ai]
                            - 2.0 * s_i[ai] * eixp * exj);
                }
                // spectator m < j, m != i, cascade onto site j
                for (ai, yp) in [(1usize, &yd.c_p), (0usize, &yd.c_m)] {
                    let a_lc: Lc = if ai == 1 { SP } else { SM };
                    let ejyp = ej(yp);
                    let s_other = s_j[ai] - ei(&a_lc);
                    v += beta
                        * (dot(&pb[ai], x) * ejyp + (dot(&qtot[ai], yp) - expect2(m, &a_lc, yp)) * eix
                            + expect2(m, x, yp) * s_other
                            - 2.0 * s_other * eix * ejyp);
                }
                // site i itself feeding site j
                v += beta * (expect2(m, &xd.pre, &yd.c_p) + expect2(m, &xd.post, &yd.c_m));
                let o = base + 2 * slot;
                if slot < 4 {
                    d[o] = v.re;
                    d[o + 1] = v.im;
                } else {
                    d[o] = v.re;
                }
            }
            for (q, &a) in qlt.iter_mut().zip(&A_BASIS) {
                for b in 0..4 {
                    q[b] += m[a][b];
                }
            }
        }
    }
}

/// Steady state of a single emitter under drive `alpha`.
fn single_site_steady_state(alpha: C64, detuning: f64) -> (C64, f64) {
    let z = -1.0 / (1.0 + 8.0 * alpha.norm_sqr() / (1.0 + 4.0 * detuning * detuning));
    let s = algebra::I * alpha * z / C64::new(0.5, -detuning);
    (s, z)
}

/// Options specific to the cumulant solver.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ce2Options {
    pub solver: SolverOptions,
    /// Force all pair cumulants to zero, which reduces the expansion to
    /// mean-field theory.
    pub factorize_pairs: bool,
}

/// Second-order cumulant steady state of the first `n` sites of the
/// cascaded chain described by `params` (`n <= params.n_emitters`).
///
/// Any drive ramp in `opts` is ignored: the cascaded steady state is unique.
pub fn solve_ce2(params: &ModelParams, n: usize, opts: &SolverOptions) -> Result<CumulantSolution> {
    solve_ce2_with(params, n, &Ce2Options { solver: *opts, factorize_pairs: false })
}

pub fn solve_ce2_with(params: &ModelParams, n: usize, opts: &Ce2Options) -> Result<CumulantSolution> {
    params.validate()?;
    opts.solver.validate()?;
    if n > MAX_CE2_SITES {
        return Err(Error::DimensionCap { n, cap: MAX_CE2_SITES });
    }
    if n == 0 || n > params.n_emitters {
        return Err(Error::InvalidParams(format!("need 1 <= n <= n_emitters, got n = {n}")));
    }
    let beta = params.beta();
    let omega_half = 0.5 * params.rabi;
    let ops = [OpData::new(SM), OpData::new(SP), OpData::new(SZ)];
    let mut up = Upstream {
        sigma: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        detuning: vec![params.detuning; n],
        p: Vec::with_capacity(n),
        b: vec![[[ZERO; 4]; 2]; n],
        s: vec![[ZERO; 2]],
    };
    let mut pairs = vec![PairMoments::default(); n * n.saturating_sub(1) / 2];
    let mut block_residuals = Vec::with_capacity(n);
    let step = opts.solver.step_options();
    let mut solved_reals = 0usize;

    for j in 0..n {
        // warm start: mean-field single under the upstream drive, factorized pairs
        let alpha = omega_half - algebra::I * beta * up.s[j][0];
        let (s_init, z_init) = single_site_steady_state(alpha, up.detuning[j]);
        let dim = 3 + PairMoments::REALS * j;
        let mut y = vec![0.0; dim];
        y[0] = s_init.re;
        y[1] = s_init.im;
        y[2] = z_init;
        for i in 0..j {
            PairMoments::factorized(up.sigma[i], up.z[i], s_init, z_init).write(&mut y[3 + PairMoments::REALS * i..]);
        }
        let sys = BlockOde {
            j,
            omega_half,
            beta,
            up: &up,
            ops: &ops,
            factorize: opts.factorize_pairs,
            tables: RefCell::new(vec![[[ZERO; 4]; 4]; j]),
        };
        let rep = integrate_to_steady_state(&sys, &mut y, 0.0, opts.solver.steady_state_residual, 0.0, opts.solver.t_max, &step, |_, _| {});
        match rep.outcome {
            Outcome::Done => {}
            Outcome::Unstable => return Err(Error::NumericalInstability { t: rep.t }),
            Outcome::TimeLimit => return Err(Error::BlockNonConvergence { site: j, residual: rep.residual }),
        }
        solved_reals += dim;
        block_residuals.push(rep.residual);

        let sj = C64::new(y[0], y[1]);
        let zj = y[2];
        up.sigma.push(sj);
        up.z.push(zj);
        let mut pj = [[ZERO; 4]; 2];
        for i in 0..j {
            let pm = if opts.factorize_pairs {
                PairMoments::factorized(up.sigma[i], up.z[i], sj, zj)
            } else {
                PairMoments::read(&y[3 + PairMoments::REALS * i..])
            };
            pairs[pair_index(i, j)] = pm;
            let t = pm.table(up.sigma[i], up.z[i], sj, zj);
            for (k, &a) in A_BASIS.iter().enumerate() {
                for bidx in 0..4 {
                    pj[k][bidx] += t[a][bidx];
                    up.b[i][k][bidx] += t[bidx][a];
                }
            }
        }
        // P_j has b = 0 entries sum_{m<j} <A_m>
        up.p.push(pj);
        let prev = up.s[j];
        up.s.push([prev[0] + sj, prev[1] + sj.conj()]);
    }
    assert_eq!(solved_reals, moment_count(n), "moment bookkeeping");

    Ok(CumulantSolution {
        beta,
        s0: params.s0(),
        sigma_minus: up.sigma,
        sigma_z: up.z,
        pairs,
        block_residuals,
    })
}
