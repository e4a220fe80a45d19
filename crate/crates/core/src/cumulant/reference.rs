//! Whole-system second-order cumulant integration for small chains.
//!
//! Every moment equation is built by expanding the adjoint generator on a
//! product of single-site operators, then closing three-site products by
//! dropping the third cumulant. No prefix sums, no block ordering: all
//! `3 n + 9 n (n-1)/2` unknowns are integrated together from the ground
//! state. Intended as an independent check of [`super::solve_ce2`].

use num_complex::Complex64 as C64;

use super::algebra::{comm, expect1, expect2, local_generator, mul, scale, Lc, SM, SP, SZ};
use super::{moment_count, pair_index, CumulantSolution, PairMoments, PAIR_OPS};
use crate::error::{Error, Result};
use crate::meanfield::SolverOptions;
use crate::model::ModelParams;
use crate::ode::{integrate_to_steady_state, OdeSystem, Outcome};

pub const MAX_REFERENCE_SITES: usize = 10;

/// Product of operators on distinct sites.
type Term = Vec<(usize, Lc)>;

fn replace(term: &Term, site: usize, op: Lc) -> Term {
    term.iter().map(|&(s, x)| if s == site { (s, op) } else { (s, x) }).collect()
}

/// Multiply `op` onto `site`, on the left or the right.
fn attach(term: &Term, site: usize, op: &Lc, left: bool) -> Term {
    let mut out = term.clone();
    match out.iter_mut().find(|(s, _)| *s == site) {
        Some((_, x)) => *x = if left { mul(op, x) } else { mul(x, op) },
        None => out.push((site, *op)),
    }
    out
}

/// Adjoint generator applied to a product operator.
fn generate(term: &Term, beta: f64, omega_half: f64, detuning: f64) -> Vec<Term> {
    let mut out = Vec::new();
    for &(k, x) in term {
        out.push(replace(term, k, local_generator(&x, omega_half, detuning)));
        for l in 0..k {
            // β σ⁺_l [A, σ⁻_k]
            let t = replace(term, k, scale(&comm(&x, &SM), C64::new(beta, 0.0)));
            out.push(attach(&t, l, &SP, true));
            // β [σ⁺_k, A] σ⁻_l
            let t = replace(term, k, scale(&comm(&SP, &x), C64::new(beta, 0.0)));
            out.push(attach(&t, l, &SM, false));
        }
    }
    out
}

struct Whole {
    n: usize,
    beta: f64,
    omega_half: f64,
    detuning: f64,
}

struct View<'a> {
    y: &'a [f64],
    n: usize,
}

impl View<'_> {
    fn single(&self, i: usize) -> (C64, f64) {
        (C64::new(self.y[3 * i], self.y[3 * i + 1]), self.y[3 * i + 2])
    }

    fn table(&self, i: usize, j: usize) -> [[C64; 4]; 4] {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (sl, zl) = self.single(lo);
        let (sh, zh) = self.single(hi);
        let off = 3 * self.n + 9 * pair_index(lo, hi);
        let t = PairMoments::read(&self.y[off..]).table(sl, zl, sh, zh);
        if i < j {
            t
        } else {
            std::array::from_fn(|a| std::array::from_fn(|b| t[b][a]))
        }
    }

    fn expect(&self, term: &Term) -> C64 {
        match term.as_slice() {
            [] => C64::new(1.0, 0.0),
            [(i, x)] => {
                let (s, z) = self.single(*i);
                expect1(x, s, z)
            }
            [(i, x), (j, y)] => expect2(&self.table(*i, *j), x, y),
            [(i, x), (j, y), (k, w)] => {
                let e = |s: usize, op: &Lc| {
                    let (sv, zv) = self.single(s);
                    expect1(op, sv, zv)
                };
                let (ex, ey, ew) = (e(*i, x), e(*j, y), e(*k, w));
                expect2(&self.table(*i, *j), x, y) * ew
                    + expect2(&self.table(*i, *k), x, w) * ey
                    + expect2(&self.table(*j, *k), y, w) * ex
                    - 2.0 * ex * ey * ew
            }
            _ => unreachable!("generator adds at most one site"),
        }
    }
}

impl OdeSystem for Whole {
    fn dim(&self) -> usize {
        moment_count(self.n)
    }

    fn rhs(&self, _t: f64, y: &[f64], d: &mut [f64]) {
        let v = View { y, n: self.n };
        let deriv = |term: Term| -> C64 {
            generate(&term, self.beta, self.omega_half, self.detuning).iter().map(|t| v.expect(t)).sum()
        };
        for i in 0..self.n {
            let ds = deriv(vec![(i, SM)]);
            d[3 * i] = ds.re;
            d[3 * i + 1] = ds.im;
            d[3 * i + 2] = deriv(vec![(i, SZ)]).re;
        }
        let ops = [SM, SP, SZ];
        for j in 1..self.n {
            for i in 0..j {
                let off = 3 * self.n + 9 * pair_index(i, j);
                for (slot, &(a, b)) in PAIR_OPS.iter().enumerate() {
                    let dv = deriv(vec![(i, ops[a]), (j, ops[b])]);
                    d[off + 2 * slot] = dv.re;
                    if slot < 4 {
                        d[off + 2 * slot + 1] = dv.im;
                    }
                }
            }
        }
    }
}

/// Second-order cumulant steady state of the first `n <= 10` sites,
/// integrating all moments simultaneously.
pub fn solve_ce2_whole_system(params: &ModelParams, n: usize, opts: &SolverOptions) -> Result<CumulantSolution> {
    params.validate()?;
    opts.validate()?;
    if n > MAX_REFERENCE_SITES {
        return Err(Error::DimensionCap { n, cap: MAX_REFERENCE_SITES });
    }
    if n == 0 || n > params.n_emitters {
        return Err(Error::InvalidParams(format!("need 1 <= n <= n_emitters, got n = {n}")));
    }
    let sys = Whole { n, beta: params.beta(), omega_half: 0.5 * params.rabi, detuning: params.detuning };
    let mut y = vec![0.0; moment_count(n)];
    for i in 0..n {
        y[3 * i + 2] = -1.0;
    }
    for p in 0..n * (n - 1) / 2 {
        y[3 * n + 9 * p + 8] = 1.0;
    }
    let step = opts.step_options();
    let rep = integrate_to_steady_state(&sys, &mut y, 0.0, opts.steady_state_residual, 0.0, opts.t_max, &step, |_, _| {});
    match rep.outcome {
        Outcome::Done => {}
        Outcome::Unstable => return Err(Error::NumericalInstability { t: rep.t }),
        Outcome::TimeLimit => return Err(Error::NonConvergence { residual: rep.residual, t: rep.t }),
    }
    let v = View { y: &y, n };
    let (sigma_minus, sigma_z) = (0..n).map(|i| v.single(i)).unzip();
    let mut pairs = vec![PairMoments::default(); n * (n - 1) / 2];
    for j in 1..n {
        for i in 0..j {
            pairs[pair_index(i, j)] = PairMoments::read(&y[3 * n + 9 * pair_index(i, j)..]);
        }
    }
    Ok(CumulantSolution {
        beta: params.beta(),
        s0: params.s0(),
        sigma_minus,
        sigma_z,
        pairs,
        block_residuals: vec![rep.residual; n],
    })
}
