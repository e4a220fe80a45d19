//! Single-site operator algebra of a two-level system in the basis
//! `(1, σ⁻, σ⁺, σᶻ)`.

use num_complex::Complex64 as C64;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };
pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Linear combination over `(1, σ⁻, σ⁺, σᶻ)`.
pub type Lc = [C64; 4];

pub const ID: Lc = [ONE, ZERO, ZERO, ZERO];
pub const SM: Lc = [ZERO, ONE, ZERO, ZERO];
pub const SP: Lc = [ZERO, ZERO, ONE, ZERO];
pub const SZ: Lc = [ZERO, ZERO, ZERO, ONE];

const fn r(x: f64) -> C64 {
    C64 { re: x, im: 0.0 }
}

/// `PRODUCT[a][b]` is the basis element `a` times basis element `b`.
const PRODUCT: [[Lc; 4]; 4] = [
    [ID, SM, SP, SZ],
    [
        SM,
        [ZERO; 4],
        // σ⁻σ⁺ = (1 - σᶻ)/2
        [r(0.5), ZERO, ZERO, r(-0.5)],
        // σ⁻σᶻ = σ⁻
        SM,
    ],
    [
        SP,
        // σ⁺σ⁻ = (1 + σᶻ)/2
        [r(0.5), ZERO, ZERO, r(0.5)],
        [ZERO; 4],
        // σ⁺σᶻ = -σ⁺
        [ZERO, ZERO, r(-1.0), ZERO],
    ],
    [
        SZ,
        // σᶻσ⁻ = -σ⁻
        [ZERO, r(-1.0), ZERO, ZERO],
        // σᶻσ⁺ = σ⁺
        SP,
        ID,
    ],
];

pub fn scale(x: &Lc, c: C64) -> Lc {
    [x[0] * c, x[1] * c, x[2] * c, x[3] * c]
}

pub fn add(x: &Lc, y: &Lc) -> Lc {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]
}

pub fn mul(x: &Lc, y: &Lc) -> Lc {
    let mut out = [ZERO; 4];
    for a in 0..4 {
        if x[a] == ZERO {
            continue;
        }
        for b in 0..4 {
            if y[b] == ZERO {
                continue;
            }
            let c = x[a] * y[b];
            for (o, p) in out.iter_mut().zip(PRODUCT[a][b].iter()) {
                *o += c * p;
            }
        }
    }
    out
}

pub fn comm(x: &Lc, y: &Lc) -> Lc {
    let a = mul(x, y);
    let b = mul(y, x);
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// Hermitian conjugate.
pub fn dagger(x: &Lc) -> Lc {
    [x[0].conj(), x[2].conj(), x[1].conj(), x[3].conj()]
}

/// Adjoint single-site generator: drive `(Ω/2)(σ⁻ + σ⁺)`, detuning
/// `-Δ σ⁺σ⁻` and unit-rate decay.
pub fn local_generator(x: &Lc, omega_half: f64, detuning: f64) -> Lc {
    let w = r(omega_half);
    let d = r(detuning);
    // L(σ⁻) = i(Ω/2)σᶻ + (iΔ - 1/2)σ⁻
    let l_m: Lc = [ZERO, I * d - 0.5, ZERO, I * w];
    let l_p: Lc = dagger(&l_m);
    // L(σᶻ) = iΩ(σ⁻ - σ⁺) - 1 - σᶻ
    let l_z: Lc = [r(-1.0), I * w * 2.0, -I * w * 2.0, r(-1.0)];
    add(&add(&scale(&l_m, x[1]), &scale(&l_p, x[2])), &scale(&l_z, x[3]))
}

/// Expectation of `x` given `<σ⁻>` and `<σᶻ>`.
#[inline]
pub fn expect1(x: &Lc, s: C64, z: f64) -> C64 {
    x[0] + x[1] * s + x[2] * s.conj() + x[3] * z
}

/// Expectation of `x ⊗ y` from the full moment table of a site pair.
#[inline]
pub fn expect2(m: &[[C64; 4]; 4], x: &Lc, y: &Lc) -> C64 {
    let mut acc = ZERO;
    for a in 0..4 {
        if x[a] == ZERO {
            continue;
        }
        let mut row = ZERO;
        for b in 0..4 {
            row += m[a][b] * y[b];
        }
        acc += x[a] * row;
    }
    acc
}
