//! Central values `L(1/2, χ)` for characters modulo `p^n`.
//!
//! Two independent evaluators:
//! * Hurwitz: `L(1/2,χ) = q^{−1/2} Σ_a χ(a) ζ(1/2, a/q)`, with `ζ(1/2, x)` by
//!   Euler–Maclaurin. One DFT over the discrete-log index gives every
//!   character of a level at once.
//! * Smoothed approximate functional equation:
//!   `L = Σ χ(n) n^{−1/2} W_κ(n/√q) + ε(χ) Σ χ̄(n) n^{−1/2} W_κ(n/√q)` with
//!   `W_κ(y) = Γ(a, πy²)/Γ(a)`, `a = (1/2 + κ)/2`, `ε(χ) = τ(χ)/(i^κ √q)`.
//!
//! Imprimitive characters take the value of their primitive inducer; the
//! principal character is assigned `ζ(1/2)`.

pub mod moments;
pub mod poisson;
pub mod store;
pub mod weights;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::characters::{DirichletCharacter, UnitGroup};
use crate::error::{Error, Result};
use crate::padic::{mul_mod, PrimePowerModulus};
use crate::roots::e_frac;
use weights::SmoothWeight;

pub const ZETA_HALF: f64 = -1.460_354_508_809_586_8;

const EM_SHIFT: u32 = 30;

/// `B_2, B_4, …, B_20`.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// `ζ(s, x)` for real `s ≠ 1`, `x > 0`, by Euler–Maclaurin with shift 30 and
/// Bernoulli terms through `B_20`.
pub fn hurwitz_zeta(s: f64, x: f64) -> f64 {
    assert!(x > 0.0 && s != 1.0);
    let mut sum: f64 = (0..EM_SHIFT).map(|k| (x + k as f64).powf(-s)).sum();
    let y = x + EM_SHIFT as f64;
    sum += y.powf(1.0 - s) / (s - 1.0) + 0.5 * y.powf(-s);
    // B_{2j}/(2j)! · s(s+1)…(s+2j−2) · y^{−s−2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = y.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let j = j as f64 + 1.0;
        sum += b / fact * rising * power;
        rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
        fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
        power /= y * y;
    }
    sum
}

/// How a table of central values was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hurwitz,
    Afe,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Hurwitz => "hurwitz",
            Method::Afe => "afe",
        }
    }
}

/// `L(1/2, χ*)` for every index modulo `p^n`, where `χ*` induces `χ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LValueTable {
    modulus: PrimePowerModulus,
    method: Method,
    values: Vec<Complex64>,
}

/// Powers of `g` modulo `p^m`: `[1, g, g², …]` of length `φ(p^m)`.
fn power_sequence(g: u64, qm: u64, phi: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(phi as usize);
    let mut x = 1u64;
    for _ in 0..phi {
        out.push(x);
        x = mul_mod(x, g, qm);
    }
    out
}

/// `out[k] = Σ_j z_j e(kj/len)`.
fn dft_positive(mut z: Vec<Complex64>) -> Vec<Complex64> {
    let len = z.len();
    FftPlanner::new().plan_fft_inverse(len).process(&mut z);
    z
}

/// Values for the primitive characters of one level `p^m` (indexed by the
/// level index `k`; entries of imprimitive `k` are not meaningful).
fn hurwitz_level(p: u64, m: u32, g: u64) -> Vec<Complex64> {
    let qm = p.pow(m);
    let phi = (p - 1) * p.pow(m - 1);
    let seq = power_sequence(g % qm, qm, phi);
    let z = seq
        .iter()
        .map(|&a| Complex64::new(hurwitz_zeta(0.5, a as f64 / qm as f64), 0.0))
        .collect();
    let scale = 1.0 / (qm as f64).sqrt();
    dft_positive(z).into_iter().map(|v| v * scale).collect()
}

/// `Γ(a, πy²)/Γ(a)` with `a = (1/2 + κ)/2`.
pub fn afe_weight(kappa: u8, y: f64) -> f64 {
    let a = (0.5 + kappa as f64) / 2.0;
    gamma_ur(a, std::f64::consts::PI * y * y)
}

/// Number of terms after which `W_κ(n/√q) < 1e−19`.
pub fn afe_length(q: u64) -> u64 {
    ((45.0 * q as f64 / std::f64::consts::PI).sqrt()).ceil() as u64 + 1
}

fn afe_level(p: u64, m: u32, g: u64) -> Vec<Complex64> {
    let qm = p.pow(m);
    let phi = (p - 1) * p.pow(m - 1);
    let seq = power_sequence(g % qm, qm, phi);
    let mut position = vec![u64::MAX; qm as usize];
    for (j, &a) in seq.iter().enumerate() {
        position[a as usize] = j as u64;
    }
    let sqrt_q = (qm as f64).sqrt();
    let len = afe_length(qm);
    let mut weights = [vec![Complex64::new(0.0, 0.0); phi as usize], vec![Complex64::new(0.0, 0.0); phi as usize]];
    for n in 1..=len {
        let j = position[(n % qm) as usize];
        if j == u64::MAX {
            continue;
        }
        let base = 1.0 / (n as f64).sqrt();
        for kappa in 0..2u8 {
            weights[kappa as usize][j as usize] += base * afe_weight(kappa, n as f64 / sqrt_q);
        }
    }
    let [w0, w1] = weights;
    let sums = [dft_positive(w0), dft_positive(w1)];
    let gauss = dft_positive(seq.iter().map(|&a| e_frac(a as i128, qm)).collect());
    (0..phi as usize)
        .map(|k| {
            let kappa = k % 2;
            let i_kappa = if kappa == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
            let root_number = gauss[k] / (i_kappa * sqrt_q);
            let conj = (phi as usize - k) % phi as usize;
            sums[kappa][k] + root_number * sums[kappa][conj]
        })
        .collect()
}

impl LValueTable {
    /// Central values for every character modulo the group's modulus.
    pub fn compute(group: &UnitGroup, method: Method) -> Self {
        let modulus = *group.modulus();
        let (p, n) = (modulus.p(), modulus.n());
        let g = group.generator();
        let mut values = vec![Complex64::new(f64::NAN, f64::NAN); modulus.phi() as usize];
        values[0] = Complex64::new(ZETA_HALF, 0.0);
        for m in 1..=n {
            let level = match method {
                Method::Hurwitz => hurwitz_level(p, m, g),
                Method::Afe => afe_level(p, m, g),
            };
            let shift = p.pow(n - m);
            for (k, v) in level.into_iter().enumerate() {
                let level_char = DirichletCharacter::new(PrimePowerModulus::new(p, m).expect("valid"), k as u64);
                if level_char.is_primitive() {
                    values[k * shift as usize] = v;
                }
            }
        }
        Self { modulus, method, values }
    }

    pub fn from_values(modulus: PrimePowerModulus, method: Method, values: Vec<Complex64>) -> Result<Self> {
        if values.len() as u64 != modulus.phi() {
            return Err(Error::InvalidParameters(format!(
                "expected {} values, got {}",
                modulus.phi(),
                values.len()
            )));
        }
        Ok(Self { modulus, method, values })
    }

    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// `L(1/2, χ*)` for the character of index `a`.
    pub fn value(&self, index: u64) -> Complex64 {
        self.values[(index % self.modulus.phi()) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value of a primitive character; rejects imprimitive input.
    pub fn central(&self, chi: &DirichletCharacter) -> Result<Complex64> {
        if !chi.is_primitive() {
            return Err(Error::Imprimitive {
                conductor_exp: chi.conductor_exp(),
                n: self.modulus.n(),
            });
        }
        Ok(self.value(chi.index()))
    }

    pub fn primitive_indices(&self) -> impl Iterator<Item = u64> + '_ {
        let modulus = self.modulus;
        (0..modulus.phi()).filter(move |&a| DirichletCharacter::new(modulus, a).is_primitive())
    }
}

/// `L(1/2, χ)` of a primitive character by the Hurwitz route.
pub fn lvalue_central(group: &UnitGroup, chi: &DirichletCharacter) -> Result<Complex64> {
    if !chi.is_primitive() {
        return Err(Error::Imprimitive {
            conductor_exp: chi.conductor_exp(),
            n: group.modulus().n(),
        });
    }
    let q = group.modulus().q();
    let sum: Complex64 = (1..q)
        .map(|a| group.value(chi, a) * hurwitz_zeta(0.5, a as f64 / q as f64))
        .sum();
    Ok(sum / (q as f64).sqrt())
}

/// `τ(χ)/(i^κ √q)`.
pub fn root_number(group: &UnitGroup, chi: &DirichletCharacter) -> Complex64 {
    let q = group.modulus().q();
    let tau: Complex64 = (1..q).map(|a| group.value(chi, a) * e_frac(a as i128, q)).sum();
    let i_kappa = if chi.is_even() { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
    tau / (i_kappa * (q as f64).sqrt())
}

/// One dyadic piece `N^{−1/2} Σ_n χ(n) V_N(n)` and its conjugate-character twin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicPiece {
    pub big_n: f64,
    pub chi: (f64, f64),
    pub chi_bar: (f64, f64),
    /// Smallest and largest `n` with `V_N(n) ≠ 0`.
    pub support: (u64, u64),
}

/// Dyadic decomposition of the smoothed approximate functional equation.
#[derive(Clone, Debug, PartialEq)]
pub struct AfeBreakdown {
    pub value: Complex64,
    pub root_number: Complex64,
    pub pieces: Vec<DyadicPiece>,
    /// Pieces with `N ≤ q^{1/2 + 0.05}`.
    pub inside: usize,
    /// `2|Σ_{inside} (a_N(χ) + ε a_N(χ̄))|²`-type bound:
    /// `4·#inside·Σ_{inside}(|a_N(χ)|² + |a_N(χ̄)|²) + 2|tail|²`.
    pub bound: f64,
    pub tail: Complex64,
}

pub const AFE_EPSILON: f64 = 0.05;

/// `L(1/2, χ)` by the smoothed approximate functional equation, split over
/// dyadic `N = 2^k` with the partition-of-unity weights `V_N`.
pub fn lvalue_afe(group: &UnitGroup, chi: &DirichletCharacter) -> Result<AfeBreakdown> {
    if !chi.is_primitive() {
        return Err(Error::Imprimitive {
            conductor_exp: chi.conductor_exp(),
            n: group.modulus().n(),
        });
    }
    let q = group.modulus().q();
    let kappa = if chi.is_even() { 0 } else { 1 };
    let eps = root_number(group, chi);
    let len = afe_length(q);
    let limit = (q as f64).powf(0.5 + AFE_EPSILON);
    let mut pieces = Vec::new();
    let mut k = 0;
    loop {
        let big_n = 2f64.powi(k);
        if big_n / 2.0 > len as f64 {
            break;
        }
        let w = SmoothWeight::new(big_n, q, kappa);
        let (lo, hi) = w.integer_support();
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for n in lo..=hi {
            let v = w.eval(n as f64);
            let c = group.value(chi, n);
            a += c * v;
            b += c.conj() * v;
        }
        let norm = big_n.sqrt();
        pieces.push(DyadicPiece {
            big_n,
            chi: ((a / norm).re, (a / norm).im),
            chi_bar: ((b / norm).re, (b / norm).im),
            support: (lo, hi),
        });
        k += 1;
    }
    let piece_value = |pc: &DyadicPiece| Complex64::new(pc.chi.0, pc.chi.1) + eps * Complex64::new(pc.chi_bar.0, pc.chi_bar.1);
    let inside = pieces.iter().filter(|pc| pc.big_n <= limit).count();
    let value: Complex64 = pieces.iter().map(piece_value).sum();
    let tail: Complex64 = pieces[inside..].iter().map(piece_value).sum();
    let energy: f64 = pieces[..inside]
        .iter()
        .map(|pc| pc.chi.0.powi(2) + pc.chi.1.powi(2) + pc.chi_bar.0.powi(2) + pc.chi_bar.1.powi(2))
        .sum();
    let bound = 4.0 * inside as f64 * energy + 2.0 * tail.norm_sqr();
    Ok(AfeBreakdown {
        value,
        root_number: eps,
        pieces,
        inside,
        bound,
        tail,
    })
}
