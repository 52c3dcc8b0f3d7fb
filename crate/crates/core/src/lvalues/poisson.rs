//! The shifted correlation `S_{hq₁}(N;χ)` computed directly and through its
//! Poisson dual `Q₁^{−1/2} Σ_k Ŵ_{hq₁}(k/Q₁) K_χ(k,h;Q₁)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::characters::{DirichletCharacter, UnitGroup};
use crate::error::{Error, Result};
use crate::padic::checked_pow;
use crate::roots::e_real;

use super::weights::{adaptive_simpson, SmoothWeight};

/// Tolerance of each adaptive transform, relative to `max(N, 1)`.
pub const TRANSFORM_TOL: f64 = 1e-10;

/// The trapezoid grid is refined until `|Ŵ|` stays below `ALIAS_FLOOR·N` on
/// the upper half of the resolved band.
pub const ALIAS_FLOOR: f64 = 1e-14;

const MAX_GRID_BITS: u32 = 25;

/// `W(y) = V_N(y + s)·V_N(y)` for the shift `s = hq₁`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedProduct {
    weight: SmoothWeight,
    shift: f64,
}

impl ShiftedProduct {
    pub fn new(weight: SmoothWeight, shift: f64) -> Self {
        Self { weight, shift }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let a = self.weight.eval(y);
        if a == 0.0 {
            return 0.0;
        }
        a * self.weight.eval(y + self.shift)
    }

    /// Interval outside of which `W` vanishes, or `None` when it is empty.
    pub fn support(&self) -> Option<(f64, f64)> {
        let (lo, hi) = self.weight.support();
        let (a, b) = (lo, hi - self.shift);
        (a < b).then_some((a, b))
    }

    /// `Ŵ(ξ) = ∫ W(y) e(−yξ) dy`.
    pub fn transform(&self, xi: f64) -> Result<Complex64> {
        let Some((a, b)) = self.support() else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        let oscillations = (xi * (b - a)).abs();
        let panels = (8.0 * oscillations).ceil().max(8.0) as usize;
        let tol = TRANSFORM_TOL * self.weight.big_n().max(1.0);
        adaptive_simpson(|y| self.eval(y) * e_real(-y * xi), a, b, panels, tol)
    }
}

/// Parameters of one Poisson check. `q₁ = p^{k1}` and `Q₁ = q/q₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonCase {
    pub k1: u32,
    pub big_n: f64,
    pub h: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub p: u64,
    pub n: u32,
    pub q1: u64,
    pub big_n: f64,
    pub h: u64,
    pub char_index: u64,
    pub direct: (f64, f64),
    pub dual: (f64, f64),
    pub residual: f64,
    /// `⌈q^{0.1}Q₁/N⌉`.
    pub nominal_cutoff: u64,
    /// Largest `|k|` actually summed.
    pub cutoff: u64,
    /// Part of the dual sum with `|k|` beyond the nominal cutoff.
    pub tail: f64,
    /// `max_{k ≤ nominal} |Ŵ_adaptive − Ŵ_trapezoid|`.
    pub simpson_gap: f64,
}

fn levels(group: &UnitGroup, k1: u32) -> Result<(u64, u64, u32)> {
    let modulus = group.modulus();
    if k1 == 0 || k1 >= modulus.n() {
        return Err(Error::HypothesisViolated(format!(
            "q₁ = p^{k1} must satisfy p ≤ q₁ < q = p^{}",
            modulus.n()
        )));
    }
    let q1 = checked_pow(modulus.p(), k1).ok_or(Error::ModulusOverflow { p: modulus.p(), n: k1 })?;
    let t = modulus.n() - k1;
    Ok((q1, modulus.q() / q1, t))
}

/// `Σ*_{r mod Q₁} χ(r + hq₁)χ̄(r) Σ_j V_N(r + jQ₁ + hq₁) V_N(r + jQ₁)`.
pub fn s_h_direct(group: &UnitGroup, chi: &DirichletCharacter, case: &PoissonCase) -> Result<Complex64> {
    let (q1, big_q1, _) = levels(group, case.k1)?;
    let q = group.modulus().q();
    let p = group.modulus().p();
    let weight = SmoothWeight::new(case.big_n, q, 0);
    let shift = case.h * q1;
    let (lo, hi) = weight.integer_support();
    let mut total = Complex64::new(0.0, 0.0);
    if lo > hi {
        return Ok(total);
    }
    for r in (1..big_q1).filter(|r| r % p != 0) {
        let first = if lo <= r { r } else { r + (lo - r).div_ceil(big_q1) * big_q1 };
        let mut inner = 0.0;
        let mut x = first;
        while x <= hi {
            inner += weight.eval((x + shift) as f64) * weight.eval(x as f64);
            x += big_q1;
        }
        if inner != 0.0 {
            let c = group.value(chi, (r + shift) % q) * group.value(chi, r).conj();
            total += c * inner;
        }
    }
    Ok(total)
}

/// `[K_χ(0,h;Q₁), …, K_χ(Q₁−1,h;Q₁)]` by one DFT.
pub fn kchi_row(group: &UnitGroup, chi: &DirichletCharacter, h: u64, k1: u32) -> Result<Vec<Complex64>> {
    let (q1, big_q1, _) = levels(group, k1)?;
    let q = group.modulus().q();
    let p = group.modulus().p();
    let shift = (h % q) * q1 % q;
    let mut buf: Vec<Complex64> = (0..big_q1)
        .map(|r| {
            if r % p == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                group.value(chi, (r + shift) % q) * group.value(chi, r).conj()
            }
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(big_q1 as usize).process(&mut buf);
    let scale = 1.0 / (big_q1 as f64).sqrt();
    Ok(buf.into_iter().map(|z| z * scale).collect())
}

/// `Ŵ(k/Q₁)` for `k = 0, 1, …, K` by the trapezoid rule on a uniform grid of
/// `L` points over `r` periods of length `Q₁`, one FFT for all `k`. `W` and
/// all its derivatives vanish at the ends of its support, so the only error is
/// aliasing `Σ_{m≠0} Ŵ(k/Q₁ + mL/(rQ₁))`; `L` is doubled until `|Ŵ|` is below
/// `ALIAS_FLOOR·N` on `(K, 2K]`, and `K = L/(4r)` keeps every alias beyond
/// that band.
pub fn transform_row(w: &ShiftedProduct, big_q1: u64, nominal: u64) -> Result<Vec<Complex64>> {
    let Some((a, b)) = w.support() else {
        return Ok(vec![Complex64::new(0.0, 0.0)]);
    };
    let q1f = big_q1 as f64;
    let r = ((b - a) / q1f).ceil().max(1.0) as usize;
    let period = r as f64 * q1f;
    let floor = ALIAS_FLOOR * w.weight.big_n().max(1.0);
    let mut planner = FftPlanner::new();
    let mut len = (64 * r * (nominal.max(1) as usize)).next_power_of_two().max(4096);
    while len <= 1 << MAX_GRID_BITS {
        let delta = period / len as f64;
        let mut buf: Vec<Complex64> = (0..len)
            .map(|j| Complex64::new(w.eval(a + j as f64 * delta), 0.0))
            .collect();
        planner.plan_fft_forward(len).process(&mut buf);
        let top = len / (2 * r);
        let hat = |k: usize| {
            // e(−a·k/Q₁) with `a` dyadic, so `a·k mod Q₁` is exact
            let turn = (a * k as f64).rem_euclid(q1f) / q1f;
            buf[k * r] * e_real(-turn) * delta
        };
        let quiet = (top / 2 + 1..top).all(|k| hat(k).norm() <= floor);
        if quiet {
            return Ok((0..=top / 2).map(hat).collect());
        }
        len *= 2;
    }
    Err(Error::QuadratureFailure { a, b })
}

/// Direct and dual evaluation of `S_{hq₁}(N;χ)`. The adaptive transform is run
/// for `k ≤ nominal` as a cross-check on the trapezoid values.
pub fn poisson_step_check(group: &UnitGroup, chi: &DirichletCharacter, case: &PoissonCase) -> Result<PoissonCheck> {
    let (q1, big_q1, _) = levels(group, case.k1)?;
    let modulus = group.modulus();
    let q = modulus.q();
    let direct = s_h_direct(group, chi, case)?;
    let w = ShiftedProduct::new(SmoothWeight::new(case.big_n, q, 0), (case.h * q1) as f64);
    let nominal = ((q as f64).powf(0.1) * big_q1 as f64 / case.big_n).ceil() as u64;
    let (dual, tail, cutoff, simpson_gap) = if w.support().is_none() {
        (Complex64::new(0.0, 0.0), 0.0, 0, 0.0)
    } else {
        let row = kchi_row(group, chi, case.h, case.k1)?;
        let hats = transform_row(&w, big_q1, nominal)?;
        let mut gap: f64 = 0.0;
        for (k, hat) in hats.iter().enumerate().take(nominal as usize + 1) {
            let adaptive = w.transform(k as f64 / big_q1 as f64)?;
            gap = gap.max((adaptive - hat).norm());
        }
        let mut main = Complex64::new(0.0, 0.0);
        let mut tail = Complex64::new(0.0, 0.0);
        for (k, hat) in hats.iter().enumerate() {
            let k = k as u64;
            let term = if k == 0 {
                hat * row[0]
            } else {
                let plus = row[(k % big_q1) as usize];
                let minus = row[((big_q1 - k % big_q1) % big_q1) as usize];
                hat * plus + hat.conj() * minus
            };
            if k <= nominal {
                main += term;
            } else {
                tail += term;
            }
        }
        let scale = 1.0 / (big_q1 as f64).sqrt();
        ((main + tail) * scale, tail.norm() * scale, hats.len() as u64 - 1, gap)
    };
    Ok(PoissonCheck {
        p: modulus.p(),
        n: modulus.n(),
        q1,
        big_n: case.big_n,
        h: case.h,
        char_index: chi.index(),
        direct: (direct.re, direct.im),
        dual: (dual.re, dual.im),
        residual: (direct - dual).norm(),
        nominal_cutoff: nominal,
        cutoff,
        tail,
        simpson_gap,
    })
}
