//! The trace-function sums
//! `K_χ(j,h;q̃) = q̃^{−1/2} Σ*_{r mod q̃} χ(r + h·q/q̃) χ̄(r) e(jr/q̃)`
//! for `χ mod q = p^n` and `q̃ = p^t`, `t < n`.
//!
//! For `(h, p) = 1` the sum only depends on `m = jh`:
//! `K_χ(m;q̃) = q̃^{−1/2} Σ* χ(1 + dr) e(m r̄/q̃)` with `d = q/q̃`. Its phase is
//! `θ(x) = A·(q̃/q)·log_p(1 + dx) + m x̄`, whose two stationary points are
//! `s_± = ½(ud ± √(u²d² + 4u))` with `u = m/A`. The closed form is
//! `K^± = Δ(s_±)·e(A·g_±(u)/q̃)`, `g_±(u) = (q̃/q)·log_p(1 + d s_±) + u/s_±`,
//! where `Δ = 1` for even `t` and `ε(p)(A/p)(u s_±/p)` for odd `t`.
//!
//! `±` labels are relative to the canonical square-root branch (roots in
//! `[1, (p−1)/2]` modulo `p`).

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::characters::{DirichletCharacter, UnitGroup};
use crate::error::{Error, Result};
use crate::padic::{
    gcd, inv_mod, legendre, mul_mod, ord_int, plog, psqrt, PadicResidue, PrimePowerModulus,
    SqrtBranch, Valuation,
};
use crate::phase::epsilon;
use crate::roots::{e_frac, RootTable};

/// `ord_p((x, p^t))`, equal to `t` when `p^t | x`.
pub fn eta(x: i64, p: u64, t: u32) -> u32 {
    match ord_int(x.unsigned_abs(), p) {
        Valuation::Finite(v) => v.min(t),
        Valuation::Infinite => t,
    }
}

fn check_level(modulus: &PrimePowerModulus, t: u32) -> Result<()> {
    if t == 0 || t >= modulus.n() {
        return Err(Error::InvalidParameters(format!(
            "q̃ = p^{t} must be a proper divisor of p^{} with t ≥ 1",
            modulus.n()
        )));
    }
    Ok(())
}

/// `K_χ(j,h;q̃)` by direct summation over the units `r mod q̃`.
pub fn kchi_direct(group: &UnitGroup, chi: &DirichletCharacter, j: i64, h: i64, t: u32) -> Result<Complex64> {
    let modulus = group.modulus();
    check_level(modulus, t)?;
    let (p, q) = (modulus.p(), modulus.q());
    let qt = p.pow(t);
    let shift = mul_mod(h.rem_euclid(q as i64) as u64, q / qt, q);
    let jr = j.rem_euclid(qt as i64) as u64;
    let table = RootTable::new(qt);
    let mut sum = Complex64::new(0.0, 0.0);
    for r in (1..qt).filter(|r| r % p != 0) {
        let top = group.value(chi, (r + shift) % q);
        let bottom = group.value(chi, r).conj();
        sum += top * bottom * table.e(mul_mod(jr, r, qt));
    }
    Ok(sum / (qt as f64).sqrt())
}

/// `K_χ(m;q̃) = q̃^{−1/2} Σ* χ(1 + (q/q̃)r) e(m r̄/q̃)` by direct summation.
pub fn kchi_m_direct(group: &UnitGroup, chi: &DirichletCharacter, m: i64, t: u32) -> Result<Complex64> {
    let modulus = group.modulus();
    check_level(modulus, t)?;
    let (p, q) = (modulus.p(), modulus.q());
    let qt = p.pow(t);
    let d = q / qt;
    let mr = m.rem_euclid(qt as i64) as u64;
    let table = RootTable::new(qt);
    let mut sum = Complex64::new(0.0, 0.0);
    for r in (1..qt).filter(|r| r % p != 0) {
        let rbar = inv_mod(r, qt).expect("unit");
        sum += group.value(chi, 1 + d * r) * table.e(mul_mod(mr, rbar, qt));
    }
    Ok(sum / (qt as f64).sqrt())
}

/// Outcome of the case analysis on `η_j`, `η_h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reduction {
    /// `η_j = η_h = η < t`: `K_χ(j,h;q̃) = p^{η/2} K_χ(m′; q̃/p^η)`,
    /// `m′ = jh/p^{2η} mod q̃/p^η`.
    Reduce { eta: u32, m: u64, t_reduced: u32 },
    /// `q̃ | j` and `q̃ | h`: value `q̃^{1/2}(1 − 1/p)`.
    Full,
    /// `η_j + η_h = 2t − 1`: value `−q̃^{1/2}/p`.
    MinusOverP,
    Zero,
}

impl Reduction {
    pub fn tag(&self) -> &'static str {
        match self {
            Reduction::Reduce { .. } => "reduce",
            Reduction::Full => "full",
            Reduction::MinusOverP => "minus_over_p",
            Reduction::Zero => "zero",
        }
    }
}

pub fn kchi_reduce(j: i64, h: i64, p: u64, t: u32) -> Reduction {
    let (ej, eh) = (eta(j, p, t), eta(h, p, t));
    if ej == t && eh == t {
        Reduction::Full
    } else if ej + eh == 2 * t - 1 {
        Reduction::MinusOverP
    } else if ej == eh {
        let t_reduced = t - ej;
        let qr = p.pow(t_reduced) as i128;
        let pe = p.pow(ej) as i128;
        let m = ((j as i128 / pe) * (h as i128 / pe)).rem_euclid(qr) as u64;
        Reduction::Reduce { eta: ej, m, t_reduced }
    } else {
        Reduction::Zero
    }
}

/// `K_χ(j,h;q̃)` through the case table, evaluating the reduced sum directly.
pub fn kchi_via_reduction(group: &UnitGroup, chi: &DirichletCharacter, j: i64, h: i64, t: u32) -> Result<Complex64> {
    let p = group.modulus().p();
    let root_qt = (p.pow(t) as f64).sqrt();
    Ok(match kchi_reduce(j, h, p, t) {
        Reduction::Full => Complex64::new(root_qt * (1.0 - 1.0 / p as f64), 0.0),
        Reduction::MinusOverP => Complex64::new(-root_qt / p as f64, 0.0),
        Reduction::Zero => Complex64::new(0.0, 0.0),
        Reduction::Reduce { eta, m, t_reduced } => {
            (p.pow(eta) as f64).sqrt() * kchi_m_direct(group, chi, m as i64, t_reduced)?
        }
    })
}

/// Stationary point data for one sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPoint {
    /// `s_± mod q̃`.
    pub s: u64,
    /// `g_±(u) mod q̃`.
    pub g: u64,
    /// `(u·s_±/p)`.
    pub legendre_us: i8,
}

/// `s_±(u)` and `g_±(u)` for `q = p^n`, `q̃ = p^t`, computed with two guard
/// digits and reduced mod `q̃`. `None` when `(u/p) = −1`.
pub fn split_points(p: u64, n: u32, t: u32, u: u64, branch: &SqrtBranch) -> Result<Option<[SplitPoint; 2]>> {
    if u % p == 0 {
        return Err(Error::NotUnit(u));
    }
    if legendre(u as i128, p) != 1 {
        return Ok(None);
    }
    let e = n - t;
    let w = t + 2;
    let qt = p.pow(t);
    let d = p.pow(e);
    let ur = PadicResidue::from_u64(u, p, w);
    let dr = PadicResidue::from_u64(d % p.pow(w), p, w);
    let four = PadicResidue::from_u64(4, p, w);
    let disc = ur * ur * dr * dr + four * ur;
    let root = psqrt(&disc, branch, w)?;
    let half = PadicResidue::from_u64(2, p, w).inverse()?;
    let mut out = [SplitPoint { s: 0, g: 0, legendre_us: 0 }; 2];
    for (slot, s) in out.iter_mut().zip([(ur * dr + root) * half, (ur * dr - root) * half]) {
        let big = p.pow(w + e);
        let arg = PadicResidue::from_u64((1 + mul_mod(d, s.value(), big)) % big, p, w + e);
        let log = plog(&arg, w + e)?.shift_down(e)?;
        let g = log + ur * s.inverse()?;
        *slot = SplitPoint {
            s: s.value() % qt,
            g: g.value() % qt,
            legendre_us: legendre(mul_mod(u, s.value(), p) as i128, p),
        };
    }
    Ok(Some(out))
}

/// Closed-form split of `K_χ(m;q̃)` for one character.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorySplit {
    pub kplus: Complex64,
    pub kminus: Complex64,
    pub s_plus: Option<PadicResidue>,
    pub s_minus: Option<PadicResidue>,
    pub g_plus: Option<PadicResidue>,
    pub g_minus: Option<PadicResidue>,
    pub delta_factors: [Complex64; 2],
}

impl OscillatorySplit {
    pub fn total(&self) -> Complex64 {
        self.kplus + self.kminus
    }
}

/// `Δ` for odd `t` (without the Legendre symbol of `u s`); 1 for even `t`.
fn delta_prefactor(p: u64, t: u32, a_unit: u64) -> Complex64 {
    if t % 2 == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        epsilon(p) * legendre(a_unit as i128, p) as f64
    }
}

/// `K^±_χ(m;q̃)` from the stationary points; needs `q̃ ≥ p²`, `(m, q̃) = 1`
/// and `χ` primitive.
pub fn kchi_closed(group: &UnitGroup, chi: &DirichletCharacter, m: i64, t: u32) -> Result<OscillatorySplit> {
    let modulus = group.modulus();
    check_level(modulus, t)?;
    let (p, n) = (modulus.p(), modulus.n());
    if t < 2 {
        return Err(Error::InvalidParameters("q̃ < p²".into()));
    }
    let qt = p.pow(t);
    if gcd(m.unsigned_abs(), qt) != 1 {
        return Err(Error::InvalidParameters(format!("gcd({m}, q̃) > 1")));
    }
    let a_unit = group.postnikov_candidate(chi)?;
    // A is known mod p^{n−1}; everything below is reduced mod q̃ | p^{n−1}.
    assert_eq!((q_over_p(modulus)) % qt, 0);
    let m_red = m.rem_euclid(qt as i64) as u64;
    let u = mul_mod(m_red, inv_mod(a_unit % qt, qt).expect("A is a unit"), qt);
    let branch = SqrtBranch::canonical(p)?;
    let pre = delta_prefactor(p, t, a_unit);
    let zero = Complex64::new(0.0, 0.0);
    match split_points(p, n, t, u, &branch)? {
        None => Ok(OscillatorySplit {
            kplus: zero,
            kminus: zero,
            s_plus: None,
            s_minus: None,
            g_plus: None,
            g_minus: None,
            delta_factors: [zero, zero],
        }),
        Some([sp, sm]) => {
            let delta = |pt: &SplitPoint| {
                if t % 2 == 0 {
                    pre
                } else {
                    pre * pt.legendre_us as f64
                }
            };
            let term = |pt: &SplitPoint| delta(pt) * e_frac(mul_mod(a_unit % qt, pt.g, qt) as i128, qt);
            Ok(OscillatorySplit {
                kplus: term(&sp),
                kminus: term(&sm),
                s_plus: Some(PadicResidue::from_u64(sp.s, p, t)),
                s_minus: Some(PadicResidue::from_u64(sm.s, p, t)),
                g_plus: Some(PadicResidue::from_u64(sp.g, p, t)),
                g_minus: Some(PadicResidue::from_u64(sm.g, p, t)),
                delta_factors: [delta(&sp), delta(&sm)],
            })
        }
    }
}

fn q_over_p(modulus: &PrimePowerModulus) -> u64 {
    modulus.q() / modulus.p()
}

/// `θ′(x) = A/(1 + dx) − m/x² mod q̃`.
pub fn theta_prime(p: u64, n: u32, t: u32, a_unit: u64, m: u64, x: u64) -> Result<u64> {
    let qt = p.pow(t);
    let d = p.pow(n - t) % qt;
    let lin = inv_mod((1 + mul_mod(d, x, qt)) % qt, qt).ok_or(Error::NotUnit(x))?;
    let xi = inv_mod(x % qt, qt).ok_or(Error::NotUnit(x))?;
    let a = mul_mod(a_unit % qt, lin, qt);
    let b = mul_mod(m % qt, mul_mod(xi, xi, qt), qt);
    Ok((a + qt - b) % qt)
}

/// `A mod q̃`, its inverse and the `Δ` prefactor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitClass {
    pub a: u64,
    pub a_inv: u64,
    pre: Complex64,
}

/// `s_±` and `g_±` for every unit `u mod q̃`, shared by all characters with a
/// given `(p, n, t)`.
#[derive(Clone, Debug)]
pub struct SplitTable {
    p: u64,
    n: u32,
    t: u32,
    qt: u64,
    points: Vec<Option<[SplitPoint; 2]>>,
    roots: RootTable,
}

impl SplitTable {
    pub fn new(p: u64, n: u32, t: u32) -> Result<Self> {
        if t < 2 || t >= n {
            return Err(Error::InvalidParameters(format!("need 2 ≤ t < n, got t = {t}, n = {n}")));
        }
        let qt = p.pow(t);
        let branch = SqrtBranch::canonical(p)?;
        let points = (0..qt)
            .map(|u| {
                if u % p == 0 {
                    Ok(None)
                } else {
                    split_points(p, n, t, u, &branch)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            n,
            t,
            qt,
            points,
            roots: RootTable::new(qt),
        })
    }

    pub fn qtilde(&self) -> u64 {
        self.qt
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn points(&self, u: u64) -> Option<&[SplitPoint; 2]> {
        self.points[(u % self.qt) as usize].as_ref()
    }

    /// Per-character constants for [`SplitTable::split`].
    pub fn class(&self, a_unit: u64) -> SplitClass {
        let a = a_unit % self.qt;
        SplitClass {
            a,
            a_inv: inv_mod(a, self.qt).expect("A is a unit"),
            pre: delta_prefactor(self.p, self.t, a),
        }
    }

    /// `(K⁺, K⁻)` at `m` coprime to `p`.
    #[inline]
    pub fn split(&self, class: &SplitClass, m: u64) -> [Complex64; 2] {
        let qt = self.qt;
        let u = (m % qt) * class.a_inv % qt;
        match &self.points[u as usize] {
            None => [Complex64::new(0.0, 0.0); 2],
            Some(pts) => pts.map(|pt| {
                let delta = if self.t % 2 == 0 {
                    class.pre
                } else {
                    class.pre * pt.legendre_us as f64
                };
                delta * self.roots.e(class.a * pt.g % qt)
            }),
        }
    }

    /// `K^{sign}` with `sign = +1` or `−1`.
    pub fn signed(&self, a_unit: u64, m: u64, sign: i8) -> Complex64 {
        let [kp, km] = self.split(&self.class(a_unit), m);
        if sign >= 0 {
            kp
        } else {
            km
        }
    }
}

/// All `K_χ(m;q̃)`, `m mod q̃`, for one character by a single DFT of
/// `s ↦ χ(1 + d s̄)`.
///
/// `1 + dZ` has order `q̃` in the unit group, so `dlog(1 + d s̄) = (φ/q̃)·ℓ(s)`
/// and `χ_a(1 + d s̄) = e(a·ℓ(s)/q̃)`: the values only depend on `a mod q̃`.
/// Construction checks the divisibility exactly.
pub struct DirectSweep {
    qt: u64,
    ell: Vec<u32>,
    roots: RootTable,
    fft: Arc<dyn Fft<f64>>,
}

impl DirectSweep {
    pub fn new(group: &UnitGroup, t: u32) -> Result<Self> {
        let modulus = group.modulus();
        check_level(modulus, t)?;
        let p = modulus.p();
        let qt = p.pow(t);
        let d = modulus.q() / qt;
        let step = modulus.phi() / qt;
        let mut ell = vec![u32::MAX; qt as usize];
        for s in (1..qt).filter(|s| s % p != 0) {
            let sbar = inv_mod(s, qt).expect("unit");
            let k = group.dlog(1 + d * sbar).expect("1 + dZ consists of units");
            if k % step != 0 {
                return Err(Error::InvalidParameters(format!(
                    "dlog(1 + {d}·{sbar}) = {k} is not a multiple of φ/q̃ = {step}"
                )));
            }
            ell[s as usize] = (k / step) as u32;
        }
        let fft = FftPlanner::new().plan_fft_inverse(qt as usize);
        Ok(Self {
            qt,
            ell,
            roots: RootTable::new(qt),
            fft,
        })
    }

    pub fn qtilde(&self) -> u64 {
        self.qt
    }

    /// `[K_χ(0;q̃), …, K_χ(q̃−1;q̃)]`.
    pub fn values(&self, chi: &DirichletCharacter) -> Vec<Complex64> {
        let a = chi.index() % self.qt;
        let mut buf: Vec<Complex64> = self
            .ell
            .iter()
            .map(|&l| {
                if l == u32::MAX {
                    Complex64::new(0.0, 0.0)
                } else {
                    self.roots.e(a * l as u64 % self.qt)
                }
            })
            .collect();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.qt as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }
}

/// `Q = q̃/(q̃, δ)` with `δ = (q/p, A − A′)`.
pub fn product_modulus(modulus: &PrimePowerModulus, t: u32, a: u64, a_prime: u64) -> u64 {
    let qt = modulus.p().pow(t);
    qt / gcd(qt, crate::characters::delta(modulus, a, a_prime))
}

/// Parameters of a twisted sum of products `Σ*_{u mod Q} K^±_χ K̄^±_{χ′} e(−uv/Q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSumParams {
    pub modulus: PrimePowerModulus,
    pub t: u32,
    /// Postnikov units of `χ` and `χ′` modulo `q/p`.
    pub a: u64,
    pub a_prime: u64,
    pub v: i64,
    pub sign: i8,
}

impl ProductSumParams {
    pub fn big_q(&self) -> u64 {
        product_modulus(&self.modulus, self.t, self.a, self.a_prime)
    }
}

/// `K^±_χ(m;q̃)·K̄^±_{χ′}(m;q̃)`.
pub fn product_term(table: &SplitTable, a: u64, a_prime: u64, m: u64, sign: i8) -> Complex64 {
    table.signed(a, m, sign) * table.signed(a_prime, m, sign).conj()
}

/// Lift of `u mod Q` to a unit modulo `q̃` (`u` itself when `p ∤ u`;
/// `1` when `Q = 1`).
fn unit_lift(u: u64, big_q: u64, p: u64) -> Option<u64> {
    if big_q == 1 {
        Some(1)
    } else if u % p == 0 {
        None
    } else {
        Some(u)
    }
}

/// The complete twisted sum `Σ*_{u mod Q} K^±_χ(u;q̃) K̄^±_{χ′}(u;q̃) e(−uv/Q)`.
/// For `Q = 1` the single class is represented by `u = 1`.
pub fn product_sum(table: &SplitTable, params: &ProductSumParams) -> Complex64 {
    let big_q = params.big_q();
    let p = table.p();
    let roots = RootTable::new(big_q);
    let v = params.v.rem_euclid(big_q as i64) as u64;
    (0..big_q)
        .filter_map(|u| unit_lift(u, big_q, p).map(|lift| (u, lift)))
        .map(|(u, lift)| {
            product_term(table, params.a, params.a_prime, lift, params.sign)
                * roots.e(big_q - mul_mod(u, v, big_q) % big_q)
        })
        .sum()
}

/// The twisted sums of [`product_sum`] for every `v mod Q` at once, by one DFT.
pub fn product_sums_all(table: &SplitTable, modulus: &PrimePowerModulus, a: u64, a_prime: u64, sign: i8) -> Vec<Complex64> {
    let big_q = product_modulus(modulus, table.t(), a, a_prime);
    let p = table.p();
    let (ca, cb) = (table.class(a), table.class(a_prime));
    let s = usize::from(sign < 0);
    let mut buf: Vec<Complex64> = (0..big_q)
        .map(|u| match unit_lift(u, big_q, p) {
            None => Complex64::new(0.0, 0.0),
            Some(lift) => table.split(&ca, lift)[s] * table.split(&cb, lift)[s].conj(),
        })
        .collect();
    FftPlanner::new().plan_fft_forward(big_q as usize).process(&mut buf);
    buf
}

/// Smallest `P | q̃` (a power of `p`, `P ≥ p`) such that the product is
/// invariant under `m ↦ m + P` for every unit `m mod q̃`.
pub fn periodicity_check(table: &SplitTable, a: u64, a_prime: u64, sign: i8, tol: f64) -> u64 {
    let qt = table.qtilde();
    let p = table.p();
    let values: Vec<Complex64> = (0..qt)
        .map(|m| {
            if m % p == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                product_term(table, a, a_prime, m, sign)
            }
        })
        .collect();
    let mut period = p;
    while period < qt {
        let ok = (0..qt)
            .filter(|m| m % p != 0)
            .all(|m| (values[m as usize] - values[((m + period) % qt) as usize]).norm() <= tol);
        if ok {
            return period;
        }
        period *= p;
    }
    qt
}

/// Completion of an incomplete sum of a `Q`-periodic table.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    /// `Σ_{1 ≤ m ≤ M} f(m)`.
    pub partial: Complex64,
    /// `Q^{−1} Σ_v |f̂(v)|·min{M, ‖v/Q‖^{−1}}`.
    pub bound: f64,
}

/// Bounds `Σ_{m ≤ M} f(m)` through the discrete Fourier transform of one period.
pub fn complete_incomplete_sum(f: &[Complex64], big_m: u64) -> Result<Completion> {
    let big_q = f.len();
    if big_q == 0 {
        return Err(Error::InvalidParameters("empty table".into()));
    }
    let mut hat = f.to_vec();
    FftPlanner::new().plan_fft_forward(big_q).process(&mut hat);
    let bound = hat
        .iter()
        .enumerate()
        .map(|(v, z)| {
            let frac = v as f64 / big_q as f64;
            let dist = frac.min(1.0 - frac);
            let weight = if dist == 0.0 {
                big_m as f64
            } else {
                (big_m as f64).min(1.0 / dist)
            };
            z.norm() * weight
        })
        .sum::<f64>()
        / big_q as f64;
    let partial = (1..=big_m).map(|m| f[(m % big_q as u64) as usize]).sum();
    let out = Completion { partial, bound };
    if out.partial.norm() > out.bound * (1.0 + 1e-9) + 1e-9 {
        return Err(Error::InvalidParameters(format!(
            "completion bound {} below partial sum {}",
            out.bound,
            out.partial.norm()
        )));
    }
    Ok(out)
}

/// One row of a sweep report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: u64,
    pub n: u32,
    pub qtilde: u64,
    pub m_or_v: i64,
    pub case: String,
    pub abs_value: f64,
    pub ratio: f64,
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Cache(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Cache(e.to_string()))
}

pub fn write_rows_json(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(rows).map_err(|e| Error::Cache(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::Cache(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::phase::{sum_direct, sum_stationary, AnalyticPhase};

    fn group(p: u64, n: u32) -> UnitGroup {
        UnitGroup::new(PrimePowerModulus::new(p, n).unwrap())
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn degenerate_values() {
        let g = group(3, 5);
        let chi = g.primitive_characters()[3];
        for t in 1..5 {
            let qt = 3i64.pow(t);
            let root = (qt as f64).sqrt();
            let full = kchi_direct(&g, &chi, 0, qt, t).unwrap();
            assert!(close(full, Complex64::new(root * (1.0 - 1.0 / 3.0), 0.0), 1e-10));
            let minus = kchi_direct(&g, &chi, 0, qt / 3, t).unwrap();
            assert!(close(minus, Complex64::new(-root / 3.0, 0.0), 1e-10));
            let minus = kchi_direct(&g, &chi, qt / 3, 0, t).unwrap();
            assert!(close(minus, Complex64::new(-root / 3.0, 0.0), 1e-10));
        }
    }

    #[test]
    fn two_forms_agree() {
        let g = group(5, 4);
        for chi in g.primitive_characters().into_iter().step_by(37) {
            for t in 1..4 {
                for m in [1i64, 2, 7, -3, 24] {
                    let a = kchi_direct(&g, &chi, 1, m, t).unwrap();
                    let b = kchi_m_direct(&g, &chi, m, t).unwrap();
                    assert!(close(a, b, 1e-10));
                    let c = kchi_direct(&g, &chi, m, 1, t).unwrap();
                    assert!(close(a, c, 1e-10));
                }
            }
        }
    }

    #[test]
    fn closed_form_small_example() {
        let g = group(3, 4);
        for chi in g.primitive_characters() {
            let direct = kchi_m_direct(&g, &chi, 1, 3).unwrap();
            let closed = kchi_closed(&g, &chi, 1, 3).unwrap();
            assert!(close(direct, closed.total(), 1e-9));
        }
    }

    #[test]
    fn closed_form_mod_five_to_the_five() {
        let g = group(5, 5);
        for chi in g.primitive_characters().into_iter().step_by(11) {
            for m in (1..125i64).filter(|m| m % 5 != 0) {
                let direct = kchi_m_direct(&g, &chi, m, 3).unwrap();
                let closed = kchi_closed(&g, &chi, m, 3).unwrap();
                assert!(close(direct, closed.total(), 1e-9), "m={m}");
                let a = g.postnikov_candidate(&chi).unwrap();
                if legendre(a as i128 * m as i128, 5) == -1 {
                    assert_eq!(closed.total(), Complex64::new(0.0, 0.0));
                    assert!(direct.norm() < 1e-9);
                } else {
                    assert!((closed.kplus.norm() - 1.0).abs() < 1e-12);
                    assert!((closed.kminus.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_rejects_bad_input() {
        let g = group(3, 4);
        let chi = g.primitive_characters()[0];
        assert!(kchi_closed(&g, &chi, 1, 1).is_err());
        assert!(kchi_closed(&g, &chi, 3, 3).is_err());
        assert!(kchi_closed(&g, &chi, 1, 4).is_err());
        assert!(matches!(kchi_closed(&g, &g.character(3), 1, 3), Err(Error::Imprimitive { .. })));
    }

    #[test]
    fn vieta_and_stationarity() {
        let branch = SqrtBranch::canonical(7).unwrap();
        let (p, n) = (7u64, 6u32);
        for t in 2..n {
            let qt = p.pow(t);
            let d = p.pow(n - t) % qt;
            for u in (1..qt).step_by(5).filter(|u| u % p != 0) {
                let Some([sp, sm]) = split_points(p, n, t, u, &branch).unwrap() else {
                    continue;
                };
                assert_eq!(mul_mod(sp.s, sm.s, qt), (qt - u) % qt);
                assert_eq!((sp.s + sm.s) % qt, mul_mod(u, d, qt));
                // θ′ with A = 1, m = u.
                assert_eq!(theta_prime(p, n, t, 1, u, sp.s).unwrap(), 0);
                assert_eq!(theta_prime(p, n, t, 1, u, sm.s).unwrap(), 0);
            }
        }
    }

    #[test]
    fn closed_form_matches_phase_engine() {
        // The phase of K_χ(m;p^t) is the Postnikov-log phase mod p^t.
        let (p, n) = (3u64, 6u32);
        let g = group(p, n);
        for chi in g.primitive_characters().into_iter().step_by(17) {
            let a = g.postnikov_candidate(&chi).unwrap();
            for t in 2..n {
                let q = PrimePowerModulus::new(p, t).unwrap();
                for m in [1i64, 2, 4, 5] {
                    let f = AnalyticPhase::postnikov_log(p, a as i64, n - t, m);
                    let scale = (q.q() as f64).sqrt();
                    let direct = kchi_m_direct(&g, &chi, m, t).unwrap();
                    assert!(close(sum_direct(&f, &q) / scale, direct, 1e-9));
                    let closed = sum_stationary(&f, &q).unwrap().value / scale;
                    assert!(close(closed, direct, 1e-9));
                }
            }
        }
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(kchi_reduce(1, 1, 3, 4), Reduction::Reduce { eta: 0, m: 1, t_reduced: 4 });
        assert_eq!(kchi_reduce(5, 7, 3, 4), Reduction::Reduce { eta: 0, m: 35 % 81, t_reduced: 4 });
        assert_eq!(kchi_reduce(3, 1, 3, 4), Reduction::Zero);
        assert_eq!(kchi_reduce(0, 27, 3, 4), Reduction::MinusOverP);
        assert_eq!(kchi_reduce(81, 0, 3, 4), Reduction::Full);
        assert_eq!(kchi_reduce(6, 12, 3, 4), Reduction::Reduce { eta: 1, m: 8, t_reduced: 3 });
    }

    #[test]
    fn reduction_sweep_mod_three_to_the_five() {
        let g = group(3, 6);
        let chi = g.primitive_characters()[5];
        let t = 5;
        for j in 0..243i64 {
            for h in (0..243i64).step_by(if j % 3 == 0 { 1 } else { 7 }) {
                let direct = kchi_direct(&g, &chi, j, h, t).unwrap();
                let reduced = kchi_via_reduction(&g, &chi, j, h, t).unwrap();
                assert!(close(direct, reduced, 1e-9), "j={j} h={h}");
            }
        }
    }

    #[test]
    fn direct_sweep_matches_pointwise() {
        let g = group(5, 4);
        let sweep = DirectSweep::new(&g, 3).unwrap();
        for chi in g.primitive_characters().into_iter().step_by(41) {
            let all = sweep.values(&chi);
            for m in 0..125u64 {
                let direct = kchi_m_direct(&g, &chi, m as i64, 3).unwrap();
                assert!(close(all[m as usize], direct, 1e-10));
            }
        }
    }

    #[test]
    fn split_table_matches_closed() {
        let g = group(7, 4);
        let table = SplitTable::new(7, 4, 3).unwrap();
        for chi in g.primitive_characters().into_iter().step_by(29) {
            let a = g.postnikov_candidate(&chi).unwrap();
            for m in (1..343i64).filter(|m| m % 7 != 0) {
                let closed = kchi_closed(&g, &chi, m, 3).unwrap();
                assert!(close(table.signed(a, m as u64, 1), closed.kplus, 1e-13));
                assert!(close(table.signed(a, m as u64, -1), closed.kminus, 1e-13));
            }
        }
    }

    #[test]
    fn product_properties_small() {
        let q = PrimePowerModulus::new(3, 5).unwrap();
        let table = SplitTable::new(3, 5, 3).unwrap();
        let a = 1;
        for a_prime in [1u64, 2, 4, 10, 28, 55] {
            let big_q = product_modulus(&q, 3, a, a_prime);
            for sign in [1i8, -1] {
                if big_q >= 3 {
                    let period = periodicity_check(&table, a, a_prime, sign, 1e-9);
                    assert_eq!(big_q % period, 0);
                }
                if big_q == 1 {
                    for m in (1..27u64).filter(|m| m % 3 != 0) {
                        let expected = if legendre((a * m) as i128, 3) == 1 { 1.0 } else { 0.0 };
                        assert!(close(product_term(&table, a, a_prime, m, sign), Complex64::new(expected, 0.0), 1e-12));
                    }
                }
                if big_q >= 9 {
                    for v in (0..big_q as i64).step_by(3) {
                        let params = ProductSumParams { modulus: q, t: 3, a, a_prime, v, sign };
                        assert!(product_sum(&table, &params).norm() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn all_twists_match_single_sums() {
        let q = PrimePowerModulus::new(5, 4).unwrap();
        let table = SplitTable::new(5, 4, 3).unwrap();
        for (a, a_prime) in [(1u64, 1u64), (1, 2), (3, 28), (7, 57), (2, 102)] {
            for sign in [1i8, -1] {
                let all = product_sums_all(&table, &q, a, a_prime, sign);
                assert_eq!(all.len() as u64, product_modulus(&q, 3, a, a_prime));
                for (v, got) in all.iter().enumerate() {
                    let params = ProductSumParams { modulus: q, t: 3, a, a_prime, v: v as i64, sign };
                    assert!(close(*got, product_sum(&table, &params), 1e-10));
                }
            }
        }
    }

    #[test]
    fn completion_examples() {
        let ones = vec![Complex64::new(1.0, 0.0); 81];
        let c = complete_incomplete_sum(&ones, 30).unwrap();
        assert!((c.partial - 30.0).norm() < 1e-9);
        assert!(c.bound >= 30.0 - 1e-9);
        let single: Vec<Complex64> = (0..81).map(|m| e_frac(m, 81)).collect();
        let c = complete_incomplete_sum(&single, 50).unwrap();
        assert!(c.partial.norm() <= 81.0 + 1e-9);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let random: Vec<Complex64> = (0..81).map(|_| crate::roots::e_real(rng.gen())).collect();
        complete_incomplete_sum(&random, 30).unwrap();
    }

    #[test]
    fn csv_rows() {
        let rows = vec![SweepRow {
            p: 3,
            n: 5,
            qtilde: 27,
            m_or_v: 4,
            case: "generic".into(),
            abs_value: 1.5,
            ratio: 0.25,
        }];
        let mut out = Vec::new();
        write_rows_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("p,n,qtilde,m_or_v,case,abs_value,ratio\n3,5,27,4,generic,1.5,0.25"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_form_and_support_on_random_inputs(
            (p, n) in prop::sample::select(vec![(3u64, 4u32), (3, 5), (5, 3), (5, 4), (7, 3)]),
            pick in any::<prop::sample::Index>(),
            m in -400i64..400,
            level in 0u32..8,
        ) {
            let g = group(p, n);
            let primitive = g.primitive_characters();
            let chi = primitive[pick.index(primitive.len())];
            let t = 2 + level % (n - 2);
            prop_assume!(m.rem_euclid(p as i64) != 0);
            let direct = kchi_m_direct(&g, &chi, m, t).unwrap();
            let closed = kchi_closed(&g, &chi, m, t).unwrap().total();
            prop_assert!(close(direct, closed, 1e-9));
            let a = g.postnikov_candidate(&chi).unwrap();
            if legendre(a as i128 * m as i128, p) == -1 {
                prop_assert_eq!(closed, Complex64::new(0.0, 0.0));
            }
        }

        #[test]
        fn reduction_reproduces_direct_sum(
            (p, n) in prop::sample::select(vec![(3u64, 4u32), (3, 5), (5, 3), (5, 4)]),
            pick in any::<prop::sample::Index>(),
            j in -300i64..300,
            h in -300i64..300,
            level in 0u32..8,
        ) {
            let g = group(p, n);
            let primitive = g.primitive_characters();
            let chi = primitive[pick.index(primitive.len())];
            let t = 2 + level % (n - 2);
            let direct = kchi_direct(&g, &chi, j, h, t).unwrap();
            let reduced = kchi_via_reduction(&g, &chi, j, h, t).unwrap();
            prop_assert!(close(direct, reduced, 1e-9), "j={j} h={h} t={t}: {direct} vs {reduced}");
        }
    }
}
