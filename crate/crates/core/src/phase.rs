//! Complete exponential sums `Σ_{x mod p^n} e(f(x)/p^n)`: brute force, and
//! closed-form evaluation by p-adic stationary phase.
//!
//! A phase is a black box: evaluators for `f`, `f′`, `f″` modulo `p^w` plus
//! the hypotheses it declares (integral Taylor coefficients, radius class,
//! domain). The closed form reduces the sum to the stationary set
//! `X = {x₀ : f′(x₀) ≡ 0 mod p^⌊n/2⌋}` taken modulo `p^⌊n/2⌋`, weighted by
//! the local factors `Δ_f`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::padic::{
    inv_mod, legendre, mul_mod, plog, PadicResidue, PrimePowerModulus, Valuation,
};
use crate::roots::{ordered_sum, RootTable};

/// Evaluates a function at the integer `x`, returning its value modulo `p^w`.
pub type Evaluator = Arc<dyn Fn(u64, u32) -> PadicResidue + Send + Sync>;

/// Residue classes the sum runs over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Every residue modulo `p^n`.
    All,
    /// The units `(Z/p^nZ)^×`.
    Units,
    /// A union of classes modulo `p^λ`.
    Classes { lambda: u32, classes: Vec<u64> },
}

impl Domain {
    pub fn lambda(&self) -> u32 {
        match self {
            Domain::All => 0,
            Domain::Units => 1,
            Domain::Classes { lambda, .. } => *lambda,
        }
    }

    pub fn contains(&self, x: u64, p: u64) -> bool {
        match self {
            Domain::All => true,
            Domain::Units => x % p != 0,
            Domain::Classes { lambda, classes } => {
                let m = p.pow(*lambda);
                classes.contains(&(x % m))
            }
        }
    }

    /// Quadratic residues (`sign = 1`) or non-residues (`sign = −1`) among units.
    pub fn legendre_class(p: u64, sign: i8) -> Self {
        let classes = (1..p).filter(|&u| legendre(u as i128, p) == sign).collect();
        Domain::Classes { lambda: 1, classes }
    }
}

/// A p-adically analytic phase given through its evaluators.
#[derive(Clone)]
pub struct AnalyticPhase {
    name: String,
    p: u64,
    f: Evaluator,
    d1: Evaluator,
    d2: Evaluator,
    domain: Domain,
    radius_class: u32,
    taylor_declared: bool,
}

impl fmt::Debug for AnalyticPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticPhase")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("domain", &self.domain)
            .field("radius_class", &self.radius_class)
            .field("taylor_declared", &self.taylor_declared)
            .finish()
    }
}

impl AnalyticPhase {
    /// A phase from raw evaluators. `taylor_declared` asserts that
    /// `f^{(k)}/k!` is integral on the domain for all `k`, which gives the
    /// divisibility hypotheses of both stationary-phase evaluations.
    pub fn new(
        name: impl Into<String>,
        p: u64,
        f: Evaluator,
        d1: Evaluator,
        d2: Evaluator,
        domain: Domain,
        radius_class: u32,
        taylor_declared: bool,
    ) -> Self {
        Self {
            name: name.into(),
            p,
            f,
            d1,
            d2,
            domain,
            radius_class,
            taylor_declared,
        }
    }

    /// `f(x) = a·x` on all residues.
    pub fn linear(p: u64, a: i64) -> Self {
        Self::polynomial(format!("linear({a})"), p, vec![0, a], Domain::All)
    }

    /// `f(x) = a·x² + b·x` on the units.
    pub fn quadratic(p: u64, a: i64, b: i64) -> Self {
        Self::polynomial(format!("quadratic({a},{b})"), p, vec![0, b, a], Domain::Units)
    }

    /// `f(x) = a·x³ + b·x` on the units.
    pub fn cubic(p: u64, a: i64, b: i64) -> Self {
        Self::polynomial(format!("cubic({a},{b})"), p, vec![0, b, 0, a], Domain::Units)
    }

    /// Integer polynomial with coefficients in increasing degree.
    pub fn polynomial(name: String, p: u64, coeffs: Vec<i64>, domain: Domain) -> Self {
        let coeffs = Arc::new(coeffs);
        let c0 = coeffs.clone();
        let c1 = coeffs.clone();
        let c2 = coeffs;
        Self::new(
            name,
            p,
            Arc::new(move |x, w| horner(&c0, 0, x, p, w)),
            Arc::new(move |x, w| horner(&c1, 1, x, p, w)),
            Arc::new(move |x, w| horner(&c2, 2, x, p, w)),
            domain,
            0,
            true,
        )
    }

    /// Kloosterman phase `f(x) = x + m·x̄` on the units.
    pub fn kloosterman(p: u64, m: i64) -> Self {
        let inv = move |x: u64, w: u32| {
            let r = PadicResidue::from_u64(x, p, w);
            r.inverse().expect("domain is the units")
        };
        Self::new(
            format!("kloosterman({m})"),
            p,
            Arc::new(move |x, w| {
                PadicResidue::from_u64(x, p, w) + PadicResidue::from_i128(m as i128, p, w) * inv(x, w)
            }),
            Arc::new(move |x, w| {
                let xi = inv(x, w);
                PadicResidue::one(p, w) - PadicResidue::from_i128(m as i128, p, w) * xi * xi
            }),
            Arc::new(move |x, w| {
                let xi = inv(x, w);
                PadicResidue::from_i128(2 * m as i128, p, w) * xi.pow(3)
            }),
            Domain::Units,
            1,
            true,
        )
    }

    /// `f(x) = A·p^{−e}·log_p(1 + p^e x) + m·x̄` on the units (`e ≥ 1`): the
    /// phase of `χ(1 + p^e x) e(m x̄/p^n)` for a character mod `p^{n+e}` with
    /// Postnikov unit `A`.
    pub fn postnikov_log(p: u64, a: i64, e: u32, m: i64) -> Self {
        assert!(e >= 1);
        let pe = p.pow(e);
        let inv = move |x: u64, w: u32| {
            PadicResidue::from_u64(x, p, w)
                .inverse()
                .expect("domain is the units")
        };
        let one_plus = move |x: u64, w: u32| PadicResidue::from_u64(1 + mul_mod(pe, x, p.pow(w)), p, w);
        Self::new(
            format!("postnikov_log(A={a},e={e},m={m})"),
            p,
            Arc::new(move |x, w| {
                let arg = PadicResidue::from_u64(1 + mul_mod(pe, x, p.pow(w + e)), p, w + e);
                let log = plog(&arg, w + e)
                    .and_then(|l| l.shift_down(e))
                    .expect("argument lies in 1 + pZ");
                PadicResidue::from_i128(a as i128, p, w) * log
                    + PadicResidue::from_i128(m as i128, p, w) * inv(x, w)
            }),
            Arc::new(move |x, w| {
                let xi = inv(x, w);
                let lin = one_plus(x, w).inverse().expect("1 + p^e x is a unit");
                PadicResidue::from_i128(a as i128, p, w) * lin
                    - PadicResidue::from_i128(m as i128, p, w) * xi * xi
            }),
            Arc::new(move |x, w| {
                let xi = inv(x, w);
                let lin = one_plus(x, w).inverse().expect("1 + p^e x is a unit");
                -(PadicResidue::from_i128(a as i128 * pe as i128, p, w) * lin * lin)
                    + PadicResidue::from_i128(2 * m as i128, p, w) * xi.pow(3)
            }),
            Domain::Units,
            1,
            true,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn radius_class(&self) -> u32 {
        self.radius_class
    }

    pub fn taylor_declared(&self) -> bool {
        self.taylor_declared
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn without_declared_hypotheses(mut self) -> Self {
        self.taylor_declared = false;
        self
    }

    pub fn eval(&self, x: u64, w: u32) -> PadicResidue {
        (self.f)(x, w)
    }

    pub fn d1(&self, x: u64, w: u32) -> PadicResidue {
        (self.d1)(x, w)
    }

    pub fn d2(&self, x: u64, w: u32) -> PadicResidue {
        (self.d2)(x, w)
    }
}

/// `Σ_i c_i · D^k(x^i)/k!`-style evaluation: the `k`-th derivative of the
/// polynomial at `x` (not divided by `k!`).
fn horner(coeffs: &[i64], k: usize, x: u64, p: u64, w: u32) -> PadicResidue {
    let m = p.pow(w);
    let mut acc = PadicResidue::zero(p, w);
    let xr = PadicResidue::from_u64(x % m, p, w);
    for (i, &c) in coeffs.iter().enumerate().skip(k).rev() {
        let falling: i128 = ((i - k + 1)..=i).map(|j| j as i128).product();
        acc = acc * xr + PadicResidue::from_i128(c as i128 * falling, p, w);
    }
    acc
}

/// Linear, quadratic, Kloosterman and Postnikov-log phases for one prime,
/// 51 in all, with coefficients divisible by `p` included.
pub fn bundled_suite(p: u64) -> Vec<AnalyticPhase> {
    let pi = p as i64;
    let mut out = Vec::new();
    for a in [1, 2, -1, 3, 5, pi, pi + 1, 2 * pi, pi * pi] {
        out.push(AnalyticPhase::linear(p, a));
    }
    for (a, b) in [
        (1, 0),
        (2, 1),
        (3, pi + 1),
        (pi, 1),
        (-1, 2),
        (5, -3),
        (1, pi),
        (2, pi * pi),
        (pi + 1, -1),
        (7, 4),
        (-2, pi + 3),
        (4, 1),
    ] {
        out.push(AnalyticPhase::quadratic(p, a, b));
    }
    for m in [1, 2, -1, -3, 4, 5, 7, 13, -6, pi + 2, pi, 2 * pi + 1, -pi - 1, pi * pi + 1] {
        out.push(AnalyticPhase::kloosterman(p, m));
    }
    for (a, e, m) in [
        (1, 1, 1),
        (2, 1, -1),
        (1, 2, 3),
        (-1, 1, pi),
        (3, 1, 2),
        (1, 1, -2),
        (5, 1, 1),
        (2, 2, -1),
        (1, 3, 1),
        (-2, 1, 5),
        (4, 1, pi + 1),
        (1, 2, -pi),
        (7, 1, 3),
        (1, 1, pi * pi),
        (-3, 2, 2),
        (2, 1, 4),
    ] {
        out.push(AnalyticPhase::postnikov_log(p, a, e, m));
    }
    out
}

/// `ε(p)`: 1 for `p ≡ 1 (mod 4)`, `i` for `p ≡ 3 (mod 4)`.
pub fn epsilon(p: u64) -> Complex64 {
    if p % 4 == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 1.0)
    }
}

/// `Σ_{t mod p} e(ct²/p) = ε(p)√p (c/p)` for `p ∤ c`.
pub fn gauss_quadratic(c: i128, p: u64) -> Complex64 {
    epsilon(p) * (p as f64).sqrt() * legendre(c, p) as f64
}

/// The quadratic Gauss sum by direct summation.
pub fn gauss_quadratic_direct(c: i128, p: u64) -> Complex64 {
    let table = RootTable::new(p);
    let c = c.rem_euclid(p as i128) as u64;
    (0..p).map(|t| table.e(mul_mod(c, t * t % p, p))).sum()
}

/// Brute-force `Σ_{x ∈ domain mod p^n} e(f(x)/p^n)`.
pub fn sum_direct(f: &AnalyticPhase, q: &PrimePowerModulus) -> Complex64 {
    let table = RootTable::new(q.q());
    let (p, n) = (q.p(), q.n());
    ordered_sum(q.q(), |x| {
        if f.domain.contains(x, p) {
            table.e(f.eval(x, n).value())
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// How representatives of odd-exponent nonsingular points are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representatives {
    /// Re-center each `x₀` so that `f′(x̃₀) ≡ 0 mod p^⌈n/2⌉`; then
    /// `Δ = ε(p)(2f″(x̃₀)/p)`.
    Refined,
    /// Keep the scanned representative and use the full `Δ` with the
    /// quadratic-exponential correction.
    AsScanned,
}

/// One stationary class `x₀ mod p^⌊n/2⌋` and its contribution.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPoint {
    /// Representative modulo `p^n` actually used.
    pub x0: u64,
    /// `f′(x₀)/p^⌊n/2⌋ mod p`.
    pub d1_reduced: u64,
    /// `p | f″(x₀)`.
    pub singular: bool,
    pub delta: Complex64,
    pub phase_value: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryData {
    pub modulus: PrimePowerModulus,
    pub points: Vec<StationaryPoint>,
    pub even: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryEvaluation {
    pub value: Complex64,
    pub data: StationaryData,
}

fn check_exact_hypotheses(f: &AnalyticPhase, q: &PrimePowerModulus) -> Result<u32> {
    if q.n() < 2 {
        return Err(Error::ExponentTooSmall { min: 2, got: q.n() });
    }
    if !f.taylor_declared {
        return Err(Error::HypothesesAbsent(f.name.clone()));
    }
    if f.p != q.p() {
        return Err(Error::PrimeMismatch(f.p, q.p()));
    }
    let half = q.n() / 2;
    if f.radius_class > half {
        return Err(Error::HypothesisViolated(format!(
            "radius class p^-{} is smaller than p^-{half}",
            f.radius_class
        )));
    }
    if f.domain.lambda() > half {
        return Err(Error::DomainIncompatible {
            lambda: f.domain.lambda(),
            ell: half,
        });
    }
    Ok(half)
}

/// Stationary classes `X̃` of `f` modulo `p^⌊n/2⌋`, with their local factors.
///
/// The scan runs over representatives `x₀ < p^⌊n/2⌋`: under the declared
/// hypotheses `f′(x₀) mod p^⌊n/2⌋` only depends on `x₀ mod p^⌊n/2⌋`.
pub fn stationary_data(
    f: &AnalyticPhase,
    q: &PrimePowerModulus,
    reps: Representatives,
) -> Result<StationaryData> {
    let half = check_exact_hypotheses(f, q)?;
    let (p, n) = (q.p(), q.n());
    let rt_star = q.rt_star();
    let mut points = Vec::new();
    for x0 in 0..rt_star {
        if !f.domain.contains(x0, p) || !f.d1(x0, half).is_zero() {
            continue;
        }
        points.push(local_factor(f, q, x0, reps)?);
    }
    let _ = n;
    Ok(StationaryData {
        modulus: *q,
        points,
        even: q.n() % 2 == 0,
    })
}

/// Local factor at the stationary class of `x0` (any representative).
pub fn local_factor(
    f: &AnalyticPhase,
    q: &PrimePowerModulus,
    x0: u64,
    reps: Representatives,
) -> Result<StationaryPoint> {
    let (p, n) = (q.p(), q.n());
    let half = n / 2;
    let rt_star = q.rt_star();
    let d1_reduced = f.d1(x0, half + 1).shift_down(half)?.value();
    let f2 = f.d2(x0, 1).value();
    let singular = f2 == 0;
    if n % 2 == 0 {
        return Ok(StationaryPoint {
            x0,
            d1_reduced,
            singular,
            delta: Complex64::new(1.0, 0.0),
            phase_value: f.eval(x0, n).value(),
        });
    }
    if singular {
        let delta = if d1_reduced == 0 {
            Complex64::new((p as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        return Ok(StationaryPoint {
            x0,
            d1_reduced,
            singular,
            delta,
            phase_value: f.eval(x0, n).value(),
        });
    }
    match reps {
        Representatives::Refined => {
            let mut refined = None;
            for t in 0..p {
                let x = (x0 + t * rt_star) % q.q();
                if f.d1(x, half + 1).is_zero() {
                    if refined.is_some() {
                        return Err(Error::HypothesisViolated(format!(
                            "{}: several refinements of {x0}",
                            f.name
                        )));
                    }
                    refined = Some(x);
                }
            }
            let x = refined.ok_or_else(|| {
                Error::HypothesisViolated(format!("{}: no refinement of {x0}", f.name))
            })?;
            let f2 = f.d2(x, 1).value();
            let delta = epsilon(p) * legendre(2 * f2 as i128, p) as f64;
            Ok(StationaryPoint {
                x0: x,
                d1_reduced: 0,
                singular,
                delta,
                phase_value: f.eval(x, n).value(),
            })
        }
        Representatives::AsScanned => {
            let two_f2 = 2 * f2 % p;
            let inv = inv_mod(two_f2, p).expect("nonsingular");
            let correction = (p - mul_mod(inv, d1_reduced * d1_reduced % p, p)) % p;
            let delta = epsilon(p)
                * legendre(two_f2 as i128, p) as f64
                * crate::roots::e_frac(correction as i128, p);
            Ok(StationaryPoint {
                x0,
                d1_reduced,
                singular,
                delta,
                phase_value: f.eval(x0, n).value(),
            })
        }
    }
}

/// `p^{n/2} Σ_{x₀ ∈ X̃} e(f(x₀)/p^n) Δ_f(x₀; p^n)` for the given data.
pub fn evaluate_stationary(data: &StationaryData) -> Complex64 {
    let q = data.modulus.q();
    let scale = (q as f64).sqrt();
    let sum: Complex64 = data
        .points
        .iter()
        .map(|pt| crate::roots::e_frac(pt.phase_value as i128, q) * pt.delta)
        .sum();
    sum * scale
}

/// Closed-form evaluation of the complete sum by exact stationary phase
/// (`n ≥ 2`, refined representatives).
pub fn sum_stationary(f: &AnalyticPhase, q: &PrimePowerModulus) -> Result<StationaryEvaluation> {
    let data = stationary_data(f, q, Representatives::Refined)?;
    Ok(StationaryEvaluation {
        value: evaluate_stationary(&data),
        data,
    })
}

/// The localized form: the sum restricted to `x₀` with
/// `f′(x₀) ≡ 0 mod p^{n−ℓ}`. Needs `n/2 ≤ ℓ ≤ n` and a domain that is
/// invariant under translation by `p^ℓ`.
pub fn sum_localized(f: &AnalyticPhase, q: &PrimePowerModulus, ell: u32) -> Result<Complex64> {
    if !f.taylor_declared {
        return Err(Error::HypothesesAbsent(f.name.clone()));
    }
    let n = q.n();
    if ell > n || 2 * ell < n {
        return Err(Error::HypothesisViolated(format!(
            "ℓ = {ell} outside [n/2, n] for n = {n}"
        )));
    }
    if f.radius_class > ell {
        return Err(Error::HypothesisViolated(format!(
            "radius class p^-{} is smaller than p^-{ell}",
            f.radius_class
        )));
    }
    if f.domain.lambda() > ell {
        return Err(Error::DomainIncompatible {
            lambda: f.domain.lambda(),
            ell,
        });
    }
    let table = RootTable::new(q.q());
    let p = q.p();
    let w = n - ell;
    Ok(ordered_sum(q.q(), |x| {
        if f.domain.contains(x, p) && f.d1(x, w).is_zero() {
            table.e(f.eval(x, n).value())
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// The full stationary set `X ⊂ Z/p^nZ` by exhaustive scan.
pub fn stationary_set_full(f: &AnalyticPhase, q: &PrimePowerModulus) -> Vec<u64> {
    let half = q.n() / 2;
    (0..q.q())
        .filter(|&x| f.domain.contains(x, q.p()) && f.d1(x, half).is_zero())
        .collect()
}

/// Checks `f(x₀ + t p^h) ≡ f(x₀) + f′(x₀) t p^h + f″(x₀) t² p^{2h}/2 (mod p^n)`
/// with `h = ⌊n/2⌋` on a sweep of `(x₀, t)`: every `x₀` when `p^n ≤ max_points`,
/// otherwise an evenly strided sample of about `max_points` of them, and
/// `t < min(p^⌈n/2⌉, 3p)`.
pub fn check_taylor_expansion(
    f: &AnalyticPhase,
    q: &PrimePowerModulus,
    max_points: u64,
) -> Result<()> {
    let (p, n, qq) = (q.p(), q.n(), q.q());
    let half = n / 2;
    let step = q.rt_star();
    let inv2 = PadicResidue::from_u64(inv_mod(2, qq).expect("p odd"), p, n);
    let stride = (qq / max_points.max(1)).max(1);
    let t_max = q.rt_ceil().min(3 * p);
    let mut x0 = 0;
    while x0 < qq {
        if f.domain.contains(x0, p) {
            let base = f.eval(x0, n);
            let d1 = f.d1(x0, n);
            let d2 = f.d2(x0, n);
            for t in 0..t_max {
                let h = PadicResidue::from_u64(mul_mod(t, step, qq), p, n);
                let expected = base + d1 * h + d2 * h * h * inv2;
                let actual = f.eval((x0 + mul_mod(t, step, qq)) % qq, n);
                if expected != actual {
                    return Err(Error::HypothesisViolated(format!(
                        "{}: expansion fails at x0 = {x0}, t = {t} (mod p^{n}, step p^{half})",
                        f.name
                    )));
                }
            }
        }
        x0 += stride;
    }
    Ok(())
}

/// `ord_p` of `f′(x)` modulo `p^n`, for diagnostics.
pub fn derivative_valuation(f: &AnalyticPhase, q: &PrimePowerModulus, x: u64) -> Valuation {
    f.d1(x, q.n()).ord()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn epsilon_values() {
        assert_eq!(epsilon(5), Complex64::new(1.0, 0.0));
        assert_eq!(epsilon(7), Complex64::new(0.0, 1.0));
        assert_eq!(epsilon(13), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gauss_sum_examples() {
        assert!(close(gauss_quadratic(1, 5), Complex64::new(5f64.sqrt(), 0.0), 1e-12));
        assert!(close(gauss_quadratic(1, 7), Complex64::new(0.0, 7f64.sqrt()), 1e-12));
        for p in [3u64, 5, 7, 11, 13] {
            assert!(close(gauss_quadratic(1, p), gauss_quadratic_direct(1, p), 1e-12));
        }
        for c in 1..11 {
            assert!(close(gauss_quadratic(c, 11), gauss_quadratic_direct(c, 11), 1e-12));
        }
    }

    #[test]
    fn direct_sum_examples() {
        let q = PrimePowerModulus::new(3, 4).unwrap();
        let zero = AnalyticPhase::polynomial("zero".into(), 3, vec![0], Domain::Units);
        assert!(close(sum_direct(&zero, &q), Complex64::new(54.0, 0.0), 1e-9));
        for p in [3u64, 5, 7] {
            for n in 2..=4 {
                let q = PrimePowerModulus::new(p, n).unwrap();
                let f = AnalyticPhase::linear(p, 1).with_domain(Domain::Units);
                assert!(sum_direct(&f, &q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn kloosterman_closed_form_matches_brute_force() {
        let q = PrimePowerModulus::new(3, 4).unwrap();
        let f = AnalyticPhase::kloosterman(3, 1);
        let direct = sum_direct(&f, &q);
        let closed = sum_stationary(&f, &q).unwrap().value;
        assert!(close(direct, closed, 1e-9), "{direct} vs {closed}");
    }

    #[test]
    fn hypotheses_are_enforced() {
        let q = PrimePowerModulus::new(5, 3).unwrap();
        let f = AnalyticPhase::kloosterman(5, 2).without_declared_hypotheses();
        assert!(matches!(sum_stationary(&f, &q), Err(Error::HypothesesAbsent(_))));
        let g = AnalyticPhase::kloosterman(5, 2).with_domain(Domain::Classes {
            lambda: 2,
            classes: vec![1, 6],
        });
        assert_eq!(
            sum_stationary(&g, &q).unwrap_err(),
            Error::DomainIncompatible { lambda: 2, ell: 1 }
        );
        let q1 = PrimePowerModulus::new(5, 1).unwrap();
        assert!(sum_stationary(&AnalyticPhase::kloosterman(5, 2), &q1).is_err());
    }

    #[test]
    fn singular_case_cubic_mod_three() {
        // f″ = 6ax vanishes mod 3 everywhere: the √p branch of Δ.
        for n in 2..=7 {
            let q = PrimePowerModulus::new(3, n).unwrap();
            for b in [-3, 1, 2, 6, 9] {
                let f = AnalyticPhase::cubic(3, 1, b);
                let closed = sum_stationary(&f, &q).unwrap();
                let direct = sum_direct(&f, &q);
                assert!(close(direct, closed.value, 1e-8), "n={n} b={b}");
            }
        }
    }

    #[test]
    fn representative_independence() {
        for (p, n) in [(5u64, 5u32), (7, 3), (3, 7), (11, 3)] {
            let q = PrimePowerModulus::new(p, n).unwrap();
            let f = AnalyticPhase::kloosterman(p, 3);
            let refined = sum_stationary(&f, &q).unwrap().value;
            let scanned = stationary_data(&f, &q, Representatives::AsScanned).unwrap();
            let mut shifted = scanned.clone();
            for (i, pt) in shifted.points.iter_mut().enumerate() {
                let x = (pt.x0 + (i as u64 + 1) * q.rt_star()) % q.q();
                *pt = local_factor(&f, &q, x, Representatives::AsScanned).unwrap();
            }
            let a = evaluate_stationary(&scanned);
            let b = evaluate_stationary(&shifted);
            assert!(close(refined, a, 1e-8));
            assert!(close(a, b, 1e-8));
        }
    }

    #[test]
    fn stationary_set_is_translation_invariant() {
        for (p, n) in [(3u64, 5u32), (5, 4), (7, 3)] {
            let q = PrimePowerModulus::new(p, n).unwrap();
            for f in [AnalyticPhase::kloosterman(p, 2), AnalyticPhase::postnikov_log(p, 1, 1, 1)] {
                let set = stationary_set_full(&f, &q);
                for &x in &set {
                    let y = (x + q.rt_star()) % q.q();
                    assert!(set.binary_search(&y).is_ok());
                }
                let data = stationary_data(&f, &q, Representatives::AsScanned).unwrap();
                assert_eq!(set.len() as u64, data.points.len() as u64 * q.rt_ceil());
            }
        }
    }

    #[test]
    fn localized_sum_agrees() {
        for (p, n) in [(3u64, 4u32), (5, 3), (7, 3)] {
            let q = PrimePowerModulus::new(p, n).unwrap();
            let f = AnalyticPhase::kloosterman(p, 1);
            let direct = sum_direct(&f, &q);
            for ell in n.div_ceil(2)..=n {
                assert!(close(sum_localized(&f, &q, ell).unwrap(), direct, 1e-8));
            }
            assert!(sum_localized(&f, &q, 0).is_err());
        }
    }

    #[test]
    fn vanishing_without_stationary_points() {
        // f′ = 1 − m x̄² ≡ 1 (mod p) when p | m.
        let q = PrimePowerModulus::new(5, 4).unwrap();
        let f = AnalyticPhase::kloosterman(5, 10);
        let closed = sum_stationary(&f, &q).unwrap();
        assert!(closed.data.points.is_empty());
        assert_eq!(closed.value, Complex64::new(0.0, 0.0));
        assert!(sum_direct(&f, &q).norm() < 1e-9);
    }

    #[test]
    fn taylor_expansion_holds_for_bundled_phases() {
        for (p, n) in [(3u64, 5u32), (5, 4), (7, 3)] {
            let q = PrimePowerModulus::new(p, n).unwrap();
            for f in [
                AnalyticPhase::linear(p, 2),
                AnalyticPhase::quadratic(p, 1, 3),
                AnalyticPhase::cubic(p, 2, 1),
                AnalyticPhase::kloosterman(p, 4),
                AnalyticPhase::postnikov_log(p, 2, 1, 3),
                AnalyticPhase::postnikov_log(p, 1, 2, 1),
            ] {
                check_taylor_expansion(&f, &q, 10_000).unwrap();
            }
        }
        // A phase with a non-integral Taylor coefficient (x^p/p would be one)
        // is emulated by lying about the second derivative.
        let q = PrimePowerModulus::new(5, 5).unwrap();
        let good = AnalyticPhase::quadratic(5, 1, 0);
        let bad = AnalyticPhase::new(
            "bad",
            5,
            Arc::new(move |x, w| good.eval(x, w)),
            Arc::new(move |x, w| PadicResidue::from_u64(2 * x, 5, w)),
            Arc::new(move |_, w| PadicResidue::from_u64(3, 5, w)),
            Domain::Units,
            1,
            true,
        );
        assert!(check_taylor_expansion(&bad, &q, 10_000).is_err());
    }

    #[test]
    fn trivial_bound() {
        for (p, n) in [(3u64, 5u32), (5, 3)] {
            let q = PrimePowerModulus::new(p, n).unwrap();
            let f = AnalyticPhase::kloosterman(p, 1);
            assert!(sum_direct(&f, &q).norm() <= q.phi() as f64 + 1e-9);
        }
    }

    fn small_modulus() -> impl Strategy<Value = (u64, u32)> {
        (prop::sample::select(vec![3u64, 5, 7]), 2u32..=5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_form_matches_direct_sum(
            (p, n) in small_modulus(),
            family in 0usize..3,
            a in -40i64..40,
            b in -40i64..40,
        ) {
            let q = PrimePowerModulus::new(p, n).unwrap();
            let f = match family {
                0 => AnalyticPhase::linear(p, a),
                1 if a.rem_euclid(p as i64) != 0 => AnalyticPhase::quadratic(p, a, b),
                1 => AnalyticPhase::quadratic(p, 1, b),
                _ => AnalyticPhase::kloosterman(p, a),
            };
            let direct = sum_direct(&f, &q);
            let closed = sum_stationary(&f, &q).unwrap().value;
            prop_assert!(close(direct, closed, 1e-8 * (q.q() as f64).sqrt()), "{}: {direct} vs {closed}", f.name());
            prop_assert!(direct.norm() <= q.q() as f64 + 1e-9);
        }
    }
}
