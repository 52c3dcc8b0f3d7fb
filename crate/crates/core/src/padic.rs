//! Exact arithmetic in `Z/p^wZ` with tracked precision.
//!
//! Every residue carries its working precision `w`; ring operations reduce
//! modulo `p^w` and division by a non-unit drops the precision by the
//! valuation of the divisor. On top of this sit the p-adic logarithm on
//! `1 + pZ_p`, square-root branches and Newton/Hensel lifting.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = ((a % m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduces a signed integer into `[0, m)`.
pub fn reduce_signed(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

pub fn checked_pow(p: u64, n: u32) -> Option<u64> {
    p.checked_pow(n)
}

pub fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Distinct prime factors of `n` in increasing order.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// p-adic valuation; `Infinite` is the valuation of zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(k) => Some(k),
            Valuation::Infinite => None,
        }
    }

    /// The valuation capped at `cap`, with `Infinite` mapped to `cap`.
    pub fn capped(self, cap: u32) -> u32 {
        match self {
            Valuation::Finite(k) => k.min(cap),
            Valuation::Infinite => cap,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(k) => write!(f, "{k}"),
            Valuation::Infinite => write!(f, "+inf"),
        }
    }
}

/// Valuation of an ordinary integer.
pub fn ord_int(mut x: u64, p: u64) -> Valuation {
    if x == 0 {
        return Valuation::Infinite;
    }
    let mut k = 0;
    while x % p == 0 {
        x /= p;
        k += 1;
    }
    Valuation::Finite(k)
}

/// `q = p^n` for an odd prime `p`, with the half powers `p^⌊n/2⌋` and `p^⌈n/2⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimePowerModulus {
    p: u64,
    n: u32,
    q: u64,
    rt_star: u64,
    rt_ceil: u64,
}

impl PrimePowerModulus {
    pub fn new(p: u64, n: u32) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::NotOddPrime(p));
        }
        if n == 0 {
            return Err(Error::ExponentTooSmall { min: 1, got: 0 });
        }
        let q = checked_pow(p, n).ok_or(Error::ModulusOverflow { p, n })?;
        Ok(Self {
            p,
            n,
            q,
            rt_star: p.pow(n / 2),
            rt_ceil: p.pow(n.div_ceil(2)),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// `p^⌊n/2⌋`.
    pub fn rt_star(&self) -> u64 {
        self.rt_star
    }

    /// `p^⌈n/2⌉`.
    pub fn rt_ceil(&self) -> u64 {
        self.rt_ceil
    }

    /// Euler's totient of `q`.
    pub fn phi(&self) -> u64 {
        self.q / self.p * (self.p - 1)
    }

    /// `p^t` for `t ≤ n`, as a modulus of its own.
    pub fn power(&self, t: u32) -> Result<Self> {
        Self::new(self.p, t)
    }

    pub fn is_unit(&self, x: u64) -> bool {
        x % self.p != 0
    }

    pub fn residue(&self, x: u64) -> PadicResidue {
        PadicResidue::from_u64(x, self.p, self.n)
    }
}

impl fmt::Display for PrimePowerModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.p, self.n)
    }
}

/// An element of `Z/p^wZ`; `w` is the number of known p-adic digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicResidue {
    value: u64,
    prec: u32,
    p: u64,
    modulus: u64,
}

impl PadicResidue {
    /// Panics if `p^prec` overflows `u64`; callers validate moduli up front.
    pub fn from_u64(value: u64, p: u64, prec: u32) -> Self {
        let modulus = p.checked_pow(prec).expect("p^prec overflows u64");
        Self {
            value: value % modulus,
            prec,
            p,
            modulus,
        }
    }

    pub fn from_i128(value: i128, p: u64, prec: u32) -> Self {
        let modulus = p.checked_pow(prec).expect("p^prec overflows u64");
        Self {
            value: reduce_signed(value, modulus),
            prec,
            p,
            modulus,
        }
    }

    pub fn zero(p: u64, prec: u32) -> Self {
        Self::from_u64(0, p, prec)
    }

    pub fn one(p: u64, prec: u32) -> Self {
        Self::from_u64(1, p, prec)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// `p^prec`.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn ord(&self) -> Valuation {
        ord_int(self.value, self.p)
    }

    pub fn is_unit(&self) -> bool {
        self.prec == 0 || self.value % self.p != 0
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// Forgets digits: the residue modulo `p^prec` for `prec ≤ self.prec`.
    pub fn reduce(&self, prec: u32) -> Result<Self> {
        if prec > self.prec {
            return Err(Error::InsufficientPrecision {
                requested: prec,
                available: self.prec,
            });
        }
        Ok(Self::from_u64(self.value, self.p, prec))
    }

    /// Reinterprets the canonical representative at a higher precision.
    /// The extra digits are zero, not known.
    pub fn lift(&self, prec: u32) -> Self {
        Self::from_u64(self.value, self.p, prec)
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let mut base = *self;
        let mut acc = Self::one(self.p, self.prec);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = inv_mod(self.value, self.modulus).ok_or(Error::NotUnit(self.value))?;
        Ok(Self { value: inv, ..*self })
    }

    /// `self / divisor`. Dividing by `p^v · unit` needs `ord(self) ≥ v` and
    /// leaves `prec − v` known digits.
    pub fn checked_div(&self, divisor: &Self) -> Result<Self> {
        check_prime(self.p, divisor.p)?;
        let prec = self.prec.min(divisor.prec);
        let v = match divisor.reduce(prec)?.ord() {
            Valuation::Finite(v) => v,
            Valuation::Infinite => {
                return Err(Error::InexactDivision {
                    dividend: self.ord().capped(prec),
                    divisor: prec,
                })
            }
        };
        let dividend = self.reduce(prec)?;
        let dv = dividend.ord().capped(prec);
        if dv < v {
            return Err(Error::InexactDivision {
                dividend: dv,
                divisor: v,
            });
        }
        let pv = self.p.pow(v);
        let out_prec = prec - v;
        let num = Self::from_u64(dividend.value / pv, self.p, out_prec);
        let den = Self::from_u64(divisor.value / pv, self.p, out_prec);
        Ok(num * den.inverse()?)
    }

    /// `value / p^k` as an exact integer division, losing `k` digits.
    pub fn shift_down(&self, k: u32) -> Result<Self> {
        if self.ord().capped(self.prec) < k {
            return Err(Error::InexactDivision {
                dividend: self.ord().capped(self.prec),
                divisor: k,
            });
        }
        Ok(Self::from_u64(
            self.value / self.p.pow(k),
            self.p,
            self.prec - k,
        ))
    }

    pub fn is_one_mod_p(&self) -> bool {
        self.value % self.p == 1 % self.p
    }
}

fn check_prime(a: u64, b: u64) -> Result<()> {
    if a != b {
        return Err(Error::PrimeMismatch(a, b));
    }
    Ok(())
}

fn combine(a: &PadicResidue, b: &PadicResidue) -> (u64, u64, u64, u32, u64) {
    assert_eq!(a.p, b.p, "mixing residues for different primes");
    let prec = a.prec.min(b.prec);
    let m = a.p.pow(prec);
    (a.value % m, b.value % m, m, prec, a.p)
}

impl Add for PadicResidue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (x, y, m, prec, p) = combine(&self, &rhs);
        let s = ((x as u128 + y as u128) % m as u128) as u64;
        Self {
            value: s,
            prec,
            p,
            modulus: m,
        }
    }
}

impl Sub for PadicResidue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let (x, y, m, prec, p) = combine(&self, &rhs);
        let s = ((x as u128 + m as u128 - y as u128) % m as u128) as u64;
        Self {
            value: s,
            prec,
            p,
            modulus: m,
        }
    }
}

impl Mul for PadicResidue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (x, y, m, prec, p) = combine(&self, &rhs);
        Self {
            value: mul_mod(x, y, m),
            prec,
            p,
            modulus: m,
        }
    }
}

impl Neg for PadicResidue {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: (self.modulus - self.value) % self.modulus,
            ..self
        }
    }
}

impl fmt::Display for PadicResidue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {}^{})", self.value, self.p, self.prec)
    }
}

/// Valuation of a residue; `Infinite` for zero.
pub fn ordp(x: &PadicResidue) -> Valuation {
    x.ord()
}

/// Number of series terms `K` such that every term with index `k ≥ K` of the
/// logarithm series vanishes modulo `p^w`: the least `K` with
/// `K − ⌊log_p K⌋ ≥ w`.
pub fn log_series_terms(p: u64, w: u32) -> u64 {
    let mut k = 1u64;
    loop {
        let floor_log = (ilog(k, p)) as u64;
        if k - floor_log >= w as u64 {
            return k;
        }
        k += 1;
    }
}

fn ilog(k: u64, p: u64) -> u32 {
    let mut e = 0;
    let mut acc = p;
    while acc <= k {
        e += 1;
        acc = match acc.checked_mul(p) {
            Some(v) => v,
            None => break,
        };
    }
    e
}

/// The p-adic logarithm `log_p(x)` of `x ∈ 1 + pZ_p`, exact modulo `p^w`.
///
/// With `x = 1 + pz` the k-th term is `(−1)^{k−1} p^{k−v} z^k / k'` where
/// `k = p^v k'`, so the division by `k` never needs more digits than `x`
/// carries and the result is exact at precision `w`.
pub fn plog(x: &PadicResidue, w: u32) -> Result<PadicResidue> {
    if !x.is_one_mod_p() {
        return Err(Error::NotOneModP(x.value));
    }
    if x.prec < w {
        return Err(Error::InsufficientPrecision {
            requested: w,
            available: x.prec,
        });
    }
    let p = x.p;
    if w == 0 {
        return Ok(PadicResidue::zero(p, 0));
    }
    let m = p.pow(w);
    let z = ((x.value % m) + m - 1) % m / p;
    let terms = log_series_terms(p, w);
    let mut acc = 0u64;
    let mut zk = 1u64;
    for k in 1..terms {
        zk = mul_mod(zk, z, m);
        let v = ord_int(k, p).capped(u32::MAX);
        let e = k - v as u64;
        if e >= w as u64 {
            continue;
        }
        let k_unit = k / p.pow(v);
        let inv = inv_mod(k_unit, m).expect("unit part of k is invertible");
        let term = mul_mod(mul_mod(p.pow(e as u32), zk, m), inv, m);
        acc = if k % 2 == 1 {
            (acc + term) % m
        } else {
            (acc + m - term) % m
        };
    }
    Ok(PadicResidue::from_u64(acc, p, w))
}

/// A choice of square root modulo `p` for every nonzero quadratic residue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqrtBranch {
    p: u64,
    roots: Vec<u64>,
}

impl SqrtBranch {
    /// The branch whose root of each residue lies in `[1, (p−1)/2]`.
    pub fn canonical(p: u64) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::NotOddPrime(p));
        }
        let mut roots = vec![0; p as usize];
        for u in 1..=(p - 1) / 2 {
            roots[(u * u % p) as usize] = u;
        }
        Ok(Self { p, roots })
    }

    /// Same as `self` except that the root of `residue` is negated.
    pub fn flipped(&self, residue: u64) -> Result<Self> {
        let r = residue % self.p;
        let root = self.roots[r as usize];
        if root == 0 {
            return Err(Error::NonResidue(residue, self.p));
        }
        let mut roots = self.roots.clone();
        roots[r as usize] = self.p - root;
        Ok(Self { p: self.p, roots })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Designated root of `u mod p`, or `None` for zero and non-residues.
    pub fn root(&self, u: u64) -> Option<u64> {
        match self.roots[(u % self.p) as usize] {
            0 => None,
            r => Some(r),
        }
    }
}

/// Legendre symbol `(a/p)` by Euler's criterion.
pub fn legendre(a: i128, p: u64) -> i8 {
    let a = reduce_signed(a, p);
    if a == 0 {
        return 0;
    }
    if pow_mod(a, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// The square root of the unit residue `x` on `branch`, modulo `p^w`.
pub fn psqrt(x: &PadicResidue, branch: &SqrtBranch, w: u32) -> Result<PadicResidue> {
    check_prime(x.p, branch.p)?;
    if x.prec < w {
        return Err(Error::InsufficientPrecision {
            requested: w,
            available: x.prec,
        });
    }
    if !x.is_unit() {
        return Err(Error::NotUnit(x.value));
    }
    let root = branch
        .root(x.value)
        .ok_or(Error::NonResidue(x.value, x.p))?;
    let target = x.reduce(w)?;
    let start = PadicResidue::from_u64(root, x.p, 1);
    hensel_lift(
        |u| *u * *u - target.reduce(u.prec()).expect("target carries w digits"),
        |u| *u + *u,
        &start,
        w,
    )
}

/// Lifts a simple root of `f` modulo `p^k` to the unique root modulo `p^w`
/// congruent to it, by Newton iteration.
pub fn hensel_lift<F, D>(f: F, df: D, root: &PadicResidue, w: u32) -> Result<PadicResidue>
where
    F: Fn(&PadicResidue) -> PadicResidue,
    D: Fn(&PadicResidue) -> PadicResidue,
{
    let k = root.prec;
    let p = root.p;
    if k == 0 {
        return Err(Error::NotARoot(0));
    }
    if !f(root).is_zero() {
        return Err(Error::NotARoot(k));
    }
    if !df(root).is_unit() {
        return Err(Error::SingularLift);
    }
    if w <= k {
        return root.reduce(w);
    }
    let mut r = root.lift(w);
    for _ in 0..64 {
        let fr = f(&r);
        if fr.is_zero() {
            return Ok(r);
        }
        let step = fr * df(&r).inverse()?;
        r = r - step;
    }
    let _ = p;
    Err(Error::NoConvergence)
}

/// `(1 + xp)^{1/2}` from the binomial series; this is the branch taking
/// values in `1 + pZ_p`.
pub fn sqrt_one_plus_p_series(x: u64, p: u64, w: u32) -> PadicResidue {
    let m = p.pow(w);
    let inv2 = inv_mod(2, m).expect("p is odd");
    let xp = mul_mod(x % m, p % m, m);
    let mut acc = 1 % m;
    let mut power = 1 % m;
    let mut catalan: u128 = 1; // Catalan(k−1)
    for k in 1..=w as u64 + 1 {
        power = mul_mod(power, xp, m);
        if k > 1 {
            // Catalan(k−1) = Catalan(k−2)·2(2k−3)/k
            catalan = catalan * 2 * (2 * k as u128 - 3) / k as u128;
        }
        // binom(1/2, k) = (−1)^{k−1} · 2 · Catalan(k−1) / 4^k
        let c = (catalan % m as u128) as u64;
        let mut coeff = mul_mod(2 % m, c, m);
        coeff = mul_mod(coeff, pow_mod(inv2, 2 * k, m), m);
        let term = mul_mod(coeff, power, m);
        acc = if k % 2 == 1 {
            (acc + term) % m
        } else {
            (acc + m - term) % m
        };
    }
    PadicResidue::from_u64(acc, p, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: u64, p: u64, w: u32) -> PadicResidue {
        PadicResidue::from_u64(v, p, w)
    }

    #[test]
    fn ordp_examples() {
        assert_eq!(ordp(&r(0, 3, 5)), Valuation::Infinite);
        assert_eq!(ordp(&r(45, 3, 5)), Valuation::Finite(2));
        for p in [3, 5, 7] {
            for n in 2..=8 {
                assert_eq!(ordp(&r(1 + p, p, n)), Valuation::Finite(0));
            }
        }
        assert!(Valuation::Finite(100) < Valuation::Infinite);
    }

    #[test]
    fn modulus_half_powers() {
        for p in [3, 5, 7, 11] {
            for n in 1..=9 {
                let m = PrimePowerModulus::new(p, n).unwrap();
                assert_eq!(m.rt_star() * m.rt_ceil(), m.q());
            }
        }
        assert_eq!(PrimePowerModulus::new(2, 3), Err(Error::NotOddPrime(2)));
        assert_eq!(PrimePowerModulus::new(9, 3), Err(Error::NotOddPrime(9)));
        assert!(matches!(
            PrimePowerModulus::new(3, 0),
            Err(Error::ExponentTooSmall { .. })
        ));
    }

    #[test]
    fn division_tracks_precision() {
        let a = r(45, 3, 6);
        let b = r(9, 3, 6);
        let c = a.checked_div(&b).unwrap();
        assert_eq!(c.prec(), 4);
        assert_eq!(c.value(), 5);
        assert!(matches!(
            r(3, 3, 6).checked_div(&b),
            Err(Error::InexactDivision { .. })
        ));
        assert!(r(4, 3, 6).inverse().is_ok());
        assert!(r(6, 3, 6).inverse().is_err());
    }

    #[test]
    fn plog_examples() {
        assert_eq!(plog(&r(1, 3, 6), 6).unwrap().value(), 0);
        let l4 = plog(&r(4, 3, 6), 6).unwrap();
        let l16 = plog(&r(16, 3, 6), 6).unwrap();
        assert_eq!(l16, l4 + l4);
        // Exact rational series summation, reduced mod 3^6 and 5^4.
        assert_eq!(l4.value(), 534);
        assert_eq!(plog(&r(6, 5, 4), 4).unwrap().value(), 555);
        assert_eq!(plog(&r(2, 3, 4), 4), Err(Error::NotOneModP(2)));
    }

    #[test]
    fn plog_is_a_homomorphism() {
        for p in [3u64, 5, 7] {
            let w = 4;
            let m = p.pow(w);
            let logs: Vec<_> = (0..m / p)
                .map(|k| plog(&r(1 + k * p, p, w), w).unwrap())
                .collect();
            for (i, li) in logs.iter().enumerate() {
                for (j, lj) in logs.iter().enumerate() {
                    let x = 1 + i as u64 * p;
                    let y = 1 + j as u64 * p;
                    let xy = mul_mod(x, y, m);
                    assert_eq!(logs[((xy - 1) / p) as usize], *li + *lj);
                }
            }
        }
    }

    #[test]
    fn plog_and_psqrt_are_precision_sound() {
        let branch = SqrtBranch::canonical(5).unwrap();
        for w in 2..=6u32 {
            let m = 5u64.pow(w);
            for x in (1..m).step_by(7) {
                if x % 5 == 1 {
                    let hi = plog(&r(x, 5, w + 2), w + 2).unwrap();
                    assert_eq!(hi.reduce(w).unwrap(), plog(&r(x, 5, w), w).unwrap());
                }
                if legendre(x as i128, 5) == 1 {
                    let hi = psqrt(&r(x, 5, w + 2), &branch, w + 2).unwrap();
                    assert_eq!(hi.reduce(w).unwrap(), psqrt(&r(x, 5, w), &branch, w).unwrap());
                }
            }
        }
    }

    #[test]
    fn canonical_branch_roots() {
        for p in [3u64, 5, 7, 11, 13] {
            let b = SqrtBranch::canonical(p).unwrap();
            let mut designated = 0;
            for u in 1..p {
                match b.root(u) {
                    Some(root) => {
                        designated += 1;
                        assert_eq!(root * root % p, u);
                        assert!(root <= (p - 1) / 2);
                    }
                    None => assert_eq!(legendre(u as i128, p), -1),
                }
            }
            assert_eq!(designated, (p - 1) / 2);
        }
    }

    #[test]
    fn psqrt_examples() {
        let b7 = SqrtBranch::canonical(7).unwrap();
        assert_eq!(b7.root(2), Some(3));
        assert_eq!(psqrt(&r(2, 7, 3), &b7, 3).unwrap().value(), 108);
        for w in 1..=6 {
            assert_eq!(psqrt(&r(1, 7, w), &b7, w).unwrap().value(), 1);
        }
        assert_eq!(psqrt(&r(3, 7, 3), &b7, 3), Err(Error::NonResidue(3, 7)));
        assert_eq!(psqrt(&r(14, 7, 3), &b7, 3), Err(Error::NotUnit(14)));

        let b3 = SqrtBranch::canonical(3).unwrap();
        let m = 3u64.pow(6);
        for x in 1..m {
            if x % 3 == 1 {
                let s = psqrt(&r(x, 3, 6), &b3, 6).unwrap();
                assert_eq!(s * s, r(x, 3, 6));
                assert_eq!(s.value() % 3, 1);
            }
        }
    }

    #[test]
    fn hensel_examples() {
        let lifted = hensel_lift(
            |u| *u * *u - r(2, 7, u.prec()),
            |u| *u + *u,
            &r(3, 7, 1),
            3,
        )
        .unwrap();
        assert_eq!(lifted.value(), 108);

        for w in 1..=8 {
            let a = 1234 % 5u64.pow(w);
            let lifted = hensel_lift(
                |u| *u - r(1234, 5, u.prec()),
                |u| PadicResidue::one(5, u.prec()),
                &r(1234, 5, 1),
                w,
            )
            .unwrap();
            assert_eq!(lifted.value(), a);
        }

        // u^2 − 9 at the double root 0 mod 3: derivative 2u ≡ 0.
        let singular = hensel_lift(|u| *u * *u - r(9, 3, u.prec()), |u| *u + *u, &r(0, 3, 1), 4);
        assert_eq!(singular, Err(Error::SingularLift));
        let not_root = hensel_lift(|u| *u * *u - r(2, 7, u.prec()), |u| *u + *u, &r(2, 7, 1), 3);
        assert_eq!(not_root, Err(Error::NotARoot(1)));
    }

    #[test]
    fn ord_of_root_difference() {
        for (p, wmax) in [(3u64, 5u32), (5, 5), (7, 4)] {
            let branch = SqrtBranch::canonical(p).unwrap();
            for w in 2..=wmax {
                let m = p.pow(w);
                let squares: Vec<(u64, PadicResidue)> = (1..m)
                    .filter(|&u| legendre(u as i128, p) == 1)
                    .map(|u| (u, psqrt(&r(u, p, w), &branch, w).unwrap()))
                    .collect();
                for (i, (u, su)) in squares.iter().enumerate() {
                    for (v, sv) in &squares[i + 1..] {
                        let lhs = (*su - *sv).ord();
                        let rhs = ord_int(u.abs_diff(*v), p);
                        assert_eq!(lhs, rhs, "p={p} w={w} u={u} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn sqrt_is_automorphism_of_one_plus_p() {
        for p in [3u64, 5, 7] {
            let branch = SqrtBranch::canonical(p).unwrap();
            for w in 1..=5 {
                let m = p.pow(w);
                let mut seen = vec![false; (m / p) as usize];
                for k in 0..m / p {
                    let x = 1 + k * p;
                    let s = psqrt(&r(x, p, w), &branch, w).unwrap();
                    assert!(s.is_one_mod_p());
                    assert_eq!(s, sqrt_one_plus_p_series(k, p, w));
                    let slot = &mut seen[((s.value() - 1) / p) as usize];
                    assert!(!*slot);
                    *slot = true;
                }
            }
        }
    }

    #[test]
    fn sqrt_of_product_uses_the_branch_root() {
        // (u + xp)^{1/2} = u^{1/2} (1 + x ū p)^{1/2}
        for p in [5u64, 7, 11] {
            let branch = SqrtBranch::canonical(p).unwrap();
            let w = 4;
            let m = p.pow(w);
            for u in 1..p {
                if legendre(u as i128, p) != 1 {
                    continue;
                }
                let ubar = inv_mod(u, m).unwrap();
                for x in 0..m / p {
                    let lhs = psqrt(&r(u + x * p, p, w), &branch, w).unwrap();
                    let unit_part = psqrt(&r(u, p, w), &branch, w).unwrap();
                    let xu = mul_mod(x, ubar, m);
                    let rhs = unit_part * sqrt_one_plus_p_series(xu, p, w);
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(1, 7), 1);
        assert_eq!(legendre(14, 7), 0);
        let squares: Vec<u64> = (1..7u64).map(|x| x * x % 7).collect();
        assert_eq!(legendre(3, 7), if squares.contains(&3) { 1 } else { -1 });
        assert_eq!(legendre(-1, 7), -1);
        assert_eq!(legendre(-1, 5), 1);
    }

    #[test]
    fn log_series_truncation() {
        assert_eq!(log_series_terms(3, 1), 1);
        // K − ⌊log_3 K⌋ ≥ 4 first at K = 5
        assert_eq!(log_series_terms(3, 4), 5);
        for w in 1..10 {
            let k = log_series_terms(5, w);
            for j in k..k + 200 {
                let v = ord_int(j, 5).capped(64) as u64;
                assert!(j - v >= w as u64);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mul_inverse_roundtrip(x in 1u64..1_000_000, p_idx in 0usize..4, w in 1u32..7) {
                let p = [3u64, 5, 7, 11][p_idx];
                let a = r(x, p, w);
                prop_assume!(a.is_unit());
                prop_assert_eq!(a * a.inverse().unwrap(), PadicResidue::one(p, w));
            }

            #[test]
            fn log_of_power(k in 0u64..10_000, e in 0u64..50) {
                let (p, w) = (7u64, 5u32);
                let x = r(1 + 7 * k, p, w);
                let lhs = plog(&x.pow(e), w).unwrap();
                let rhs = r(plog(&x, w).unwrap().value() * e, p, w);
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
