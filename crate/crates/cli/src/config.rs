use std::fmt;
use std::path::PathBuf;

use padic_moments::padic::{checked_pow, is_odd_prime, PrimePowerModulus};

/// Largest modulus accepted without `--allow-large`.
pub const DESK_CAP: u64 = 500_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Validated run parameters. Levels are stored as exponents of `p`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p: u64,
    pub n: u32,
    pub k1: Option<u32>,
    pub k2: Option<u32>,
    pub t: Option<u32>,
    pub chi: u64,
    pub tol: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

/// Raw flag values before validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub p: u64,
    pub n: u32,
    pub q1: Option<u64>,
    pub q2: Option<u64>,
    pub qtilde: Option<u64>,
    pub chi: u64,
    pub tol: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub allow_large: bool,
}

fn exponent_of(value: u64, p: u64, flag: &str) -> Result<u32, ConfigError> {
    let mut k = 0;
    let mut x = value;
    while x > 1 && x % p == 0 {
        x /= p;
        k += 1;
    }
    if x != 1 || k == 0 {
        return Err(ConfigError(format!("--{flag} {value} is not a positive power of p = {p}")));
    }
    Ok(k)
}

/// Checks that `p^n` is a valid desk-scale modulus.
pub fn check_modulus(p: u64, n: u32, allow_large: bool) -> Result<PrimePowerModulus, ConfigError> {
    if !is_odd_prime(p) {
        return Err(ConfigError(format!("p = {p} must be an odd prime")));
    }
    if n == 0 {
        return Err(ConfigError("n must be at least 1".into()));
    }
    let q = checked_pow(p, n).ok_or_else(|| ConfigError(format!("{p}^{n} does not fit in 64 bits")))?;
    if q > DESK_CAP && !allow_large {
        return Err(ConfigError(format!("q = {q} exceeds the desk-scale cap {DESK_CAP}; pass --allow-large")));
    }
    PrimePowerModulus::new(p, n).map_err(|e| ConfigError(e.to_string()))
}

impl RawConfig {
    /// Enforces `p ≤ q₁ ≤ q₂ < q` and `p² ≤ q̃ < q`.
    pub fn validate(&self) -> Result<RunConfig, ConfigError> {
        let modulus = check_modulus(self.p, self.n, self.allow_large)?;
        let (p, n) = (self.p, self.n);
        let k1 = self.q1.map(|v| exponent_of(v, p, "q1")).transpose()?;
        let k2 = self.q2.map(|v| exponent_of(v, p, "q2")).transpose()?;
        let t = self.qtilde.map(|v| exponent_of(v, p, "qtilde")).transpose()?;
        for (k, flag) in [(k1, "q1"), (k2, "q2")] {
            if let Some(k) = k {
                if k >= n {
                    return Err(ConfigError(format!("--{flag} must be smaller than q = {}", modulus.q())));
                }
            }
        }
        if let (Some(a), Some(b)) = (k1, k2) {
            if a > b {
                return Err(ConfigError("q1 ≤ q2 required".into()));
            }
        }
        if let Some(t) = t {
            if t < 2 || t >= n {
                return Err(ConfigError(format!("--qtilde must satisfy p² ≤ q̃ < q = {}", modulus.q())));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(ConfigError(format!("--tol {tol} must be positive")));
            }
        }
        Ok(RunConfig {
            p,
            n,
            k1,
            k2,
            t,
            chi: self.chi,
            tol: self.tol,
            seed: self.seed,
            out: self.out.clone(),
            cache_dir: self.cache_dir.clone(),
        })
    }
}

impl RunConfig {
    pub fn modulus(&self) -> PrimePowerModulus {
        PrimePowerModulus::new(self.p, self.n).expect("validated")
    }

    /// `q̃` exponents to sweep: the selected one, or all `2 ≤ t < n`.
    pub fn levels(&self) -> Vec<u32> {
        match self.t {
            Some(t) => vec![t],
            None => (2..self.n).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(p: u64, n: u32) -> RawConfig {
        RawConfig { p, n, chi: 1, ..Default::default() }
    }

    #[test]
    fn rejects_even_and_composite() {
        assert!(raw(2, 5).validate().is_err());
        assert!(raw(9, 2).validate().is_err());
        assert!(raw(3, 5).validate().is_ok());
    }

    #[test]
    fn desk_cap() {
        assert!(raw(3, 12).validate().is_err());
        let mut r = raw(3, 12);
        r.allow_large = true;
        assert!(r.validate().is_ok());
        assert!(raw(3, 11).validate().is_ok());
    }

    #[test]
    fn level_restrictions() {
        let mut r = raw(3, 6);
        r.q1 = Some(9);
        r.q2 = Some(3);
        assert!(r.validate().is_err());
        r.q2 = Some(243);
        let c = r.validate().unwrap();
        assert_eq!((c.k1, c.k2), (Some(2), Some(5)));
        r.q2 = Some(729);
        assert!(r.validate().is_err());
        r.q2 = Some(10);
        assert!(r.validate().is_err());
        let mut r = raw(5, 4);
        r.qtilde = Some(5);
        assert!(r.validate().is_err());
        r.qtilde = Some(125);
        assert_eq!(r.validate().unwrap().levels(), vec![3]);
    }
}
