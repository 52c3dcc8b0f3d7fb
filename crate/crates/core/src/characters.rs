//! Dirichlet characters modulo `p^n`, indexed by a fixed primitive root.
//!
//! With `g` the smallest generator of `(Z/p^nZ)^×` and `dlog` its discrete
//! logarithm, the character of index `a ∈ [0, φ)` is
//! `χ_a(u) = e(a·dlog(u)/φ)`. The same `g` generates modulo every `p^m`,
//! `m ≤ n`, so `χ_{p^{n−m}a′}` is induced from `χ_{a′} mod p^m`.
//!
//! On `1 + pZ` the index satisfies `dlog(1 + kp) = (p−1)·D(k)` and
//! `χ_a(1 + kp) = e(a·D(k)/p^{n−1})`. The Postnikov unit is the `A` with
//! `a·D(k) ≡ A·P(k) (mod p^{n−1})` for all `k`, where `P(k) = log_p(1+kp)/p`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{
    gcd, inv_mod, mul_mod, ord_int, plog, pow_mod, prime_factors, PadicResidue,
    PrimePowerModulus, Valuation,
};
use crate::roots::{ordered_sum, RootTable};

const NOT_A_UNIT: u32 = u32::MAX;

/// Bumped whenever the layout of the on-disk tables changes.
pub const CACHE_VERSION: u32 = 1;

/// Smallest positive generator of `(Z/p^nZ)^×`.
pub fn find_generator(p: u64, n: u32) -> u64 {
    let q = p.pow(n);
    let phi = (p - 1) * p.pow(n - 1);
    let factors = prime_factors(phi);
    (2..q)
        .find(|&g| g % p != 0 && factors.iter().all(|&r| pow_mod(g, phi / r, q) != 1))
        .unwrap_or(1)
}

/// Multiplicative order of `u` modulo `m`.
pub fn multiplicative_order(u: u64, m: u64, phi: u64) -> u64 {
    let mut order = phi;
    for r in prime_factors(phi) {
        while order % r == 0 && pow_mod(u, order / r, m) == 1 {
            order /= r;
        }
    }
    order
}

/// Generator, discrete logarithms and Postnikov data for one modulus.
#[derive(Clone, Debug)]
pub struct UnitGroup {
    modulus: PrimePowerModulus,
    generator: u64,
    dlog: Vec<u32>,
    roots: RootTable,
    /// `D(1)·L^{−1} mod p^{n−1}`, so that `A(χ_a) = a·κ`; `None` for `n = 1`.
    kappa: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    p: u64,
    n: u32,
    generator: u64,
    kappa: Option<u64>,
    dlog: Vec<u32>,
    postnikov: Vec<u64>,
}

impl UnitGroup {
    pub fn new(modulus: PrimePowerModulus) -> Self {
        let (p, n, q) = (modulus.p(), modulus.n(), modulus.q());
        let generator = find_generator(p, n);
        let mut dlog = vec![NOT_A_UNIT; q as usize];
        let mut x = 1u64;
        for k in 0..modulus.phi() {
            dlog[x as usize] = k as u32;
            x = mul_mod(x, generator, q);
        }
        let mut group = Self {
            modulus,
            generator,
            dlog,
            roots: RootTable::new(modulus.phi()),
            kappa: None,
        };
        if n >= 2 {
            let pn1 = p.pow(n - 1);
            let l_inv = inv_mod(group.plog_quotient(1), pn1).expect("log_p(1+p)/p is a unit");
            group.kappa = Some(mul_mod(group.dlog_quotient(1), l_inv, pn1));
        }
        group
    }

    /// Loads the tables from `dir` when a current cache file exists, otherwise
    /// builds them and writes the cache.
    pub fn load_or_build(modulus: PrimePowerModulus, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self::new(modulus));
        };
        let path = cache_path(dir, &modulus);
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(file) = serde_json::from_slice::<CacheFile>(&bytes) {
                if file.version == CACHE_VERSION
                    && file.p == modulus.p()
                    && file.n == modulus.n()
                    && file.dlog.len() as u64 == modulus.q()
                {
                    return Ok(Self {
                        modulus,
                        generator: file.generator,
                        dlog: file.dlog,
                        roots: RootTable::new(modulus.phi()),
                        kappa: file.kappa,
                    });
                }
            }
        }
        let group = Self::new(modulus);
        group.write_cache(dir)?;
        Ok(group)
    }

    /// Writes `(p, n, g, κ, dlog, A per primitive index)` as JSON.
    pub fn write_cache(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::Cache(e.to_string()))?;
        let postnikov = match self.kappa {
            Some(kappa) => {
                let pn1 = self.modulus.q() / self.modulus.p();
                (0..self.modulus.phi())
                    .map(|a| mul_mod(a % pn1, kappa, pn1))
                    .collect()
            }
            None => Vec::new(),
        };
        let file = CacheFile {
            version: CACHE_VERSION,
            p: self.modulus.p(),
            n: self.modulus.n(),
            generator: self.generator,
            kappa: self.kappa,
            dlog: self.dlog.clone(),
            postnikov,
        };
        let path = cache_path(dir, &self.modulus);
        let bytes = serde_json::to_vec(&file).map_err(|e| Error::Cache(e.to_string()))?;
        fs::write(&path, bytes).map_err(|e| Error::Cache(e.to_string()))?;
        Ok(path)
    }

    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn phi(&self) -> u64 {
        self.modulus.phi()
    }

    pub fn kappa(&self) -> Option<u64> {
        self.kappa
    }

    /// Discrete logarithm of a unit; `None` for non-units.
    #[inline]
    pub fn dlog(&self, u: u64) -> Option<u64> {
        match self.dlog[(u % self.modulus.q()) as usize] {
            NOT_A_UNIT => None,
            k => Some(k as u64),
        }
    }

    pub fn dlog_table(&self) -> &[u32] {
        &self.dlog
    }

    /// `e(k/φ)`.
    #[inline]
    pub fn root(&self, k: u64) -> Complex64 {
        self.roots.e(k)
    }

    /// `D(k) = dlog(1 + kp)/(p − 1) mod p^{n−1}`.
    pub fn dlog_quotient(&self, k: u64) -> u64 {
        let (p, q) = (self.modulus.p(), self.modulus.q());
        let u = (1 + mul_mod(k, p, q)) % q;
        let d = self.dlog(u).expect("1 + kp is a unit");
        debug_assert_eq!(d % (p - 1), 0);
        d / (p - 1) % (q / p)
    }

    /// `P(k) = log_p(1 + kp)/p mod p^{n−1}`.
    pub fn plog_quotient(&self, k: u64) -> u64 {
        let (p, n, q) = (self.modulus.p(), self.modulus.n(), self.modulus.q());
        let x = PadicResidue::from_u64((1 + mul_mod(k, p, q)) % q, p, n);
        plog(&x, n)
            .and_then(|l| l.shift_down(1))
            .expect("argument in 1 + pZ")
            .value()
    }

    pub fn character(&self, index: u64) -> DirichletCharacter {
        DirichletCharacter::new(self.modulus, index % self.phi())
    }

    /// `χ_a(u)`, zero on non-units.
    #[inline]
    pub fn value(&self, chi: &DirichletCharacter, u: u64) -> Complex64 {
        match self.dlog(u) {
            Some(k) => self.roots.e(mul_mod(chi.index, k, self.phi())),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `[χ(0), …, χ(q−1)]`.
    pub fn values(&self, chi: &DirichletCharacter) -> Vec<Complex64> {
        (0..self.modulus.q()).map(|u| self.value(chi, u)).collect()
    }

    /// Every character of the modulus, principal first.
    pub fn characters(&self) -> Vec<DirichletCharacter> {
        (0..self.phi()).map(|a| self.character(a)).collect()
    }

    pub fn primitive_characters(&self) -> Vec<DirichletCharacter> {
        self.characters().into_iter().filter(|c| c.is_primitive()).collect()
    }

    /// The Postnikov unit of a primitive character, verified at every
    /// `k mod p^{n−1}` as the exact congruence `a·D(k) ≡ A·P(k)`.
    pub fn postnikov_unit(&self, chi: &DirichletCharacter) -> Result<u64> {
        let a = self.postnikov_candidate(chi)?;
        self.verify_postnikov(chi, a)?;
        Ok(a)
    }

    /// `A ≡ a·D(1)·L^{−1} (mod p^{n−1})` from the single congruence at `k = 1`,
    /// without the full verification sweep.
    pub fn postnikov_candidate(&self, chi: &DirichletCharacter) -> Result<u64> {
        if !chi.is_primitive() || self.modulus.n() < 2 {
            return Err(Error::Imprimitive {
                conductor_exp: chi.conductor_exp(),
                n: self.modulus.n(),
            });
        }
        let pn1 = self.modulus.q() / self.modulus.p();
        let kappa = self.kappa.expect("n ≥ 2");
        Ok(mul_mod(chi.index % pn1, kappa, pn1))
    }

    /// Checks `a·D(k) ≡ A·P(k) (mod p^{n−1})` for all `k mod p^{n−1}`.
    pub fn verify_postnikov(&self, chi: &DirichletCharacter, a_unit: u64) -> Result<()> {
        let pn1 = self.modulus.q() / self.modulus.p();
        let a = chi.index % pn1;
        let bad = (0..pn1).into_par_iter().find_first(|&k| {
            mul_mod(a, self.dlog_quotient(k), pn1) != mul_mod(a_unit, self.plog_quotient(k), pn1)
        });
        match bad {
            Some(k) => Err(Error::PostnikovMismatch { k }),
            None => Ok(()),
        }
    }

    /// Structural check that makes `A(χ_a) = a·κ` valid for every index at
    /// once: `D(k) ≡ κ·P(k) (mod p^{n−1})` for all `k`.
    pub fn verify_postnikov_structure(&self) -> Result<()> {
        let kappa = self.kappa.ok_or(Error::ExponentTooSmall {
            min: 2,
            got: self.modulus.n(),
        })?;
        let pn1 = self.modulus.q() / self.modulus.p();
        let bad = (0..pn1)
            .into_par_iter()
            .find_first(|&k| self.dlog_quotient(k) != mul_mod(kappa, self.plog_quotient(k), pn1));
        match bad {
            Some(k) => Err(Error::PostnikovMismatch { k }),
            None => Ok(()),
        }
    }

    /// Every `A mod p^{n−1}` satisfying the congruence at all `k`, by brute
    /// force over candidates. Quadratic in `p^{n−1}`.
    pub fn postnikov_solutions_brute(&self, chi: &DirichletCharacter) -> Vec<u64> {
        let pn1 = self.modulus.q() / self.modulus.p();
        let a = chi.index % pn1;
        let lhs: Vec<u64> = (0..pn1).map(|k| mul_mod(a, self.dlog_quotient(k), pn1)).collect();
        let plogs: Vec<u64> = (0..pn1).map(|k| self.plog_quotient(k)).collect();
        (0..pn1)
            .into_par_iter()
            .filter(|&cand| (0..pn1 as usize).all(|k| mul_mod(cand, plogs[k], pn1) == lhs[k]))
            .collect()
    }

    /// The character mod `p^m` that induces `χ`, with `p^m` its conductor.
    pub fn inducing_index(&self, chi: &DirichletCharacter) -> (u32, u64) {
        let m = chi.conductor_exp();
        let shift = self.modulus.p().pow(self.modulus.n() - m.max(1));
        (m, chi.index / shift)
    }

    /// Postnikov unit of the primitive character inducing `χ`, modulo
    /// `p^{m−1}` where `p^m` is the conductor (`m ≥ 2`).
    pub fn inducing_postnikov(&self, chi: &DirichletCharacter) -> Result<(u32, u64)> {
        let (m, index) = self.inducing_index(chi);
        if m < 2 {
            return Err(Error::Imprimitive {
                conductor_exp: m,
                n: self.modulus.n(),
            });
        }
        let pm1 = self.modulus.p().pow(m - 1);
        let kappa = self.kappa.expect("n ≥ m ≥ 2") % pm1;
        Ok((m, mul_mod(index % pm1, kappa, pm1)))
    }
}

fn cache_path(dir: &Path, modulus: &PrimePowerModulus) -> PathBuf {
    dir.join(format!("units_{}_{}.json", modulus.p(), modulus.n()))
}

/// A character `χ_a` modulo `p^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirichletCharacter {
    modulus: PrimePowerModulus,
    index: u64,
}

impl DirichletCharacter {
    pub fn new(modulus: PrimePowerModulus, index: u64) -> Self {
        Self {
            modulus,
            index: index % modulus.phi(),
        }
    }

    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// `m` with conductor `p^m`.
    pub fn conductor_exp(&self) -> u32 {
        let n = self.modulus.n();
        if self.index == 0 {
            return 0;
        }
        match ord_int(self.index, self.modulus.p()) {
            Valuation::Finite(v) if v < n - 1 => n - v,
            _ => 1,
        }
    }

    pub fn conductor(&self) -> u64 {
        self.modulus.p().pow(self.conductor_exp())
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor_exp() == self.modulus.n()
    }

    pub fn is_principal(&self) -> bool {
        self.index == 0
    }

    /// `χ(−1) = (−1)^a`.
    pub fn is_even(&self) -> bool {
        self.index % 2 == 0
    }

    pub fn conj(&self) -> Self {
        Self::new(self.modulus, self.modulus.phi() - self.index)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.modulus, other.modulus);
        Self::new(self.modulus, self.index + other.index)
    }

    /// The character `ψ mod p^k` (`k ≤ n`, index `b` for the generator
    /// reduced mod `p^k`) viewed modulo `p^n`.
    pub fn lift_from(modulus: PrimePowerModulus, k: u32, b: u64) -> Self {
        let shift = modulus.p().pow(modulus.n() - k);
        Self::new(modulus, b * shift)
    }
}

/// All characters modulo `q = p^n`.
pub fn characters_mod(modulus: PrimePowerModulus) -> Vec<DirichletCharacter> {
    (0..modulus.phi())
        .map(|a| DirichletCharacter::new(modulus, a))
        .collect()
}

/// `Σ_{ψ mod q₁} ψ(u) ψ̄(v)`.
pub fn orthogonality_sum(group: &UnitGroup, u: u64, v: u64) -> Complex64 {
    let (du, dv) = match (group.dlog(u), group.dlog(v)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Complex64::new(0.0, 0.0),
    };
    let phi = group.phi();
    let diff = (du + phi - dv) % phi;
    ordered_sum(phi, |a| group.root(mul_mod(a, diff, phi)))
}

/// `δ = (q/p, A − A′)` for two Postnikov units modulo `q/p`.
pub fn delta(modulus: &PrimePowerModulus, a: u64, a_prime: u64) -> u64 {
    let pn1 = modulus.q() / modulus.p();
    let diff = (a % pn1 + pn1 - a_prime % pn1) % pn1;
    gcd(pn1, diff)
}

/// Cache directory from `PPMOMENTS_CACHE_DIR`, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("PPMOMENTS_CACHE_DIR").map(PathBuf::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::e_frac;
    use proptest::prelude::*;

    fn group(p: u64, n: u32) -> UnitGroup {
        UnitGroup::new(PrimePowerModulus::new(p, n).unwrap())
    }

    #[test]
    fn generator_examples() {
        assert_eq!(find_generator(3, 2), 2);
        assert_eq!(find_generator(5, 1), 2);
        assert_eq!(find_generator(7, 1), 3);
        for (p, n) in [(3u64, 5u32), (5, 3), (7, 3), (11, 2), (13, 2)] {
            let q = p.pow(n);
            let phi = (p - 1) * p.pow(n - 1);
            let g = find_generator(p, n);
            let order = (1..=phi).find(|&k| pow_mod(g, k, q) == 1).unwrap();
            assert_eq!(order, phi);
            assert_eq!(multiplicative_order(g, q, phi), phi);
        }
    }

    #[test]
    fn generator_is_stable_along_the_tower() {
        for p in [3u64, 5, 7] {
            let g = find_generator(p, 2);
            for n in 2..=6 {
                assert_eq!(find_generator(p, n), g);
            }
        }
    }

    #[test]
    fn dlog_is_a_bijection() {
        let g = group(3, 5);
        let mut seen = vec![false; g.phi() as usize];
        for u in 0..g.modulus().q() {
            match g.dlog(u) {
                Some(k) => {
                    assert_eq!(pow_mod(g.generator(), k, 243), u);
                    assert!(!seen[k as usize]);
                    seen[k as usize] = true;
                }
                None => assert_eq!(u % 3, 0),
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn character_counts() {
        let g = group(3, 2);
        assert_eq!(g.characters().len(), 6);
        assert_eq!(g.primitive_characters().len(), 4);
        assert_eq!(g.character(0).conductor(), 1);
        for p in [5u64, 7, 11] {
            let g = group(p, 1);
            assert_eq!(g.characters().len() as u64, p - 1);
            assert_eq!(g.primitive_characters().len() as u64, p - 2);
        }
        let g = group(5, 3);
        assert_eq!(g.primitive_characters().len(), 100 - 20);
    }

    #[test]
    fn conductor_matches_restriction_to_one_plus_pm() {
        for (p, n) in [(3u64, 4u32), (5, 3)] {
            let g = group(p, n);
            let q = g.modulus().q();
            for chi in g.characters() {
                let trivial_on = |m: u32| {
                    let pm = p.pow(m);
                    (0..q / pm).all(|k| (g.value(&chi, (1 + k * pm) % q) - 1.0).norm() < 1e-9)
                };
                let m = chi.conductor_exp();
                assert!(trivial_on(m.max(1)));
                if m >= 2 {
                    assert!(!trivial_on(m - 1));
                }
            }
        }
    }

    #[test]
    fn postnikov_small_example() {
        let g = group(3, 2);
        let log4 = plog(&PadicResidue::from_u64(4, 3, 2), 2).unwrap().value();
        assert_eq!(log4, 3);
        let chi = g
            .primitive_characters()
            .into_iter()
            .find(|c| (g.value(c, 4) - e_frac(1, 3)).norm() < 1e-12)
            .unwrap();
        assert_eq!(g.postnikov_unit(&chi).unwrap() % 3, 1);
        assert!(g.postnikov_unit(&g.character(0)).is_err());
        assert!(matches!(
            g.postnikov_unit(&g.character(3)),
            Err(Error::Imprimitive { .. })
        ));
    }

    #[test]
    fn postnikov_unique_mod_five_to_the_four() {
        let g = group(5, 4);
        for chi in g.primitive_characters() {
            let sols = g.postnikov_solutions_brute(&chi);
            assert_eq!(sols.len(), 1);
            assert_eq!(sols[0], g.postnikov_unit(&chi).unwrap());
            assert_ne!(sols[0] % 5, 0);
        }
    }

    #[test]
    fn postnikov_bridge_to_phases() {
        for (p, n) in [(3u64, 5u32), (5, 3), (7, 3)] {
            let g = group(p, n);
            let q = g.modulus().q();
            for chi in g.primitive_characters().into_iter().step_by(7) {
                let a = g.postnikov_unit(&chi).unwrap();
                for x in 0..q / p {
                    let arg = PadicResidue::from_u64(1 + p * x, p, n);
                    let l = plog(&arg, n).unwrap().value();
                    let rhs = e_frac(mul_mod(a, l, q) as i128, q);
                    assert!((g.value(&chi, 1 + p * x) - rhs).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn postnikov_is_additive() {
        let g = group(3, 4);
        let pn1 = 27;
        for x in g.primitive_characters() {
            for y in g.primitive_characters() {
                let xy = x.mul(&y);
                if xy.is_primitive() {
                    let lhs = g.postnikov_unit(&xy).unwrap();
                    let rhs = (g.postnikov_unit(&x).unwrap() + g.postnikov_unit(&y).unwrap()) % pn1;
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn structure_check_and_inducing_units() {
        let g = group(5, 4);
        g.verify_postnikov_structure().unwrap();
        let small = group(5, 3);
        for chi in g.characters().into_iter().filter(|c| c.conductor_exp() == 3) {
            let (m, idx) = g.inducing_index(&chi);
            assert_eq!(m, 3);
            let inducer = small.character(idx);
            assert!(inducer.is_primitive());
            for u in 1..625u64 {
                if u % 5 != 0 {
                    assert!((g.value(&chi, u) - small.value(&inducer, u % 125)).norm() < 1e-10);
                }
            }
            let (_, a) = g.inducing_postnikov(&chi).unwrap();
            assert_eq!(a, small.postnikov_unit(&inducer).unwrap());
        }
    }

    #[test]
    fn orthogonality_examples() {
        let g = group(3, 2);
        assert!((orthogonality_sum(&g, 4, 4) - 6.0).norm() < 1e-10);
        assert!(orthogonality_sum(&g, 2, 4).norm() < 1e-10);
        let g = group(3, 3);
        for u in 1..27u64 {
            for v in 1..27u64 {
                if u % 3 == 0 || v % 3 == 0 {
                    continue;
                }
                let s = orthogonality_sum(&g, u, v);
                let expected = if u == v { 18.0 } else { 0.0 };
                assert!((s - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_examples() {
        let q = PrimePowerModulus::new(3, 5).unwrap();
        assert_eq!(delta(&q, 5, 5), 81);
        assert_eq!(delta(&q, 5, 2), 3);
        assert_eq!(delta(&q, 1, 2), 1);
        assert_eq!(delta(&q, 10, 1), 9);
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let q = PrimePowerModulus::new(5, 3).unwrap();
        let built = UnitGroup::load_or_build(q, Some(dir.path())).unwrap();
        let loaded = UnitGroup::load_or_build(q, Some(dir.path())).unwrap();
        assert_eq!(built.dlog_table(), loaded.dlog_table());
        assert_eq!(built.kappa(), loaded.kappa());
        let path = cache_path(dir.path(), &q);
        let mut raw: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        raw["version"] = serde_json::json!(CACHE_VERSION + 1);
        raw["generator"] = serde_json::json!(999);
        fs::write(&path, serde_json::to_vec(&raw).unwrap()).unwrap();
        let rebuilt = UnitGroup::load_or_build(q, Some(dir.path())).unwrap();
        assert_eq!(rebuilt.generator(), 2);
    }

    proptest! {
        #[test]
        fn characters_are_multiplicative(a in 0u64..486, u in 1u64..729, v in 1u64..729) {
            let g = group(3, 6);
            let chi = g.character(a);
            let lhs = g.value(&chi, u * v % 729);
            let rhs = g.value(&chi, u) * g.value(&chi, v);
            prop_assert!((lhs - rhs).norm() < 1e-10);
            let c = g.value(&chi.conj(), u);
            prop_assert!((c - g.value(&chi, u).conj()).norm() < 1e-10);
        }
    }
}
