//! Roots of unity `e(k/M) = exp(2πik/M)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

/// `e(num/den)` for a signed numerator.
pub fn e_frac(num: i128, den: u64) -> Complex64 {
    let k = num.rem_euclid(den as i128) as f64;
    Complex64::from_polar(1.0, TAU * k / den as f64)
}

/// `e(x)` for real `x`.
pub fn e_real(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * (x - x.floor()))
}

/// Two-level table of the `M`-th roots of unity: `e(k/M)` is the product
/// of one coarse and one fine entry, each table of size about `√M`.
#[derive(Clone, Debug)]
pub struct RootTable {
    modulus: u64,
    block: u64,
    coarse: Vec<Complex64>,
    fine: Vec<Complex64>,
}

impl RootTable {
    pub fn new(modulus: u64) -> Self {
        assert!(modulus > 0);
        let block = (modulus as f64).sqrt().ceil().max(1.0) as u64;
        let fine = (0..block).map(|j| e_frac(j as i128, modulus)).collect();
        let coarse = (0..=modulus / block)
            .map(|i| e_frac((i * block) as i128, modulus))
            .collect();
        Self {
            modulus,
            block,
            coarse,
            fine,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `e(k/M)`.
    #[inline]
    pub fn e(&self, k: u64) -> Complex64 {
        let k = k % self.modulus;
        self.coarse[(k / self.block) as usize] * self.fine[(k % self.block) as usize]
    }

    #[inline]
    pub fn e_signed(&self, k: i128) -> Complex64 {
        self.e(k.rem_euclid(self.modulus as i128) as u64)
    }
}

const CHUNK: u64 = 1 << 14;

/// `Σ_{x < len} term(x)`, summed in fixed chunks so the result does not
/// depend on the thread count.
pub fn ordered_sum<F>(len: u64, term: F) -> Complex64
where
    F: Fn(u64) -> Complex64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&term).sum()
        })
        .collect();
    partials.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct() {
        for m in [1u64, 2, 7, 81, 343, 1000, 65_537] {
            let t = RootTable::new(m);
            for k in (0..3 * m).step_by(((m / 50) as usize).max(1)) {
                let d = t.e(k) - e_frac(k as i128, m);
                assert!(d.norm() < 1e-14);
            }
            assert!((t.e_signed(-1) - e_frac(m as i128 - 1, m)).norm() < 1e-14);
        }
    }

    #[test]
    fn full_sum_of_roots_vanishes() {
        let t = RootTable::new(2187);
        let s = ordered_sum(2187, |k| t.e(k));
        assert!(s.norm() < 1e-10);
    }
}
