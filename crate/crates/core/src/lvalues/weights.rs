//! Dyadic weights `V_N` and the quadrature used for their Fourier transforms.

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::afe_weight;

/// `exp(−1/(1 − u²))` on `(−1, 1)`.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// `φ(u) = b(u)/Σ_k b(u − k)`: supported on `(−1, 1)` with
/// `Σ_k φ(u − k) = 1` for every real `u`.
pub fn partition(u: f64) -> f64 {
    let b = bump(u);
    if b == 0.0 {
        return 0.0;
    }
    b / (bump(u - 1.0) + b + bump(u + 1.0))
}

/// `V_N(x) = φ(log₂(x/N))·(N/x)^{1/2}·W_κ(x/√q)`, supported in `(N/2, 2N)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothWeight {
    big_n: f64,
    q: u64,
    sqrt_q: f64,
    kappa: u8,
}

/// Declared bounds `sup_x |V_N^{(j)}(x)|·N^j ≤ C_j`, `j = 0..=4`.
pub const DERIVATIVE_CERTIFICATE: [f64; 5] = [1.5, 8.0, 300.0, 2.0e4, 2.5e6];

impl SmoothWeight {
    pub fn new(big_n: f64, q: u64, kappa: u8) -> Self {
        Self {
            big_n,
            q,
            sqrt_q: (q as f64).sqrt(),
            kappa,
        }
    }

    pub fn big_n(&self) -> f64 {
        self.big_n
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn kappa(&self) -> u8 {
        self.kappa
    }

    pub fn support(&self) -> (f64, f64) {
        (self.big_n / 2.0, 2.0 * self.big_n)
    }

    /// Integers strictly inside the support (possibly an empty range).
    pub fn integer_support(&self) -> (u64, u64) {
        let (lo, hi) = self.support();
        let first = (lo.floor() as u64 + 1).max(1);
        let last = (hi.ceil() as u64).saturating_sub(1);
        (first, last)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let phi = partition((x / self.big_n).log2());
        if phi == 0.0 {
            return 0.0;
        }
        phi * (self.big_n / x).sqrt() * afe_weight(self.kappa, x / self.sqrt_q)
    }

    /// `max_x |V^{(j)}(x)|·N^j` for `j = 0..=4`, from central differences on a
    /// grid of `samples` points across the support.
    pub fn sampled_derivative_bounds(&self, samples: usize) -> [f64; 5] {
        let (lo, hi) = self.support();
        let h = self.big_n / 400.0;
        let f = |x: f64| self.eval(x);
        let mut out = [0f64; 5];
        for i in 0..=samples {
            let x = lo + (hi - lo) * i as f64 / samples as f64;
            let d = [
                f(x),
                (f(x + h) - f(x - h)) / (2.0 * h),
                (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
                (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h.powi(3)),
                (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / h.powi(4),
            ];
            for j in 0..5 {
                out[j] = out[j].max(d[j].abs() * self.big_n.powi(j as i32));
            }
        }
        out
    }
}

fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, width: f64) -> Complex64 {
    (fa + 4.0 * fm + fb) * (width / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Result<Complex64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let diff = left + right - whole;
    if diff.norm() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure { a, b });
    }
    Ok(adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// `∫_a^b f` by adaptive Simpson over `panels` equal initial panels, each
/// refined to absolute tolerance `tol/panels`.
pub fn adaptive_simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> Result<Complex64> {
    if b <= a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = lo + width;
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        total += adapt(&f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, width), tol / panels as f64, 40)?;
    }
    Ok(total)
}
