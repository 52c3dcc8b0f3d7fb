//! Short second moments `S₂(χ)`, the dyadic sums `B(N)` and their Poisson
//! decomposition, power moments over a full character group, and large-value
//! counts.
//!
//! Every `q^ε` is instantiated as `q^{0.1}`.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::characters::{DirichletCharacter, UnitGroup};
use crate::error::{Error, Result};
use crate::padic::PrimePowerModulus;
use crate::tracefn::{kchi_reduce, DirectSweep, Reduction};

use super::poisson::{transform_row, ShiftedProduct};
use super::weights::SmoothWeight;
use super::LValueTable;

pub const EPSILON: f64 = 0.1;

fn q_eps(q: u64) -> f64 {
    (q as f64).powf(EPSILON)
}

fn check_k(modulus: &PrimePowerModulus, k: u32, name: &str) -> Result<()> {
    if k == 0 || k >= modulus.n() {
        return Err(Error::HypothesisViolated(format!(
            "{name} = p^{k} must satisfy p ≤ {name} < q = p^{}",
            modulus.n()
        )));
    }
    Ok(())
}

/// Index of `χ_a·ψ_b` where `ψ_b` is the character of index `b` modulo `p^k`.
pub fn twist_index(modulus: &PrimePowerModulus, a: u64, k: u32, b: u64) -> u64 {
    (a + b * modulus.p().pow(modulus.n() - k)) % modulus.phi()
}

fn phi_level(p: u64, k: u32) -> u64 {
    (p - 1) * p.pow(k - 1)
}

/// `S₂(χ) = Σ_{ψ₁ mod q₁} |L(½, χψ₁)|²`, `q₁ = p^{k1}`.
pub fn short_second_moment(table: &LValueTable, chi_index: u64, k1: u32) -> Result<f64> {
    let modulus = *table.modulus();
    check_k(&modulus, k1, "q₁")?;
    Ok((0..phi_level(modulus.p(), k1))
        .map(|b| table.value(twist_index(&modulus, chi_index, k1, b)).norm_sqr())
        .sum())
}

/// `V_N(n)` at the integers of its support.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    pub big_n: f64,
    pub first: u64,
    pub values: Vec<f64>,
}

impl WeightTable {
    pub fn new(big_n: f64, q: u64, kappa: u8) -> Self {
        let w = SmoothWeight::new(big_n, q, kappa);
        let (first, last) = w.integer_support();
        let values = (first..=last).map(|n| w.eval(n as f64)).collect();
        Self { big_n, first, values }
    }

    pub fn get(&self, n: u64) -> f64 {
        n.checked_sub(self.first)
            .and_then(|i| self.values.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn range(&self) -> std::ops::Range<u64> {
        self.first..self.first + self.values.len() as u64
    }
}

/// Dyadic scales `N = 2^k ≤ q^{1/2 + ε}`.
pub fn dyadic_scales(q: u64) -> Vec<f64> {
    let limit = (q as f64).powf(0.5 + EPSILON);
    (0..).map(|k| 2f64.powi(k)).take_while(|&n| n <= limit).collect()
}

/// `B(N)` three ways.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BDecomposition {
    pub big_n: f64,
    /// `N^{−1} Σ_{ψ₁} |Σ_n χψ₁(n) V_N(n)|²`.
    pub direct: f64,
    /// `φ(q₁)N^{−1} Σ_{u ∈ (Z/q₁)^*} |Σ_{n ≡ u} χ(n) V_N(n)|²`.
    pub classes: f64,
    /// `Σ_n |χ(n)|² V_N(n)²`.
    pub diagonal: f64,
    /// `S_{hq₁}(N;χ)` for `h = 1, 2, …` while the shifted supports meet.
    pub shifts: Vec<(f64, f64)>,
    /// `φ(q₁)N^{−1}(diagonal + 2 Re Σ_h S_{hq₁})`.
    pub correlated: f64,
}

pub fn b_decomposition(group: &UnitGroup, chi: &DirichletCharacter, k1: u32, weights: &WeightTable) -> Result<BDecomposition> {
    let modulus = *group.modulus();
    check_k(&modulus, k1, "q₁")?;
    let (p, q) = (modulus.p(), modulus.q());
    let q1 = p.pow(k1);
    let phi1 = phi_level(p, k1);
    let big_n = weights.big_n;
    let chi_vals: Vec<Complex64> = weights.range().map(|n| group.value(chi, n % q)).collect();

    let mut direct = 0.0;
    for b in 0..phi1 {
        let twisted = group.character(twist_index(&modulus, chi.index(), k1, b));
        let s: Complex64 = weights
            .range()
            .zip(&weights.values)
            .map(|(n, v)| group.value(&twisted, n % q) * *v)
            .sum();
        direct += s.norm_sqr();
    }
    direct /= big_n;

    let mut by_class = vec![Complex64::new(0.0, 0.0); q1 as usize];
    for ((n, v), c) in weights.range().zip(&weights.values).zip(&chi_vals) {
        by_class[(n % q1) as usize] += c * *v;
    }
    let classes = phi1 as f64 / big_n
        * by_class
            .iter()
            .enumerate()
            .filter(|(u, _)| *u as u64 % p != 0)
            .map(|(_, s)| s.norm_sqr())
            .sum::<f64>();

    let diagonal: f64 = weights
        .range()
        .zip(&weights.values)
        .zip(&chi_vals)
        .map(|((_, v), c)| c.norm_sqr() * v * v)
        .sum();
    let mut shifts = Vec::new();
    let mut h = 1;
    while ((h * q1) as f64) < 1.5 * big_n {
        let s: Complex64 = weights
            .range()
            .zip(&weights.values)
            .zip(&chi_vals)
            .map(|((n, v), c)| group.value(chi, (n + h * q1) % q) * c.conj() * weights.get(n + h * q1) * *v)
            .sum();
        shifts.push((s.re, s.im));
        h += 1;
    }
    let correlated = phi1 as f64 / big_n * (diagonal + 2.0 * shifts.iter().map(|s| s.0).sum::<f64>());
    Ok(BDecomposition {
        big_n,
        direct,
        classes,
        diagonal,
        shifts,
        correlated,
    })
}

/// `Ŵ_{hq₁}(k/Q₁)`, `k ≥ 0`, for every `h ≥ 1` with non-empty shifted support.
#[derive(Clone, Debug)]
pub struct DualTables {
    pub p: u64,
    pub n: u32,
    pub k1: u32,
    pub big_n: f64,
    /// `rows[h − 1][k]`.
    pub rows: Vec<Vec<Complex64>>,
}

impl DualTables {
    pub fn new(modulus: &PrimePowerModulus, k1: u32, big_n: f64) -> Result<Self> {
        check_k(modulus, k1, "q₁")?;
        let (p, q) = (modulus.p(), modulus.q());
        let q1 = p.pow(k1);
        let big_q1 = q / q1;
        let nominal = (q_eps(q) * big_q1 as f64 / big_n).ceil() as u64;
        let weight = SmoothWeight::new(big_n, q, 0);
        let mut rows = Vec::new();
        let mut h = 1;
        loop {
            let w = ShiftedProduct::new(weight, (h * q1) as f64);
            if w.support().is_none() {
                break;
            }
            rows.push(transform_row(&w, big_q1, nominal)?);
            h += 1;
        }
        Ok(Self {
            p,
            n: modulus.n(),
            k1,
            big_n,
            rows,
        })
    }

    pub fn big_q1(&self) -> u64 {
        self.p.pow(self.n - self.k1)
    }

    /// `(h, j, N^{−1}Ŵ_{hq₁}(j/Q₁))` over all `h ≥ 1` and signed `j`.
    fn terms(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(i, row)| {
            let h = i as i64 + 1;
            row.iter().enumerate().flat_map(move |(k, w)| {
                let w = w / self.big_n;
                let k = k as i64;
                let pos = std::iter::once((h, k, w));
                let neg = (k > 0).then_some((h, -k, w.conj()));
                pos.chain(neg)
            })
        })
    }
}

fn divisor_count(m: u64) -> u64 {
    let mut count = 0;
    let mut d = 1;
    while d * d <= m {
        if m % d == 0 {
            count += if d * d == m { 1 } else { 2 };
        }
        d += 1;
    }
    count
}

/// The χ-independent coefficients `A(m;p^η)` of the factored dual sum, plus the
/// contribution of `j = 0` and of the degenerate cases, which is a constant.
#[derive(Clone, Debug, Default)]
pub struct Coefficients {
    pub levels: BTreeMap<u32, BTreeMap<i64, Complex64>>,
    /// `Σ N^{−1}Ŵ·K` over pairs in the `Full` and `MinusOverP` cases.
    pub constant: Complex64,
    pub t: u32,
}

impl Coefficients {
    pub fn new(dual: &DualTables) -> Self {
        let p = dual.p;
        let t = dual.n - dual.k1;
        let root = (dual.big_q1() as f64).sqrt();
        let mut out = Self {
            t,
            ..Self::default()
        };
        for (h, j, w) in dual.terms() {
            match kchi_reduce(j, h, p, t) {
                Reduction::Full => out.constant += w * (root * (1.0 - 1.0 / p as f64)),
                Reduction::MinusOverP => out.constant += w * (-root / p as f64),
                Reduction::Zero => {}
                Reduction::Reduce { eta, .. } => {
                    let pe = p.pow(eta) as i64;
                    let m = (h / pe) * (j / pe);
                    *out.levels.entry(eta).or_default().entry(m).or_default() += w;
                }
            }
        }
        out
    }

    /// `A(m;p^η)`, zero when no factorization `m = h′j′` is in range.
    pub fn a(&self, m: i64, eta: u32) -> Complex64 {
        self.levels
            .get(&eta)
            .and_then(|l| l.get(&m))
            .copied()
            .unwrap_or_default()
    }

    /// `max |A(m;p^η)|/d(|m|)`.
    pub fn divisor_constant(&self) -> f64 {
        self.levels
            .values()
            .flat_map(|l| l.iter())
            .map(|(m, a)| a.norm() / divisor_count(m.unsigned_abs()) as f64)
            .fold(0.0, f64::max)
    }

    /// `Σ_η p^{η/2} Σ_m K_χ(m;Q₁/p^η) A(m;p^η)`.
    pub fn main_term(&self, sweeps: &BTreeMap<u32, DirectSweep>, chi: &DirichletCharacter) -> Complex64 {
        let p = chi.modulus().p();
        let mut total = Complex64::new(0.0, 0.0);
        for (&eta, coeffs) in &self.levels {
            let sweep = &sweeps[&(self.t - eta)];
            let k = sweep.values(chi);
            let qt = sweep.qtilde() as i64;
            let inner: Complex64 = coeffs.iter().map(|(m, a)| k[m.rem_euclid(qt) as usize] * a).sum();
            total += inner * (p.pow(eta) as f64).sqrt();
        }
        total
    }
}

/// Everything needed to run the Prop. 3.1 pipeline for one `(q, q₁)`.
pub struct Prop31Context {
    pub k1: u32,
    pub scales: Vec<(WeightTable, DualTables, Coefficients)>,
    pub sweeps: BTreeMap<u32, DirectSweep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop31Record {
    pub q: u64,
    pub q1: u64,
    pub char_index: u64,
    /// Scale maximizing `B(N)`; ties go to the smaller `N`.
    pub big_n: f64,
    pub tie: bool,
    pub s2: f64,
    pub b_max: f64,
    pub main: (f64, f64),
    /// `q₁(1 + Q₁^{−1/2}|main|)`.
    pub rhs: f64,
    /// `S₂/(rhs·q^{0.1})`.
    pub ratio: f64,
    /// Largest discrepancy among the exact rewritings of `B(N)`, divided by `q₁`.
    pub identity_residual: f64,
    /// `S₂/(q^{0.1}(q₁ + Q₁^{1/2}))` when `q₁³ ≥ q`.
    pub weyl_ratio: Option<f64>,
}

impl Prop31Context {
    pub fn new(group: &UnitGroup, k1: u32) -> Result<Self> {
        let modulus = *group.modulus();
        check_k(&modulus, k1, "q₁")?;
        let q = modulus.q();
        let mut scales = Vec::new();
        let mut sweeps = BTreeMap::new();
        for big_n in dyadic_scales(q) {
            let weights = WeightTable::new(big_n, q, 0);
            let dual = DualTables::new(&modulus, k1, big_n)?;
            let coeffs = Coefficients::new(&dual);
            for &eta in coeffs.levels.keys() {
                let level = coeffs.t - eta;
                if let std::collections::btree_map::Entry::Vacant(e) = sweeps.entry(level) {
                    e.insert(DirectSweep::new(group, level)?);
                }
            }
            scales.push((weights, dual, coeffs));
        }
        Ok(Self { k1, scales, sweeps })
    }

    pub fn divisor_constant(&self) -> f64 {
        self.scales.iter().map(|s| s.2.divisor_constant()).fold(0.0, f64::max)
    }

    pub fn verify(&self, group: &UnitGroup, table: &LValueTable, chi: &DirichletCharacter) -> Result<Prop31Record> {
        let modulus = *group.modulus();
        if !chi.is_primitive() {
            return Err(Error::Imprimitive {
                conductor_exp: chi.conductor_exp(),
                n: modulus.n(),
            });
        }
        let (p, q) = (modulus.p(), modulus.q());
        let q1 = p.pow(self.k1);
        let big_q1 = q / q1;
        let phi1 = phi_level(p, self.k1) as f64;
        let mut best: Option<(f64, f64, Complex64)> = None;
        let mut tie = false;
        let mut residual: f64 = 0.0;
        for (weights, _dual, coeffs) in &self.scales {
            let b = b_decomposition(group, chi, self.k1, weights)?;
            let main = coeffs.main_term(&self.sweeps, chi);
            let poisson = phi1 / b.big_n * b.diagonal
                + 2.0 * phi1 / (big_q1 as f64).sqrt() * (coeffs.constant + main).re;
            for alt in [b.classes, b.correlated, poisson] {
                residual = residual.max((alt - b.direct).abs() / q1 as f64);
            }
            match best {
                Some((_, bb, _)) if b.direct < bb * (1.0 - 1e-12) => {}
                Some((_, bb, _)) if b.direct <= bb * (1.0 + 1e-12) => tie = true,
                _ => {
                    best = Some((b.big_n, b.direct, main));
                    tie = false;
                }
            }
        }
        let (big_n, b_max, main) = best.expect("at least one scale");
        let s2 = short_second_moment(table, chi.index(), self.k1)?;
        let rhs = q1 as f64 * (1.0 + main.norm() / (big_q1 as f64).sqrt());
        let weyl_ratio = (q1.pow(3) >= q).then(|| s2 / (q_eps(q) * (q1 as f64 + (big_q1 as f64).sqrt())));
        Ok(Prop31Record {
            q,
            q1,
            char_index: chi.index(),
            big_n,
            tie,
            s2,
            b_max,
            main: (main.re, main.im),
            rhs,
            ratio: s2 / (rhs * q_eps(q)),
            identity_residual: residual,
            weyl_ratio,
        })
    }
}

/// Prop. 3.1 for every primitive character.
pub fn prop31_sweep(group: &UnitGroup, table: &LValueTable, k1: u32) -> Result<Vec<Prop31Record>> {
    let ctx = Prop31Context::new(group, k1)?;
    group
        .primitive_characters()
        .iter()
        .map(|chi| ctx.verify(group, table, chi))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop51Record {
    pub label: String,
    pub size: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs/(rhs·q^{0.1})`, zero for the empty set.
    pub ratio: f64,
}

/// `Σ_{ψ₂ ∈ Ψ} S₂(χψ₂)` against `(q₁ + q₁^{1/4}q₂^{1/4})|Ψ| + q^{1/2}|Ψ|^{1/2}`;
/// `psi` holds indices of characters modulo `q₂ = p^{k2}`.
pub fn verify_prop_51(table: &LValueTable, chi_index: u64, k1: u32, k2: u32, label: &str, psi: &[u64]) -> Result<Prop51Record> {
    let modulus = *table.modulus();
    check_k(&modulus, k1, "q₁")?;
    check_k(&modulus, k2, "q₂")?;
    if k1 > k2 {
        return Err(Error::HypothesisViolated("q₁ ≤ q₂ required".into()));
    }
    let (p, q) = (modulus.p() as f64, modulus.q() as f64);
    let (q1, q2) = (p.powi(k1 as i32), p.powi(k2 as i32));
    let mut lhs = 0.0;
    for &c in psi {
        lhs += short_second_moment(table, twist_index(&modulus, chi_index, k2, c), k1)?;
    }
    let size = psi.len() as f64;
    let rhs = (q1 + q1.powf(0.25) * q2.powf(0.25)) * size + q.sqrt() * size.sqrt();
    let ratio = if psi.is_empty() { 0.0 } else { lhs / (rhs * q_eps(modulus.q())) };
    Ok(Prop51Record {
        label: label.to_string(),
        size: psi.len(),
        lhs,
        rhs,
        ratio,
    })
}

/// Labelled test sets of characters modulo `p^{k2}`: empty, full, singletons,
/// parity classes, the quadratic coset of the `q₁`-characters, top-`k` by
/// `S₂(χψ₂)`, and seeded random subsets.
pub fn prop51_families(table: &LValueTable, chi_index: u64, k1: u32, k2: u32, seed: u64) -> Result<Vec<(String, Vec<u64>)>> {
    let modulus = *table.modulus();
    check_k(&modulus, k2, "q₂")?;
    let p = modulus.p();
    let phi2 = phi_level(p, k2);
    let all: Vec<u64> = (0..phi2).collect();
    let mut scored = Vec::with_capacity(all.len());
    for &c in &all {
        scored.push((short_second_moment(table, twist_index(&modulus, chi_index, k2, c), k1)?, c));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let top = |k: usize| -> Vec<u64> {
        let mut v: Vec<u64> = scored.iter().take(k).map(|s| s.1).collect();
        v.sort_unstable();
        v
    };
    let quadratic = phi2 / 2;
    let step = p.pow(k2 - k1);
    let level1: Vec<u64> = (0..phi_level(p, k1)).map(|b| b * step).collect();
    let mut families = vec![
        ("empty".to_string(), vec![]),
        ("full".to_string(), all.clone()),
        ("singleton_principal".to_string(), vec![0]),
        ("singleton_quadratic".to_string(), vec![quadratic]),
        ("singleton_max".to_string(), top(1)),
        ("singleton_min".to_string(), vec![scored.last().expect("nonempty").1]),
        ("even".to_string(), all.iter().copied().filter(|c| c % 2 == 0).collect()),
        ("odd".to_string(), all.iter().copied().filter(|c| c % 2 == 1).collect()),
        ("q1_subgroup".to_string(), level1.clone()),
        (
            "quadratic_coset".to_string(),
            level1.iter().map(|b| (b + quadratic) % phi2).collect(),
        ),
    ];
    for k in [5usize, 25, 100] {
        families.push((format!("top_{k}"), top(k.min(all.len()))));
    }
    let conjugate = |v: Vec<u64>| -> Vec<u64> {
        let mut c: Vec<u64> = v.iter().map(|x| (phi2 - x) % phi2).collect();
        c.sort_unstable();
        c
    };
    families.push(("conjugate_top_25".to_string(), conjugate(top(25.min(all.len())))));
    families.push(("conjugate_top_5".to_string(), conjugate(top(5.min(all.len())))));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for size in [3usize, 10, 30, 100, 243, 400] {
        let size = size.min(all.len());
        let mut v: Vec<u64> = all.choose_multiple(&mut rng, size).copied().collect();
        v.sort_unstable();
        families.push((format!("random_{size}"), v));
    }
    Ok(families)
}

/// Principal character excluded unless requested; `k ∈ {2, 4, 12}`.
pub fn moment(table: &LValueTable, k: u32, include_principal: bool) -> Result<f64> {
    if ![2, 4, 12].contains(&k) {
        return Err(Error::InvalidParameters(format!("moment exponent {k} not in {{2, 4, 12}}")));
    }
    let start = usize::from(!include_principal);
    Ok(table.values()[start..].iter().map(|v| v.norm().powi(k as i32)).sum())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub q: u64,
    pub characters: u64,
    pub second: f64,
    pub fourth: f64,
    pub twelfth: f64,
    pub max_abs: f64,
}

impl MomentRecord {
    pub fn new(table: &LValueTable, include_principal: bool) -> Result<Self> {
        let start = usize::from(!include_principal);
        Ok(Self {
            q: table.modulus().q(),
            characters: (table.values().len() - start) as u64,
            second: moment(table, 2, include_principal)?,
            fourth: moment(table, 4, include_principal)?,
            twelfth: moment(table, 12, include_principal)?,
            max_abs: table.values()[start..].iter().map(|v| v.norm()).fold(0.0, f64::max),
        })
    }

    pub fn get(&self, k: u32) -> f64 {
        match k {
            2 => self.second,
            4 => self.fourth,
            _ => self.twelfth,
        }
    }

    /// `moment/(q log⁴q)`.
    pub fn fourth_normalized(&self) -> f64 {
        let q = self.q as f64;
        self.fourth / (q * q.ln().powi(4))
    }
}

/// CSV with columns `q,k,moment,moment_over_q2`.
pub fn write_moment_csv<W: Write>(out: W, records: &[MomentRecord], k: u32) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "k", "moment", "moment_over_q2"]).map_err(|e| Error::Cache(e.to_string()))?;
    for r in records {
        let m = r.get(k);
        w.write_record([
            r.q.to_string(),
            k.to_string(),
            format!("{m:e}"),
            format!("{:e}", m / (r.q as f64).powi(2)),
        ])
        .map_err(|e| Error::Cache(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Cache(e.to_string()))
}

/// `[q^{1/8 − 0.05}, q^{1/6 + 0.05}]`.
pub fn range_of_interest(q: u64) -> (f64, f64) {
    let q = q as f64;
    (q.powf(0.125 - 0.05), q.powf(1.0 / 6.0 + 0.05))
}

/// `points` geometrically spaced values spanning the range of interest.
pub fn v_grid(q: u64, points: usize) -> Vec<f64> {
    let (lo, hi) = range_of_interest(q);
    let points = points.max(2);
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeValueRow {
    pub q: u64,
    pub v: f64,
    /// `|R(V;q)| = #{χ primitive : |L(½,χ)| > V}`.
    pub count: u64,
    pub in_range: bool,
    pub twelfth_normalized: f64,
    pub fourth_normalized: f64,
}

pub fn large_values(table: &LValueTable, grid: &[f64]) -> Vec<LargeValueRow> {
    let q = table.modulus().q();
    let (lo, hi) = range_of_interest(q);
    let mut abs: Vec<f64> = table.primitive_indices().map(|a| table.value(a).norm()).collect();
    abs.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&v| {
            let count = (abs.len() - abs.partition_point(|&x| x <= v)) as u64;
            LargeValueRow {
                q,
                v,
                count,
                in_range: v >= lo && v <= hi,
                twelfth_normalized: count as f64 * v.powi(12) / (q as f64).powf(2.0 + EPSILON),
                fourth_normalized: count as f64 * v.powi(4) / (q as f64).powf(1.0 + EPSILON),
            }
        })
        .collect()
}

/// Levels for the large-value argument at height `V`: `q₁ = p^{k1}` is the
/// power of `p` in `[V²q^{−0.3}, V²q^{−0.2}]` nearest to `V²q^{−0.05}`; when
/// the window holds no power of `p`, the power nearest to `V²q^{−0.05}`. Then
/// `k1` is clamped so that `p ≤ q₁` and `q₂ = q₁³ < q`.
pub fn choose_levels(p: u64, n: u32, v: f64) -> Option<(u32, u32, bool)> {
    let q = (p as f64).powi(n as i32);
    let lp = (p as f64).ln();
    let target = (v * v * q.powf(-0.05)).ln() / lp;
    let (wlo, whi) = ((v * v * q.powf(-0.3)).ln() / lp, (v * v * q.powf(-0.2)).ln() / lp);
    let in_window: Vec<i64> = (wlo.ceil() as i64..=whi.floor() as i64).collect();
    let (k, inside) = match in_window.last() {
        Some(&k) => (k, true),
        None => (target.round() as i64, false),
    };
    let max_k = (1..n).filter(|k| 3 * k < n).max()? as i64;
    let k = k.clamp(1, max_k) as u32;
    Some((k, 3 * k, inside))
}

/// The §6 double count at height `V` with `q₁ = p^{k1}`, `q₂ = p^{k2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bookkeeping {
    pub q: u64,
    pub q1: u64,
    pub q2: u64,
    pub v: f64,
    pub count: u64,
    /// `Σ*_χ |R₂(V;χ)|`.
    pub r2_total: u64,
    /// `|R| = φ(q₂)^{−1} Σ*|R₂|`, as an integer identity.
    pub identity_exact: bool,
    /// `q₂^{−1}Σ*|R₂| / |R|`, equal to `φ(q₂)/q₂` whenever `R` is non-empty.
    pub literal_ratio: Option<f64>,
    /// Over primitive `χ` with `R₂(V;χ) ≠ ∅`: both
    /// `|R₂| ≤ (V²φ(q₁))^{−1}Σ_{Ψ}S₂(χψ₂)` and `|Ψ| ≤ φ(q₁)|R₂|` hold.
    pub inequalities_hold: bool,
    pub max_r2: u64,
    pub max_psi: u64,
}

pub fn bookkeeping(table: &LValueTable, v: f64, k1: u32, k2: u32) -> Result<Bookkeeping> {
    let modulus = *table.modulus();
    check_k(&modulus, k1, "q₁")?;
    check_k(&modulus, k2, "q₂")?;
    if k1 > k2 {
        return Err(Error::HypothesisViolated("q₁ ≤ q₂ required".into()));
    }
    let p = modulus.p();
    let (phi1, phi2) = (phi_level(p, k1), phi_level(p, k2));
    let step = p.pow(k2 - k1);
    let primitive: Vec<u64> = table.primitive_indices().collect();
    let count = primitive.iter().filter(|&&a| table.value(a).norm() > v).count() as u64;
    let mut r2_total = 0;
    let mut inequalities_hold = true;
    let (mut max_r2, mut max_psi) = (0, 0);
    for &a in &primitive {
        let r2: Vec<u64> = (0..phi2)
            .filter(|&c| table.value(twist_index(&modulus, a, k2, c)).norm() > v)
            .collect();
        r2_total += r2.len() as u64;
        if r2.is_empty() {
            continue;
        }
        let mut psi: Vec<u64> = r2
            .iter()
            .flat_map(|c| (0..phi1).map(move |b| (c + phi2 - b * step % phi2) % phi2))
            .collect();
        psi.sort_unstable();
        psi.dedup();
        let mut s2_total = 0.0;
        for &c in &psi {
            s2_total += short_second_moment(table, twist_index(&modulus, a, k2, c), k1)?;
        }
        let bound = s2_total / (v * v * phi1 as f64);
        inequalities_hold &= r2.len() as f64 <= bound * (1.0 + 1e-12) && psi.len() as u64 <= phi1 * r2.len() as u64;
        max_r2 = max_r2.max(r2.len() as u64);
        max_psi = max_psi.max(psi.len() as u64);
    }
    Ok(Bookkeeping {
        q: modulus.q(),
        q1: p.pow(k1),
        q2: p.pow(k2),
        v,
        count,
        r2_total,
        identity_exact: r2_total == phi2 * count,
        literal_ratio: (count > 0).then(|| r2_total as f64 / p.pow(k2) as f64 / count as f64),
        inequalities_hold,
        max_r2,
        max_psi,
    })
}
