use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use padic_moments::characters::UnitGroup;
use padic_moments::lvalues::moments::dyadic_scales;
use padic_moments::lvalues::poisson::{kchi_row, poisson_step_check, PoissonCase};
use padic_moments::padic::{
    legendre, mul_mod, plog, psqrt, sqrt_one_plus_p_series, PadicResidue, SqrtBranch,
};
use padic_moments::phase::{bundled_suite, sum_direct, sum_stationary};
use padic_moments::tracefn::{
    kchi_closed, kchi_reduce, periodicity_check, product_modulus, product_sums_all, DirectSweep, Reduction,
    SplitTable,
};
use padic_moments::Error;

use crate::config::{ConfigError, RunConfig};
use crate::report::Case;

/// Pairs of unit classes beyond which the product sweep is sampled.
const PAIR_LIMIT: usize = 4096;

/// Characters times `p^{n−1}` beyond which Postnikov checks are sampled.
const POSTNIKOV_WORK: u64 = 4_000_000;

fn need_n(cfg: &RunConfig, min: u32, suite: &str) -> Result<(), ConfigError> {
    if cfg.n < min {
        return Err(ConfigError(format!("suite {suite} needs n ≥ {min}")));
    }
    Ok(())
}

fn group(cfg: &RunConfig) -> Result<UnitGroup, Error> {
    UnitGroup::load_or_build(cfg.modulus(), cfg.cache_dir.as_deref())
}

fn primitive_chi(cfg: &RunConfig, group: &UnitGroup) -> Result<padic_moments::characters::DirichletCharacter, ConfigError> {
    let chi = group.character(cfg.chi);
    if !chi.is_primitive() {
        return Err(ConfigError(format!("--chi {} is not primitive modulo {}", cfg.chi, cfg.modulus())));
    }
    Ok(chi)
}

pub enum Failure {
    Config(ConfigError),
    Runtime(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Homomorphism and square-root identities on seeded samples.
pub fn padic(cfg: &RunConfig) -> Result<Vec<Case>, Failure> {
    let (p, w) = (cfg.p, cfg.n);
    let q = cfg.modulus().q();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let branch = SqrtBranch::canonical(p)?;
    let mut cases = Vec::new();
    let one_plus = |z: u64| PadicResidue::from_u64((1 + mul_mod(p, z, q)) % q, p, w);
    for _ in 0..64 {
        let (x, y) = (rng.gen_range(0..q / p), rng.gen_range(0..q / p));
        let lhs = plog(&(one_plus(x) * one_plus(y)), w)?;
        let rhs = plog(&one_plus(x), w)? + plog(&one_plus(y), w)?;
        cases.push(Case::exact(json!({"check": "log_additive", "x": x, "y": y}), lhs == rhs));
    }
    for _ in 0..64 {
        let u = loop {
            let u = rng.gen_range(1..q);
            if u % p != 0 && legendre(u as i128, p) == 1 {
                break u;
            }
        };
        let r = psqrt(&PadicResidue::from_u64(u, p, w), &branch, w)?;
        cases.push(Case::exact(json!({"check": "sqrt_squares", "u": u}), (r * r).value() == u));
    }
    for x in 0..32.min(q / p) {
        let s = sqrt_one_plus_p_series(x, p, w);
        cases.push(Case::exact(
            json!({"check": "sqrt_series", "x": x}),
            (s * s).value() == (1 + mul_mod(p, x, q)) % q,
        ));
    }
    Ok(cases)
}

/// The bundled phase suite, closed form against direct summation.
pub fn stationary(cfg: &RunConfig) -> Result<Vec<Case>, Failure> {
    let q = cfg.modulus();
    let tol = cfg.tol.unwrap_or(1e-8) * (q.q() as f64).sqrt();
    bundled_suite(cfg.p)
        .par_iter()
        .map(|f| {
            let direct = sum_direct(f, &q);
            let closed = sum_stationary(f, &q)?;
            Ok(Case::new(json!({"phase": f.name(), "q": q.q()}), (closed.value - direct).norm(), tol))
        })
        .collect()
}

/// `K⁺ + K⁻` against the swept direct sums for every `(q̃, m)`, then the
/// values `K_χ(0, h; q̃)` from the reduction table.
pub fn kchi(cfg: &RunConfig) -> Result<Vec<Case>, Failure> {
    need_n(cfg, 3, "kchi")?;
    let g = group(cfg)?;
    let chi = primitive_chi(cfg, &g)?;
    let p = cfg.p;
    let tol = cfg.tol.unwrap_or(1e-8);
    let mut cases = Vec::new();
    for t in cfg.levels() {
        let qt = p.pow(t);
        let direct = DirectSweep::new(&g, t)?.values(&chi);
        for m in (1..qt).filter(|m| m % p != 0) {
            let closed = kchi_closed(&g, &chi, m as i64, t)?.total();
            cases.push(Case::new(json!({"qtilde": qt, "m": m}), (closed - direct[m as usize]).norm(), tol));
        }
        let root = (qt as f64).sqrt();
        for h in [0, p.pow(t - 1)] {
            let k0 = kchi_row(&g, &chi, h, cfg.n - t)?[0];
            let (expected, tag) = match kchi_reduce(0, h as i64, p, t) {
                Reduction::Full => (root * (1.0 - 1.0 / p as f64), "full"),
                Reduction::MinusOverP => (-root / p as f64, "minus_over_p"),
                other => unreachable!("{other:?}"),
            };
            cases.push(Case::new(
                json!({"qtilde": qt, "j": 0, "h": h, "case": tag}),
                (k0 - expected).norm(),
                tol,
            ));
        }
    }
    Ok(cases)
}

/// Periodicity, vanishing, the `Q = 1` indicator and `sup|sum|/√Q ≤ 4`
/// over pairs of unit classes `(A, A′) mod q̃`.
pub fn products(cfg: &RunConfig) -> Result<Vec<Case>, Failure> {
    need_n(cfg, 3, "products")?;
    let q = cfg.modulus();
    let p = cfg.p;
    let tol = cfg.tol.unwrap_or(1e-8);
    let mut cases = Vec::new();
    for t in cfg.levels() {
        let table = SplitTable::new(p, cfg.n, t)?;
        let qt = p.pow(t);
        let pairs = unit_pairs(qt, p, cfg.seed);
        let rows: Vec<Vec<Case>> = pairs
            .par_iter()
            .map(|&(a, a2)| {
                let mut rows = Vec::new();
                let big_q = product_modulus(&q, t, a, a2);
                for sign in [1i8, -1] {
                    let key = |check: &str| json!({"qtilde": qt, "a": a, "a_prime": a2, "sign": sign, "big_q": big_q, "check": check});
                    if big_q >= p {
                        let period = periodicity_check(&table, a, a2, sign, tol);
                        rows.push(Case::exact(key("periodic"), big_q % period == 0));
                    } else {
                        let class = (table.class(a), table.class(a2));
                        let s = usize::from(sign < 0);
                        let worst = (1..qt)
                            .filter(|m| m % p != 0)
                            .map(|m| {
                                let term = table.split(&class.0, m)[s] * table.split(&class.1, m)[s].conj();
                                let want = if legendre((a * m) as i128, p) == 1 { 1.0 } else { 0.0 };
                                (term.re - want).hypot(term.im)
                            })
                            .fold(0.0, f64::max);
                        rows.push(Case::new(key("indicator"), worst, tol));
                    }
                    let sums = product_sums_all(&table, &q, a, a2, sign);
                    if big_q >= p * p {
                        let worst = sums.iter().step_by(p as usize).map(|z| z.norm()).fold(0.0, f64::max);
                        rows.push(Case::new(key("vanishing"), worst, tol));
                    }
                    let sup = sums.iter().map(|z| z.norm()).fold(0.0, f64::max) / (big_q as f64).sqrt();
                    rows.push(Case::new(key("sup_over_sqrt_q"), sup, 4.0));
                }
                rows
            })
            .collect();
        cases.extend(rows.into_iter().flatten());
    }
    Ok(cases)
}

/// Every pair of units mod `q̃`, or a seeded sample of `PAIR_LIMIT` of them.
pub fn unit_pairs(qt: u64, p: u64, seed: u64) -> Vec<(u64, u64)> {
    let units: Vec<u64> = (1..qt).filter(|u| u % p != 0).collect();
    if units.len() * units.len() <= PAIR_LIMIT {
        return units.iter().flat_map(|&a| units.iter().map(move |&b| (a, b))).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(u64, u64)> = (0..PAIR_LIMIT)
        .map(|_| (units[rng.gen_range(0..units.len())], units[rng.gen_range(0..units.len())]))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// `S_{hq₁}(N;χ)` directly and through the dual sum, over every `q₁` (or the
/// selected one), dyadic `N` and `h` with overlapping supports.
pub fn poisson(cfg: &RunConfig) -> Result<Vec<Case>, Failure> {
    need_n(cfg, 2, "poisson")?;
    let g = group(cfg)?;
    let chi = primitive_chi(cfg, &g)?;
    let tol = cfg.tol.unwrap_or(1e-6);
    let q = cfg.modulus().q();
    let levels: Vec<u32> = match cfg.k1 {
        Some(k) => vec![k],
        None => (1..cfg.n).collect(),
    };
    let mut work = Vec::new();
    for &k1 in &levels {
        let q1 = cfg.p.pow(k1) as f64;
        for big_n in dyadic_scales(q) {
            let mut h = 0u64;
            while (h as f64) * q1 < 1.5 * big_n + q1 {
                work.push(PoissonCase { k1, big_n, h });
                h += 1;
            }
        }
    }
    work.par_iter()
        .map(|case| {
            let c = poisson_step_check(&g, &chi, case)?;
            Ok(Case::new(
                json!({"q1": c.q1, "big_n": c.big_n, "h": c.h, "char": c.char_index, "cutoff": c.cutoff}),
                c.residual,
                tol * c.big_n,
            ))
        })
        .collect()
}

/// `A = aκ` checked at every `k`, unit-ness, and uniqueness by exhaustive
/// search for `n ≤ 4`; characters are strided when the work is large.
pub fn postnikov(cfg: &RunConfig) -> Result<Vec<Case>, Failure> {
    need_n(cfg, 2, "postnikov")?;
    let g = group(cfg)?;
    let p = cfg.p;
    let pn1 = cfg.modulus().q() / p;
    let mut cases = vec![Case::exact(json!({"check": "structure"}), g.verify_postnikov_structure().is_ok())];
    let primitive = g.primitive_characters();
    let stride = ((primitive.len() as u64 * pn1) / POSTNIKOV_WORK + 1) as usize;
    for chi in primitive.iter().step_by(stride) {
        let a = g.postnikov_candidate(chi)?;
        let verified = g.verify_postnikov(chi, a).is_ok();
        let unique = cfg.n > 4 || g.postnikov_solutions_brute(chi) == [a];
        cases.push(Case::exact(
            json!({"char": chi.index(), "A": a, "modulus": pn1}),
            verified && unique && a % p != 0,
        ));
    }
    Ok(cases)
}
