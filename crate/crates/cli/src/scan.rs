use serde::Serialize;

use padic_moments::characters::UnitGroup;
use padic_moments::lvalues::moments::{bookkeeping, large_values, v_grid, write_moment_csv, MomentRecord};
use padic_moments::lvalues::store::LValueStore;
use padic_moments::lvalues::{LValueTable, Method};
use padic_moments::padic::PrimePowerModulus;
use padic_moments::tracefn::{product_modulus, product_sums_all, SplitTable};
use padic_moments::Error;

use crate::config::RunConfig;
use crate::verify::{unit_pairs, Failure};

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Cache(e.to_string())
}

/// Central values, through the JSON-lines store when a cache directory is set.
fn table(modulus: PrimePowerModulus, cfg: &RunConfig, store: &mut Option<LValueStore>) -> Result<LValueTable, Error> {
    let group = UnitGroup::load_or_build(modulus, cfg.cache_dir.as_deref())?;
    match store {
        Some(s) => s.table(&group, Method::Hurwitz),
        None => Ok(LValueTable::compute(&group, Method::Hurwitz)),
    }
}

fn open_store(cfg: &RunConfig) -> Result<Option<LValueStore>, Error> {
    cfg.cache_dir
        .as_deref()
        .map(|dir| LValueStore::open(&dir.join("lvalues.jsonl")))
        .transpose()
}

/// `k`-th moments over non-principal characters for `p^{nmin}, …, p^{nmax}`.
pub fn moments(cfg: &RunConfig, nmin: u32, k: u32) -> Result<String, Failure> {
    let mut store = open_store(cfg)?;
    let mut records = Vec::new();
    for n in nmin..=cfg.n {
        let modulus = PrimePowerModulus::new(cfg.p, n)?;
        records.push(MomentRecord::new(&table(modulus, cfg, &mut store)?, false)?);
    }
    let mut out = Vec::new();
    write_moment_csv(&mut out, &records, k)?;
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct CountRow {
    q: u64,
    v: f64,
    count: u64,
    in_range: bool,
    twelfth_normalized: f64,
    fourth_normalized: f64,
    q1: Option<u64>,
    q2: Option<u64>,
    r2_total: Option<u64>,
    identity_exact: Option<bool>,
    inequalities_hold: Option<bool>,
}

/// `|R(V;q)|` on a geometric grid of `points` values across the range of
/// interest; with `--q1` and `--q2` also the double count `Σ*|R₂(V;χ)|`.
pub fn large_value_counts(cfg: &RunConfig, points: usize) -> Result<String, Failure> {
    let mut store = open_store(cfg)?;
    let t = table(cfg.modulus(), cfg, &mut store)?;
    let rows = large_values(&t, &v_grid(cfg.modulus().q(), points));
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        let book = match (cfg.k1, cfg.k2) {
            (Some(k1), Some(k2)) => Some(bookkeeping(&t, row.v, k1, k2)?),
            _ => None,
        };
        w.serialize(CountRow {
            q: row.q,
            v: row.v,
            count: row.count,
            in_range: row.in_range,
            twelfth_normalized: row.twelfth_normalized,
            fourth_normalized: row.fourth_normalized,
            q1: book.as_ref().map(|b| b.q1),
            q2: book.as_ref().map(|b| b.q2),
            r2_total: book.as_ref().map(|b| b.r2_total),
            identity_exact: book.as_ref().map(|b| b.identity_exact),
            inequalities_hold: book.as_ref().map(|b| b.inequalities_hold),
        })
        .map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(csv_err)?).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct ProductRow {
    qtilde: u64,
    a: u64,
    a_prime: u64,
    sign: i8,
    big_q: u64,
    sup_abs: f64,
    sup_over_sqrt_q: f64,
}

/// `sup_v |Σ*_u K^±K̄^±(u) e(−uv/Q)|/√Q` per pair of unit classes.
pub fn product_constants(cfg: &RunConfig) -> Result<String, Failure> {
    let q = cfg.modulus();
    let mut w = csv::Writer::from_writer(Vec::new());
    if cfg.n < 3 {
        return Err(Failure::Config(crate::config::ConfigError("scan product-constants needs n ≥ 3".into())));
    }
    for t in cfg.levels() {
        let table = SplitTable::new(cfg.p, cfg.n, t)?;
        let qt = cfg.p.pow(t);
        for (a, a2) in unit_pairs(qt, cfg.p, cfg.seed) {
            let big_q = product_modulus(&q, t, a, a2);
            for sign in [1i8, -1] {
                let sup = product_sums_all(&table, &q, a, a2, sign)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                w.serialize(ProductRow {
                    qtilde: qt,
                    a,
                    a_prime: a2,
                    sign,
                    big_q,
                    sup_abs: sup,
                    sup_over_sqrt_q: sup / (big_q as f64).sqrt(),
                })
                .map_err(csv_err)?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(csv_err)?).expect("csv is utf-8"))
}
