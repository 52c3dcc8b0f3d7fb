use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

/// One checked quantity: passes when `residual ≤ tolerance`.
#[derive(Debug, Clone)]
pub struct Case {
    pub case: Value,
    pub residual: f64,
    pub tolerance: f64,
}

impl Case {
    pub fn new(case: Value, residual: f64, tolerance: f64) -> Self {
        Self { case, residual, tolerance }
    }

    /// Exact checks: residual 0 on success, 1 on failure.
    pub fn exact(case: Value, ok: bool) -> Self {
        Self::new(case, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// JSON lines: one object per case, then a summary object.
pub fn render(suite: &str, cases: &[Case]) -> String {
    let mut out = String::new();
    let mut failures = 0;
    let mut max_excess: f64 = 0.0;
    for c in cases {
        if !c.pass() {
            failures += 1;
        }
        if c.tolerance > 0.0 {
            max_excess = max_excess.max(c.residual / c.tolerance);
        }
        let line = json!({
            "suite": suite,
            "case": c.case,
            "residual": c.residual,
            "tolerance": c.tolerance,
            "pass": c.pass(),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    let summary = json!({
        "suite": suite,
        "summary": true,
        "cases": cases.len(),
        "failures": failures,
        "max_residual_over_tolerance": max_excess,
        "pass": failures == 0,
    });
    out.push_str(&summary.to_string());
    out.push('\n');
    out
}

/// Writes to `dir/name` when an output directory is given, else to stdout.
pub fn emit(dir: Option<&Path>, name: &str, text: &str) -> std::io::Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)
        }
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}
