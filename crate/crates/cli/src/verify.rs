use micellar_core::verify::{structural_suite, Check};

use crate::Failure;

/// Runs the structural suite and renders it as a table or as JSON.
pub fn verify(json: bool, inject_mismatch: bool) -> Result<(bool, String), Failure> {
    let checks = structural_suite(inject_mismatch)?;
    let ok = checks.iter().all(|c| c.passed);
    let text = if json {
        serde_json::to_string_pretty(&serde_json::json!({ "passed": ok, "checks": checks }))
            .map_err(|e| Failure::Runtime(e.to_string()))?
    } else {
        table(&checks, ok)
    };
    Ok((ok, text))
}

fn table(checks: &[Check], ok: bool) -> String {
    let mut out = format!("{:<28} {:>12} {:>10}  result\n", "check", "value", "tolerance");
    for c in checks {
        out += &format!(
            "{:<28} {:>12.3e} {:>10.1e}  {}\n",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    out += if ok { "all checks passed\n" } else { "some checks failed\n" };
    out
}
