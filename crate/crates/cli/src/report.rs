//! `report <dir>`: a plain-text view of a finished (or failed) run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::artifacts::{partial_name, REPORT};
use crate::run::{EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_PASS};

fn number(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.3e}"),
        None if v.is_null() => "nan".to_string(),
        None => v.to_string(),
    }
}

/// Render the report in `dir`. Returns the text and the run's exit code.
pub fn render(dir: &Path) -> Result<(String, i32), String> {
    let complete = dir.join(REPORT);
    let partial = dir.join(partial_name(REPORT));
    let (path, finished) = if complete.exists() {
        (complete, true)
    } else if partial.exists() {
        (partial, false)
    } else {
        return Err(format!("no {REPORT} in {}", dir.display()));
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let report: Value = serde_json::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))?;

    let mut out = String::new();
    let scenario = report["scenario"].as_str().unwrap_or("?");
    let command = report["command"].as_str().unwrap_or("?");
    let pass = report["pass"].as_bool().unwrap_or(false);
    let error = report["error"].as_str();
    let status = match (finished, error, pass) {
        (false, _, _) | (_, Some(_), _) => "ERROR",
        (true, None, true) => "PASS",
        (true, None, false) => "FAIL",
    };
    let _ = writeln!(out, "scenario  {scenario} ({command})");
    let _ = writeln!(
        out,
        "status    {status} in {:.2} s",
        report["wall_time_s"].as_f64().unwrap_or(f64::NAN)
    );
    if let Some(e) = error {
        let _ = writeln!(out, "error     {e}");
    }
    if !finished {
        let _ = writeln!(out, "note      run did not finish; artifacts carry a .partial suffix");
    }

    let empty = Vec::new();
    let checks = report["checks"].as_array().unwrap_or(&empty);
    if !checks.is_empty() {
        let width = checks
            .iter()
            .filter_map(|c| c["name"].as_str())
            .map(str::len)
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  {:<4}  {:>15}  {:>10}", "check", "ok", "worst_violation", "tolerance");
        for c in checks {
            let ok = if c["pass"].as_bool().unwrap_or(false) { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:<width$}  {ok:<4}  {:>15}  {:>10}",
                c["name"].as_str().unwrap_or("?"),
                number(&c["worst_violation"]),
                number(&c["tolerance"]),
            );
        }
    }
    if let Some(arts) = report["artifacts"].as_array() {
        let _ = writeln!(out);
        let _ = writeln!(out, "artifacts");
        for a in arts.iter().filter_map(Value::as_str) {
            let shown = if finished { a.to_string() } else { partial_name(a) };
            let _ = writeln!(out, "  {shown}");
        }
    }
    let code = match status {
        "PASS" => EXIT_PASS,
        "FAIL" => EXIT_CHECK_FAILED,
        _ => EXIT_ERROR,
    };
    Ok((out, code))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn write(dir: &Path, name: &str, v: Value) {
        fs::write(dir.join(name), serde_json::to_string(&v).unwrap()).unwrap();
    }

    #[test]
    fn renders_a_table_and_mirrors_the_status() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            REPORT,
            json!({
                "scenario": "s", "command": "simulate", "pass": false, "wall_time_s": 0.5,
                "checks": [
                    {"name": "box_invariant", "pass": true, "worst_violation": 0.0, "tolerance": 1e-6},
                    {"name": "convergence_w1", "pass": false, "worst_violation": 0.3, "tolerance": 0.05},
                ],
                "artifacts": ["d/trajectory.csv"],
            }),
        );
        let (text, code) = render(dir.path()).unwrap();
        assert_eq!(code, EXIT_CHECK_FAILED);
        assert!(text.contains("status    FAIL"), "{text}");
        assert!(text.lines().any(|l| l.starts_with("convergence_w1") && l.contains("FAIL")));
        assert!(text.contains("3.000e-1"));
    }

    #[test]
    fn partial_reports_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            &partial_name(REPORT),
            json!({"scenario": "s", "command": "simulate", "pass": false, "error": "boom", "checks": [], "artifacts": ["d/report.json"]}),
        );
        let (text, code) = render(dir.path()).unwrap();
        assert_eq!(code, EXIT_ERROR);
        assert!(text.contains("error     boom"));
        assert!(text.contains("d/report.json.partial"));
    }

    #[test]
    fn missing_report_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(render(dir.path()).is_err());
    }
}
