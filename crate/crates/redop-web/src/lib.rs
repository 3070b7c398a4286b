//! Browser bindings: each entry point takes the text of a problem file and
//! returns the JSON report of one command.

use redop_core::problem::parse_problem;
use redop_core::report::{to_json, Command};
use redop_core::run::{run_report, RunOptions};
use redop_core::singularity::ReducedXi;
use wasm_bindgen::prelude::*;

fn parse_xi(xi: &str) -> Result<Option<ReducedXi>, String> {
    match xi.trim() {
        "" => Ok(None),
        "0" => Ok(Some(ReducedXi::Zero)),
        "u" => Ok(Some(ReducedXi::U)),
        other => Err(format!("xi must be 0 or u, not {other:?}")),
    }
}

fn non_empty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

/// Runs `command` on the problem text and renders the report as JSON.
pub fn report_json(problem: &str, command: Command, opts: &RunOptions) -> Result<String, String> {
    let problem = parse_problem(problem).map_err(|e| e.to_string())?;
    let report = run_report(&problem, &[command], opts).map_err(|e| e.to_string())?;
    Ok(to_json(&report))
}

/// Strong and weak co-orders of the named field.
#[wasm_bindgen]
pub fn coorder(problem: &str, field: &str) -> Result<String, JsError> {
    let opts = RunOptions {
        field: non_empty(field),
        ..RunOptions::default()
    };
    report_json(problem, Command::Coorder, &opts).map_err(|e| JsError::new(&e))
}

/// Determining equation(s) of the reduced-form set with the given `xi`
/// (`"0"`, `"u"`, or empty for `0`).
#[wasm_bindgen]
pub fn detsys(problem: &str, xi: &str) -> Result<String, JsError> {
    let opts = RunOptions {
        xi: parse_xi(xi).map_err(|e| JsError::new(&e))?,
        ..RunOptions::default()
    };
    report_json(problem, Command::Detsys, &opts).map_err(|e| JsError::new(&e))
}

/// Family/operator correspondence and transformation checks for the
/// named family.
#[wasm_bindgen]
pub fn bijection(problem: &str, family: &str, xi: &str) -> Result<String, JsError> {
    let opts = RunOptions {
        family: non_empty(family),
        xi: parse_xi(xi).map_err(|e| JsError::new(&e))?,
        ..RunOptions::default()
    };
    report_json(problem, Command::Bijection, &opts).map_err(|e| JsError::new(&e))
}
