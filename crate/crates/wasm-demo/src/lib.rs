//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes text and returns a JSON string; errors become JS
//! exceptions. The `*_json` functions hold the logic so they run natively too.

use lpwp_core::canonical::canonicalize;
use lpwp_core::dataset::appendix_corpus;
use lpwp_core::ir::parse_ir;
use lpwp_core::solver::{solve_canonical, SolveStatus};
use lpwp_core::suggest::{suggest_declarations, tag_entities};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Entities and one suggestion per prompt.
pub fn analyze_json(description: &str) -> Result<Value, String> {
    let entities = tag_entities(description);
    let suggestions = suggest_declarations(description, &entities).unwrap_or_default();
    let suggestions: Vec<Value> = suggestions
        .iter()
        .map(|s| match &s.outcome {
            Ok(g) => json!({ "index": s.index, "source": s.source, "ir": g.ir }),
            Err(f) => json!({ "index": s.index, "source": s.source, "error": f.reason }),
        })
        .collect();
    Ok(json!({ "entities": entities, "suggestions": suggestions }))
}

fn document(ir: &str) -> Result<lpwp_core::IrDocument, String> {
    let parsed = parse_ir(ir).map_err(|e| e.to_string())?;
    parsed.into_complete().map_err(|e| e.to_string())
}

pub fn canonical_json(ir: &str) -> Result<Value, String> {
    let form = canonicalize(&document(ir)?).map_err(|e| e.to_string())?;
    Ok(json!({ "table": form.table(), "form": form }))
}

pub fn solve_json(ir: &str) -> Result<Value, String> {
    let doc = document(ir)?;
    let form = canonicalize(&doc).map_err(|e| e.to_string())?;
    let sol = solve_canonical(&form, true).map_err(|e| e.to_string())?;
    // conflicting rows point back at their constraint's CONST_DIR
    let constraints: Vec<_> = doc.constraints().collect();
    let conflicts: Vec<Value> = sol
        .infeasible_rows
        .iter()
        .map(|&r| json!({ "row": r, "const_dir": constraints[r].const_dir, "kind": constraints[r].kind() }))
        .collect();
    let values: Vec<Value> = form
        .variables
        .iter()
        .zip(&sol.x)
        .map(|(name, v)| json!({ "variable": name, "value": v }))
        .collect();
    Ok(json!({
        "status": sol.status,
        "objective": sol.objective,
        "values": values,
        "conflicts": conflicts,
        "unbounded": sol.status == SolveStatus::Unbounded,
    }))
}

pub fn examples_json() -> Value {
    let list: Vec<Value> = appendix_corpus()
        .records
        .iter()
        .map(|r| json!({ "id": r.id, "description": r.description }))
        .collect();
    Value::Array(list)
}

fn export(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(description: &str) -> Result<String, JsError> {
    export(analyze_json(description))
}

#[wasm_bindgen]
pub fn canonical(ir: &str) -> Result<String, JsError> {
    export(canonical_json(ir))
}

#[wasm_bindgen]
pub fn solve(ir: &str) -> Result<String, JsError> {
    export(solve_json(ir))
}

#[wasm_bindgen]
pub fn examples() -> String {
    examples_json().to_string()
}
