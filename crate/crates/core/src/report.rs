//! JSON and CSV report files. Reports carry no timestamps so identical
//! inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::Result;
use crate::pipeline::{Session, StageReport};

pub fn stage_json(session: &Session, report: &StageReport) -> Value {
    json!({
        "stage": report.stage,
        "config": session.cfg.name,
        "config_hash": session.cfg.hash(),
        "seed": session.cfg.seed,
        "tolerances": session.tol,
        "pass": report.pass(),
        "checks": report.checks,
        "warnings": report.warnings,
        "tables": report.tables.iter().map(|t| format!("tables/{}", t.file)).collect::<Vec<_>>(),
        "result": report.result,
    })
}

/// Writes `<stage>.json` and the stage tables under `tables/`.
pub fn write_stage(out: &Path, session: &Session, report: &StageReport) -> Result<PathBuf> {
    let tables = out.join("tables");
    fs::create_dir_all(&tables)?;
    for t in &report.tables {
        fs::write(tables.join(&t.file), t.bytes())?;
    }
    let path = out.join(format!("{}.json", report.stage));
    fs::write(&path, pretty(&stage_json(session, report)))?;
    Ok(path)
}

pub fn write_summary(out: &Path, session: &Session, reports: &[StageReport]) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let stages: serde_json::Map<String, Value> = reports
        .iter()
        .map(|r| (r.stage.clone(), json!({ "pass": r.pass(), "checks": r.checks })))
        .collect();
    let summary = json!({
        "config": session.cfg.name,
        "config_hash": session.cfg.hash(),
        "seed": session.cfg.seed,
        "tolerances": session.tol,
        "pass": reports.iter().all(|r| r.pass()),
        "stages": stages,
    });
    let path = out.join("summary.json");
    fs::write(&path, pretty(&summary))?;
    Ok(path)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
