//! Echo adapter for the external abstractor protocol: answers each request
//! with its sentences joined by spaces and cut to the token budget.

use std::io::{self, BufRead, Write};

use reflect_core::abstractor::PROTOCOL;
use serde_json::{json, Value};

fn respond(line: &str) -> Value {
    let req: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return json!({ "id": "", "error": format!("malformed request: {e}") }),
    };
    let id = req
        .get("id")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let sentences = req
        .get("sentences")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(|s| s.as_str()).collect::<Option<Vec<&str>>>());
    let budget = req.get("budget").and_then(Value::as_u64).filter(|&b| b > 0);
    match (sentences, budget) {
        (Some(sentences), Some(budget)) => {
            let joined = sentences.join(" ");
            let summary: Vec<&str> = joined.split_whitespace().take(budget as usize).collect();
            json!({ "id": id, "summary": summary.join(" ") })
        }
        _ => {
            json!({ "id": id, "error": "request needs `sentences` (strings) and a positive `budget`" })
        }
    }
}

fn main() -> io::Result<()> {
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    writeln!(out, "{}", json!({ "protocol": PROTOCOL }))?;
    out.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(out, "{}", respond(&line))?;
        out.flush()?;
    }
    Ok(())
}
