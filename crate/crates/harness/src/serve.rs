//! Newline-delimited JSON evaluation protocol.
//!
//! Each request line yields exactly one response line. Requests:
//!
//! ```text
//! {"op":"settings","problem":1}
//! {"op":"evaluate","problem":1,"X":[[...32 ints...]],"seed":7,"raw":false,"perturb":true}
//! ```
//!
//! An `"id"` member of a request is echoed in its response. Failures are
//! reported as `{"error": kind, "message": ...}` with kind one of `parse`,
//! `bad_request`, `unknown_op`, `unknown_problem`, `evaluation`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, ToSocketAddrs};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use segbench_core::encoding::{bounds, Genotype};
use segbench_core::lut::NoiseSource;
use segbench_core::moea::population_size;
use segbench_core::problems::{evaluate_batch, get_problem, Evaluators, ProblemInstance};

/// Upper limit on a single request line.
pub const MAX_LINE_BYTES: usize = 64 << 20;

pub struct Server<'a> {
    evaluators: &'a Evaluators,
    /// Default for requests without a `perturb` member.
    perturbation: bool,
}

fn error(kind: &str, message: impl Into<String>) -> Value {
    json!({"error": kind, "message": message.into()})
}

impl<'a> Server<'a> {
    pub fn new(evaluators: &'a Evaluators, perturbation: bool) -> Self {
        Self { evaluators, perturbation }
    }

    /// Answers one request line.
    pub fn handle_line(&self, line: &[u8]) -> Value {
        let text = String::from_utf8_lossy(line);
        let request: Value = match serde_json::from_str(text.trim()) {
            Ok(v) => v,
            Err(e) => return error("parse", e.to_string()),
        };
        let Some(obj) = request.as_object() else {
            return error("bad_request", "request must be a JSON object");
        };
        let mut response = match obj.get("op").and_then(Value::as_str) {
            Some("settings") => self.settings(obj),
            Some("evaluate") => self.evaluate(obj),
            Some(other) => json!({"error": "unknown_op", "message": format!("unknown op {other:?}")}),
            None => json!({"error": "unknown_op", "message": "missing string member \"op\""}),
        };
        if let (Some(id), Some(map)) = (obj.get("id"), response.as_object_mut()) {
            map.insert("id".into(), id.clone());
        }
        response
    }

    fn problem(&self, obj: &Map<String, Value>) -> Result<ProblemInstance, Value> {
        let id = obj
            .get("problem")
            .and_then(Value::as_u64)
            .ok_or_else(|| error("bad_request", "missing integer member \"problem\""))?;
        let p = get_problem(id as usize).map_err(|e| error("unknown_problem", e.to_string()))?;
        let perturb = match obj.get("perturb") {
            None | Some(Value::Null) => self.perturbation,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(error("bad_request", "\"perturb\" must be a boolean")),
        };
        Ok(p.with_perturbation(perturb))
    }

    fn settings(&self, obj: &Map<String, Value>) -> Value {
        let p = match self.problem(obj) {
            Ok(p) => p,
            Err(e) => return e,
        };
        let (lower, upper) = bounds();
        let n = population_size(p.num_objectives).map(|s| s.n).unwrap_or(0);
        json!({
            "problem": p.id,
            "name": p.name(),
            "D": p.dim,
            "M": p.num_objectives,
            "lower": lower,
            "upper": upper,
            "objectives": p.objective_kinds().iter().map(|o| o.name()).collect::<Vec<_>>(),
            "bounds": p.bounds(),
            "N_population": n,
            "perturbation": p.perturbation,
        })
    }

    /// Row `i` is evaluated with the `i`-th noise stream of `seed`, so a
    /// fully valid batch matches an in-process `evaluate_batch` call.
    fn evaluate(&self, obj: &Map<String, Value>) -> Value {
        let p = match self.problem(obj) {
            Ok(p) => p,
            Err(e) => return e,
        };
        let Some(rows) = obj.get("X").and_then(Value::as_array) else {
            return error("bad_request", "missing array member \"X\"");
        };
        let seed = match obj.get("seed") {
            None | Some(Value::Null) => 0,
            Some(v) => match v.as_u64() {
                Some(s) => s,
                None => return error("bad_request", "\"seed\" must be a non-negative integer"),
            },
        };
        let raw = matches!(obj.get("raw"), Some(Value::Bool(true)));
        let mut noise = NoiseSource::new(seed);
        let mut f = Vec::with_capacity(rows.len());
        let mut errors = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            match parse_row(row) {
                Ok(g) => match evaluate_batch(&p, &[g], self.evaluators, &mut noise) {
                    Ok(mut out) => {
                        let v = out.pop().expect("one row in, one row out");
                        f.push(json!(if raw { v.raw } else { v.normalized }));
                    }
                    Err(e) => return error("evaluation", e.to_string()),
                },
                Err(message) => {
                    // keep later rows on their own noise streams
                    noise.next_rng();
                    f.push(Value::Null);
                    errors.push(json!({"error": "invalid", "index": i, "message": message}));
                }
            }
        }
        let mut out = json!({"F": f});
        if !errors.is_empty() {
            out["errors"] = Value::Array(errors);
        }
        out
    }

    /// Serves requests from `input` until end of stream.
    pub fn serve_stream<R: BufRead, W: Write>(&self, mut input: R, mut output: W) -> std::io::Result<()> {
        let mut line = Vec::new();
        loop {
            line.clear();
            let n = read_line_limited(&mut input, &mut line)?;
            if n == 0 {
                return Ok(());
            }
            let response = if line.len() > MAX_LINE_BYTES {
                error("bad_request", format!("request exceeds {MAX_LINE_BYTES} bytes"))
            } else {
                self.handle_line(&line)
            };
            serde_json::to_writer(&mut output, &response)?;
            output.write_all(b"\n")?;
            output.flush()?;
        }
    }

    /// Accepts TCP connections one at a time; calls `ready` with the bound
    /// address before the first accept.
    pub fn serve_tcp<A: ToSocketAddrs>(&self, addr: A, ready: impl FnOnce(std::net::SocketAddr)) -> Result<()> {
        let listener = TcpListener::bind(addr).context("binding the protocol socket")?;
        ready(listener.local_addr()?);
        for stream in listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let reader = match stream.try_clone() {
                Ok(r) => BufReader::new(r),
                Err(_) => continue,
            };
            // a dropped client only ends its own session
            let _ = self.serve_stream(reader, &stream);
        }
        Ok(())
    }
}

/// Reads through the next newline, keeping at most `MAX_LINE_BYTES + 1`
/// bytes of it. Returns the number of bytes consumed.
fn read_line_limited<R: BufRead>(input: &mut R, line: &mut Vec<u8>) -> std::io::Result<usize> {
    let mut consumed = 0;
    loop {
        let buf = input.fill_buf()?;
        if buf.is_empty() {
            return Ok(consumed);
        }
        let (chunk, done) = match buf.iter().position(|&b| b == b'\n') {
            Some(i) => (&buf[..i], i + 1),
            None => (buf, buf.len()),
        };
        let room = (MAX_LINE_BYTES + 1).saturating_sub(line.len());
        line.extend_from_slice(&chunk[..chunk.len().min(room)]);
        let found_newline = done > chunk.len();
        input.consume(done);
        consumed += done;
        if found_newline {
            return Ok(consumed);
        }
    }
}

fn parse_row(row: &Value) -> Result<Genotype, String> {
    let Some(items) = row.as_array() else {
        return Err("row must be an array of integers".into());
    };
    let genes: Vec<i64> = items
        .iter()
        .map(|v| match v {
            Value::Number(n) => n.as_i64().or_else(|| {
                n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e15).map(|f| f as i64)
            }),
            _ => None,
        })
        .collect::<Option<_>>()
        .ok_or_else(|| "row must contain only integers".to_string())?;
    Genotype::from_slice(&genes).map_err(|e| e.to_string())
}
