//! Result document and its JSON form.
//!
//! The emitter is hand-rolled so the byte layout is fully pinned: fixed key
//! order, no whitespace, and every float printed as `{:.16e}` (17 significant
//! digits, enough to reconstruct the exact f64). Equal runs produce equal
//! bytes.

use std::fmt::Write as _;

use crate::config::{BootstrapConfig, Method};

/// One input's row under one method.
#[derive(Clone, Debug)]
pub struct InputResult {
    pub name: String,
    pub estimate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// 1 = largest estimate; ties resolve by input order.
    pub rank: usize,
}

#[derive(Clone, Debug)]
pub struct MethodResult {
    pub method: Method,
    pub inputs: Vec<InputResult>,
}

/// Settings echoed back so a result file is self-describing.
#[derive(Clone, Debug)]
pub struct RunMeta {
    pub n: usize,
    pub d: usize,
    pub target: String,
    pub neighbors: usize,
    pub ann_epsilon: f64,
    pub seed: u64,
    pub renormalize: bool,
    pub bootstrap: Option<BootstrapConfig>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ResultDocument {
    pub meta: RunMeta,
    pub results: Vec<MethodResult>,
}

fn push_f64(out: &mut String, v: f64) {
    debug_assert!(v.is_finite(), "non-finite value in result document");
    let _ = write!(out, "{v:.16e}");
}

fn push_opt_f64(out: &mut String, v: Option<f64>) {
    match v {
        Some(v) => push_f64(out, v),
        None => out.push_str("null"),
    }
}

fn push_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

impl ResultDocument {
    pub fn to_json(&self) -> String {
        let mut out = String::with_capacity(4096);
        out.push_str("{\"meta\":{");
        let meta = &self.meta;
        let _ = write!(out, "\"n\":{},\"d\":{},", meta.n, meta.d);
        out.push_str("\"target\":");
        push_string(&mut out, &meta.target);
        let _ = write!(out, ",\"neighbors\":{},", meta.neighbors);
        out.push_str("\"ann_epsilon\":");
        push_f64(&mut out, meta.ann_epsilon);
        let _ = write!(out, ",\"seed\":{},", meta.seed);
        let _ = write!(out, "\"renormalize\":{},", meta.renormalize);
        out.push_str("\"bootstrap\":");
        match &meta.bootstrap {
            None => out.push_str("null"),
            Some(b) => {
                let _ = write!(out, "{{\"repetitions\":{},", b.repetitions);
                out.push_str("\"fraction\":");
                push_f64(&mut out, b.fraction);
                out.push_str(",\"quantiles\":[");
                push_f64(&mut out, b.quantiles.0);
                out.push(',');
                push_f64(&mut out, b.quantiles.1);
                let _ = write!(out, "],\"bias_correct\":{}}}", b.bias_correct);
            }
        }
        out.push_str(",\"warnings\":[");
        for (i, w) in meta.warnings.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_string(&mut out, w);
        }
        out.push_str("]},\"results\":[");
        for (i, result) in self.results.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str("{\"method\":");
            push_string(&mut out, result.method.name());
            out.push_str(",\"inputs\":[");
            for (j, input) in result.inputs.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str("{\"name\":");
                push_string(&mut out, &input.name);
                out.push_str(",\"estimate\":");
                push_f64(&mut out, input.estimate);
                out.push_str(",\"ci_low\":");
                push_opt_f64(&mut out, input.ci_low);
                out.push_str(",\"ci_high\":");
                push_opt_f64(&mut out, input.ci_high);
                let _ = write!(out, ",\"rank\":{}}}", input.rank);
            }
            out.push_str("]}");
        }
        out.push_str("]}");
        out.push('\n');
        out
    }
}
