//! Static SVG bar chart of the shares: one group of bars per input, one bar
//! per method, confidence whiskers when the run bootstrapped, and a dotted
//! reference line at the uniform share 1/d.
//!
//! Coordinates are formatted with two decimals so equal documents render to
//! equal bytes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::Method;
use crate::report::ResultDocument;

#[derive(Debug, Error)]
#[error("svg: nothing to draw (document has no methods)")]
pub struct EmptyDocument;

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 18.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 46.0;
const PLOT_HEIGHT: f64 = 300.0;
const BAR_WIDTH: f64 = 24.0;
const BAR_GAP: f64 = 5.0;
const GROUP_GAP: f64 = 26.0;

fn color(method: Method) -> &'static str {
    match method {
        Method::Shapley => "#4878a8",
        Method::Pme => "#e49444",
        Method::TotalSobol => "#6a9f58",
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Snap to the output grid so adjacent shapes (bar tops, the zero axis)
/// share coordinates exactly after formatting.
fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Renders the document to a standalone SVG string.
pub fn render(doc: &ResultDocument) -> Result<String, EmptyDocument> {
    if doc.results.is_empty() || doc.results.iter().all(|r| r.inputs.is_empty()) {
        return Err(EmptyDocument);
    }
    let methods = doc.results.len();
    let names: Vec<&str> = doc.results[0]
        .inputs
        .iter()
        .map(|i| i.name.as_str())
        .collect();
    let d = names.len();
    let uniform = 1.0 / d as f64;

    let mut lo = 0.0f64;
    let mut hi = uniform;
    for result in &doc.results {
        for input in &result.inputs {
            lo = lo.min(input.estimate).min(input.ci_low.unwrap_or(0.0));
            hi = hi.max(input.estimate).max(input.ci_high.unwrap_or(0.0));
        }
    }
    let span = (hi - lo).max(1e-9);
    hi += 0.06 * span;
    if lo < 0.0 {
        lo -= 0.06 * span;
    }
    let y = |v: f64| MARGIN_TOP + (hi - v) / (hi - lo) * PLOT_HEIGHT;

    let group_width = methods as f64 * BAR_WIDTH + (methods as f64 - 1.0) * BAR_GAP;
    let plot_width = d as f64 * (group_width + GROUP_GAP);
    let width = MARGIN_LEFT + plot_width + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let group_x = |i: usize| MARGIN_LEFT + GROUP_GAP / 2.0 + i as f64 * (group_width + GROUP_GAP);

    let mut out = String::with_capacity(8192);
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n",
        fmt(width),
        fmt(height)
    );
    let _ = write!(
        out,
        "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        fmt(width),
        fmt(height)
    );

    // Axis ticks and grid.
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let ty = y(v);
        let _ = write!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(ty),
            fmt(width - MARGIN_RIGHT),
            fmt(ty)
        );
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"#444444\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(ty + 4.0),
            fmt(v)
        );
    }

    // Reference line at the uniform share.
    let uy = y(uniform);
    let _ = write!(
        out,
        "<line class=\"reference\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" \
         stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(uy),
        fmt(width - MARGIN_RIGHT),
        fmt(uy)
    );
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" fill=\"#888888\">1/d</text>\n",
        fmt(width - MARGIN_RIGHT - 22.0),
        fmt(uy - 4.0)
    );

    // Bars and whiskers.
    for (m, result) in doc.results.iter().enumerate() {
        let fill = color(result.method);
        for (i, input) in result.inputs.iter().enumerate() {
            let x = group_x(i) + m as f64 * (BAR_WIDTH + BAR_GAP);
            let v = input.estimate;
            let (top, bottom) = if v >= 0.0 { (y(v), y(0.0)) } else { (y(0.0), y(v)) };
            let (top, bottom) = (round2(top), round2(bottom));
            let _ = write!(
                out,
                "<rect class=\"bar\" data-method=\"{}\" data-input=\"{}\" \
                 x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                result.method.name(),
                input.name,
                fmt(x),
                fmt(top),
                fmt(BAR_WIDTH),
                fmt(bottom - top),
                fill
            );
            if let (Some(cl), Some(ch)) = (input.ci_low, input.ci_high) {
                let cx = x + BAR_WIDTH / 2.0;
                let (y_hi, y_lo) = (y(ch), y(cl));
                let _ = write!(
                    out,
                    "<line class=\"whisker\" x1=\"{cx}\" y1=\"{y1}\" x2=\"{cx}\" y2=\"{y2}\" \
                     stroke=\"#333333\"/>\n",
                    cx = fmt(cx),
                    y1 = fmt(y_hi),
                    y2 = fmt(y_lo)
                );
                for wy in [y_hi, y_lo] {
                    let _ = write!(
                        out,
                        "<line class=\"whisker\" x1=\"{}\" y1=\"{wy}\" x2=\"{}\" y2=\"{wy}\" \
                         stroke=\"#333333\"/>\n",
                        fmt(cx - 5.0),
                        fmt(cx + 5.0),
                        wy = fmt(wy)
                    );
                }
            }
        }
    }

    // Zero axis above the bars.
    let zero = y(0.0);
    let _ = write!(
        out,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(zero),
        fmt(width - MARGIN_RIGHT),
        fmt(zero)
    );

    // Input labels.
    for (i, name) in names.iter().enumerate() {
        let cx = group_x(i) + group_width / 2.0;
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#222222\">{}</text>\n",
            fmt(cx),
            fmt(MARGIN_TOP + PLOT_HEIGHT + 18.0),
            escape(name)
        );
    }

    // Legend.
    for (m, result) in doc.results.iter().enumerate() {
        let lx = MARGIN_LEFT + m as f64 * 120.0;
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            fmt(lx),
            fmt(14.0),
            color(result.method)
        );
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"#222222\">{}</text>\n",
            fmt(lx + 15.0),
            fmt(23.0),
            result.method.name()
        );
    }

    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
