//! The `trace` subcommand: one horizontal trajectory as CSV.

use crate::scenario::InputError;
use hmod_core::expr::parse;
use hmod_core::foliation::{trace_trajectory, LegendrianPath, TraceOptions};
use hmod_core::foliation::Guard;
use hmod_core::heis::HPoint;
use hmod_core::qdiff::QuadDiff;
use num_complex::Complex64;
use std::fmt::Write;

pub const CSV_HEADER: &str = "s,re_z,im_z,t,leg_residual";

#[derive(Debug, Clone)]
pub struct TraceRequest {
    pub q: String,
    pub start: String,
    pub orientation: f64,
    pub rk_tol: f64,
    pub max_length: f64,
    pub exclusions: Option<String>,
}

/// Parses `"x,y,t"`.
pub fn parse_start(text: &str) -> Result<HPoint, InputError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(InputError(format!("start `{text}` must be x,y,t")));
    }
    let mut v = [0.0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| InputError(format!("start coordinate `{part}` is not a number")))?;
        if !slot.is_finite() {
            return Err(InputError(format!("start coordinate `{part}` is not finite")));
        }
    }
    Ok(HPoint::new(Complex64::new(v[0], v[1]), v[2]))
}

/// Validated inputs, ready to trace.
pub fn prepare(req: &TraceRequest) -> Result<(QuadDiff, HPoint, TraceOptions), InputError> {
    let q = QuadDiff::parse(&req.q).map_err(|e| InputError(format!("q: {e}")))?;
    let start = parse_start(&req.start)?;
    for (x, what) in [(req.rk_tol, "rk-tol"), (req.max_length, "max-length")] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(InputError(format!("{what} must be positive, got {x}")));
        }
    }
    let guard = match &req.exclusions {
        Some(text) => Some(
            parse(text).and_then(Guard::new).map_err(|e| InputError(format!("exclusions: {e}")))?,
        ),
        None => None,
    };
    let opts = TraceOptions { rk_tol: req.rk_tol, max_length: req.max_length, guard, ..Default::default() };
    Ok((q, start, opts))
}

pub fn trace(req: &TraceRequest) -> Result<hmod_core::Result<LegendrianPath>, InputError> {
    let (q, start, opts) = prepare(req)?;
    Ok(trace_trajectory(&q, start, req.orientation, &opts))
}

pub fn to_csv(path: &LegendrianPath) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for s in &path.samples {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.3e}",
            s.s,
            s.point.z.re,
            s.point.z.im,
            s.point.t,
            s.legendrian_residual()
        )
        .expect("write to string");
    }
    out
}
