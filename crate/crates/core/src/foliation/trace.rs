//! Horizontal trajectories of a quadratic differential by adaptive
//! Dormand–Prince integration in unit q-speed.

use super::{Foliation, Guard, Q_FLOOR};
use crate::heis::{HPoint, HTangent};
use crate::qdiff::QuadDiff;
use crate::{legendrian_residual, Error, Result};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub rk_tol: f64,
    pub max_length: f64,
    pub q_floor: f64,
    pub initial_step: f64,
    pub max_steps: usize,
    pub guard: Option<Guard>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            rk_tol: 1e-9,
            max_length: 10.0,
            q_floor: Q_FLOOR,
            initial_step: 1e-3,
            max_steps: 1_000_000,
            guard: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxLength,
    DomainBoundary,
    ZeroOfQ,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    /// q-arc length from the start.
    pub s: f64,
    pub point: HPoint,
    pub tangent: HTangent,
}

impl PathSample {
    pub fn legendrian_residual(&self) -> f64 {
        legendrian_residual(self.point.z, self.tangent)
    }
}

#[derive(Debug, Clone)]
pub struct LegendrianPath {
    pub samples: Vec<PathSample>,
    pub rk_tol: f64,
    pub stop: StopReason,
}

impl LegendrianPath {
    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }

    pub fn max_legendrian_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.legendrian_residual().abs()).fold(0.0, f64::max)
    }

    /// `max |q(γ)·γ̇₁² − 1|` over the samples.
    pub fn unit_speed_defect(&self, q: &QuadDiff) -> Result<f64> {
        let mut worst = 0.0f64;
        for s in &self.samples {
            let v = q.eval_q(s.point)? * s.tangent.dz * s.tangent.dz;
            worst = worst.max((v - 1.0).norm());
        }
        Ok(worst)
    }

    /// Largest distance from a sample to the leaf `Φ(·, p)`.
    pub fn max_deviation_from_leaf(&self, fol: &Foliation, p: [f64; 2]) -> Result<f64> {
        let mut worst = 0.0f64;
        for s in &self.samples {
            worst = worst.max(distance_to_leaf(fol, p, s.point)?);
        }
        Ok(worst)
    }
}

/// Euclidean distance in `(Re z, Im z, t)` from `x` to the leaf through `p`.
pub fn distance_to_leaf(fol: &Foliation, p: [f64; 2], x: HPoint) -> Result<f64> {
    const SCAN: usize = 256;
    let (a, b) = fol.s_range();
    let dist = |s: f64| -> Result<f64> {
        let y = fol.point([s, p[0], p[1]])?;
        Ok(((y.z - x.z).norm_sqr() + (y.t - x.t).powi(2)).sqrt())
    };
    let h = (b - a) / SCAN as f64;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..SCAN {
        if let Ok(d) = dist(a + h * (k as f64 + 0.5)) {
            if d < best.0 {
                best = (d, k);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::LeftDomain);
    }
    // golden section on the neighbouring cells
    let (mut lo, mut hi) = (a + h * best.1.saturating_sub(1) as f64, (a + h * (best.1 + 2) as f64).min(b));
    lo = lo.max(a + 1e-15 * (b - a));
    hi = hi.min(b - 1e-15 * (b - a));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (dist(c)?, dist(d)?);
    while hi - lo > 1e-13 * (1.0 + lo.abs()) {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = dist(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = dist(d)?;
        }
    }
    Ok(fc.min(fd).min(best.0))
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

struct Rhs<'a> {
    q: &'a QuadDiff,
    opts: &'a TraceOptions,
}

impl Rhs<'_> {
    /// Unit q-speed legendrian velocity at `y`, on the branch of `q^{-1/2}`
    /// closest to `reference`.
    fn eval(&self, y: [f64; 3], reference: Complex64) -> Result<[f64; 3]> {
        let p = HPoint::from_parts(y[0], y[1], y[2]);
        if !p.is_finite() {
            return Err(Error::LeftDomain);
        }
        if let Some(g) = &self.opts.guard {
            if !g.allows(p) {
                return Err(Error::LeftDomain);
            }
        }
        let q = self.q.eval_q(p)?;
        if q.norm() < self.opts.q_floor {
            return Err(Error::ZeroOfQ);
        }
        let mut w = q.sqrt().inv();
        if (w * reference.conj()).re < 0.0 {
            w = -w;
        }
        let dt = -2.0 * (p.z.conj() * w).im;
        Ok([w.re, w.im, dt])
    }
}

fn sample(s: f64, y: [f64; 3], k: [f64; 3]) -> PathSample {
    PathSample {
        s,
        point: HPoint::from_parts(y[0], y[1], y[2]),
        tangent: HTangent::new(Complex64::new(k[0], k[1]), k[2]),
    }
}

/// Traces the horizontal trajectory of `q` through `start`, parametrized by
/// q-arc length, in the direction `orientation·q(start)^{-1/2}`.
pub fn trace_trajectory(q: &QuadDiff, start: HPoint, orientation: f64, opts: &TraceOptions) -> Result<LegendrianPath> {
    let rhs = Rhs { q, opts };
    let sign = if orientation < 0.0 { -1.0 } else { 1.0 };
    let q0 = match q.eval_q(start) {
        Ok(v) => v,
        Err(Error::DivisionNearZero | Error::NonFinite) => return Err(Error::LeftDomain),
        Err(e) => return Err(e),
    };
    if opts.guard.as_ref().is_some_and(|g| !g.allows(start)) || !start.is_finite() {
        return Err(Error::LeftDomain);
    }
    if q0.norm() < opts.q_floor {
        return Err(Error::ZeroOfQ);
    }
    let reference = q0.sqrt().inv() * sign;
    let mut y = [start.z.re, start.z.im, start.t];
    let mut k1 = rhs.eval(y, reference)?;
    let mut samples = vec![sample(0.0, y, k1)];

    let tol = opts.rk_tol;
    let mut s = 0.0;
    let mut h = opts.initial_step.min(opts.max_length);
    let h_min = 1e-14;
    let mut stop = StopReason::MaxSteps;

    for _ in 0..opts.max_steps {
        if s >= opts.max_length * (1.0 - 1e-15) {
            stop = StopReason::MaxLength;
            break;
        }
        h = h.min(opts.max_length - s);
        let reference = Complex64::new(k1[0], k1[1]);

        // stages
        let mut k = [[0.0; 3]; 7];
        k[0] = k1;
        let mut failure = None;
        let mut y_new = y;
        for st in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(st) {
                for d in 0..3 {
                    ys[d] += h * A[st][j] * kj[d];
                }
            }
            if st == 6 {
                y_new = ys;
            }
            match rhs.eval(ys, reference) {
                Ok(v) => k[st] = v,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }

        if let Some(e) = failure {
            if h <= h_min * (1.0 + s) {
                stop = match e {
                    Error::ZeroOfQ => StopReason::ZeroOfQ,
                    _ => StopReason::DomainBoundary,
                };
                break;
            }
            h *= 0.25;
            continue;
        }

        let mut err = 0.0f64;
        for d in 0..3 {
            let e: f64 = (0..7).map(|j| h * (B[j] - B_LOW[j]) * k[j][d]).sum();
            let sc = tol + tol * y[d].abs().max(y_new[d].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            s += h;
            y = y_new;
            k1 = k[6];
            samples.push(sample(s, y, k1));
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h <= h_min * (1.0 + s) {
                return Err(Error::StepFailure(s));
            }
        }
    }
    Ok(LegendrianPath { samples, rk_tol: tol, stop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::f64::consts::PI;

    #[test]
    fn unit_differential_gives_straight_segment() {
        let q = QuadDiff::parse("1").unwrap();
        let opts = TraceOptions { max_length: 3.0, ..Default::default() };
        let path = trace_trajectory(&q, HPoint::IDENTITY, 1.0, &opts).unwrap();
        assert_eq!(path.stop, StopReason::MaxLength);
        assert!((path.length() - 3.0).abs() < 1e-12);
        for s in &path.samples {
            assert!((s.point.z.re - s.s).abs() < 1e-12);
            assert_eq!(s.point.z.im, 0.0);
            assert_eq!(s.point.t, 0.0);
        }
    }

    #[test]
    fn orientation_reverses_direction() {
        let q = QuadDiff::parse("1").unwrap();
        let opts = TraceOptions { max_length: 1.0, ..Default::default() };
        let path = trace_trajectory(&q, HPoint::IDENTITY, -1.0, &opts).unwrap();
        assert!((path.samples.last().unwrap().point.z.re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn start_on_axis_is_rejected() {
        let q0 = catalog::q0();
        let err = trace_trajectory(&q0, HPoint::from_parts(0.0, 0.0, 1.0), 1.0, &Default::default()).unwrap_err();
        assert_eq!(err, Error::LeftDomain);
        let zb = QuadDiff::parse("zb").unwrap();
        let err = trace_trajectory(&zb, HPoint::from_parts(0.0, 0.0, 1.0), 1.0, &Default::default()).unwrap_err();
        assert_eq!(err, Error::ZeroOfQ);
    }

    #[test]
    fn guard_stops_the_path() {
        let q = QuadDiff::parse("1").unwrap();
        let guard = Guard::new(crate::expr::parse("1 - z*zb").unwrap()).unwrap();
        let opts = TraceOptions { guard: Some(guard), ..Default::default() };
        let path = trace_trajectory(&q, HPoint::IDENTITY, 1.0, &opts).unwrap();
        assert_eq!(path.stop, StopReason::DomainBoundary);
        assert!((path.length() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn q0_horizontal_arc_matches_closed_form() {
        let q0 = catalog::q0();
        let fol = catalog::annulus_horizontal(2.0);
        let p = [0.6, 1.3];
        let start = fol.point([PI / 2.0, p[0], p[1]]).unwrap();
        let opts = TraceOptions { max_length: 1.2, ..Default::default() };
        for o in [1.0, -1.0] {
            let path = trace_trajectory(&q0, start, o, &opts).unwrap();
            assert_eq!(path.stop, StopReason::MaxLength);
            assert!(path.max_deviation_from_leaf(&fol, p).unwrap() < 1e-6);
            assert!(path.max_legendrian_residual() < 1e-12);
            assert!(path.unit_speed_defect(&q0).unwrap() < 1e-12);
        }
    }
}
