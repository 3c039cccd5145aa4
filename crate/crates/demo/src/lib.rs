//! wasm-bindgen entry points for the static page in `www/`.
//!
//! Results are returned as flat `Float64Array`s; the page knows the stride.

use hmod_core::catalog::{self, annulus_horizontal, annulus_vertical, q0};
use hmod_core::expr::parse;
use hmod_core::foliation::{trace_trajectory, TraceOptions};
use hmod_core::modulus::{modulus_m4, CheckMode, ModulusOptions, PerturbationProbe};
use hmod_core::qdiff::QuadDiff;
use hmod_core::HPoint;
use wasm_bindgen::prelude::*;

fn js(e: hmod_core::Error) -> JsError {
    JsError::new(&format!("{}: {e}", e.name()))
}

fn fast(tol: f64) -> ModulusOptions {
    ModulusOptions { tol, b2_check: CheckMode::Skip, ..Default::default() }
}

/// Traces the horizontal trajectory of `q` from `(x + iy, t)`.
/// Returns `[s, x, y, t]` per sample.
#[wasm_bindgen]
pub fn trace(q: &str, x: f64, y: f64, t: f64, orientation: f64, max_length: f64) -> Result<Vec<f64>, JsError> {
    let q = QuadDiff::parse(q).map_err(js)?;
    let opts = TraceOptions { max_length, rk_tol: 1e-9, guard: Some(catalog::axis_guard()), ..Default::default() };
    let path = trace_trajectory(&q, HPoint::from_parts(x, y, t), orientation, &opts).map_err(js)?;
    Ok(path.samples.iter().flat_map(|s| [s.s, s.point.z.re, s.point.z.im, s.point.t]).collect())
}

/// The `q₀` coefficient as text, for the trace form.
#[wasm_bindgen]
pub fn q0_text() -> String {
    catalog::Q0.to_string()
}

/// Both annulus moduli for `n` radii in `[r_min, r_max]`.
/// Returns `[r, M4 horizontal, closed form, M4 vertical, closed form]` per radius.
#[wasm_bindgen]
pub fn annulus_moduli(r_min: f64, r_max: f64, n: usize, tol: f64) -> Result<Vec<f64>, JsError> {
    if !(r_min > 1.0 && r_max >= r_min && n >= 1) {
        return Err(JsError::new("need 1 < r_min <= r_max and n >= 1"));
    }
    let minus = QuadDiff::new(-q0().coeff().clone()).map_err(js)?;
    let mut out = Vec::with_capacity(5 * n);
    for k in 0..n {
        let r = if n == 1 { r_min } else { r_min + (r_max - r_min) * k as f64 / (n - 1) as f64 };
        let h = modulus_m4(&q0(), &annulus_horizontal(r), &fast(tol)).map_err(js)?.modulus;
        let v = modulus_m4(&minus, &annulus_vertical(r), &fast(tol)).map_err(js)?.modulus;
        out.extend([r, h, catalog::m4_horizontal(r), v, catalog::m4_vertical(r)]);
    }
    Ok(out)
}

/// Energy of the leafwise-renormalized density `ρ₀(1 + εg)` on the
/// horizontal annulus family, for `n` values of `ε` in `[-eps_max, eps_max]`.
/// Returns `[ε, energy / M4 − 1]` per value.
#[wasm_bindgen]
pub fn perturbation_energy(g: &str, r: f64, eps_max: f64, n: usize, tol: f64) -> Result<Vec<f64>, JsError> {
    if !(r > 1.0 && eps_max > 0.0 && n >= 2) {
        return Err(JsError::new("need r > 1, eps_max > 0 and n >= 2"));
    }
    let g = parse(g).map_err(js)?;
    let (q, fol) = (q0(), annulus_horizontal(r));
    let m = modulus_m4(&q, &fol, &fast(tol)).map_err(js)?.modulus;
    let probe = PerturbationProbe::with_reference(&q, &fol, tol, m);
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let eps = -eps_max + 2.0 * eps_max * k as f64 / (n - 1) as f64;
        let e = probe.energy(&g, eps).map_err(js)?;
        out.extend([eps, e.energy / m - 1.0]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_stays_on_sphere() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = trace(&q0_text(), h, h, 0.0, 1.0, 1.0).unwrap();
        for c in v.chunks(4) {
            let zz = c[1] * c[1] + c[2] * c[2];
            assert!((c[3] * c[3] + zz * zz - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn moduli_match_closed_forms() {
        let v = annulus_moduli(2.0, 3.0, 2, 1e-7).unwrap();
        for c in v.chunks(5) {
            assert!((c[1] / c[2] - 1.0).abs() < 1e-5);
            assert!((c[3] / c[4] - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn perturbations_cost_energy() {
        let v = perturbation_energy("cos(s)", 2.0, 0.2, 3, 1e-6).unwrap();
        assert!(v[1] > 0.0 && v[5] > 0.0);
        assert!(v[3].abs() < 1e-6);
    }
}
