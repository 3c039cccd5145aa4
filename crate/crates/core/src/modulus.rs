//! M₄ moduli of foliated families, q-volumes, and densities.
//!
//! All integrals are taken in parameter coordinates: the volume element of
//! ℍ pulls back to `|J_Φ| ds dp₁ dp₂`, so `Φ` never has to be inverted.

use crate::foliation::{Foliation, Jet};
use crate::qdiff::CoefficientField;
use crate::expr::{Binding, Expr, Program, Var};
use crate::quad::{integrate, Estimate, ParallelPointwise, Pointwise, Tolerance};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::cell::Cell;
use std::sync::Mutex;

/// Leaf lengths closer than this (relative) count as constant.
pub const CONSTANT_LENGTH_TOL: f64 = 1e-9;
/// Relative spread of leaf lengths accepted by the constant-length formula.
pub const CONSTANT_LENGTH_PRE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Enforce,
    Warn,
    Skip,
}

#[derive(Debug, Clone)]
pub struct ModulusOptions {
    pub tol: f64,
    pub b2_check: CheckMode,
    /// Bound on `|B₂q|` relative to its largest term.
    pub residual_tol: f64,
    /// Points per axis of the B₂ and legendrian spot-check grids.
    pub check_grid: usize,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        ModulusOptions { tol: 1e-10, b2_check: CheckMode::Enforce, residual_tol: 1e-9, check_grid: 6 }
    }
}

impl ModulusOptions {
    pub fn with_tol(tol: f64) -> Self {
        ModulusOptions { tol, ..Default::default() }
    }

    fn leaf_tol(&self) -> f64 {
        (self.tol * 1e-2).max(1e-13)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeafStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl LeafStats {
    pub fn from_values(mut v: Vec<f64>) -> Option<LeafStats> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some(LeafStats { min: v[0], max: v[v.len() - 1], mean })
    }

    pub fn spread(&self) -> f64 {
        (self.max - self.min) / self.mean.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStats {
    pub max_abs: f64,
    pub max_relative: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Runtime {
    pub leaves: usize,
    pub integrand_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport {
    pub modulus: f64,
    pub error_estimate: f64,
    pub leaf_length_stats: LeafStats,
    /// `|formula − volume/C^k|` when every leaf has the same length.
    pub consistency_gap: Option<f64>,
    pub volume: Option<Estimate>,
    pub residual_stats: Option<ResidualStats>,
    pub warnings: Vec<String>,
    pub runtime: Runtime,
}

type Key = [u64; 2];

fn key(p: [f64; 2]) -> Key {
    [p[0].to_bits(), p[1].to_bits()]
}

/// Per-leaf integrals, computed once per parameter value.
pub(crate) struct Leaves<'a> {
    fol: &'a Foliation,
    field: &'a dyn CoefficientField,
    tol: f64,
    lengths: Mutex<HashMap<Key, (Estimate, usize)>>,
    volumes: Mutex<HashMap<Key, (Estimate, usize)>>,
}

type Cache = Mutex<HashMap<Key, (Estimate, usize)>>;

impl<'a> Leaves<'a> {
    pub(crate) fn new(fol: &'a Foliation, field: &'a dyn CoefficientField, tol: f64) -> Self {
        Leaves { fol, field, tol, lengths: Mutex::default(), volumes: Mutex::default() }
    }

    /// Looks `p` up in `map`, computing it with `g` as leaf integrand on a
    /// miss. Evaluation counts are stored per leaf so that totals do not
    /// depend on which thread won a race.
    fn cached(&self, map: &Cache, p: [f64; 2], g: impl Fn(&Jet, [f64; 3]) -> Result<f64>) -> Result<Estimate> {
        if let Some((e, _)) = map.lock().unwrap().get(&key(p)) {
            return Ok(*e);
        }
        let n = Cell::new(0usize);
        let e = self.fol.leaf_integral(p, self.tol, |jet, u| {
            n.set(n.get() + 1);
            g(jet, u)
        })?;
        map.lock().unwrap().entry(key(p)).or_insert((e, n.get()));
        Ok(e)
    }

    pub(crate) fn length(&self, p: [f64; 2]) -> Result<Estimate> {
        let e = self.cached(&self.lengths, p, |jet, u| Ok(self.fol.mu_squared(self.field, jet, u)?.sqrt()))?;
        if e.value <= 0.0 {
            return Err(Error::ZeroLeafLength);
        }
        Ok(e)
    }

    pub(crate) fn volume(&self, p: [f64; 2]) -> Result<Estimate> {
        self.cached(&self.volumes, p, |jet, u| Ok(self.field.q_at(jet, u)?.norm_sqr() * jet.jac_det().abs()))
    }

    fn length_stats(&self) -> Option<LeafStats> {
        LeafStats::from_values(self.lengths.lock().unwrap().values().map(|e| e.0.value).collect())
    }

    fn runtime(&self) -> Runtime {
        let (l, v) = (self.lengths.lock().unwrap(), self.volumes.lock().unwrap());
        let evals = l.values().chain(v.values()).map(|e| e.1).sum();
        Runtime { leaves: l.len().max(v.len()), integrand_evaluations: evals }
    }
}

fn relative_error(e: Estimate) -> f64 {
    if e.value == 0.0 {
        0.0
    } else {
        e.error / e.value.abs()
    }
}

/// `∫_Λ f(p) dp` by nested adaptive quadrature; `f` reports its own error.
/// Nodes of the outer integral are evaluated in parallel.
pub fn integrate_box(
    bx: [(f64, f64); 2],
    tol: f64,
    f: &(dyn Fn([f64; 2]) -> Result<Estimate> + Sync),
) -> Result<Estimate> {
    let worst = Mutex::new(0.0f64);
    let note = |r: f64| {
        let mut w = worst.lock().unwrap();
        *w = w.max(r);
    };
    let inner_tol = (tol * 0.1).max(1e-12);
    let outer = |p1: f64| -> Result<f64> {
        let mut g = Pointwise(|p2: f64| {
            let e = f([p1, p2])?;
            note(relative_error(e));
            Ok(e.value)
        });
        let e = integrate(&mut g, bx[1].0, bx[1].1, Tolerance::relative(inner_tol))?;
        note(relative_error(e));
        Ok(e.value)
    };
    let e = integrate(&mut ParallelPointwise(outer), bx[0].0, bx[0].1, Tolerance::relative(tol))?;
    let w = *worst.lock().unwrap();
    Ok(Estimate { value: e.value, error: e.error + w * e.value.abs() })
}

/// `∫_J f(p) dp` with `f` reporting its own error.
pub fn integrate_interval(
    range: (f64, f64),
    tol: f64,
    f: &(dyn Fn(f64) -> Result<Estimate> + Sync),
) -> Result<Estimate> {
    let worst = Mutex::new(0.0f64);
    let g = |p: f64| -> Result<f64> {
        let e = f(p)?;
        let mut w = worst.lock().unwrap();
        *w = w.max(relative_error(e));
        Ok(e.value)
    };
    let e = integrate(&mut ParallelPointwise(g), range.0, range.1, Tolerance::relative(tol))?;
    let w = *worst.lock().unwrap();
    Ok(Estimate { value: e.value, error: e.error + w * e.value.abs() })
}

/// Max of `|B₂q|` over an interior grid of the foliated region.
pub fn b2_spot_check(field: &dyn CoefficientField, fol: &Foliation, n: usize) -> Result<Option<ResidualStats>> {
    let Some(q) = field.quad_diff() else { return Ok(None) };
    let mut stats = ResidualStats { max_abs: 0.0, max_relative: 0.0, samples: 0 };
    for u in fol.interior_grid(n, n) {
        let p = fol.point(u)?;
        if fol.exclusion().is_some_and(|g| !g.allows(p)) {
            continue;
        }
        let r = q.b2_residual(p)?;
        stats.max_abs = stats.max_abs.max(r.value.norm());
        stats.max_relative = stats.max_relative.max(r.relative());
        stats.samples += 1;
    }
    Ok(Some(stats))
}

fn preconditions(field: &dyn CoefficientField, fol: &Foliation, opts: &ModulusOptions) -> Result<(Option<ResidualStats>, Vec<String>)> {
    fol.validate_legendrian(opts.check_grid.max(2))?;
    let mut warnings = Vec::new();
    if opts.b2_check == CheckMode::Skip {
        return Ok((None, warnings));
    }
    let stats = b2_spot_check(field, fol, opts.check_grid)?;
    match stats {
        Some(s) if s.max_relative > opts.residual_tol => {
            if opts.b2_check == CheckMode::Enforce {
                return Err(Error::NotInKernelB2 { residual: s.max_relative });
            }
            warnings.push(format!("B2 residual {:e} exceeds {:e}", s.max_relative, opts.residual_tol));
        }
        None => warnings.push("B2 check skipped: differential known only along the foliation".into()),
        _ => {}
    }
    Ok((stats, warnings))
}

/// `M₄(Γ) = ∫_Λ l(p)^{-4} ∫_I |q(Φ)|² |J_Φ| ds dp`.
pub fn modulus_m4(field: &dyn CoefficientField, fol: &Foliation, opts: &ModulusOptions) -> Result<ModulusReport> {
    let (residual_stats, warnings) = preconditions(field, fol, opts)?;
    let leaves = Leaves::new(fol, field, opts.leaf_tol());
    let integrand = |p: [f64; 2]| -> Result<Estimate> {
        let l = leaves.length(p)?;
        let v = leaves.volume(p)?;
        let value = v.value / l.value.powi(4);
        Ok(Estimate { value, error: value.abs() * (relative_error(v) + 4.0 * relative_error(l)) })
    };
    let m = integrate_box(fol.p_box(), opts.tol, &integrand)?;
    let stats = leaves.length_stats().ok_or(Error::ZeroLeafLength)?;

    let (consistency_gap, volume) = if stats.spread() <= CONSTANT_LENGTH_TOL {
        let vol = integrate_box(fol.p_box(), opts.tol, &|p| leaves.volume(p))?;
        (Some((m.value - vol.value / stats.mean.powi(4)).abs()), Some(vol))
    } else {
        (None, None)
    };
    Ok(ModulusReport {
        modulus: m.value,
        error_estimate: m.error,
        leaf_length_stats: stats,
        consistency_gap,
        volume,
        residual_stats,
        warnings,
        runtime: leaves.runtime(),
    })
}

/// `Vol_q = ∫_Λ ∫_I |q(Φ)|² |J_Φ| ds dp`.
pub fn q_volume(field: &dyn CoefficientField, fol: &Foliation, tol: f64) -> Result<Estimate> {
    let leaves = Leaves::new(fol, field, (tol * 1e-2).max(1e-13));
    integrate_box(fol.p_box(), tol, &|p| leaves.volume(p))
}

/// `M₄ = Vol_q / C⁴` for a family whose leaves share the q-length `C`.
pub fn modulus_constant_length(field: &dyn CoefficientField, fol: &Foliation, opts: &ModulusOptions) -> Result<ModulusReport> {
    const PROBE_GRID: usize = 5;
    let (residual_stats, warnings) = preconditions(field, fol, opts)?;
    let leaves = Leaves::new(fol, field, opts.leaf_tol());
    let mut lengths = Vec::new();
    let mut length_err = 0.0f64;
    for p in fol.leaf_grid(PROBE_GRID) {
        let l = leaves.length(p)?;
        length_err = length_err.max(relative_error(l));
        lengths.push(l.value);
    }
    let stats = LeafStats::from_values(lengths).ok_or(Error::ZeroLeafLength)?;
    if stats.spread() > CONSTANT_LENGTH_PRE {
        return Err(Error::ConstantLengthViolated { spread: stats.spread() });
    }
    let vol = integrate_box(fol.p_box(), opts.tol, &|p| leaves.volume(p))?;
    let c4 = stats.mean.powi(4);
    let modulus = vol.value / c4;
    Ok(ModulusReport {
        modulus,
        error_estimate: vol.error / c4 + modulus * 4.0 * (length_err + stats.spread()),
        leaf_length_stats: stats,
        consistency_gap: None,
        volume: Some(vol),
        residual_stats,
        warnings,
        runtime: leaves.runtime(),
    })
}

enum Base<'a> {
    /// `√|q(Φ)| / l(p)`.
    Extremal(&'a dyn CoefficientField),
    Pullback(Program),
}

/// A density given through its pullback `ρ∘Φ` on the parameter box.
pub struct Density<'a> {
    base: Base<'a>,
    factor: f64,
    perturbation: Option<(Program, f64)>,
}

/// Leaf tolerance for density integrals. Perturbed densities are products
/// with an endpoint singularity, and roundoff stalls them near 1e-11.
fn density_leaf_tol(tol: f64) -> f64 {
    (tol * 1e-2).max(1e-10)
}

fn params_program(e: &Expr) -> Result<Program> {
    if !e.uses_only(&[Var::S, Var::P1, Var::P2]) {
        return Err(Error::VariableMismatch);
    }
    Ok(Program::compile(&[e]))
}

fn eval_params(prog: &Program, u: [f64; 3]) -> Result<f64> {
    Ok(prog.eval(&Binding::params(u[0], u[1], u[2]))?[0].re)
}

/// The extremal density `ρ₀ = √|q| / l` of the family.
pub fn extremal_density<'a>(field: &'a dyn CoefficientField, fol: &Foliation) -> Result<Density<'a>> {
    let bx = fol.p_box();
    let centre = [0.5 * (bx[0].0 + bx[0].1), 0.5 * (bx[1].0 + bx[1].1)];
    match fol.leaf_length(field, centre, 1e-8) {
        Ok(l) if l.value > 0.0 => {}
        Ok(_) | Err(Error::ZeroOfQ) => return Err(Error::ZeroLeafLength),
        Err(e) => return Err(e),
    }
    Ok(Density { base: Base::Extremal(field), factor: 1.0, perturbation: None })
}

/// Per-leaf data needed to evaluate a density.
struct Profile<'d, 'a> {
    density: &'d Density<'a>,
    inv_length: f64,
    inv_norm: f64,
}

impl Profile<'_, '_> {
    fn rho(&self, jet: &Jet, u: [f64; 3]) -> Result<f64> {
        let d = self.density;
        let base = match &d.base {
            Base::Extremal(field) => field.q_at(jet, u)?.norm().sqrt() * self.inv_length,
            Base::Pullback(prog) => eval_params(prog, u)?,
        };
        let pert = match &d.perturbation {
            Some((g, eps)) => 1.0 + eps * eval_params(g, u)?,
            None => 1.0,
        };
        Ok(d.factor * base * pert * self.inv_norm)
    }
}

impl<'a> Density<'a> {
    /// A density from an expression in `(s, p1, p2)`.
    pub fn pullback(rho: &Expr) -> Result<Density<'static>> {
        Ok(Density { base: Base::Pullback(params_program(rho)?), factor: 1.0, perturbation: None })
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.factor *= c;
        self
    }

    /// `ρ·(1 + εg)`, renormalized leaf by leaf to unit line integral.
    pub fn perturbed(mut self, g: &Expr, eps: f64) -> Result<Self> {
        self.perturbation = Some((params_program(g)?, eps));
        Ok(self)
    }

    fn profile(&self, fol: &Foliation, p: [f64; 2], tol: f64) -> Result<Profile<'_, 'a>> {
        let mut prof = Profile { density: self, inv_length: 1.0, inv_norm: 1.0 };
        if let Base::Extremal(field) = &self.base {
            let l = fol.leaf_length(*field, p, tol)?.value;
            if l <= 0.0 {
                return Err(Error::ZeroLeafLength);
            }
            prof.inv_length = 1.0 / l;
        }
        if let Some((_, eps)) = &self.perturbation {
            if *eps != 0.0 {
                let n = fol.leaf_integral(p, tol, |jet, u| Ok(prof.rho(jet, u)? * jet.ds_phi1.norm()))?.value;
                if !(n > 0.0) || !n.is_finite() {
                    return Err(Error::NonAdmissibleAfterRenormalization(n));
                }
                prof.inv_norm = 1.0 / n;
            }
        }
        Ok(prof)
    }

    /// `∫_I (ρ∘Φ) |∂sΦ₁| ds` along the leaf through `p`.
    pub fn leaf_integral(&self, fol: &Foliation, p: [f64; 2], tol: f64) -> Result<Estimate> {
        let prof = self.profile(fol, p, density_leaf_tol(tol))?;
        fol.leaf_integral(p, tol, |jet, u| {
            let r = prof.rho(jet, u)?;
            if r < 0.0 {
                return Err(Error::NegativeDensity(r));
            }
            Ok(r * jet.ds_phi1.norm())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafIntegral {
    pub p: [f64; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub min_integral: f64,
    pub admissible: bool,
    pub leaves: Vec<LeafIntegral>,
}

/// Line integrals of `ρ` over an `n × n` grid of leaves; admissible when the
/// smallest is at least `1 − tol`.
pub fn admissibility_check(rho: &Density<'_>, fol: &Foliation, n: usize, tol: f64) -> Result<Admissibility> {
    let qtol = density_leaf_tol(tol);
    let mut leaves = Vec::new();
    for p in fol.leaf_grid(n) {
        leaves.push(LeafIntegral { p, value: rho.leaf_integral(fol, p, qtol)?.value });
    }
    let min_integral = leaves.iter().map(|l| l.value).fold(f64::INFINITY, f64::min);
    Ok(Admissibility { min_integral, admissible: min_integral >= 1.0 - tol, leaves })
}

/// `∫_Ω ρ⁴ dL³ = ∫_Λ ∫_I (ρ∘Φ)⁴ |J_Φ| ds dp`.
pub fn density_energy(rho: &Density<'_>, fol: &Foliation, tol: f64) -> Result<Estimate> {
    let leaf_tol = density_leaf_tol(tol);
    integrate_box(fol.p_box(), tol, &|p| {
        let prof = rho.profile(fol, p, leaf_tol)?;
        fol.leaf_integral(p, leaf_tol, |jet, u| Ok(prof.rho(jet, u)?.powi(4) * jet.jac_det().abs()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeResult {
    pub eps: f64,
    pub energy: f64,
    pub reference_modulus: f64,
}

/// Energies of leafwise-renormalized perturbations `ρ₀(1 + εg)` of the
/// extremal density, compared against the modulus.
pub struct PerturbationProbe<'a> {
    field: &'a dyn CoefficientField,
    fol: &'a Foliation,
    tol: f64,
    pub reference_modulus: f64,
}

impl<'a> PerturbationProbe<'a> {
    pub fn new(field: &'a dyn CoefficientField, fol: &'a Foliation, opts: &ModulusOptions) -> Result<Self> {
        let m = modulus_m4(field, fol, opts)?;
        Ok(Self::with_reference(field, fol, opts.tol, m.modulus))
    }

    pub fn with_reference(field: &'a dyn CoefficientField, fol: &'a Foliation, tol: f64, reference: f64) -> Self {
        PerturbationProbe { field, fol, tol, reference_modulus: reference }
    }

    pub fn energy(&self, g: &Expr, eps: f64) -> Result<ProbeResult> {
        let prog = params_program(g)?;
        let mut least = f64::INFINITY;
        for u in self.fol.interior_grid(9, 5) {
            least = least.min(1.0 + eps * eval_params(&prog, u)?);
        }
        if !(least > 0.0) {
            return Err(Error::NonPositivePerturbation(least));
        }
        let rho = extremal_density(self.field, self.fol)?.perturbed(g, eps)?;
        let e = density_energy(&rho, self.fol, self.tol)?;
        Ok(ProbeResult { eps, energy: e.value, reference_modulus: self.reference_modulus })
    }
}

pub fn perturbation_probe(
    field: &dyn CoefficientField,
    fol: &Foliation,
    g: &Expr,
    eps: f64,
    opts: &ModulusOptions,
) -> Result<ProbeResult> {
    PerturbationProbe::new(field, fol, opts)?.energy(g, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::parse;
    use crate::qdiff::{QfField, QuadDiff, ScaledField};

    fn shear_setup() -> (QuadDiff, Foliation) {
        (QuadDiff::parse("1").unwrap(), catalog::shear(2.0, 1.5, 3.0))
    }

    #[test]
    fn shear_modulus_and_volume() {
        let (q, fol) = shear_setup();
        let opts = ModulusOptions::with_tol(1e-12);
        let m = modulus_m4(&q, &fol, &opts).unwrap();
        assert!((m.modulus - 1.5 * 3.0 / 8.0).abs() < 1e-14);
        assert!(m.consistency_gap.unwrap() < 1e-14);
        let v = q_volume(&q, &fol, 1e-12).unwrap();
        assert!((v.value - 9.0).abs() < 1e-13);
        let c = modulus_constant_length(&q, &fol, &opts).unwrap();
        assert!((c.modulus - m.modulus).abs() < 1e-14);
    }

    #[test]
    fn zero_differential() {
        let (_, fol) = shear_setup();
        let zero = QuadDiff::parse("0").unwrap();
        assert_eq!(q_volume(&zero, &fol, 1e-10).unwrap().value, 0.0);
        assert!(matches!(extremal_density(&zero, &fol), Err(Error::ZeroLeafLength)));
    }

    #[test]
    fn b2_gate() {
        let fol = catalog::shear(2.0, 1.5, 3.0);
        // real and positive, so every leaf is horizontal, but B₂q = 3qz
        let q = QuadDiff::parse("1 + z*zb").unwrap();
        let opts = ModulusOptions::with_tol(1e-8);
        let err = modulus_m4(&q, &fol, &opts).unwrap_err();
        assert!(matches!(err, Error::NotInKernelB2 { .. }));
        let warn = ModulusOptions { b2_check: CheckMode::Warn, ..opts };
        let r = modulus_m4(&q, &fol, &warn).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn annulus_vertical_is_not_constant_length() {
        let neg = catalog::q0().scaled(-1.0);
        let fol = catalog::annulus_vertical(2.0);
        let err = modulus_constant_length(&neg, &fol, &ModulusOptions::with_tol(1e-8)).unwrap_err();
        assert!(matches!(err, Error::ConstantLengthViolated { .. }));
    }

    #[test]
    fn extremal_density_on_shear() {
        let (q, fol) = shear_setup();
        let rho = extremal_density(&q, &fol).unwrap();
        let adm = admissibility_check(&rho, &fol, 3, 1e-10).unwrap();
        assert!(adm.admissible);
        assert!(adm.leaves.iter().all(|l| (l.value - 1.0).abs() < 1e-14));
        let half = extremal_density(&q, &fol).unwrap().scaled(0.5);
        let adm = admissibility_check(&half, &fol, 3, 1e-10).unwrap();
        assert!(!adm.admissible && (adm.min_integral - 0.5).abs() < 1e-14);
        let e = density_energy(&rho, &fol, 1e-12).unwrap();
        assert!((e.value - 1.5 * 3.0 / 8.0).abs() < 1e-14);
        let zero = Density::pullback(&Expr::zero()).unwrap();
        assert_eq!(density_energy(&zero, &fol, 1e-10).unwrap().value, 0.0);
    }

    #[test]
    fn renormalized_perturbation_costs_energy() {
        let (q, fol) = shear_setup();
        let probe = PerturbationProbe::new(&q, &fol, &ModulusOptions::with_tol(1e-11)).unwrap();
        let g = parse("cos(s)").unwrap();
        let flat = probe.energy(&g, 0.0).unwrap();
        assert!((flat.energy - flat.reference_modulus).abs() < 1e-13);
        let bumped = probe.energy(&g, 0.2).unwrap();
        assert!(bumped.energy > bumped.reference_modulus * (1.0 + 1e-4));
        // perturbations constant along leaves are undone by renormalization
        let g = parse("p1*p2").unwrap();
        let r = probe.energy(&g, 0.1).unwrap();
        assert!((r.energy - r.reference_modulus).abs() < 1e-12);
        assert!(matches!(probe.energy(&parse("s").unwrap(), -1.0), Err(Error::NonPositivePerturbation(_))));
    }

    #[test]
    fn scaling_leaves_modulus_invariant() {
        let (q, fol) = shear_setup();
        let opts = ModulusOptions { b2_check: CheckMode::Skip, ..ModulusOptions::with_tol(1e-12) };
        let base = modulus_m4(&q, &fol, &opts).unwrap().modulus;
        for c in [0.5, 2.0, 10.0] {
            let scaled = ScaledField { inner: &q, c };
            let m = modulus_m4(&scaled, &fol, &opts).unwrap();
            assert!((m.modulus - base).abs() < 1e-12 * base);
            assert!((m.leaf_length_stats.mean - 2.0 * c.sqrt()).abs() < 1e-12);
            let v = q_volume(&scaled, &fol, 1e-12).unwrap().value;
            assert!((v - 9.0 * c * c).abs() < 1e-11 * c * c);
        }
    }

    #[test]
    fn general_strategy_field() {
        let fol = catalog::shear(2.0, 1.5, 3.0);
        let f = parse("1 + s*s").unwrap();
        let qf = QfField::new(&fol, f).unwrap();
        let opts = ModulusOptions::with_tol(1e-10);
        let m = modulus_m4(&qf, &fol, &opts).unwrap();
        assert_eq!(m.warnings.len(), 1);
        // l = ∫₀² √(1+s²) ds, volume per leaf ∫₀² (1+s²)² ds
        let l = (2.0 * 5f64.sqrt() + (2.0 + 5f64.sqrt()).ln()) / 2.0;
        let v = 2.0 + 2.0 * 8.0 / 3.0 + 32.0 / 5.0;
        assert!((m.modulus - 4.5 * v / l.powi(4)).abs() < 1e-9 * m.modulus);
    }
}
