//! Executes a scenario: modulus, requested checks, convergence table.

use crate::scenario::{CheckKind, InputError, Prepared, Scenario, Space, Tolerances};
use hmod_core::catalog::random_polynomial;
use hmod_core::expr::parse;
use hmod_core::foliation::{trace_trajectory, TraceOptions};
use hmod_core::foliation::{Foliation, Guard};
use hmod_core::heis::HPoint;
use hmod_core::modulus::{
    admissibility_check, extremal_density, modulus_m4, q_volume, CheckMode, LeafStats, ModulusOptions, ModulusReport,
    PerturbationProbe,
};
use hmod_core::planar::{lambda_field_2d, modulus_m2, q_area, PlanarFoliation, PlanarQD};
use hmod_core::qdiff::{OperatorTag, QuadDiff};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const RESIDUAL_SAMPLES: usize = 1000;
pub const LEGENDRIAN_THRESHOLD: f64 = 1e-8;
pub const LAMBDA_SPREAD_HEIS: f64 = 1e-6;
pub const LAMBDA_SPREAD_PLANE: f64 = 1e-8;
pub const ADMISSIBILITY_THRESHOLD: f64 = 1e-8;
pub const PERTURBATION_THRESHOLD: f64 = -1e-9;
pub const TRACE_DEVIATION: f64 = 1e-6;
const LAMBDA_LEAVES: usize = 10;
const LAMBDA_SAMPLES: usize = 100;
const RANDOM_PROBES: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub tol: Option<f64>,
    pub rk_tol: Option<f64>,
    pub override_b2_check: bool,
    pub skip_convergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64, detail: Option<String>) -> Self {
        CheckResult { name: name.into(), pass: value <= threshold, value: Some(value), threshold, detail }
    }

    fn failed(name: &str, threshold: f64, err: &hmod_core::Error) -> Self {
        CheckResult { name: name.into(), pass: false, value: None, threshold, detail: Some(format!("{}: {err}", err.name())) }
    }

    fn from(name: &str, threshold: f64, r: hmod_core::Result<CheckResult>) -> Self {
        r.unwrap_or_else(|e| Self::failed(name, threshold, &e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timestamp {
    pub started_unix_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub space: Space,
    pub modulus: Option<f64>,
    pub error_estimate: Option<f64>,
    pub tolerances: Tolerances,
    pub report: Option<ModulusReport>,
    pub checks: Vec<CheckResult>,
    pub convergence: Vec<[f64; 2]>,
    pub timestamp: Timestamp,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("tol,value\n");
        for [t, v] in &self.convergence {
            out.push_str(&format!("{t:e},{v:.17e}\n"));
        }
        out
    }
}

fn tolerances(s: &Scenario, opts: &RunOptions) -> Result<Tolerances, InputError> {
    let mut t = s.tolerances;
    if let Some(x) = opts.tol {
        t.quad_tol = x;
    }
    if let Some(x) = opts.rk_tol {
        t.rk_tol = x;
    }
    for (x, what) in [(t.quad_tol, "--tol"), (t.rk_tol, "--rk-tol")] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(InputError(format!("{what} must be positive, got {x}")));
        }
    }
    Ok(t)
}

fn convergence_tols(tol: f64) -> Vec<f64> {
    [1e-4, 1e-6, 1e-8].into_iter().filter(|t| *t > tol * 10.0).collect()
}

/// Runs `scenario`. Input errors are returned; computational failures become
/// failed checks.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, InputError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let tol = tolerances(scenario, opts)?;
    let prepared = scenario.prepare()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut checks = Vec::new();
    let mut convergence = Vec::new();
    let mut report = None;

    match &prepared {
        Prepared::Heisenberg { q, foliation, guard, sample_box } => {
            if let Some(fol) = foliation {
                let mopts = ModulusOptions {
                    tol: tol.quad_tol,
                    b2_check: if opts.override_b2_check { CheckMode::Warn } else { CheckMode::Enforce },
                    residual_tol: tol.residual_tol,
                    ..Default::default()
                };
                match modulus_m4(q, fol, &mopts) {
                    Ok(r) => report = Some(r),
                    Err(e) => checks.push(CheckResult::failed("modulus", tol.quad_tol, &e)),
                }
                if report.is_some() && !opts.skip_convergence {
                    for t in convergence_tols(tol.quad_tol) {
                        let o = ModulusOptions { tol: t, b2_check: CheckMode::Skip, ..mopts.clone() };
                        if let Ok(r) = modulus_m4(q, fol, &o) {
                            convergence.push([t, r.modulus]);
                        }
                    }
                }
            }
            let sampler = Sampler { foliation: foliation.as_ref(), guard: guard.as_ref(), sample_box: *sample_box };
            for &kind in &scenario.checks {
                checks.push(heis_check(kind, q, foliation.as_ref(), &sampler, &tol, report.as_ref(), &mut rng));
            }
            if let (Some(fol), Some(r)) = (foliation, &report) {
                expected_checks(scenario, r, &mut checks, || q_volume(q, fol, tol.quad_tol).map(|e| e.value));
            }
        }
        Prepared::Plane { q, foliation } => {
            match modulus_m2(q, foliation, tol.quad_tol) {
                Ok(r) => report = Some(r),
                Err(e) => checks.push(CheckResult::failed("modulus", tol.quad_tol, &e)),
            }
            if report.is_some() && !opts.skip_convergence {
                for t in convergence_tols(tol.quad_tol) {
                    if let Ok(r) = modulus_m2(q, foliation, t) {
                        convergence.push([t, r.modulus]);
                    }
                }
            }
            for &kind in &scenario.checks {
                debug_assert_eq!(kind, CheckKind::LambdaConstancy);
                checks.push(plane_lambda_check(q, foliation));
            }
            if let Some(r) = &report {
                expected_checks(scenario, r, &mut checks, || q_area(q, foliation, tol.quad_tol).map(|e| e.value));
            }
        }
    }
    if let Some(r) = &report {
        convergence.push([tol.quad_tol, r.modulus]);
    }

    Ok(RunReport {
        name: scenario.name.clone(),
        space: scenario.space,
        modulus: report.as_ref().map(|r| r.modulus),
        error_estimate: report.as_ref().map(|r| r.error_estimate),
        tolerances: tol,
        report,
        checks,
        convergence,
        timestamp: Timestamp { started_unix_seconds: started, wall_seconds: clock.elapsed().as_secs_f64() },
    })
}

struct Sampler<'a> {
    foliation: Option<&'a Foliation>,
    guard: Option<&'a Guard>,
    sample_box: Option<[(f64, f64); 3]>,
}

impl Sampler<'_> {
    /// `n` pseudorandom points of the domain: from the foliation's parameter
    /// box when there is one, otherwise from the sample box.
    fn points(&self, rng: &mut ChaCha8Rng, n: usize) -> hmod_core::Result<Vec<HPoint>> {
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            attempts += 1;
            if attempts > 100 * n {
                return Err(hmod_core::Error::Invalid("could not sample enough points inside the domain".into()));
            }
            let p = match (self.foliation, self.sample_box) {
                (Some(fol), _) => {
                    let (a, b) = fol.s_range();
                    let m = 0.01 * (b - a);
                    let bx = fol.p_box();
                    let u = [
                        rng.gen_range(a + m..b - m),
                        rng.gen_range(bx[0].0..bx[0].1),
                        rng.gen_range(bx[1].0..bx[1].1),
                    ];
                    fol.point(u)?
                }
                (None, Some(bx)) => HPoint::new(
                    Complex64::new(rng.gen_range(bx[0].0..bx[0].1), rng.gen_range(bx[1].0..bx[1].1)),
                    rng.gen_range(bx[2].0..bx[2].1),
                ),
                (None, None) => unreachable!("validated scenario has a sampling region"),
            };
            if self.guard.is_none_or(|g| g.allows(p)) {
                out.push(p);
            }
        }
        Ok(out)
    }
}

fn heis_check(
    kind: CheckKind,
    q: &QuadDiff,
    fol: Option<&Foliation>,
    sampler: &Sampler<'_>,
    tol: &Tolerances,
    report: Option<&ModulusReport>,
    rng: &mut ChaCha8Rng,
) -> CheckResult {
    let name = kind.name();
    let tag = match kind {
        CheckKind::B2 => Some(OperatorTag::B2),
        CheckKind::D2prime => Some(OperatorTag::D2prime),
        CheckKind::D2doubleprime => Some(OperatorTag::D2doubleprime),
        _ => None,
    };
    if let Some(tag) = tag {
        return CheckResult::from(name, tol.residual_tol, residual_check(name, q, tag, sampler, tol.residual_tol, rng));
    }
    let fol = fol.expect("validated scenario has a foliation");
    match kind {
        CheckKind::Legendrian => CheckResult::from(name, LEGENDRIAN_THRESHOLD, legendrian_check(fol)),
        CheckKind::LambdaConstancy => CheckResult::from(name, LAMBDA_SPREAD_HEIS, lambda_check(q, fol)),
        CheckKind::Admissibility => CheckResult::from(name, ADMISSIBILITY_THRESHOLD, admissibility(q, fol)),
        CheckKind::Perturbation => match report {
            Some(r) => CheckResult::from(name, PERTURBATION_THRESHOLD, perturbation_check(q, fol, r.modulus, tol.quad_tol, rng)),
            None => CheckResult {
                name: name.into(),
                pass: false,
                value: None,
                threshold: PERTURBATION_THRESHOLD,
                detail: Some("no reference modulus".into()),
            },
        },
        CheckKind::TraceVsClosedForm => CheckResult::from(name, TRACE_DEVIATION, trace_check(q, fol, tol.rk_tol)),
        _ => unreachable!(),
    }
}

fn residual_check(
    name: &str,
    q: &QuadDiff,
    tag: OperatorTag,
    sampler: &Sampler<'_>,
    threshold: f64,
    rng: &mut ChaCha8Rng,
) -> hmod_core::Result<CheckResult> {
    let (mut worst, mut worst_rel) = (0.0f64, 0.0f64);
    let points = sampler.points(rng, RESIDUAL_SAMPLES)?;
    for p in &points {
        let r = q.residual_of(tag, *p)?;
        worst = worst.max(r.value.norm());
        worst_rel = worst_rel.max(r.relative());
    }
    let detail = format!("max |{tag}| over {} points; max relative {worst_rel:e}", points.len());
    Ok(CheckResult::at_most(name, worst, threshold, Some(detail)))
}

fn legendrian_check(fol: &Foliation) -> hmod_core::Result<CheckResult> {
    let mut worst = 0.0f64;
    for u in fol.interior_grid(20, 10) {
        let jet = fol.jet(u)?;
        worst = worst.max(jet.legendrian_residual().abs() / jet.legendrian_scale().max(1.0));
    }
    Ok(CheckResult::at_most("legendrian", worst, LEGENDRIAN_THRESHOLD, None))
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let size = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if size == 0.0 {
        0.0
    } else {
        (hi - lo) / size
    }
}

fn s_samples((a, b): (f64, f64)) -> impl Iterator<Item = f64> {
    (0..LAMBDA_SAMPLES).map(move |k| a + (b - a) * (k as f64 + 0.5) / LAMBDA_SAMPLES as f64)
}

fn lambda_check(q: &QuadDiff, fol: &Foliation) -> hmod_core::Result<CheckResult> {
    let mut worst = 0.0f64;
    for p in fol.leaf_grid(LAMBDA_LEAVES) {
        let values = s_samples(fol.s_range())
            .map(|s| fol.lambda_field(q, [s, p[0], p[1]]))
            .collect::<hmod_core::Result<Vec<_>>>()?;
        worst = worst.max(spread(&values));
    }
    let detail = format!("{} leaves x {LAMBDA_SAMPLES} samples", LAMBDA_LEAVES * LAMBDA_LEAVES);
    Ok(CheckResult::at_most("lambda_constancy", worst, LAMBDA_SPREAD_HEIS, Some(detail)))
}

fn plane_lambda_check(q: &PlanarQD, fol: &PlanarFoliation) -> CheckResult {
    let run = || -> hmod_core::Result<CheckResult> {
        let (c, d) = fol.p_range();
        let mut worst = 0.0f64;
        for j in 0..LAMBDA_SAMPLES {
            let p = c + (d - c) * (j as f64 + 0.5) / LAMBDA_SAMPLES as f64;
            let values = s_samples(fol.s_range()).map(|s| lambda_field_2d(q, fol, s, p)).collect::<hmod_core::Result<Vec<_>>>()?;
            worst = worst.max(spread(&values));
        }
        let detail = format!("{LAMBDA_SAMPLES} leaves x {LAMBDA_SAMPLES} samples");
        Ok(CheckResult::at_most("lambda_constancy", worst, LAMBDA_SPREAD_PLANE, Some(detail)))
    };
    CheckResult::from("lambda_constancy", LAMBDA_SPREAD_PLANE, run())
}

fn admissibility(q: &QuadDiff, fol: &Foliation) -> hmod_core::Result<CheckResult> {
    let rho = extremal_density(q, fol)?;
    let adm = admissibility_check(&rho, fol, 5, ADMISSIBILITY_THRESHOLD)?;
    let worst = adm.leaves.iter().map(|l| (l.value - 1.0).abs()).fold(0.0, f64::max);
    let detail = format!("max |∫ρ₀ - 1| over {} leaves", adm.leaves.len());
    Ok(CheckResult::at_most("admissibility", worst, ADMISSIBILITY_THRESHOLD, Some(detail)))
}

fn perturbation_check(
    q: &QuadDiff,
    fol: &Foliation,
    reference: f64,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> hmod_core::Result<CheckResult> {
    let probe = PerturbationProbe::with_reference(q, fol, tol, reference);
    let mut probes = vec![(parse("cos(s)")?, 0.1)];
    for _ in 0..RANDOM_PROBES {
        probes.push((random_polynomial(rng, fol.s_range(), fol.p_box()), rng.gen_range(0.01..0.2)));
    }
    let mut least = f64::INFINITY;
    for (g, eps) in &probes {
        let r = probe.energy(g, *eps)?;
        least = least.min(r.energy / reference - 1.0);
    }
    let detail = format!("min energy/modulus - 1 over {} perturbations", probes.len());
    Ok(CheckResult { name: "perturbation".into(), pass: least >= PERTURBATION_THRESHOLD, value: Some(least), threshold: PERTURBATION_THRESHOLD, detail: Some(detail) })
}

/// Traces `q` from the middle of the centre leaf in both directions and
/// measures the distance to the leaf.
fn trace_check(q: &QuadDiff, fol: &Foliation, rk_tol: f64) -> hmod_core::Result<CheckResult> {
    let bx = fol.p_box();
    let p = [0.5 * (bx[0].0 + bx[0].1), 0.5 * (bx[1].0 + bx[1].1)];
    let (a, b) = fol.s_range();
    let mid = 0.5 * (a + b);
    let reach = fol.arc_length(q, p, a, mid, 1e-10)?.value.min(fol.arc_length(q, p, mid, b, 1e-10)?.value);
    let opts = TraceOptions { rk_tol, max_length: 0.8 * reach, guard: fol.exclusion().cloned(), ..Default::default() };
    let start = fol.point([mid, p[0], p[1]])?;
    let (mut dev, mut leg, mut speed) = (0.0f64, 0.0f64, 0.0f64);
    for orientation in [1.0, -1.0] {
        let path = trace_trajectory(q, start, orientation, &opts)?;
        dev = dev.max(path.max_deviation_from_leaf(fol, p)?);
        leg = leg.max(path.max_legendrian_residual());
        speed = speed.max(path.unit_speed_defect(q)?);
    }
    let pass = dev <= TRACE_DEVIATION && leg <= LEGENDRIAN_THRESHOLD;
    let detail = format!("legendrian residual {leg:e}, unit-speed defect {speed:e}, traced length {:.6} each way", opts.max_length);
    Ok(CheckResult { name: "trace_vs_closed_form".into(), pass, value: Some(dev), threshold: TRACE_DEVIATION, detail: Some(detail) })
}

fn relative_error(x: f64, v: f64) -> f64 {
    (x - v).abs() / v.abs().max(f64::MIN_POSITIVE)
}

fn expected_checks(
    s: &Scenario,
    r: &ModulusReport,
    checks: &mut Vec<CheckResult>,
    volume: impl FnOnce() -> hmod_core::Result<f64>,
) {
    // Values were validated when the scenario was prepared.
    if let Some(e) = &s.expected.modulus {
        let v = e.value.value().expect("validated");
        checks.push(CheckResult::at_most("expected_modulus", relative_error(r.modulus, v), e.rel_tol, None));
    }
    if let Some(e) = &s.expected.leaf_length {
        let v = e.value.value().expect("validated");
        let LeafStats { min, max, .. } = r.leaf_length_stats;
        let err = relative_error(min, v).max(relative_error(max, v));
        checks.push(CheckResult::at_most("expected_leaf_length", err, e.rel_tol, None));
    }
    if let Some(e) = &s.expected.volume {
        let v = e.value.value().expect("validated");
        let measured = match r.volume {
            Some(vol) => Ok(vol.value),
            None => volume(),
        };
        checks.push(match measured {
            Ok(m) => CheckResult::at_most("expected_volume", relative_error(m, v), e.rel_tol, None),
            Err(err) => CheckResult::failed("expected_volume", e.rel_tol, &err),
        });
    }
}
