//! Scenario files: schema, validation and the built-in catalogue.

use hmod_core::expr::parse;
use hmod_core::foliation::{Foliation, Guard};
use hmod_core::planar::{PlanarFoliation, PlanarQD};
use hmod_core::qdiff::QuadDiff;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// A malformed or inconsistent scenario. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T>(msg: impl Into<String>) -> Result<T, InputError> {
    Err(InputError(msg.into()))
}

/// A real number, written either as a JSON number or as a constant
/// expression such as `"2*log(2)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Literal(f64),
    Expr(String),
}

impl Number {
    pub fn value(&self) -> Result<f64, InputError> {
        let v = match self {
            Number::Literal(x) => *x,
            Number::Expr(text) => {
                let e = parse(text).map_err(|e| InputError(format!("number `{text}`: {e}")))?;
                match e.as_const() {
                    Some(c) if c.im == 0.0 => c.re,
                    Some(_) => return input(format!("number `{text}` is not real")),
                    None => return input(format!("number `{text}` is not a constant")),
                }
            }
        };
        if !v.is_finite() {
            return input(format!("number {self:?} is not finite"));
        }
        Ok(v)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Literal(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Heisenberg,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    B2,
    D2prime,
    D2doubleprime,
    Legendrian,
    LambdaConstancy,
    Admissibility,
    Perturbation,
    TraceVsClosedForm,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::B2 => "b2",
            CheckKind::D2prime => "d2prime",
            CheckKind::D2doubleprime => "d2doubleprime",
            CheckKind::Legendrian => "legendrian",
            CheckKind::LambdaConstancy => "lambda_constancy",
            CheckKind::Admissibility => "admissibility",
            CheckKind::Perturbation => "perturbation",
            CheckKind::TraceVsClosedForm => "trace_vs_closed_form",
        }
    }

    fn needs_foliation(self) -> bool {
        !matches!(self, CheckKind::B2 | CheckKind::D2prime | CheckKind::D2doubleprime)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    pub phi1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi2: Option<String>,
    pub s_range: [Number; 2],
    pub p_ranges: Vec<[Number; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub quad_tol: f64,
    pub rk_tol: f64,
    pub residual_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quad_tol: 1e-10, rk_tol: 1e-9, residual_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedValue {
    pub value: Number,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ExpectedValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_length: Option<ExpectedValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<ExpectedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub space: Space,
    pub q: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foliation: Option<FoliationSpec>,
    /// Points where this evaluates to a value with real part `≤ 0` are
    /// outside the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusions: Option<String>,
    /// Sampling box `[[x0,x1],[y0,y1],[t0,t1]]` for residual checks when
    /// there is no foliation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<[[Number; 2]; 3]>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub expected: Expected,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    20_240_601
}

/// A validated scenario with every expression compiled.
pub enum Prepared {
    Heisenberg {
        q: QuadDiff,
        foliation: Option<Foliation>,
        guard: Option<Guard>,
        sample_box: Option<[(f64, f64); 3]>,
    },
    Plane {
        q: PlanarQD,
        foliation: PlanarFoliation,
    },
}

fn range(r: &[Number; 2], what: &str) -> Result<(f64, f64), InputError> {
    let (a, b) = (r[0].value()?, r[1].value()?);
    if a >= b {
        return input(format!("{what} [{a}, {b}] is empty"));
    }
    Ok((a, b))
}

fn positive(x: f64, what: &str) -> Result<(), InputError> {
    if !(x > 0.0 && x.is_finite()) {
        return input(format!("{what} must be positive and finite, got {x}"));
    }
    Ok(())
}

fn core_err(what: &str) -> impl Fn(hmod_core::Error) -> InputError + '_ {
    move |e| InputError(format!("{what}: {e}"))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, InputError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| InputError(format!("scenario JSON: {e}")))?;
        s.prepare()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, InputError> {
        let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A built-in scenario by name, or a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Scenario, InputError> {
        match builtin(name_or_path) {
            Some(text) => Self::from_json(text),
            None => Self::load(Path::new(name_or_path)),
        }
    }

    pub fn validate(&self) -> Result<(), InputError> {
        self.prepare().map(|_| ())
    }

    pub fn prepare(&self) -> Result<Prepared, InputError> {
        if self.name.trim().is_empty() {
            return input("scenario name is empty");
        }
        let t = &self.tolerances;
        positive(t.quad_tol, "quad_tol")?;
        positive(t.rk_tol, "rk_tol")?;
        positive(t.residual_tol, "residual_tol")?;
        for (what, e) in [("modulus", &self.expected.modulus), ("leaf_length", &self.expected.leaf_length), ("volume", &self.expected.volume)] {
            if let Some(e) = e {
                e.value.value()?;
                positive(e.rel_tol, &format!("expected.{what}.rel_tol"))?;
            }
        }
        let mut seen = self.checks.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.checks.len() {
            return input("checks contain duplicates");
        }
        match self.space {
            Space::Heisenberg => self.prepare_heis(),
            Space::Plane => self.prepare_plane(),
        }
    }

    fn prepare_heis(&self) -> Result<Prepared, InputError> {
        let q = QuadDiff::parse(&self.q).map_err(core_err("q"))?;
        let guard = match &self.exclusions {
            Some(text) => Some(Guard::new(parse(text).map_err(core_err("exclusions"))?).map_err(core_err("exclusions"))?),
            None => None,
        };
        let foliation = match &self.foliation {
            Some(f) => {
                let Some(phi2) = &f.phi2 else { return input("heisenberg foliation needs phi2") };
                if f.p_ranges.len() != 2 {
                    return input(format!("heisenberg foliation needs 2 p_ranges, got {}", f.p_ranges.len()));
                }
                let s_range = range(&f.s_range, "s_range")?;
                let p_box = [range(&f.p_ranges[0], "p_ranges[0]")?, range(&f.p_ranges[1], "p_ranges[1]")?];
                let phi1 = parse(&f.phi1).map_err(core_err("phi1"))?;
                let phi2 = parse(phi2).map_err(core_err("phi2"))?;
                let mut fol = Foliation::new(phi1, phi2, s_range, p_box).map_err(core_err("foliation"))?;
                if let Some(g) = &guard {
                    fol = fol.with_exclusion(g.clone());
                }
                Some(fol)
            }
            None => None,
        };
        let sample_box = match &self.sample_box {
            Some(b) => Some([range(&b[0], "sample_box x")?, range(&b[1], "sample_box y")?, range(&b[2], "sample_box t")?]),
            None => None,
        };
        if foliation.is_none() {
            if let Some(c) = self.checks.iter().find(|c| c.needs_foliation()) {
                return input(format!("check `{}` needs a foliation", c.name()));
            }
            if self.checks.iter().any(|c| !c.needs_foliation()) && sample_box.is_none() {
                return input("residual checks without a foliation need a sample_box");
            }
            if self.expected != Expected::default() {
                return input("expected values need a foliation");
            }
        }
        Ok(Prepared::Heisenberg { q, foliation, guard, sample_box })
    }

    fn prepare_plane(&self) -> Result<Prepared, InputError> {
        let q = PlanarQD::parse(&self.q).map_err(core_err("q"))?;
        let Some(f) = &self.foliation else { return input("plane scenario needs a foliation") };
        if f.phi2.is_some() {
            return input("phi2 is only meaningful in the heisenberg space");
        }
        if f.p_ranges.len() != 1 {
            return input(format!("plane foliation needs 1 p_range, got {}", f.p_ranges.len()));
        }
        if self.exclusions.is_some() || self.sample_box.is_some() {
            return input("exclusions and sample_box are only meaningful in the heisenberg space");
        }
        if let Some(c) = self.checks.iter().find(|c| **c != CheckKind::LambdaConstancy) {
            return input(format!("check `{}` does not apply to plane scenarios", c.name()));
        }
        let foliation = PlanarFoliation::parse(&f.phi1, range(&f.s_range, "s_range")?, range(&f.p_ranges[0], "p_ranges[0]")?)
            .map_err(core_err("phi1"))?;
        Ok(Prepared::Plane { q, foliation })
    }
}

const BUILTINS: [(&str, &str); 7] = [
    ("annulus-horizontal", include_str!("../scenarios/annulus-horizontal.json")),
    ("annulus-vertical", include_str!("../scenarios/annulus-vertical.json")),
    ("plane-annulus-circular", include_str!("../scenarios/plane-annulus-circular.json")),
    ("plane-annulus-radial", include_str!("../scenarios/plane-annulus-radial.json")),
    ("plane-rectangle", include_str!("../scenarios/plane-rectangle.json")),
    ("shear", include_str!("../scenarios/shear.json")),
    ("triple-kernel-residuals", include_str!("../scenarios/triple-kernel-residuals.json")),
];

/// Names of the built-in scenarios, sorted.
pub fn list_scenarios() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

/// The JSON source of a built-in scenario.
pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_match_names() {
        for name in list_scenarios() {
            let s = Scenario::from_json(builtin(name).unwrap()).unwrap();
            assert_eq!(s.name, name);
        }
        let mut sorted = list_scenarios();
        sorted.sort();
        assert_eq!(sorted, list_scenarios());
    }

    #[test]
    fn numbers_accept_constant_expressions() {
        assert_eq!(Number::Expr("2*3".into()).value().unwrap(), 6.0);
        assert!(Number::Expr("s".into()).value().is_err());
        assert!(Number::Expr("i".into()).value().is_err());
        assert!(Number::Expr("1/0".into()).value().is_err());
    }

    fn shear() -> Scenario {
        Scenario::from_json(builtin("shear").unwrap()).unwrap()
    }

    #[test]
    fn rejects_inconsistent_scenarios() {
        let mut s = shear();
        s.foliation.as_mut().unwrap().s_range = [2.0.into(), 1.0.into()];
        assert!(s.validate().is_err());

        let mut s = shear();
        s.foliation.as_mut().unwrap().phi2 = None;
        assert!(s.validate().is_err());

        let mut s = shear();
        s.space = Space::Plane;
        assert!(s.validate().is_err());

        let mut s = shear();
        s.q = "z*s".into();
        assert!(s.validate().is_err());

        let mut s = shear();
        s.foliation = None;
        assert!(s.validate().is_err());

        let mut s = shear();
        s.tolerances.quad_tol = 0.0;
        assert!(s.validate().is_err());

        let mut s = shear();
        s.checks.push(CheckKind::B2);
        assert!(s.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = builtin("shear").unwrap().replacen("\"space\"", "\"colour\": 1, \"space\"", 1);
        assert!(Scenario::from_json(&text).is_err());
    }
}
