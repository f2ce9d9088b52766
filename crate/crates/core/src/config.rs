//! Run configuration documents.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! section.key = value      # trailing comments are allowed
//! ```
//!
//! Values are numbers, booleans, bare or double-quoted strings, or
//! comma-separated lists of numbers. Unknown keys and repeated keys are
//! rejected. Every key has a documented default except `run.command`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::pv::{PVSetup, SaddleConfig};
use crate::renorm;
use crate::scf::ScfConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    SolveCharged,
    Renorm,
    PvSaddle,
    Expand,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SolveCharged => "solve-charged",
            Command::Renorm => "renorm",
            Command::PvSaddle => "pv-saddle",
            Command::Expand => "expand",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Command::Solve,
            "solve-charged" => Command::SolveCharged,
            "renorm" => Command::Renorm,
            "pv-saddle" => Command::PvSaddle,
            "expand" => Command::Expand,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NuSource {
    Zero,
    PointPair { mode: [i32; 3], amplitude: f64 },
    Gaussian { charge: f64, width: f64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenormSettings {
    pub ratios: Vec<f64>,
    pub landau_couplings: Vec<f64>,
    /// Run the lattice linear-response extraction on the configured lattice.
    pub lattice_response: bool,
    pub probe_alpha: f64,
    pub screening_alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PvSettings {
    pub setup: PVSetup,
    pub saddle: SaddleConfig,
    pub ext_mode: [i32; 3],
    pub ext_amplitude: f64,
    pub uv_cutoffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpandSettings {
    pub couplings_ph: Vec<f64>,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub lattice: LatticeParams,
    pub mass: f64,
    /// Bare coupling used by the solvers (derived when alpha_ph is given).
    pub alpha: f64,
    pub alpha_ph: Option<f64>,
    /// Charge unit of the Pauli-Villars Lagrangian.
    pub e: f64,
    pub target_charge: f64,
    pub nu: NuSource,
    pub scf: ScfConfig,
    pub renorm: RenormSettings,
    pub pv: PvSettings,
    pub expand: ExpandSettings,
    pub checkpoint: bool,
    /// Every key with its resolved value, for the reproducibility header.
    resolved: BTreeMap<String, Value>,
}

#[derive(Clone, Copy)]
enum Kind {
    Float,
    Int,
    Bool,
    Str,
    FloatList,
    Mode,
}

struct KeySpec {
    key: &'static str,
    kind: Kind,
    default: Option<&'static str>,
}

const fn spec(key: &'static str, kind: Kind, default: Option<&'static str>) -> KeySpec {
    KeySpec { key, kind, default }
}

const KEYS: &[KeySpec] = &[
    spec("run.command", Kind::Str, None),
    spec("run.checkpoint", Kind::Bool, Some("true")),
    spec("lattice.box_length", Kind::Float, Some("6.283185307179586")),
    spec("lattice.max_index", Kind::Int, Some("2")),
    spec("lattice.cutoff", Kind::Float, Some("2")),
    spec("physics.mass", Kind::Float, Some("1")),
    spec("physics.alpha", Kind::Float, None),
    spec("physics.alpha_ph", Kind::Float, None),
    spec("physics.e", Kind::Float, Some("0.3")),
    spec("physics.target_charge", Kind::Float, Some("0")),
    spec("nu.profile", Kind::Str, Some("zero")),
    spec("nu.charge", Kind::Float, Some("1")),
    spec("nu.width", Kind::Float, Some("1")),
    spec("nu.mode", Kind::Mode, Some("1,0,0")),
    spec("nu.amplitude", Kind::Float, Some("0.01")),
    spec("nu.file", Kind::Str, None),
    spec("scf.mixing", Kind::Float, Some("0.3")),
    spec("scf.tol", Kind::Float, Some("1e-8")),
    spec("scf.max_iter", Kind::Int, Some("500")),
    spec("scf.kernel_eps", Kind::Float, Some("1e-9")),
    spec("scf.mu_min", Kind::Float, Some("-0.95")),
    spec("scf.mu_max", Kind::Float, Some("0.95")),
    spec("scf.charge_tol", Kind::Float, Some("1e-8")),
    spec("renorm.ratios", Kind::FloatList, Some("10,100,1000")),
    spec("renorm.landau_couplings", Kind::FloatList, Some("0.05,0.1,0.2")),
    spec("renorm.lattice_response", Kind::Bool, Some("false")),
    spec("renorm.probe_alpha", Kind::Float, Some("0.05")),
    spec("renorm.screening_alphas", Kind::FloatList, Some("0.05,0.1")),
    spec("pv.m1", Kind::Float, Some("2")),
    spec("pv.m2", Kind::Float, Some("3")),
    spec("pv.radius", Kind::Float, Some("1")),
    spec("pv.step_ascent", Kind::Float, Some("1")),
    spec("pv.step_descent", Kind::Float, Some("1")),
    spec("pv.tol", Kind::Float, Some("1e-9")),
    spec("pv.max_outer", Kind::Int, Some("200")),
    spec("pv.stall_limit", Kind::Int, Some("5")),
    spec("pv.ext_mode", Kind::Mode, Some("1,0,0")),
    spec("pv.ext_amplitude", Kind::Float, Some("0")),
    spec("pv.uv_cutoffs", Kind::FloatList, Some("")),
    spec("expand.couplings", Kind::FloatList, Some("0.04,0.08,0.12,0.16,0.2")),
    spec("expand.order", Kind::Int, Some("2")),
];

/// Names of every recognized key, in documentation order.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.key)
}

fn lookup(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(raw: &str, line: usize) -> Result<String> {
    let raw = raw.trim();
    if let Some(rest) = raw.strip_prefix('"') {
        let inner = rest.strip_suffix('"').ok_or_else(|| Error::Parse {
            line,
            message: "unterminated string".into(),
        })?;
        if inner.contains('"') {
            return Err(Error::Parse {
                line,
                message: "embedded quote in string value".into(),
            });
        }
        Ok(inner.to_owned())
    } else {
        Ok(raw.to_owned())
    }
}

fn typed(kind: Kind, raw: &str, key: &str) -> Result<Value> {
    let bad = |message: String| Error::Validation {
        key: key.to_owned(),
        message,
    };
    let float = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| bad(format!("{s:?} is not a number")))?;
        if !v.is_finite() {
            return Err(bad(format!("{s:?} is not finite")));
        }
        Ok(v)
    };
    Ok(match kind {
        Kind::Float => json!(float(raw)?),
        Kind::Int => json!(raw
            .trim()
            .parse::<i64>()
            .map_err(|_| bad(format!("{raw:?} is not an integer")))?),
        Kind::Bool => match raw.trim() {
            "true" => json!(true),
            "false" => json!(false),
            other => return Err(bad(format!("{other:?} is not true/false"))),
        },
        Kind::Str => json!(raw),
        Kind::FloatList => {
            let items: Vec<f64> = if raw.trim().is_empty() {
                Vec::new()
            } else {
                raw.split(',').map(float).collect::<Result<_>>()?
            };
            json!(items)
        }
        Kind::Mode => {
            let items: Vec<i64> = raw
                .split(',')
                .map(|s| s.trim().parse::<i64>().map_err(|_| bad(format!("{raw:?} is not an integer triple"))))
                .collect::<Result<_>>()?;
            if items.len() != 3 {
                return Err(bad(format!("{raw:?} is not an integer triple")));
            }
            json!(items)
        }
    })
}

/// Splits a document into raw (key, value, line) entries.
fn tokenize(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let body = strip_comment(line).trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
            line: n,
            message: format!("expected `section.key = value`, got {body:?}"),
        })?;
        let key = k.trim();
        let valid_key = key.split_once('.').is_some_and(|(s, k)| {
            let ok = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            ok(s) && ok(k)
        });
        if !valid_key {
            return Err(Error::Parse {
                line: n,
                message: format!("malformed key {key:?}"),
            });
        }
        if lookup(key).is_none() {
            return Err(Error::Parse {
                line: n,
                message: format!("unknown key `{key}`"),
            });
        }
        if let Some((_, _, first)) = out.iter().find(|(k2, _, _)| k2 == key) {
            return Err(Error::Parse {
                line: n,
                message: format!("`{key}` already set on line {first}"),
            });
        }
        out.push((key.to_owned(), unquote(v, n)?, n));
    }
    Ok(out)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// As [`parse_config`], with `key=value` overrides applied after the document
/// (overrides replace document entries instead of conflicting with them).
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (k, v, _) in tokenize(text)? {
        raw.insert(k, v);
    }
    for (k, v) in overrides {
        if lookup(k).is_none() {
            return Err(Error::Validation {
                key: k.clone(),
                message: "unknown key".into(),
            });
        }
        raw.insert(k.clone(), v.trim().to_owned());
    }
    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    for s in KEYS {
        let text = match (raw.get(s.key), s.default) {
            (Some(v), _) => v.as_str(),
            (None, Some(d)) => d,
            (None, None) => continue,
        };
        values.insert(s.key.to_owned(), typed(s.kind, text, s.key)?);
    }
    resolve(values, &raw)
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.to_owned(),
        message: message.into(),
    }
}

struct Values<'a>(&'a BTreeMap<String, Value>);

impl Values<'_> {
    fn f(&self, key: &str) -> f64 {
        self.0[key].as_f64().expect("typed float")
    }
    fn opt_f(&self, key: &str) -> Option<f64> {
        self.0.get(key).map(|v| v.as_f64().expect("typed float"))
    }
    fn i(&self, key: &str) -> i64 {
        self.0[key].as_i64().expect("typed int")
    }
    fn b(&self, key: &str) -> bool {
        self.0[key].as_bool().expect("typed bool")
    }
    fn s(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|v| v.as_str().expect("typed string"))
    }
    fn list(&self, key: &str) -> Vec<f64> {
        self.0[key]
            .as_array()
            .expect("typed list")
            .iter()
            .map(|v| v.as_f64().expect("float item"))
            .collect()
    }
    fn mode(&self, key: &str) -> Result<[i32; 3]> {
        let v: Vec<i64> = self.0[key]
            .as_array()
            .expect("typed triple")
            .iter()
            .map(|v| v.as_i64().expect("int item"))
            .collect();
        let conv = |x: i64| i32::try_from(x).map_err(|_| bad(key, "component out of range"));
        Ok([conv(v[0])?, conv(v[1])?, conv(v[2])?])
    }
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} must be positive")))
    }
}

fn count(v: i64, key: &str, min: i64) -> Result<usize> {
    if v >= min {
        Ok(v as usize)
    } else {
        Err(bad(key, format!("{v} must be at least {min}")))
    }
}

fn resolve(mut values: BTreeMap<String, Value>, raw: &BTreeMap<String, String>) -> Result<RunConfig> {
    let set = |k: &str| raw.contains_key(k);
    let v = Values(&values);
    let command = match v.s("run.command") {
        None => return Err(bad("run.command", "required")),
        Some(c) => Command::parse(c).ok_or_else(|| {
            bad("run.command", format!("{c:?} is not one of solve, solve-charged, renorm, pv-saddle, expand"))
        })?,
    };

    let box_length = positive(v.f("lattice.box_length"), "lattice.box_length")?;
    let max_index = v.i("lattice.max_index");
    if !(0..=64).contains(&max_index) {
        return Err(bad("lattice.max_index", format!("{max_index} not in 0..=64")));
    }
    let cutoff = positive(v.f("lattice.cutoff"), "lattice.cutoff")?;
    let lattice = LatticeParams::new(box_length, max_index as i32, cutoff)
        .map_err(|e| bad("lattice.cutoff", e.to_string()))?;
    let mass = positive(v.f("physics.mass"), "physics.mass")?;

    let b = renorm::b_constant(cutoff / mass)?;
    let (alpha, alpha_ph) = match (v.opt_f("physics.alpha"), v.opt_f("physics.alpha_ph")) {
        (Some(_), Some(_)) => return Err(bad("physics.alpha_ph", "give either physics.alpha or physics.alpha_ph")),
        (Some(a), None) => {
            if !(a >= 0.0) {
                return Err(bad("physics.alpha", format!("{a} must be >= 0")));
            }
            (a, None)
        }
        (None, Some(a)) => {
            if !(a >= 0.0) {
                return Err(bad("physics.alpha_ph", format!("{a} must be >= 0")));
            }
            let bare = renorm::bare_coupling(a, b)?;
            (bare, Some(a))
        }
        (None, None) => (0.0, None),
    };
    let e = v.f("physics.e");
    let target_charge = v.f("physics.target_charge");

    let profile = v.s("nu.profile").unwrap_or("zero");
    let profile_keys: &[(&str, &[&str])] = &[
        ("gaussian", &["nu.charge", "nu.width"]),
        ("point-pair", &["nu.mode", "nu.amplitude"]),
        ("file", &["nu.file"]),
    ];
    for (p, keys) in profile_keys {
        if *p != profile {
            if let Some(k) = keys.iter().find(|k| set(k)) {
                return Err(bad(k, format!("not used by nu.profile = {profile}; exactly one density source")));
            }
        }
    }
    let nu = match profile {
        "zero" => NuSource::Zero,
        "gaussian" => NuSource::Gaussian {
            charge: v.f("nu.charge"),
            width: positive(v.f("nu.width"), "nu.width")?,
        },
        "point-pair" => NuSource::PointPair {
            mode: v.mode("nu.mode")?,
            amplitude: v.f("nu.amplitude"),
        },
        "file" => match v.s("nu.file") {
            Some(p) if !p.is_empty() => NuSource::File(PathBuf::from(p)),
            _ => return Err(bad("nu.file", "required for nu.profile = file")),
        },
        other => return Err(bad("nu.profile", format!("{other:?} is not one of zero, gaussian, point-pair, file"))),
    };

    let scf = ScfConfig {
        mixing: v.f("scf.mixing"),
        tol: v.f("scf.tol"),
        max_iter: count(v.i("scf.max_iter"), "scf.max_iter", 1)?,
        kernel_eps: v.f("scf.kernel_eps"),
        target_charge: (command == Command::SolveCharged).then_some(target_charge),
        mu_bracket: (v.f("scf.mu_min"), v.f("scf.mu_max")),
        charge_tol: v.f("scf.charge_tol"),
    };
    scf.validate()?;
    if scf.mu_bracket.1 >= 1.0 {
        return Err(bad("scf.mu_max", "must be below 1 (units of the mass)"));
    }

    let ratios = v.list("renorm.ratios");
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0)) {
        return Err(bad("renorm.ratios", format!("{r} must be positive")));
    }
    let landau_couplings = v.list("renorm.landau_couplings");
    if let Some(a) = landau_couplings.iter().find(|a| !(**a > 0.0)) {
        return Err(bad("renorm.landau_couplings", format!("{a} must be positive")));
    }
    let screening_alphas = v.list("renorm.screening_alphas");
    if let Some(a) = screening_alphas.iter().find(|a| !(**a >= 0.0)) {
        return Err(bad("renorm.screening_alphas", format!("{a} must be >= 0")));
    }
    let renorm = RenormSettings {
        ratios,
        landau_couplings,
        lattice_response: v.b("renorm.lattice_response"),
        probe_alpha: positive(v.f("renorm.probe_alpha"), "renorm.probe_alpha")?,
        screening_alphas,
    };

    let setup = PVSetup::new(mass, v.f("pv.m1"), v.f("pv.m2")).map_err(|err| match err {
        Error::InvalidArgument(m) => bad("pv.m1", m),
        other => other,
    })?;
    let saddle = SaddleConfig {
        radius: v.f("pv.radius"),
        step_ascent: v.f("pv.step_ascent"),
        step_descent: v.f("pv.step_descent"),
        tol: v.f("pv.tol"),
        max_outer: count(v.i("pv.max_outer"), "pv.max_outer", 1)?,
        stall_limit: count(v.i("pv.stall_limit"), "pv.stall_limit", 1)?,
    };
    saddle.validate()?;
    let uv_cutoffs = v.list("pv.uv_cutoffs");
    if let Some(c) = uv_cutoffs.iter().find(|c| !(**c > 0.0)) {
        return Err(bad("pv.uv_cutoffs", format!("{c} must be positive")));
    }
    let pv = PvSettings {
        setup,
        saddle,
        ext_mode: v.mode("pv.ext_mode")?,
        ext_amplitude: v.f("pv.ext_amplitude"),
        uv_cutoffs,
    };

    let expand = ExpandSettings {
        couplings_ph: v.list("expand.couplings"),
        order: count(v.i("expand.order"), "expand.order", 1)?,
    };
    if let Some(a) = expand.couplings_ph.iter().find(|a| !(**a > 0.0)) {
        return Err(bad("expand.couplings", format!("{a} must be positive")));
    }
    if command == Command::Expand && expand.couplings_ph.len() < expand.order + 2 {
        return Err(bad(
            "expand.couplings",
            format!("order {} needs at least {} couplings", expand.order, expand.order + 2),
        ));
    }
    let checkpoint = v.b("run.checkpoint");

    // the derived bare coupling is part of the resolved record
    if alpha_ph.is_some() {
        values.insert("physics.alpha".into(), json!(alpha));
        values.insert("physics.b_constant".into(), json!(b));
    }
    Ok(RunConfig {
        command,
        lattice,
        mass,
        alpha,
        alpha_ph,
        e,
        target_charge,
        nu,
        scf,
        renorm,
        pv,
        expand,
        checkpoint,
        resolved: values,
    })
}

impl RunConfig {
    /// Flat `section.key -> value` object of every resolved setting.
    pub fn to_json_value(&self) -> Value {
        Value::Object(self.resolved.clone().into_iter().collect())
    }
}

/// The default box length is 2 pi; exposed so documentation and tests agree.
pub const DEFAULT_BOX_LENGTH: f64 = 2.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_solve_gets_defaults() {
        let c = parse_config("run.command = solve\n").unwrap();
        assert_eq!(c.command, Command::Solve);
        assert_eq!(c.scf.mixing, 0.3);
        assert_eq!(c.scf.tol, 1e-8);
        assert_eq!(c.scf.max_iter, 500);
        assert_eq!(c.nu, NuSource::Zero);
        assert_eq!(c.alpha, 0.0);
        assert_eq!(c.lattice.box_length, DEFAULT_BOX_LENGTH);
    }

    #[test]
    fn mixing_out_of_range() {
        let err = parse_config("run.command = solve\nscf.mixing = 1.5\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref key, .. } if key == "scf.mixing"), "{err}");
    }

    #[test]
    fn physical_coupling_is_converted() {
        let c = parse_config("run.command = solve\nlattice.cutoff = 3\nphysics.alpha_ph = 0.1\n").unwrap();
        let b = renorm::b_constant(3.0).unwrap();
        assert!((c.alpha - 0.1 / (1.0 - 0.1 * b)).abs() < 1e-16);
        assert!((renorm::renormalize_coupling(c.alpha, b).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(c.to_json_value()["physics.alpha"], json!(c.alpha));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_config("# header\nrun.command = solve\nnot a line\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_config("run.command = solve\nscf.bogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_config("run.command = solve\nrun.command = renorm\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn single_density_source() {
        let err = parse_config("run.command = solve\nnu.profile = gaussian\nnu.file = x.json\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref key, .. } if key == "nu.file"));
        let err = parse_config("run.command = solve\nnu.profile = file\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref key, .. } if key == "nu.file"));
    }

    #[test]
    fn comments_quotes_and_lists() {
        let c = parse_config(
            "run.command = \"renorm\"  # trailing\nrenorm.ratios = 5, 50 ,500\nnu.profile = point-pair\nnu.mode = 0,1,-1\n",
        )
        .unwrap();
        assert_eq!(c.renorm.ratios, vec![5.0, 50.0, 500.0]);
        assert_eq!(
            c.nu,
            NuSource::PointPair {
                mode: [0, 1, -1],
                amplitude: 0.01
            }
        );
    }

    #[test]
    fn both_couplings_rejected() {
        let err = parse_config("run.command = solve\nphysics.alpha = 0.1\nphysics.alpha_ph = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn landau_violation_from_config() {
        let err = parse_config("run.command = solve\nlattice.cutoff = 1000\nphysics.alpha_ph = 2\n").unwrap_err();
        assert!(matches!(err, Error::LandauPoleViolation { .. }));
    }

    #[test]
    fn overrides_replace_entries() {
        let c = parse_config_with("run.command = solve\nscf.mixing = 0.5\n", &[("scf.mixing".into(), "0.7".into())]).unwrap();
        assert_eq!(c.scf.mixing, 0.7);
    }
}
