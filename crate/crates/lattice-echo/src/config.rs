//! Run configuration: `key = value` lines, dotted keys for sections, values
//! given as JSON literals (numbers, arrays, `true`/`false`) or bare words.
//!
//! ```text
//! lattice = [[2, 0.5], [0, 0.5]]
//! noise.kind = gaussian
//! noise.a = 0.1
//! seed = 3
//! recover.r_verify = 250
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lattice_echo_core::{make_lattice, LatticeSpec, Matrix, NoiseKind, NoiseModel, RecoveryParams};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverSection {
    pub r_detect: f64,
    pub r_verify: f64,
    pub beta_detect: f64,
    pub target_radius: Option<f64>,
    pub sign_folding: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSection {
    /// Radius ladder for the boundary-count suite.
    pub radii: Vec<f64>,
    /// Radius ladder for the lattice-point discrepancy suite.
    pub gauss_radii: Vec<f64>,
    pub lambda: Vec<f64>,
    pub wiener_radius: f64,
    pub affinity_pairs: usize,
    pub affinity_radius: f64,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lattice: Matrix,
    pub noise: NoiseModel,
    pub offset: Vec<f64>,
    pub seed: u64,
    /// Radius of the generated window; the largest radius the command needs when absent.
    pub gen_radius: Option<f64>,
    pub beta: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub spacing: Option<f64>,
    /// Window radius for `simulate` and `scan`.
    pub radius: f64,
    /// Radii for `sweep`.
    pub radii: Vec<f64>,
    /// Frequencies for `sweep`.
    pub lambdas: Vec<Vec<f64>>,
    pub recover: RecoverSection,
    pub diagnostics: DiagnosticsSection,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lattice: Matrix::identity(2),
            noise: NoiseModel::gaussian(2, 0.1).expect("valid default"),
            offset: vec![0.0; 2],
            seed: 1,
            gen_radius: None,
            beta: 0.007,
            box_lo: -2.5,
            box_hi: 2.5,
            spacing: None,
            radius: 100.0,
            radii: vec![25.0, 50.0, 100.0, 200.0],
            lambdas: vec![vec![1.0, 0.0]],
            recover: RecoverSection {
                r_detect: 60.0,
                r_verify: 250.0,
                beta_detect: 0.05,
                target_radius: None,
                sign_folding: false,
            },
            diagnostics: DiagnosticsSection {
                radii: vec![25.0, 50.0, 100.0, 200.0],
                gauss_radii: (1..=20).map(|i| 10.0 * i as f64).collect(),
                lambda: vec![1.0, 0.0],
                wiener_radius: 150.0,
                affinity_pairs: 20,
                affinity_radius: 50.0,
                grid_n: 256,
            },
            out: None,
        }
    }
}

const KEYS: &[&str] = &[
    "lattice",
    "dim",
    "offset",
    "seed",
    "gen_radius",
    "noise.kind",
    "noise.a",
    "noise.h",
    "noise.b",
    "noise.gamma",
    "noise.v",
    "noise.cell",
    "beta",
    "box",
    "spacing",
    "radius",
    "radii",
    "lambdas",
    "recover.r_detect",
    "recover.r_verify",
    "recover.beta_detect",
    "recover.target_radius",
    "recover.sign_folding",
    "diagnostics.radii",
    "diagnostics.gauss_radii",
    "diagnostics.lambda",
    "diagnostics.wiener_radius",
    "diagnostics.affinity_pairs",
    "diagnostics.affinity_radius",
    "diagnostics.grid_n",
    "out",
];

/// Splits the text into `key -> (line, value)`.
fn tokenize(text: &str) -> Result<BTreeMap<String, (usize, Value)>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, reason: format!("expected `key = value`, got `{trimmed}`") })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(ConfigError::Parse { line, reason: format!("malformed key `{key}`") });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse { line, reason: format!("missing value for `{key}`") });
        }
        let parsed = match serde_json::from_str::<Value>(value) {
            Ok(v) => v,
            Err(_) if value.chars().all(|c| c.is_ascii_alphanumeric() || "_-./".contains(c)) => {
                Value::String(value.to_string())
            }
            Err(e) => return Err(ConfigError::Parse { line, reason: format!("bad value for `{key}`: {e}") }),
        };
        if map.insert(key.to_string(), (line, parsed)).is_some() {
            return Err(ConfigError::Parse { line, reason: format!("duplicate key `{key}`") });
        }
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, (usize, Value)>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key).map(|(_, v)| v)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key).map(|v| as_f64(key, &v)).transpose()
    }

    fn vec(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.take(key).map(|v| as_vec(key, &v)).transpose()
    }

    fn matrix(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        self.take(key).map(|v| as_rows(key, &v)).transpose()
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.take(key).map(|v| v.as_u64().ok_or_else(|| invalid(key, "expected a nonnegative integer"))).transpose()
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        self.take(key)
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(invalid(key, "expected a word or string")),
            })
            .transpose()
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.take(key).map(|v| v.as_bool().ok_or_else(|| invalid(key, "expected true or false"))).transpose()
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    let x = v.as_f64().ok_or_else(|| invalid(key, "expected a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, "must be finite"))
    }
}

fn as_vec(key: &str, v: &Value) -> Result<Vec<f64>, ConfigError> {
    v.as_array().ok_or_else(|| invalid(key, "expected an array of numbers"))?.iter().map(|x| as_f64(key, x)).collect()
}

fn as_rows(key: &str, v: &Value) -> Result<Vec<Vec<f64>>, ConfigError> {
    v.as_array().ok_or_else(|| invalid(key, "expected an array of arrays"))?.iter().map(|r| as_vec(key, r)).collect()
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(key, "must be > 0"))
    }
}

fn positive_list(key: &str, xs: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    if xs.is_empty() {
        return Err(invalid(key, "must not be empty"));
    }
    for &x in &xs {
        positive(key, x)?;
    }
    Ok(xs)
}

fn square(key: &str, rows: Vec<Vec<f64>>, dim: usize) -> Result<Matrix, ConfigError> {
    if rows.len() != dim {
        return Err(invalid(key, format!("expected {dim} rows, got {}", rows.len())));
    }
    Matrix::from_rows(&rows).map_err(|e| invalid(key, e.to_string()))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let map = tokenize(text)?;
    if let Some((key, (line, _))) = map.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
        return Err(invalid(key, format!("unknown key (line {line})")));
    }
    let mut f = Fields { map };
    let defaults = RunConfig::default();

    let dim_key = f.uint("dim")?;
    let lattice = match f.take("lattice") {
        None => Matrix::identity(dim_key.unwrap_or(2) as usize),
        Some(Value::String(s)) if s == "identity" => Matrix::identity(dim_key.unwrap_or(2) as usize),
        Some(v) => {
            let rows = as_rows("lattice", &v)?;
            let m = square("lattice", rows.clone(), rows.len())?;
            if dim_key.is_some_and(|d| d as usize != m.dim()) {
                return Err(invalid("dim", "does not match the lattice rows"));
            }
            m
        }
    };
    let d = lattice.dim();
    if d == 0 {
        return Err(invalid("lattice", "dimension must be at least 1"));
    }
    make_lattice(lattice.clone()).map_err(|e| invalid("lattice", e.to_string()))?;

    let kind = f.string("noise.kind")?.unwrap_or_else(|| "gaussian".to_string());
    let a = f.f64("noise.a")?;
    let h = f.f64("noise.h")?;
    let b = f.f64("noise.b")?;
    let gamma = f.f64("noise.gamma")?;
    let v = f.vec("noise.v")?;
    let cell = f.matrix("noise.cell")?;
    let unused = |present: bool, key: &str| {
        if present {
            Err(invalid(key, format!("not used by noise.kind = {kind}")))
        } else {
            Ok(())
        }
    };
    let model = |r: lattice_echo_core::Result<NoiseModel>, key: &str| r.map_err(|e| invalid(key, e.to_string()));
    let noise = match kind.as_str() {
        "gaussian" => {
            unused(h.is_some() || b.is_some() || gamma.is_some() || v.is_some() || cell.is_some(), "noise")?;
            model(NoiseModel::gaussian(d, a.unwrap_or(0.1)), "noise.a")?
        }
        "uniform_box" => {
            unused(a.is_some() || b.is_some() || gamma.is_some() || v.is_some() || cell.is_some(), "noise")?;
            model(NoiseModel::uniform_box(d, h.ok_or_else(|| invalid("noise.h", "required"))?), "noise.h")?
        }
        "uniform_cell" => {
            unused(a.is_some() || h.is_some() || b.is_some() || gamma.is_some() || v.is_some(), "noise")?;
            let c = match cell {
                Some(rows) => square("noise.cell", rows, d)?,
                None => lattice.clone(),
            };
            model(NoiseModel::uniform_cell(&c), "noise.cell")?
        }
        "laplace" => {
            unused(a.is_some() || h.is_some() || gamma.is_some() || v.is_some() || cell.is_some(), "noise")?;
            model(NoiseModel::laplace(d, b.ok_or_else(|| invalid("noise.b", "required"))?), "noise.b")?
        }
        "point_mass" => {
            unused(a.is_some() || h.is_some() || b.is_some() || gamma.is_some() || cell.is_some(), "noise")?;
            let v = v.unwrap_or_else(|| vec![0.0; d]);
            if v.len() != d {
                return Err(invalid("noise.v", format!("expected {d} entries")));
            }
            model(NoiseModel::point_mass(v), "noise.v")?
        }
        "cauchy" => {
            unused(a.is_some() || h.is_some() || b.is_some() || v.is_some() || cell.is_some(), "noise")?;
            model(NoiseModel::cauchy(d, gamma.ok_or_else(|| invalid("noise.gamma", "required"))?), "noise.gamma")?
        }
        other => return Err(invalid("noise.kind", format!("unknown kind `{other}`"))),
    };

    let offset = f.vec("offset")?.unwrap_or_else(|| vec![0.0; d]);
    if offset.len() != d {
        return Err(invalid("offset", format!("expected {d} entries")));
    }
    let seed = f.uint("seed")?.unwrap_or(defaults.seed);
    let gen_radius = f.f64("gen_radius")?.map(|r| positive("gen_radius", r)).transpose()?;
    let beta = f.f64("beta")?.unwrap_or(defaults.beta);
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", "must lie in (0, 1)"));
    }
    let (box_lo, box_hi) = match f.vec("box")? {
        None => (defaults.box_lo, defaults.box_hi),
        Some(v) if v.len() == 2 && v[0] < 0.0 && v[1] > 0.0 => (v[0], v[1]),
        Some(_) => return Err(invalid("box", "expected [lo, hi] with lo < 0 < hi")),
    };
    let spacing = f.f64("spacing")?.map(|s| positive("spacing", s)).transpose()?;
    let radius = positive("radius", f.f64("radius")?.unwrap_or(defaults.radius))?;
    let radii = positive_list("radii", f.vec("radii")?.unwrap_or(defaults.radii))?;
    let lambdas = match f.matrix("lambdas")? {
        Some(l) => l,
        None => vec![(0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()],
    };
    if lambdas.iter().any(|l| l.len() != d) {
        return Err(invalid("lambdas", format!("every frequency needs {d} entries")));
    }

    let r_detect = positive("recover.r_detect", f.f64("recover.r_detect")?.unwrap_or(defaults.recover.r_detect))?;
    let r_verify = f.f64("recover.r_verify")?.unwrap_or(defaults.recover.r_verify);
    if !(r_verify >= r_detect) {
        return Err(invalid("recover.r_verify", "must be >= recover.r_detect"));
    }
    let beta_detect = f.f64("recover.beta_detect")?.unwrap_or(defaults.recover.beta_detect);
    if !(beta_detect > 0.0 && beta_detect < 1.0) {
        return Err(invalid("recover.beta_detect", "must lie in (0, 1)"));
    }
    let target_radius =
        f.f64("recover.target_radius")?.map(|r| positive("recover.target_radius", r)).transpose()?;
    let sign_folding = f.bool("recover.sign_folding")?.unwrap_or(false);

    let dd = defaults.diagnostics;
    let diag_radii = positive_list("diagnostics.radii", f.vec("diagnostics.radii")?.unwrap_or(dd.radii))?;
    let gauss_radii =
        positive_list("diagnostics.gauss_radii", f.vec("diagnostics.gauss_radii")?.unwrap_or(dd.gauss_radii))?;
    let lambda = match f.vec("diagnostics.lambda")? {
        Some(l) => l,
        None => (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
    };
    if lambda.len() != d {
        return Err(invalid("diagnostics.lambda", format!("expected {d} entries")));
    }
    let wiener_radius =
        positive("diagnostics.wiener_radius", f.f64("diagnostics.wiener_radius")?.unwrap_or(dd.wiener_radius))?;
    let affinity_pairs = f.uint("diagnostics.affinity_pairs")?.unwrap_or(dd.affinity_pairs as u64) as usize;
    let affinity_radius =
        positive("diagnostics.affinity_radius", f.f64("diagnostics.affinity_radius")?.unwrap_or(dd.affinity_radius))?;
    let grid_n = f.uint("diagnostics.grid_n")?.unwrap_or(dd.grid_n as u64) as usize;
    if grid_n < 2 {
        return Err(invalid("diagnostics.grid_n", "must be >= 2"));
    }
    let out = f.string("out")?;
    debug_assert!(f.map.is_empty(), "unconsumed keys: {:?}", f.map.keys());

    Ok(RunConfig {
        lattice,
        noise,
        offset,
        seed,
        gen_radius,
        beta,
        box_lo,
        box_hi,
        spacing,
        radius,
        radii,
        lambdas,
        recover: RecoverSection { r_detect, r_verify, beta_detect, target_radius, sign_folding },
        diagnostics: DiagnosticsSection {
            radii: diag_radii,
            gauss_radii,
            lambda,
            wiener_radius,
            affinity_pairs,
            affinity_radius,
            grid_n,
        },
        out,
    })
}

fn json<T: serde::Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn lattice_spec(&self) -> LatticeSpec {
        make_lattice(self.lattice.clone()).expect("validated at parse time")
    }

    pub fn recovery_params(&self) -> RecoveryParams {
        RecoveryParams {
            r_detect: self.recover.r_detect,
            r_verify: self.recover.r_verify,
            box_lo: self.box_lo,
            box_hi: self.box_hi,
            spacing: self.spacing,
            beta_detect: self.recover.beta_detect,
            beta: self.beta,
            target_radius: self.recover.target_radius,
            sign_folding: self.recover.sign_folding,
            ..RecoveryParams::default()
        }
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        put("lattice", json(&self.lattice.rows()));
        put("offset", json(&self.offset));
        put("seed", self.seed.to_string());
        if let Some(r) = self.gen_radius {
            put("gen_radius", json(&r));
        }
        put("noise.kind", self.noise.name().to_string());
        match self.noise.kind() {
            NoiseKind::Gaussian { a } => put("noise.a", json(a)),
            NoiseKind::UniformBox { h } => put("noise.h", json(h)),
            NoiseKind::UniformCell { cell } => put("noise.cell", json(&cell.rows())),
            NoiseKind::Laplace { b } => put("noise.b", json(b)),
            NoiseKind::PointMass { v } => put("noise.v", json(v)),
            NoiseKind::Cauchy { gamma } => put("noise.gamma", json(gamma)),
        }
        put("beta", json(&self.beta));
        put("box", json(&[self.box_lo, self.box_hi]));
        if let Some(sp) = self.spacing {
            put("spacing", json(&sp));
        }
        put("radius", json(&self.radius));
        put("radii", json(&self.radii));
        put("lambdas", json(&self.lambdas));
        put("recover.r_detect", json(&self.recover.r_detect));
        put("recover.r_verify", json(&self.recover.r_verify));
        put("recover.beta_detect", json(&self.recover.beta_detect));
        if let Some(t) = self.recover.target_radius {
            put("recover.target_radius", json(&t));
        }
        put("recover.sign_folding", self.recover.sign_folding.to_string());
        let dg = &self.diagnostics;
        put("diagnostics.radii", json(&dg.radii));
        put("diagnostics.gauss_radii", json(&dg.gauss_radii));
        put("diagnostics.lambda", json(&dg.lambda));
        put("diagnostics.wiener_radius", json(&dg.wiener_radius));
        put("diagnostics.affinity_pairs", dg.affinity_pairs.to_string());
        put("diagnostics.affinity_radius", json(&dg.affinity_radius));
        put("diagnostics.grid_n", dg.grid_n.to_string());
        if let Some(o) = &self.out {
            put("out", json(o));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("lattice = identity\nnoise.kind = gaussian\nnoise.a = 0.1\nseed = 1\n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn negative_dispersion_names_the_key() {
        let err = parse_config("noise.a = -1").unwrap_err();
        assert!(matches!(&err, ConfigError::Validation { key, .. } if key == "noise.a"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("seed = 1\n\nnot a pair\n").unwrap_err();
        assert_eq!(err, ConfigError::Parse { line: 3, reason: "expected `key = value`, got `not a pair`".into() });
        assert!(matches!(parse_config("seed = 1\nseed = 2"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("bogus.key = 3"), Err(ConfigError::Validation { key, .. }) if key == "bogus.key"));
    }

    #[test]
    fn round_trip() {
        let text = "lattice = [[2, 0.5], [0, 0.5]]\nnoise.kind = uniform_cell\noffset = [0.25, 0]\n\
                    beta = 0.007\nrecover.r_verify = 250\ngen_radius = 260\nout = \"r.json\"\nspacing = 0.004\n";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(parse_config(&d.to_text()).unwrap(), d);
        let p = parse_config("noise.kind = point_mass\nnoise.v = [0.1, 0.2]\n").unwrap();
        assert_eq!(parse_config(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn kind_specific_keys() {
        assert!(parse_config("noise.kind = laplace").is_err());
        assert!(parse_config("noise.kind = laplace\nnoise.b = 0.2").is_ok());
        assert!(parse_config("noise.kind = laplace\nnoise.b = 0.2\nnoise.a = 0.1").is_err());
        assert!(parse_config("noise.kind = wobbly").is_err());
        assert!(parse_config("lattice = [[1, 1], [1, 1]]").is_err());
        assert!(parse_config("box = [0, 1]").is_err());
    }
}
