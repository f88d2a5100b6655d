//! Run configuration: defaults, then a config file (`key = value` lines or a
//! JSON object), then `key=value` overrides, then explicit flags.

use std::path::{Path, PathBuf};

use crossguide_core::analysis::{DecayWindow, GridPolicy, GridSpec, SolveSettings};
use crossguide_core::eigensolver::SolverOptions;
use crossguide_core::SymmetryClass;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub class: Option<String>,
    pub beta: Option<f64>,
    /// List `a,b,c`, range `a:b:step`, or `a:b` for the reference grid.
    pub betas: Option<String>,
    /// Named grid set; overrides the per-beta policy.
    pub set: Option<String>,
    pub l: Option<f64>,
    pub n: Option<usize>,
    /// Grid sizes for extrapolation, list or `a:b:step`.
    pub ns: Option<String>,
    pub tol: f64,
    pub seed: u64,
    pub krylov_dim: Option<usize>,
    pub max_passes: Option<usize>,
    pub window_offset: f64,
    pub window_end: f64,
    pub window_floor: f64,
    pub truncation_correction: bool,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    pub require_bound: bool,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        let w = DecayWindow::default();
        Self {
            class: None,
            beta: None,
            betas: None,
            set: None,
            l: None,
            n: None,
            ns: None,
            tol: s.tol,
            seed: s.seed,
            krylov_dim: None,
            max_passes: None,
            window_offset: w.offset,
            window_end: w.end_fraction,
            window_floor: w.floor,
            truncation_correction: w.truncation_correction,
            cache_dir: None,
            no_cache: false,
            require_bound: false,
            csv: None,
            json: None,
            out: None,
        }
    }
}

/// Keys whose values are always strings, even when they look numeric.
const STRING_KEYS: &[&str] = &["class", "betas", "set", "ns", "cache_dir", "csv", "json", "out"];

fn typed_value(key: &str, raw: &str) -> Value {
    let raw = raw.trim();
    if STRING_KEYS.contains(&key) {
        return Value::String(raw.trim_matches('"').to_string());
    }
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>, CliError> {
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = normalize_key(k);
        map.insert(key.clone(), typed_value(&key, v));
    }
    Ok(map)
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_").to_ascii_lowercase()
}

#[derive(Debug, Default)]
pub struct ConfigBuilder {
    layers: Vec<Map<String, Value>>,
}

impl ConfigBuilder {
    pub fn file(mut self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let layer = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect(),
                Ok(_) => return Err(CliError::Usage("JSON config must be an object".into())),
                Err(e) => return Err(CliError::Usage(format!("invalid JSON config: {e}"))),
            }
        } else {
            parse_key_values(&text)?
        };
        self.layers.push(layer);
        Ok(self)
    }

    /// `key=value` overrides.
    pub fn overrides<'a>(mut self, items: impl IntoIterator<Item = &'a str>) -> Result<Self, CliError> {
        let mut layer = Map::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override {item:?}: expected key=value")))?;
            let key = normalize_key(k);
            layer.insert(key.clone(), typed_value(&key, v));
        }
        self.layers.push(layer);
        Ok(self)
    }

    pub fn value(mut self, key: &str, v: Option<Value>) -> Self {
        if let Some(v) = v {
            let mut m = Map::new();
            m.insert(key.to_string(), v);
            self.layers.push(m);
        }
        self
    }

    pub fn build(self) -> Result<RunConfig, CliError> {
        let mut merged = match serde_json::to_value(RunConfig::default())? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for layer in self.layers {
            merged.extend(layer);
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }
}

impl RunConfig {
    pub fn class(&self) -> Result<SymmetryClass, CliError> {
        let s = self.class.as_deref().ok_or_else(|| CliError::Usage("--class is required".into()))?;
        s.parse().map_err(|e| CliError::Usage(format!("{e}")))
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        self.beta.ok_or_else(|| CliError::Usage("--beta is required".into()))
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            solver: SolverOptions {
                tol: self.tol,
                seed: self.seed,
                krylov_dim: self.krylov_dim,
                max_passes: self.max_passes.unwrap_or(SolverOptions::default().max_passes),
                ..SolverOptions::default()
            },
            window: DecayWindow {
                offset: self.window_offset,
                end_fraction: self.window_end,
                floor: self.window_floor,
                truncation_correction: self.truncation_correction,
            },
        }
    }

    /// Explicit `l`/`n` win over a named set, which wins over the policy.
    pub fn policy(&self) -> Result<GridPolicy, CliError> {
        let named = match &self.set {
            Some(s) => Some(GridSpec::named(s).ok_or_else(|| CliError::Usage(format!("unknown grid set {s:?}")))?),
            None => None,
        };
        Ok(match (self.l, self.n, named) {
            (Some(l), Some(n), _) => GridPolicy::Fixed(GridSpec::new("custom", l, n)),
            (None, None, Some(g)) => GridPolicy::Fixed(g),
            (None, None, None) => GridPolicy::Standard,
            (l, n, g) => {
                let base = g.ok_or_else(|| CliError::Usage("--l and --n must be given together".into()))?;
                GridPolicy::Fixed(GridSpec::new("custom", l.unwrap_or(base.l), n.unwrap_or(base.n)))
            }
        })
    }
}

const TABLE_EE: &[f64] = &[
    1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0, 2.1, 2.2, 2.3, 2.4, 2.5, 2.6, 2.7, 2.8, 2.9, 3.0,
];
const TABLE_OO: &[f64] = &[
    1.00, 1.01, 1.02, 1.03, 1.04, 1.05, 1.06, 1.07, 1.08, 1.09, 1.10, 1.11, 1.111, 1.112, 1.113, 1.114, 1.115, 1.116,
];
const TABLE_EO: &[f64] = &[
    1.530, 1.531, 1.532, 1.533, 1.534, 1.535, 1.536, 1.537, 1.538, 1.539, 1.54, 1.55, 1.56, 1.57, 1.58, 1.59, 1.6, 1.7,
    1.8, 1.9, 2.0, 2.1, 2.2, 2.3, 2.4, 2.5, 2.6, 2.7, 2.8, 2.9, 3.0, 4.0, 5.0,
];

/// Reference beta grid of a class; odd-even shares the even-even grid.
pub fn reference_betas(class: SymmetryClass) -> &'static [f64] {
    match class {
        SymmetryClass::EvenEven | SymmetryClass::OddEven => TABLE_EE,
        SymmetryClass::OddOdd => TABLE_OO,
        SymmetryClass::EvenOdd => TABLE_EO,
    }
}

fn number(s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::Usage(format!("not a number: {s:?}")))
}

/// Inclusive `a:b:step` range, robust to rounding of the last point.
fn stepped(a: f64, b: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || b < a {
        return Err(CliError::Usage(format!("range {a}:{b}:{step} must ascend with a positive step")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    // Round to 12 significant digits so 1.0 + 3*0.1 prints as 1.3.
    Ok((0..=count)
        .map(|i| {
            let v = a + i as f64 * step;
            format!("{v:.12e}").parse().unwrap()
        })
        .collect())
}

pub fn parse_betas(spec: &str, class: SymmetryClass) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b] => {
            let (a, b) = (number(a)?, number(b)?);
            let eps = 1e-12;
            let v: Vec<f64> = reference_betas(class).iter().copied().filter(|&x| x >= a - eps && x <= b + eps).collect();
            if v.is_empty() {
                return Err(CliError::Usage(format!("no reference betas for {class} in [{a}, {b}]")));
            }
            Ok(v)
        }
        [a, b, s] => stepped(number(a)?, number(b)?, number(s)?),
        [_] => spec.split(',').map(number).collect(),
        _ => Err(CliError::Usage(format!("cannot parse beta list {spec:?}"))),
    }
}

pub fn parse_ns(spec: &str) -> Result<Vec<usize>, CliError> {
    let int = |s: &str| -> Result<usize, CliError> {
        s.trim().parse().map_err(|_| CliError::Usage(format!("not a grid size: {s:?}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, s] => {
            let (a, b, s) = (int(a)?, int(b)?, int(s)?);
            if s == 0 || b < a {
                return Err(CliError::Usage(format!("range {spec:?} must ascend with a positive step")));
            }
            Ok((a..=b).step_by(s).collect())
        }
        [_] => spec.split(',').map(int).collect(),
        _ => Err(CliError::Usage(format!("cannot parse grid sizes {spec:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let kv = dir.path().join("run.cfg");
        std::fs::write(&kv, "# comment\nclass = oo\nbeta = 1.05\ntol = 1e-10\nset = III\n").unwrap();
        let c = ConfigBuilder::default()
            .file(&kv)
            .unwrap()
            .overrides(["beta=1.1", "require-bound=true"])
            .unwrap()
            .value("seed", Some(7.into()))
            .build()
            .unwrap();
        assert_eq!(c.class().unwrap(), SymmetryClass::OddOdd);
        assert_eq!(c.beta, Some(1.1));
        assert_eq!(c.tol, 1e-10);
        assert_eq!(c.seed, 7);
        assert!(c.require_bound);
        assert_eq!(c.policy().unwrap(), GridPolicy::Fixed(GridSpec::named("III").unwrap()));
    }

    #[test]
    fn json_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            class: Some("eo".into()),
            betas: Some("1.53:1.6".into()),
            ..RunConfig::default()
        };
        let p = dir.path().join("run.json");
        std::fs::write(&p, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(ConfigBuilder::default().file(&p).unwrap().build().unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigBuilder::default().overrides(["colour=red"]).unwrap().build().is_err());
        assert!(parse_key_values("no equals sign").is_err());
    }

    #[test]
    fn beta_syntax() {
        assert_eq!(parse_betas("1,1.5,2", SymmetryClass::EvenEven).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_betas("1:1.3:0.1", SymmetryClass::EvenEven).unwrap(), vec![1.0, 1.1, 1.2, 1.3]);
        let oo = parse_betas("1.00:1.116", SymmetryClass::OddOdd).unwrap();
        assert_eq!(oo.len(), 18);
        assert_eq!(*oo.last().unwrap(), 1.116);
        assert_eq!(parse_betas("1.6:2.0", SymmetryClass::EvenOdd).unwrap(), vec![1.6, 1.7, 1.8, 1.9, 2.0]);
        assert!(parse_betas("2:1:0.1", SymmetryClass::EvenEven).is_err());
        assert!(parse_betas("x", SymmetryClass::EvenEven).is_err());
    }

    #[test]
    fn grid_sizes() {
        let ns = parse_ns("80:880:40").unwrap();
        assert_eq!((ns.len(), ns[0], *ns.last().unwrap()), (21, 80, 880));
        assert_eq!(parse_ns("80,120").unwrap(), vec![80, 120]);
    }

    #[test]
    fn explicit_grid_overrides_set() {
        let c = RunConfig {
            set: Some("I".into()),
            n: Some(300),
            ..RunConfig::default()
        };
        assert_eq!(c.policy().unwrap(), GridPolicy::Fixed(GridSpec::new("custom", 20.0, 300)));
    }
}
