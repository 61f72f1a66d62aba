//! Flat `key = value` configuration with section prefixes.
//!
//! Files hold one entry per line; `#` starts a comment. Several files can be
//! layered (later entries win) and single entries overridden from the
//! command line. Relative paths resolve against the directory of the file
//! that set them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

const MARGINAL_FIELDS: [&str; 9] = [
    "threshold",
    "threshold_quantile",
    "min",
    "n_exceed",
    "n_total",
    "beta_alpha",
    "beta_beta",
    "gp_shape",
    "gp_scale",
];

const KEYS: [&str; 40] = [
    "data.catalog",
    "data.counts",
    "indicators",
    "marginals.bins",
    "marginals.threshold_quantile",
    "diagnostics.grid_quantiles",
    "copula.family",
    "copula.fit_families",
    "copula.inner",
    "copula.theta",
    "copula.theta_inner",
    "copula.theta_outer",
    "copula.bootstrap",
    "frequency.p",
    "frequency.q",
    "frequency.intensities",
    "frequency.mean",
    "frequency.ar",
    "frequency.ma",
    "frequency.noise_variance",
    "frequency.ljung_box_lags",
    "frequency.horizon",
    "rates.reversion",
    "rates.long_run",
    "rates.vol",
    "rates.r0",
    "trigger.quantile",
    "trigger.levels",
    "trigger.basis",
    "trigger.functional",
    "bond.face",
    "bond.coupon_rate",
    "bond.maturity",
    "bond.purchase_year",
    "bond.convention",
    "sim.n_reps",
    "sim.seed",
    "sim.steps_per_year",
    "sim.workers",
    "sim.execution",
];

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    File { path: PathBuf, line: usize },
    Override,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg = Self::new();
        cfg.merge_file(path)?;
        Ok(cfg)
    }

    /// Layers the entries of `path` over the current ones.
    pub fn merge_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        self.merge_str(&text, path)
    }

    /// Layers entries parsed from `text`, attributed to `path`.
    pub fn merge_str(&mut self, text: &str, path: &Path) -> CliResult<()> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Validation(format!("{}:{}: empty key", path.display(), i + 1)));
            }
            if let Some(first) = seen.insert(key.clone(), i + 1) {
                return Err(CliError::config(
                    key,
                    format!("set twice in {} (lines {first} and {})", path.display(), i + 1),
                ));
            }
            self.entries.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    origin: Origin::File {
                        path: path.to_path_buf(),
                        line: i + 1,
                    },
                },
            );
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("override `{assignment}` is not `key=value`")))?;
        self.insert(key.trim(), value.trim());
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin: Origin::Override,
            },
        );
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::config(key, format!("cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    /// [`Config::parse`] for a key that must be present; `hint` says where
    /// the value usually comes from.
    pub fn require<T: FromStr>(&self, key: &str, hint: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| CliError::config(key, format!("required but not set ({hint})")))
    }

    /// Comma-separated list; empty items are rejected.
    pub fn list(&self, key: &str) -> CliResult<Option<Vec<String>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let items: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Err(CliError::config(key, format!("empty item in list `{v}`")));
        }
        Ok(Some(items))
    }

    pub fn f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.list(key)?
            .map(|items| {
                items
                    .iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|e| CliError::config(key, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// A path value, resolved against the directory of the file that set it.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let e = self.entries.get(key)?;
        let p = PathBuf::from(&e.value);
        match &e.origin {
            Origin::File { path, .. } if p.is_relative() => {
                Some(path.parent().unwrap_or(Path::new("")).join(p))
            }
            _ => Some(p),
        }
    }

    /// Where a key was set, for messages.
    pub fn origin(&self, key: &str) -> Option<String> {
        self.entries.get(key).map(|e| match &e.origin {
            Origin::File { path, line } => format!("{}:{line}", path.display()),
            Origin::Override => "command line".to_string(),
        })
    }

    /// Rejects keys the engine does not know, and per-indicator keys for
    /// labels outside `indicators`.
    pub fn check_keys(&self) -> CliResult<()> {
        let labels = self.list("indicators")?;
        for key in self.entries.keys() {
            if KEYS.contains(&key.as_str()) {
                continue;
            }
            let parts: Vec<&str> = key.split('.').collect();
            let known = match parts.as_slice() {
                ["marginals", label, field] if MARGINAL_FIELDS.contains(field) => Some(label),
                ["diagnostics", label, "grid"] => Some(label),
                _ => None,
            };
            match (known, &labels) {
                (None, _) => {
                    return Err(CliError::config(
                        key,
                        format!("unknown key (set at {})", self.origin(key).unwrap_or_default()),
                    ))
                }
                (Some(label), Some(labels)) if !labels.iter().any(|l| l == label) => {
                    return Err(CliError::config(
                        key,
                        format!("indicator `{label}` is not listed in `indicators`"),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Every entry as `key = value`, sorted by key. Parsing the result
    /// reproduces the configuration.
    pub fn echo(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }
}

/// Grid written as `lo:hi:step` (inclusive) or as a comma-separated list.
pub fn parse_grid(key: &str, spec: &str) -> CliResult<Vec<f64>> {
    let bad = |msg: String| CliError::config(key, msg);
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("cannot parse `{s}` in grid `{spec}`: {e}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || !(hi >= lo) {
                return Err(bad(format!("grid `{spec}` needs lo <= hi and step > 0")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            if n > 10_000 {
                return Err(bad(format!("grid `{spec}` has more than 10000 points")));
            }
            // rounding keeps 0.8 + 3·0.02 printable as 0.86
            Ok((0..=n).map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10).collect())
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(bad(format!("grid `{spec}` is neither lo:hi:step nor a list"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        let mut c = Config::new();
        c.merge_str(text, Path::new("/cfg/run.conf")).unwrap();
        c
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let c = cfg("# header\n\nsim.seed = 7  # trailing\nindicators=AP, CAA\n");
        assert_eq!(c.parse::<u64>("sim.seed").unwrap(), Some(7));
        assert_eq!(c.list("indicators").unwrap().unwrap(), vec!["AP", "CAA"]);
        assert_eq!(c.origin("sim.seed").unwrap(), "/cfg/run.conf:3");
    }

    #[test]
    fn later_layers_and_overrides_win() {
        let mut c = cfg("sim.seed = 1\nbond.face = 100\n");
        c.merge_str("sim.seed = 2\n", Path::new("b.params")).unwrap();
        assert_eq!(c.get("sim.seed"), Some("2"));
        c.set_override("bond.face=50").unwrap();
        assert_eq!(c.get("bond.face"), Some("50"));
        assert_eq!(c.origin("bond.face").unwrap(), "command line");
    }

    #[test]
    fn errors_name_the_key() {
        let c = cfg("sim.n_reps = many\n");
        let e = c.parse::<usize>("sim.n_reps").unwrap_err();
        assert!(e.to_string().contains("`sim.n_reps`"), "{e}");
        let e = c.require::<f64>("bond.face", "set it").unwrap_err();
        assert!(e.to_string().contains("`bond.face`"), "{e}");
        let mut d = Config::new();
        let e = d.merge_str("a = 1\na = 2\n", Path::new("x")).unwrap_err();
        assert!(e.to_string().contains("`a`"), "{e}");
        assert!(d.merge_str("no equals sign\n", Path::new("x")).is_err());
    }

    #[test]
    fn unknown_and_foreign_label_keys_are_rejected() {
        let e = cfg("sim.sed = 1\n").check_keys().unwrap_err();
        assert!(e.to_string().contains("`sim.sed`"), "{e}");
        let e = cfg("indicators = AP\nmarginals.DEL.threshold = 3\n").check_keys().unwrap_err();
        assert!(e.to_string().contains("`marginals.DEL.threshold`"), "{e}");
        cfg("indicators = AP\nmarginals.AP.threshold = 3\ndiagnostics.AP.grid = 1:2:1\n")
            .check_keys()
            .unwrap();
    }

    #[test]
    fn relative_paths_resolve_against_their_file() {
        let mut c = cfg("data.catalog = catalog.csv\ndata.counts = /abs/counts.csv\n");
        assert_eq!(c.path("data.catalog").unwrap(), Path::new("/cfg/catalog.csv"));
        assert_eq!(c.path("data.counts").unwrap(), Path::new("/abs/counts.csv"));
        c.set_override("data.catalog=rel.csv").unwrap();
        assert_eq!(c.path("data.catalog").unwrap(), Path::new("rel.csv"));
    }

    #[test]
    fn echo_round_trips() {
        let c = cfg("b = 2\na = 1, 2\n");
        let mut d = Config::new();
        d.merge_str(&c.echo(), Path::new("/cfg/echo.conf")).unwrap();
        assert_eq!(c.echo(), d.echo());
        assert_eq!(d.get("a"), Some("1, 2"));
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("g", "0.80:0.90:0.02").unwrap(), vec![0.8, 0.82, 0.84, 0.86, 0.88, 0.9]);
        assert_eq!(parse_grid("g", "20:40:5").unwrap(), vec![20.0, 25.0, 30.0, 35.0, 40.0]);
        assert_eq!(parse_grid("g", "1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_grid("g", "3:1:1").is_err());
        assert!(parse_grid("g", "1:2:0").is_err());
        assert!(parse_grid("g", "1:x:1").is_err());
    }
}
