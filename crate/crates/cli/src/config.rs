//! Flat key-value config with dotted sections. Strict: unknown keys are
//! rejected so a misspelled field can never fall back to a silent default.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Every key the tool understands.
const KNOWN_KEYS: &[&str] = &[
    "mesh.domain",
    "mesh.n",
    "mesh.r_ext",
    "mesh.tail_tol",
    "params.dim",
    "params.s",
    "params.p",
    "quad.order",
    "quad.depth",
    "coeff.value",
    "nonlinearity.kind",
    "nonlinearity.rho",
    "nonlinearity.q",
    "nonlinearity.value",
    "nonlinearity.coeffs",
    "nonlinearity.growth_a1",
    "nonlinearity.growth_a2",
    "nonlinearity.growth_q",
    "certify.case",
    "certify.gamma",
    "certify.eta",
    "certify.epsilon",
    "certify.delta",
    "certify.b",
    "certify.t",
    "certify.mu",
    "certify.beta",
    "certify.t_max",
    "embed.q_list",
    "embed.starts",
    "embed.max_iters",
    "embed.grad_tol",
    "solve.lambda",
    "solve.tol",
    "solve.max_iters",
    "solve.starts",
    "solve.k_target",
    "solve.deflation_shift",
    "solve.deflation_power",
    "solve.distinct_tol",
    "seed",
    "out.dir",
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Every key that was read, with its resolved value; becomes the
    /// embedded effective config of each report.
    resolved: std::cell::RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !known.contains(key.as_str()) {
                return Err(ConfigError(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(ConfigError(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self {
            values,
            resolved: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn record(&self, key: &str, value: impl ToString) {
        self.resolved
            .borrow_mut()
            .insert(key.to_string(), value.to_string());
    }

    /// Overrides a resolved entry (used when `auto` values become numbers).
    pub fn resolve(&self, key: &str, value: impl ToString) {
        self.record(key, value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        let v = self
            .values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    pub fn required_string(&self, key: &str) -> Result<String> {
        match self.values.get(key) {
            Some(v) => {
                self.record(key, v);
                Ok(v.clone())
            }
            None => Err(ConfigError(format!("missing required key `{key}`"))),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            Some(v) => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a number")))?;
                self.record(key, x);
                Ok(x)
            }
            None => {
                self.record(key, default);
                Ok(default)
            }
        }
    }

    pub fn required_f64(&self, key: &str) -> Result<f64> {
        let v = self.required_string(key)?;
        let x: f64 = v
            .parse()
            .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a number")))?;
        self.record(key, x);
        Ok(x)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            Some(v) => {
                let x: usize = v
                    .parse()
                    .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a count")))?;
                self.record(key, x);
                Ok(x)
            }
            None => {
                self.record(key, default);
                Ok(default)
            }
        }
    }

    /// Seed for every randomized procedure; deliberately has no default.
    pub fn seed(&self) -> Result<u64> {
        let v = self
            .values
            .get("seed")
            .ok_or_else(|| ConfigError("randomized procedures require an explicit `seed` key".into()))?;
        let x: u64 = v
            .parse()
            .map_err(|_| ConfigError(format!("key `seed`: `{v}` is not an integer")))?;
        self.record("seed", x);
        Ok(x)
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    let x: f64 = part.trim().parse().map_err(|_| {
                        ConfigError(format!("key `{key}`: `{part}` is not a number"))
                    })?;
                    out.push(x);
                }
                self.record(key, v);
                Ok(out)
            }
            None => {
                let rendered: Vec<String> = default.iter().map(|x| x.to_string()).collect();
                self.record(key, rendered.join(","));
                Ok(default.to_vec())
            }
        }
    }

    /// The defaults-resolved view of every key this run actually consulted.
    pub fn effective(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    /// Scoped recording: snapshot the resolved map before a sub-computation
    /// whose keys should not leak into the embedded config.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    pub fn restore(&self, snapshot: BTreeMap<String, String>) {
        *self.resolved.borrow_mut() = snapshot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let ok = Config::parse("mesh.n = 8\nparams.s = 0.5 # comment\n").unwrap();
        assert_eq!(ok.raw("mesh.n"), Some("8"));
        let err = Config::parse("mesh.m = 8\n").unwrap_err();
        assert!(err.0.contains("unknown key"));
        let dup = Config::parse("mesh.n = 8\nmesh.n = 9\n").unwrap_err();
        assert!(dup.0.contains("duplicate"));
    }

    #[test]
    fn records_resolved_defaults() {
        let c = Config::parse("mesh.n = 8\n").unwrap();
        assert_eq!(c.usize("mesh.n", 4).unwrap(), 8);
        assert_eq!(c.f64("params.s", 0.5).unwrap(), 0.5);
        let eff = c.effective();
        assert_eq!(eff.get("mesh.n").unwrap(), "8");
        assert_eq!(eff.get("params.s").unwrap(), "0.5");
    }

    #[test]
    fn seed_has_no_default() {
        let c = Config::parse("mesh.n = 8\n").unwrap();
        assert!(c.seed().is_err());
        let c = Config::parse("seed = 42\n").unwrap();
        assert_eq!(c.seed().unwrap(), 42);
    }
}
