//! Run configuration resolved from flags, `ALTRUIST_*` environment variables
//! and a TOML config file, in that order of priority.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use altruist::params::BiasMode;
use altruist::phantom::PhantomSpec;
use altruist::{LinearSolverKind, RegParams, SeedParams, SolverConfig, SolverMode};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "ALTRUIST_";

/// Every recognised key with its default, if any.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("params", Some("preset:layer")),
    ("alpha1", None),
    ("alpha2", None),
    ("beta1", None),
    ("beta2", None),
    ("theta1", None),
    ("theta2", None),
    ("lambda1", None),
    ("lambda2", None),
    ("gamma", None),
    ("zeta", None),
    ("mf", None),
    ("iterations", Some("10")),
    ("bias_mode", Some("zero")),
    ("mode", Some("altruist")),
    ("linear_solver", Some("auto")),
    ("cg_tolerance", Some("1e-8")),
    ("cg_max_iters", None),
    ("relinearizations", Some("0")),
    ("seed_max_lag", Some("10")),
    ("seed_smoothness", Some("0.2")),
    ("seed_median_window", Some("5")),
    ("kernel", Some("3")),
    ("kernels", Some("3,43,63")),
    ("phantom", Some("layer-high")),
    ("rows", Some("256")),
    ("cols", Some("64")),
    ("scatterer_density", None),
    ("psf_center_frequency", None),
    ("psf_axial_sigma", None),
    ("psf_lateral_sigma", None),
    ("noise_psnr_db", None),
    ("rng_seed", None),
    ("histogram", None),
    ("esf_line", None),
    ("esf_samples", Some("101")),
    ("display_range", None),
    ("out", Some(".")),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase())
}

/// Fully resolved key/value configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{key} = {value:?}: {why}"))
}

impl RunConfig {
    /// Layers `file`, then `env`, then `flags` over the defaults.
    pub fn resolve(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().filter_map(|(k, d)| d.map(|d| (k.to_string(), d.to_string()))).collect();
        if let Some(path) = file {
            values.extend(read_config_file(path)?);
        }
        for (name, value) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            if rest == "CONFIG" {
                continue;
            }
            let key = rest.to_ascii_lowercase();
            if !is_known(&key) {
                return Err(CliError::Invalid(format!("unknown environment variable {name}")));
            }
            values.insert(key, value);
        }
        for (key, value) in flags {
            if !is_known(&key) {
                return Err(CliError::Invalid(format!("unknown config key `{key}`")));
            }
            values.insert(key, value);
        }
        let cfg = Self { values };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults only.
    pub fn defaults() -> Self {
        Self::resolve(None, std::iter::empty(), std::iter::empty()).expect("defaults are valid")
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Result<Self, CliError> {
        if !is_known(key) {
            return Err(CliError::Invalid(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        self.validate()?;
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|v| v.trim().parse::<T>().map_err(|e| bad(key, v, e))).transpose()
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| CliError::Invalid(format!("missing config key `{key}`")))
    }

    /// Runs every typed accessor so bad values fail before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.solver_config()?;
        self.seed_params()?;
        self.kernel()?;
        self.kernels()?;
        self.phantom_spec()?;
        self.histogram()?;
        self.esf_line()?;
        self.esf_samples()?;
        self.display_range()?;
        Ok(())
    }

    pub fn reg_params(&self) -> Result<RegParams<f64>, CliError> {
        let spec = self.get("params").unwrap_or("preset:layer");
        let name = spec.strip_prefix("preset:").ok_or_else(|| bad("params", spec, "expected preset:<name>"))?;
        let base = RegParams::<f64>::preset(name).map_err(|e| bad("params", spec, e))?;
        let pick = |k: &str, d: f64| self.parse::<f64>(k).map(|v| v.unwrap_or(d));
        let mut p = RegParams::with_multiplier(
            pick("alpha1", base.alpha1)?,
            pick("alpha2", base.alpha2)?,
            pick("beta1", base.beta1)?,
            pick("beta2", base.beta2)?,
            pick("mf", base.mf)?,
            pick("gamma", base.gamma)?,
            pick("zeta", base.zeta)?,
            self.require("iterations")?,
        )
        .map_err(CliError::from)?;
        for (key, slot) in [
            ("theta1", &mut p.theta1),
            ("theta2", &mut p.theta2),
            ("lambda1", &mut p.lambda1),
            ("lambda2", &mut p.lambda2),
        ] {
            if let Some(v) = self.parse::<f64>(key)? {
                *slot = v;
            }
        }
        p.bias_mode = self.require::<BiasMode>("bias_mode")?;
        p.validate()?;
        Ok(p)
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>, CliError> {
        let mut c = SolverConfig::new(self.reg_params()?)
            .with_mode(self.require::<SolverMode>("mode")?)
            .with_linear_solver(self.require::<LinearSolverKind>("linear_solver")?);
        c.cg_tolerance = self.require("cg_tolerance")?;
        c.cg_max_iters = self.parse("cg_max_iters")?;
        c.relinearizations = self.require("relinearizations")?;
        c.validate()?;
        Ok(c)
    }

    pub fn seed_params(&self) -> Result<SeedParams<f64>, CliError> {
        let p = SeedParams {
            max_lag: self.require("seed_max_lag")?,
            smoothness_weight: self.require("seed_smoothness")?,
            median_window: self.require("seed_median_window")?,
        };
        // row count is only known once frames are loaded
        p.validate(usize::MAX)?;
        Ok(p)
    }

    pub fn kernel(&self) -> Result<usize, CliError> {
        let k: usize = self.require("kernel")?;
        check_kernel("kernel", k)
    }

    pub fn kernels(&self) -> Result<Vec<usize>, CliError> {
        let raw = self.get("kernels").unwrap_or_default();
        let list: Vec<usize> = parse_list(raw).map_err(|e| bad("kernels", raw, e))?;
        if list.is_empty() {
            return Err(bad("kernels", raw, "empty list"));
        }
        list.into_iter().map(|k| check_kernel("kernels", k)).collect()
    }

    pub fn phantom_spec(&self) -> Result<PhantomSpec, CliError> {
        let name = self.get("phantom").unwrap_or("layer-high");
        let mut spec = PhantomSpec::preset(name, self.require("rows")?, self.require("cols")?).map_err(CliError::from)?;
        if let Some(v) = self.parse("scatterer_density")? {
            spec.scatterer_density = v;
        }
        if let Some(v) = self.parse("psf_center_frequency")? {
            spec.psf_center_frequency = v;
        }
        if let Some(v) = self.parse("psf_axial_sigma")? {
            spec.psf_axial_sigma = v;
        }
        if let Some(v) = self.parse("psf_lateral_sigma")? {
            spec.psf_lateral_sigma = v;
        }
        if let Some(v) = self.get("noise_psnr_db") {
            spec.noise_psnr_db = match v.trim() {
                "none" | "off" => None,
                s => Some(s.parse().map_err(|e| bad("noise_psnr_db", v, e))?),
            };
        }
        if let Some(v) = self.parse("rng_seed")? {
            spec.rng_seed = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// `RxC` target/background counts.
    pub fn histogram(&self) -> Result<Option<(usize, usize)>, CliError> {
        let Some(raw) = self.get("histogram") else { return Ok(None) };
        let (r, c) = raw.split_once(['x', 'X']).ok_or_else(|| bad("histogram", raw, "expected RxC"))?;
        let r: usize = r.trim().parse().map_err(|e| bad("histogram", raw, e))?;
        let c: usize = c.trim().parse().map_err(|e| bad("histogram", raw, e))?;
        if r == 0 || c == 0 {
            return Err(bad("histogram", raw, "counts must be positive"));
        }
        Ok(Some((r, c)))
    }

    /// ESF segment `r0,c0,r1,c1` in 1-based coordinates.
    pub fn esf_line(&self) -> Result<Option<((f64, f64), (f64, f64))>, CliError> {
        let Some(raw) = self.get("esf_line") else { return Ok(None) };
        let v: Vec<f64> = parse_list(raw).map_err(|e| bad("esf_line", raw, e))?;
        match v[..] {
            [r0, c0, r1, c1] => Ok(Some(((r0, c0), (r1, c1)))),
            _ => Err(bad("esf_line", raw, "expected r0,c0,r1,c1")),
        }
    }

    pub fn esf_samples(&self) -> Result<usize, CliError> {
        let n: usize = self.require("esf_samples")?;
        if n < 2 {
            return Err(bad("esf_samples", &n.to_string(), "need at least 2"));
        }
        Ok(n)
    }

    pub fn display_range(&self) -> Result<Option<(f64, f64)>, CliError> {
        let Some(raw) = self.get("display_range") else { return Ok(None) };
        let v: Vec<f64> = parse_list(raw).map_err(|e| bad("display_range", raw, e))?;
        match v[..] {
            [lo, hi] if hi > lo => Ok(Some((lo, hi))),
            _ => Err(bad("display_range", raw, "expected lo,hi with lo < hi")),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("."))
    }
}

fn check_kernel(key: &str, k: usize) -> Result<usize, CliError> {
    if k < 3 || k % 2 == 0 {
        return Err(bad(key, &k.to_string(), "kernel length must be odd and >= 3"));
    }
    Ok(k)
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>, T::Err> {
    raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let table: toml::Table =
        text.parse().map_err(|e| CliError::Invalid(format!("config file {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (key, value) in table {
        if !is_known(&key) {
            return Err(CliError::Invalid(format!("unknown config key `{key}` in {}", path.display())));
        }
        let s = match value {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => return Err(CliError::Invalid(format!("config key `{key}` has unsupported value {other}"))),
        };
        out.insert(key, s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::defaults();
        let p = c.reg_params().unwrap();
        assert_eq!((p.alpha1, p.zeta, p.mf, p.iterations), (0.015, 3000.0, 100.0, 10));
        assert_eq!(c.kernels().unwrap(), vec![3, 43, 63]);
        assert_eq!(c.seed_params().unwrap().max_lag, 10);
    }

    #[test]
    fn flags_beat_env() {
        let c = RunConfig::resolve(
            None,
            kv(&[("ALTRUIST_ZETA", "10"), ("ALTRUIST_SEED_MAX_LAG", "7"), ("PATH", "/bin")]),
            kv(&[("zeta", "20")]),
        )
        .unwrap();
        assert_eq!(c.reg_params().unwrap().zeta, 20.0);
        assert_eq!(c.seed_params().unwrap().max_lag, 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::resolve(None, kv(&[("ALTRUIST_COLOUR", "red")]), vec![]).is_err());
        assert!(RunConfig::resolve(None, vec![], kv(&[("colour", "red")])).is_err());
        assert!(RunConfig::defaults().with("colour", "red").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (k, v) in [("zeta", "-1"), ("kernel", "4"), ("mode", "fast"), ("histogram", "6by20"), ("params", "layer")] {
            assert!(RunConfig::defaults().with(k, v).is_err(), "{k}={v}");
        }
    }

    #[test]
    fn preset_overrides_and_histogram() {
        let c = RunConfig::defaults().with("params", "preset:inclusion").unwrap().with("theta1", "2").unwrap();
        let p = c.reg_params().unwrap();
        assert_eq!((p.alpha1, p.theta1, p.lambda1), (0.05, 2.0, 25.0 * 0.025));
        let c = c.with("histogram", "6x20").unwrap();
        assert_eq!(c.histogram().unwrap(), Some((6, 20)));
    }
}
