//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; missing
//! keys take the defaults below. Unknown keys are rejected so typos surface
//! before a run starts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{dbm_to_watts, RbGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// JSON-lines corpus; `None` generates a synthetic corpus from the seed.
    pub corpus_path: Option<PathBuf>,
    pub embedding_path: Option<PathBuf>,
    pub users: usize,
    pub rbs: usize,
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub noise_dbm_per_hz: f64,
    /// One value for every RB, or exactly `rbs` values.
    pub interference_w: Vec<f64>,
    pub delay_s: f64,
    pub bits_per_token: f64,
    pub phi: f64,
    pub embed_dim: usize,
    pub attention_dim: usize,
    pub g_max: usize,
    pub batch: usize,
    pub inner_steps: usize,
    pub eta: f64,
    pub tau: f64,
    pub lambda_init: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub learning_rate: f64,
    pub max_outer: usize,
    pub window: usize,
    pub tolerance: f64,
    pub layers: usize,
    pub hidden: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            corpus_path: None,
            embedding_path: None,
            users: 30,
            rbs: 10,
            bandwidth_hz: 2e6,
            power_w: 1.0,
            noise_dbm_per_hz: -174.0,
            interference_w: vec![1e-12],
            delay_s: 1e-4,
            bits_per_token: 80.0,
            phi: 0.5,
            embed_dim: 500,
            attention_dim: 64,
            g_max: 16,
            batch: 100,
            inner_steps: 10,
            eta: 2.0,
            tau: 0.8,
            lambda_init: 1.0,
            lambda_min: 1e-4,
            lambda_max: 1e4,
            learning_rate: 1e-3,
            max_outer: 2000,
            window: 20,
            tolerance: 1e-4,
            layers: 3,
            hidden: 64,
            seed: 0,
            seeds: (0..10).collect(),
            cell_radius_m: 500.0,
            min_distance_m: 10.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl SimConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse_str(&text)?;
        // Relative corpus/embedding paths resolve against the config file.
        if let Some(base) = path.parent() {
            for p in [&mut cfg.corpus_path, &mut cfg.embedding_path]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    let joined = base.join(&*p);
                    *p = std::path::absolute(&joined).unwrap_or(joined);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "corpus_path" => self.corpus_path = optional_path(value),
            "embedding_path" => self.embedding_path = optional_path(value),
            "U" | "users" => self.users = parse(key, value)?,
            "Q" | "rbs" => self.rbs = parse(key, value)?,
            "W" | "bandwidth_hz" => self.bandwidth_hz = parse(key, value)?,
            "P" | "power_w" => self.power_w = parse(key, value)?,
            "N0" | "noise_dbm_per_hz" => self.noise_dbm_per_hz = parse(key, value)?,
            "interference_w" => self.interference_w = parse_list(key, value)?,
            "D" | "delay_s" => self.delay_s = parse(key, value)?,
            "O" | "bits_per_token" => self.bits_per_token = parse(key, value)?,
            "phi" => self.phi = parse(key, value)?,
            "D_x" | "embed_dim" => self.embed_dim = parse(key, value)?,
            "D_a" | "attention_dim" => self.attention_dim = parse(key, value)?,
            "G_max" | "g_max" => self.g_max = parse(key, value)?,
            "K" | "batch" => self.batch = parse(key, value)?,
            "T" | "inner_steps" => self.inner_steps = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "lambda_init" => self.lambda_init = parse(key, value)?,
            "lambda_min" => self.lambda_min = parse(key, value)?,
            "lambda_max" => self.lambda_max = parse(key, value)?,
            "delta" | "learning_rate" => self.learning_rate = parse(key, value)?,
            "max_outer" => self.max_outer = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "tolerance" => self.tolerance = parse(key, value)?,
            "L" | "layers" => self.layers = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "cell_radius_m" => self.cell_radius_m = parse(key, value)?,
            "min_distance_m" => self.min_distance_m = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        let positive = [
            ("W", self.bandwidth_hz),
            ("P", self.power_w),
            ("D", self.delay_s),
            ("O", self.bits_per_token),
            ("delta", self.learning_rate),
            ("lambda_init", self.lambda_init),
            ("lambda_min", self.lambda_min),
            ("cell_radius_m", self.cell_radius_m),
            ("min_distance_m", self.min_distance_m),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "`{name}` must be positive and finite, got {v}"
                )));
            }
        }
        if !self.noise_dbm_per_hz.is_finite() {
            return fail("`N0` must be finite");
        }
        if self.users == 0 || self.rbs == 0 {
            return fail("`U` and `Q` must be at least 1");
        }
        if !(self.interference_w.len() == 1 || self.interference_w.len() == self.rbs) {
            return fail("`interference_w` needs one value or one per RB");
        }
        if self
            .interference_w
            .iter()
            .any(|i| !(*i >= 0.0 && i.is_finite()))
        {
            return fail("`interference_w` entries must be nonnegative");
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return fail("`phi` must lie in (0,1)");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail("`tau` must lie in (0,1)");
        }
        if !(self.eta > 1.0) {
            return fail("`eta` must exceed 1");
        }
        if !(self.lambda_min <= self.lambda_init && self.lambda_init <= self.lambda_max) {
            return fail("need lambda_min <= lambda_init <= lambda_max");
        }
        if self.embed_dim == 0 || self.attention_dim == 0 || self.hidden == 0 || self.g_max == 0 {
            return fail("dimensions must be at least 1");
        }
        if self.layers < 1 {
            return fail("`L` must be at least 1");
        }
        if self.batch == 0 || self.inner_steps == 0 || self.max_outer == 0 || self.window == 0 {
            return fail("`K`, `T`, `max_outer`, `window` must be at least 1");
        }
        if self.seeds.is_empty() {
            return fail("`seeds` must list at least one seed");
        }
        Ok(())
    }

    pub fn noise_psd(&self) -> f64 {
        dbm_to_watts(self.noise_dbm_per_hz)
    }

    pub fn grid(&self) -> Result<RbGrid> {
        let interference = if self.interference_w.len() == 1 {
            vec![self.interference_w[0]; self.rbs]
        } else {
            self.interference_w.clone()
        };
        RbGrid::new(self.bandwidth_hz, interference, self.noise_psd())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Every effective parameter in the same `key = value` format
    /// [`SimConfig::parse_str`] reads.
    pub fn to_resolved(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("corpus_path", path(&self.corpus_path));
        put("embedding_path", path(&self.embedding_path));
        put("U", self.users.to_string());
        put("Q", self.rbs.to_string());
        put("W", self.bandwidth_hz.to_string());
        put("P", self.power_w.to_string());
        put("N0", self.noise_dbm_per_hz.to_string());
        put("interference_w", join(&self.interference_w));
        put("D", self.delay_s.to_string());
        put("O", self.bits_per_token.to_string());
        put("phi", self.phi.to_string());
        put("D_x", self.embed_dim.to_string());
        put("D_a", self.attention_dim.to_string());
        put("G_max", self.g_max.to_string());
        put("K", self.batch.to_string());
        put("T", self.inner_steps.to_string());
        put("eta", self.eta.to_string());
        put("tau", self.tau.to_string());
        put("lambda_init", self.lambda_init.to_string());
        put("lambda_min", self.lambda_min.to_string());
        put("lambda_max", self.lambda_max.to_string());
        put("delta", self.learning_rate.to_string());
        put("max_outer", self.max_outer.to_string());
        put("window", self.window.to_string());
        put("tolerance", self.tolerance.to_string());
        put("L", self.layers.to_string());
        put("hidden", self.hidden.to_string());
        put("seed", self.seed.to_string());
        put("seeds", join(&self.seeds));
        put("cell_radius_m", self.cell_radius_m.to_string());
        put("min_distance_m", self.min_distance_m.to_string());
        s
    }
}
