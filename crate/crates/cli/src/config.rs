//! Run configuration: defaults, `key = value` files and overrides.

use ffdga::genome::EncodingSpec;
use ffdga::pbo::{AnnealParams, PboParams};
use ffdga::synth::{BaselineParams, BenchConfig};

use crate::error::{CliError, Result};

/// Every tunable of a run. Defaults follow the published protocol where it
/// states a value (3 levels, 3x3 base lattice, 5 bits, 3 px radius); GA
/// rates and budgets are implementation defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub w_max: f64,
    pub s_bit: f64,
    pub s_fit: f64,
    pub e: f64,
    pub p_min: f64,
    pub g_size: usize,
    pub population: usize,
    pub bits_per_param: u32,
    pub radius: f64,
    pub levels: usize,
    pub base_k: usize,
    pub base_l: usize,
    pub seed: u64,
    pub threads: usize,
    pub n_cases: usize,
    pub image_size: usize,
    pub gt_k: usize,
    pub gt_l: usize,
    pub gt_radius: f64,
    pub crossover_rate: f64,
    /// Negative means `1 / genome_length`.
    pub mutation_rate: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            w_max: 0.5,
            s_bit: 2.0,
            s_fit: 0.3,
            e: 1.0,
            p_min: 0.1,
            g_size: 200,
            population: 50,
            bits_per_param: 5,
            radius: 3.0,
            levels: 3,
            base_k: 3,
            base_l: 3,
            seed: 0,
            threads: 0,
            n_cases: 10,
            image_size: 128,
            gt_k: 5,
            gt_l: 5,
            gt_radius: 8.0,
            crossover_rate: 0.9,
            mutation_rate: -1.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "w_max", "s_bit", "s_fit", "e", "p_min", "g_size", "population", "bits_per_param", "radius",
    "levels", "base_k", "base_l", "seed", "threads", "n_cases", "image_size", "gt_k", "gt_l",
    "gt_radius", "crossover_rate", "mutation_rate",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config `{key}`: cannot parse `{value}`")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "w_max" => self.w_max = parse(key, v)?,
            "s_bit" => self.s_bit = parse(key, v)?,
            "s_fit" => self.s_fit = parse(key, v)?,
            "e" => self.e = parse(key, v)?,
            "p_min" => self.p_min = parse(key, v)?,
            "g_size" => self.g_size = parse(key, v)?,
            "population" => self.population = parse(key, v)?,
            "bits_per_param" => self.bits_per_param = parse(key, v)?,
            "radius" => self.radius = parse(key, v)?,
            "levels" => self.levels = parse(key, v)?,
            "base_k" => self.base_k = parse(key, v)?,
            "base_l" => self.base_l = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "n_cases" => self.n_cases = parse(key, v)?,
            "image_size" => self.image_size = parse(key, v)?,
            "gt_k" => self.gt_k = parse(key, v)?,
            "gt_l" => self.gt_l = parse(key, v)?,
            "gt_radius" => self.gt_radius = parse(key, v)?,
            "crossover_rate" => self.crossover_rate = parse(key, v)?,
            "mutation_rate" => self.mutation_rate = parse(key, v)?,
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` document. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected `key = value`, got `{line}`", n + 1))
            })?;
            self.set(key, value).map_err(|e| match e {
                CliError::Usage(m) => CliError::Usage(format!("config line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{kv}`")))?;
        self.set(key, value)
    }

    fn check(ok: bool, field: &str, rule: &str, value: impl std::fmt::Display) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(CliError::Usage(format!("invalid `{field}` = {value}: {rule}")))
        }
    }

    /// Field-by-field range check; the first offending field is reported.
    pub fn validate(&self) -> Result<()> {
        Self::check(self.w_max > 0.0 && self.w_max <= 1.0, "w_max", "must be in (0, 1]", self.w_max)?;
        Self::check(self.s_bit.is_finite() && self.s_bit > 0.0, "s_bit", "must be > 0", self.s_bit)?;
        Self::check(self.s_fit.is_finite() && self.s_fit > 0.0, "s_fit", "must be > 0", self.s_fit)?;
        Self::check(self.e.is_finite() && self.e > 0.0, "e", "must be > 0", self.e)?;
        Self::check((0.0..1.0).contains(&self.p_min), "p_min", "must be in [0, 1)", self.p_min)?;
        Self::check(self.g_size >= 1, "g_size", "must be >= 1", self.g_size)?;
        Self::check(self.population >= 1, "population", "must be >= 1", self.population)?;
        Self::check(
            (1..=EncodingSpec::MAX_BITS).contains(&self.bits_per_param),
            "bits_per_param",
            "must be in 1..=32",
            self.bits_per_param,
        )?;
        Self::check(self.radius.is_finite() && self.radius > 0.0, "radius", "must be > 0", self.radius)?;
        Self::check((1..=16).contains(&self.levels), "levels", "must be in 1..=16", self.levels)?;
        Self::check(self.base_k >= 2, "base_k", "must be >= 2", self.base_k)?;
        Self::check(self.base_l >= 2, "base_l", "must be >= 2", self.base_l)?;
        Self::check(self.image_size >= 1, "image_size", "must be >= 1", self.image_size)?;
        Self::check(self.gt_k >= 2, "gt_k", "must be >= 2", self.gt_k)?;
        Self::check(self.gt_l >= 2, "gt_l", "must be >= 2", self.gt_l)?;
        Self::check(self.gt_radius.is_finite() && self.gt_radius >= 0.0, "gt_radius", "must be >= 0", self.gt_radius)?;
        Self::check((0.0..=1.0).contains(&self.crossover_rate), "crossover_rate", "must be in [0, 1]", self.crossover_rate)?;
        Self::check(
            self.mutation_rate <= 1.0 && !self.mutation_rate.is_nan(),
            "mutation_rate",
            "must be <= 1 (negative selects 1/genome_length)",
            self.mutation_rate,
        )?;
        Ok(())
    }

    pub fn encoding(&self) -> EncodingSpec {
        EncodingSpec {
            bits_per_param: self.bits_per_param,
            radius: self.radius,
        }
    }

    pub fn pbo(&self) -> PboParams {
        PboParams {
            w_max: self.w_max,
            s_bit: self.s_bit,
            s_fit: self.s_fit,
        }
    }

    pub fn anneal(&self) -> AnnealParams {
        AnnealParams {
            e: self.e,
            p_min: self.p_min,
            g_size: self.g_size,
        }
    }

    pub fn bench(&self) -> BenchConfig {
        BenchConfig {
            n_cases: self.n_cases,
            image_size: self.image_size,
            levels: self.levels,
            base_k: self.base_k,
            base_l: self.base_l,
            generations: self.g_size,
            population: self.population,
            enc: self.encoding(),
            pbo: self.pbo(),
            anneal: self.anneal(),
            baseline: BaselineParams {
                crossover_rate: self.crossover_rate,
                mutation_rate: (self.mutation_rate >= 0.0).then_some(self.mutation_rate),
                g_size: self.g_size,
            },
            gt_k: self.gt_k,
            gt_l: self.gt_l,
            gt_radius: self.gt_radius,
            seed: self.seed,
        }
    }
}
