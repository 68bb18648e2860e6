//! Flat `key = value` configuration with a single `[experiment]` section
//! header and full-line `#` comments. Resolution order: built-in defaults,
//! then the config file, then repeated `--override KEY=VALUE` flags, then the
//! dedicated `--seed` / `--chains` flags.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

/// Every experiment the harness knows how to run.
pub const EXPERIMENTS: [&str; 5] =
    ["gaussian-rate", "dim-sweep", "lipschitz-1d", "sgld-batch", "oracle-vs-sampler"];

/// One tunable: its key, default value, and template documentation.
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

macro_rules! keys {
    ($(($key:literal, $default:literal, $doc:literal)),* $(,)?) => {
        &[$(KeyDoc { key: $key, default: $default, doc: $doc }),*]
    };
}

const GAUSSIAN_RATE_KEYS: &[KeyDoc] = keys![
    ("m", "1", "strong convexity of the Gaussian prior (> 0)"),
    ("beta", "1", "temperature (> 0)"),
    ("tau", "2", "step-schedule exponent (>= 1; the closed-form weights need 2)"),
    (
        "eta_tilde_0",
        "auto",
        "initial gradient step; auto = 1/(4 L) with L the half-squared-error smoothness R_z"
    ),
    ("T", "10000", "horizon: number of recursion steps, one CSV row each"),
    ("d", "16", "parameter dimension for synthetic data"),
    ("n", "16", "number of synthetic data points"),
    ("r_z", "1", "exact squared feature norm for synthetic data (> 0)"),
    (
        "dataset",
        "",
        "optional CSV dataset path (row = datum, last column = target); when set, d/n/r_z come from the file"
    ),
    ("seed", "7", "seed for synthetic-data generation"),
];

const DIM_SWEEP_KEYS: &[KeyDoc] = keys![
    ("m", "1", "strong convexity of the Gaussian prior (> 0)"),
    ("beta", "1", "temperature (> 0)"),
    ("tau", "2", "step-schedule exponent (>= 1; the closed-form weights need 2)"),
    (
        "eta_tilde_0",
        "auto",
        "initial gradient step; auto = 1/(4 L) with L the half-squared-error smoothness R_z"
    ),
    ("epsilon", "0.01", "weighted-KL accuracy target (> 0)"),
    ("d", "4,64,256", "comma-separated list of dimensions to sweep"),
    ("n", "16", "number of synthetic data points"),
    ("r_z", "1", "exact squared feature norm for synthetic data (> 0)"),
    ("seed", "7", "seed for synthetic-data generation (one fresh dataset per dimension)"),
];

const LIPSCHITZ_1D_KEYS: &[KeyDoc] = keys![
    ("G", "1", "scale of the kinked likelihood G·|w - c| (> 0)"),
    ("c", "1", "kink location"),
    ("m", "1", "strong convexity of the Gaussian prior (> 0)"),
    ("beta", "1", "temperature (> 0)"),
    ("tau", "2", "step-schedule exponent (>= 1; the closed-form weights need 2)"),
    ("eta_tilde_0", "auto", "initial gradient step; auto = 1/m (non-smooth schedule)"),
    ("T", "4000", "number of sampler steps per chain"),
    ("horizons", "250,4000", "comma-separated horizons at which the pooled W2 is evaluated (each <= T)"),
    ("chains", "25", "number of independent chains"),
    ("grid_points", "10001", "quadrature grid size (>= 4)"),
    ("grid_half_width", "12", "quadrature half-width around the posterior mode"),
    ("seed", "7", "seed for chain noise"),
];

const SGLD_BATCH_KEYS: &[KeyDoc] = keys![
    ("m", "1", "strong convexity of the Gaussian prior (> 0)"),
    ("beta", "auto", "temperature; auto = 1/n (the minibatch-variant default)"),
    ("tau", "2", "step-schedule exponent (>= 1; the closed-form weights need 2)"),
    (
        "eta_tilde_0",
        "auto",
        "initial gradient step; auto = 1/(4 L) with L the half-squared-error smoothness R_z"
    ),
    ("T", "5000", "number of sampler steps per chain"),
    ("d", "32", "parameter dimension for synthetic data"),
    ("n", "256", "number of synthetic data points"),
    ("r_z", "1", "exact squared feature norm for synthetic data (> 0)"),
    ("batches", "1,8,64", "comma-separated minibatch sizes to sweep"),
    ("chains", "1000", "number of independent chains per batch size"),
    ("noise_draws", "100000", "Monte-Carlo draws for the gradient-noise measurement at the mode"),
    (
        "dataset",
        "",
        "optional CSV dataset path (row = datum, last column = target); when set, d/n/r_z come from the file"
    ),
    ("seed", "7", "seed for data, chains, and noise measurement"),
];

const ORACLE_VS_SAMPLER_KEYS: &[KeyDoc] = keys![
    ("m", "1", "strong convexity of the Gaussian prior (> 0)"),
    ("beta", "1", "temperature (> 0)"),
    ("tau", "2", "step-schedule exponent (>= 1; the closed-form weights need 2)"),
    (
        "eta_tilde_0",
        "auto",
        "initial gradient step; auto = 1/(4 L) with L the half-squared-error smoothness R_z"
    ),
    ("T", "100", "number of sampler steps per chain"),
    ("checkpoints", "1,10,100", "comma-separated steps at which moments are compared (each <= T)"),
    ("d", "2", "parameter dimension for synthetic data"),
    ("n", "16", "number of synthetic data points"),
    ("r_z", "1", "exact squared feature norm for synthetic data (> 0)"),
    ("chains", "100000", "number of independent chains"),
    ("bootstrap_replicates", "200", "bootstrap resamples for covariance standard errors (>= 2)"),
    (
        "dataset",
        "",
        "optional CSV dataset path (row = datum, last column = target); when set, d/n/r_z come from the file"
    ),
    ("seed", "7", "seed for data, chains, and the bootstrap"),
];

/// The tunables of one experiment, in template order.
pub fn experiment_keys(experiment: &str) -> Option<&'static [KeyDoc]> {
    match experiment {
        "gaussian-rate" => Some(GAUSSIAN_RATE_KEYS),
        "dim-sweep" => Some(DIM_SWEEP_KEYS),
        "lipschitz-1d" => Some(LIPSCHITZ_1D_KEYS),
        "sgld-batch" => Some(SGLD_BATCH_KEYS),
        "oracle-vs-sampler" => Some(ORACLE_VS_SAMPLER_KEYS),
        _ => None,
    }
}

/// One-paragraph description used at the top of the template.
pub fn experiment_blurb(experiment: &str) -> &'static str {
    match experiment {
        "gaussian-rate" => {
            "Exact KL rate curve for a Gaussian (half-squared-error ridge) target: runs the \
             closed-form moment recursion and writes one row per step, together with the \
             cumulative weighted KL that the convergence guarantee controls."
        }
        "dim-sweep" => {
            "Dimension sweep on the exact recursion: for each dimension, finds the first horizon \
             at which the weighted KL drops below epsilon and compares it with the closed-form \
             iteration bound."
        }
        "lipschitz-1d" => {
            "One-dimensional kinked likelihood G·|w - c| with Gaussian prior: pools weighted \
             samples across chains and steps and measures the squared Wasserstein-2 distance to \
             the quadrature posterior at several horizons."
        }
        "sgld-batch" => {
            "Minibatch sweep on a ridge-separable model: per batch size, checks the weighted \
             posterior-mean estimate against the exact posterior mean and measures the \
             stochastic-gradient variance at the mode against its b²/|S| prediction."
        }
        "oracle-vs-sampler" => {
            "Moment consistency: runs many chains on a low-dimensional quadratic target and \
             compares empirical means and covariances at chosen checkpoints with the exact \
             moment recursion, using Monte-Carlo and bootstrap standard errors."
        }
        _ => "",
    }
}

/// Fixed CSV schema per experiment: `(column, documentation)` pairs.
pub fn csv_schema(experiment: &str) -> Option<&'static [(&'static str, &'static str)]> {
    match experiment {
        "gaussian-rate" => Some(&[
            ("t", "step index, 1..=T"),
            ("eta_tilde", "gradient step size at t"),
            ("kl_oracle", "exact KL(law of the recorded iterate at t || posterior)"),
            ("weighted_kl_cum", "weighted KL over steps 1..=t with horizon-t weights"),
        ]),
        "dim-sweep" => Some(&[
            ("d", "dimension"),
            ("t_star", "first horizon with weighted KL <= epsilon (0 if never reached)"),
            ("bound_t", "closed-form iteration bound for epsilon"),
        ]),
        "lipschitz-1d" => Some(&[
            ("horizon", "pooling horizon (number of steps)"),
            ("w2_sq", "squared W2 between the pooled weighted samples and the quadrature posterior"),
            ("kl_bound", "closed-form weighted-KL bound 5G²/(beta·m·horizon)"),
            ("w2_bound", "transport bound (2·beta/m)·kl_bound"),
        ]),
        "sgld-batch" => Some(&[
            ("batch_size", "minibatch size"),
            ("max_dev_se", "worst posterior-mean deviation across coordinates, in standard errors"),
            ("noise_measured", "Monte-Carlo stochastic-gradient variance at the mode"),
            ("noise_predicted", "b²/|S| prediction"),
            ("noise_ratio", "measured / predicted"),
        ]),
        "oracle-vs-sampler" => Some(&[
            ("t", "checkpoint step"),
            ("quantity", "mean or cov"),
            ("i", "row coordinate"),
            ("j", "column coordinate (equals i for mean rows)"),
            ("oracle", "exact recursion value"),
            ("empirical", "ensemble estimate"),
            ("se", "standard error (Monte-Carlo for means, bootstrap for covariances)"),
        ]),
        _ => None,
    }
}

/// Canonicalizes an experiment name or fails with the list of valid names.
pub fn canonical_experiment(name: &str) -> Result<&'static str> {
    EXPERIMENTS
        .iter()
        .find(|e| **e == name)
        .copied()
        .with_context(|| format!("unknown experiment `{name}`; valid names: {}", EXPERIMENTS.join(", ")))
}

/// Parses a config file: one `[experiment]` header, then `key = value` lines.
/// Returns the experiment name and the key/value pairs in file order.
pub fn parse_config_text(text: &str) -> Result<(String, Vec<(String, String)>)> {
    let mut experiment: Option<String> = None;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .with_context(|| format!("line {lineno}: malformed section header `{line}`"))?
                .trim();
            if experiment.is_some() {
                bail!("line {lineno}: more than one [experiment] section header");
            }
            if name.is_empty() {
                bail!("line {lineno}: empty section header");
            }
            experiment = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {lineno}: expected `key = value`, got `{line}`"))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("line {lineno}: empty key");
        }
        if experiment.is_none() {
            bail!("line {lineno}: `{key}` appears before the [experiment] section header");
        }
        if pairs.iter().any(|(k, _)| k == key) {
            bail!("line {lineno}: duplicate key `{key}`");
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    let experiment = experiment.context("config file has no [experiment] section header")?;
    Ok((experiment, pairs))
}

/// A fully resolved configuration: every tunable of one experiment has a
/// value, and no unknown keys are present.
#[derive(Debug)]
pub struct Resolved {
    pub experiment: &'static str,
    values: BTreeMap<String, String>,
}

/// Merges defaults, an optional parsed config file, `--override` pairs, and
/// the dedicated `--seed` / `--chains` flags.
pub fn resolve(
    experiment_flag: Option<&str>,
    file: Option<(String, Vec<(String, String)>)>,
    overrides: &[(String, String)],
    seed: Option<u64>,
    chains: Option<u64>,
) -> Result<Resolved> {
    let name = match (&file, experiment_flag) {
        (Some((from_file, _)), Some(from_flag)) => {
            if from_file != from_flag {
                bail!(
                    "config file configures experiment `{from_file}` but --experiment says `{from_flag}`"
                );
            }
            from_flag.to_string()
        }
        (Some((from_file, _)), None) => from_file.clone(),
        (None, Some(from_flag)) => from_flag.to_string(),
        (None, None) => bail!(
            "no experiment selected: pass --experiment or --config; valid names: {}",
            EXPERIMENTS.join(", ")
        ),
    };
    let experiment = canonical_experiment(&name)?;
    let keys = experiment_keys(experiment).expect("canonical experiment has a key table");

    let mut values: BTreeMap<String, String> =
        keys.iter().map(|k| (k.key.to_string(), k.default.to_string())).collect();
    let known = |key: &str| keys.iter().any(|k| k.key == key);

    if let Some((_, pairs)) = file {
        for (key, value) in pairs {
            if !known(&key) {
                bail!("config key `{key}` is not a tunable of experiment `{experiment}`");
            }
            values.insert(key, value);
        }
    }
    for (key, value) in overrides {
        if !known(key) {
            bail!("override key `{key}` is not a tunable of experiment `{experiment}`");
        }
        values.insert(key.clone(), value.clone());
    }
    if let Some(seed) = seed {
        if !known("seed") {
            bail!("experiment `{experiment}` has no seed tunable");
        }
        values.insert("seed".into(), seed.to_string());
    }
    if let Some(chains) = chains {
        if !known("chains") {
            bail!("experiment `{experiment}` has no chains tunable");
        }
        values.insert("chains".into(), chains.to_string());
    }
    Ok(Resolved { experiment, values })
}

impl Resolved {
    fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .with_context(|| format!("missing config key `{key}`"))
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.raw(key)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        raw.parse().with_context(|| format!("config key `{key}`: `{raw}` is not a number"))
    }

    /// Numeric value with an `auto` escape hatch resolved by the caller.
    pub fn get_f64_auto(&self, key: &str, auto: impl FnOnce() -> f64) -> Result<f64> {
        let raw = self.raw(key)?;
        if raw == "auto" {
            Ok(auto())
        } else {
            raw.parse().with_context(|| format!("config key `{key}`: `{raw}` is not a number"))
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let raw = self.raw(key)?;
        raw.parse().with_context(|| format!("config key `{key}`: `{raw}` is not a non-negative integer"))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let raw = self.raw(key)?;
        raw.parse().with_context(|| format!("config key `{key}`: `{raw}` is not a non-negative integer"))
    }

    pub fn get_list_u64(&self, key: &str) -> Result<Vec<u64>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|item| {
                item.trim().parse().with_context(|| {
                    format!("config key `{key}`: `{item}` is not a non-negative integer")
                })
            })
            .collect()
    }

    pub fn get_list_usize(&self, key: &str) -> Result<Vec<usize>> {
        Ok(self.get_list_u64(key)?.into_iter().map(|v| v as usize).collect())
    }

    /// The resolved config as a single sorted `key=value` line (the CSV
    /// self-description). Values keep their configured spelling, so `auto`
    /// stays `auto`; its resolution rule is deterministic and documented in
    /// the template.
    pub fn render(&self) -> String {
        let mut line = format!("experiment={}", self.experiment);
        for (key, value) in &self.values {
            line.push(' ');
            line.push_str(key);
            line.push('=');
            line.push_str(value);
        }
        line
    }
}
