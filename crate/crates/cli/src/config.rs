//! Experiment configuration: a single TOML document with a section per
//! subcommand, schema-validated before any computation runs.
//!
//! Precedence, lowest to highest: built-in defaults, the `--config` file,
//! `STABLELAB_*` environment variables, command-line flags. Environment
//! variables mirror config keys: `STABLELAB_MASTER_SEED` overrides the
//! top-level `master_seed`, and `STABLELAB_<SECTION>__<KEY>` (double
//! underscore between section and key) overrides a section key, e.g.
//! `STABLELAB_TRAIN__T_MAX=10`. Values are parsed as TOML scalars or
//! arrays, falling back to plain strings.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use stablelab_core::network::{
    axis_aligned_columns, orthonormal_columns, random_unit_columns, InputSet,
};
use stablelab_core::report::config_digest;
use stablelab_core::rng::stream_rng;

/// A configuration or input problem; the process exits with code 2.
#[derive(Debug)]
pub struct InvalidInput(pub String);

impl std::fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InvalidInput {}

impl From<stablelab_core::error::Error> for InvalidInput {
    fn from(e: stablelab_core::error::Error) -> Self {
        InvalidInput(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, InvalidInput>;

/// Input matrix specification: explicit columns or one of the generators.
/// Generated inputs are drawn from the master seed on a per-command stream,
/// so identical configs produce identical inputs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum InputSpec {
    /// Columns given literally; `unit_norm` asserts each has norm 1.
    Explicit {
        columns: Vec<Vec<f64>>,
        #[serde(default)]
        unit_norm: bool,
    },
    /// k independent uniform draws from the unit sphere in dimension d.
    RandomUnitSphere { d: usize, k: usize },
    /// k orthonormal columns in dimension d (requires k <= d).
    Orthonormal { d: usize, k: usize },
    /// The first k standard basis vectors in dimension d (requires k <= d).
    AxisAligned { d: usize, k: usize },
}

impl InputSpec {
    /// Builds the concrete input set. Generator draws come from the stream
    /// named by `label` under `master_seed`.
    pub fn realize(&self, master_seed: u64, label: &str) -> Result<InputSet> {
        let set = match self {
            InputSpec::Explicit { columns, unit_norm } => {
                InputSet::new(columns.clone(), *unit_norm)?
            }
            InputSpec::RandomUnitSphere { d, k } => {
                let mut rng = stream_rng(master_seed, label, 0);
                random_unit_columns(*d, *k, &mut rng)?
            }
            InputSpec::Orthonormal { d, k } => {
                let mut rng = stream_rng(master_seed, label, 0);
                orthonormal_columns(*d, *k, &mut rng)?
            }
            InputSpec::AxisAligned { d, k } => axis_aligned_columns(*d, *k)?,
        };
        Ok(set)
    }
}

/// Training targets for the `train` command.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    /// Independent uniform draws in [-1, 1], fresh per seed.
    Random,
    /// The same fixed target vector for every seed.
    Explicit { values: Vec<f64> },
    /// Targets equal to the untrained network's own outputs: the loss starts
    /// at zero and the trajectory stays flat.
    NetworkOutput,
}

/// Width sweep of the rescaled output law against its limiting law.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LimitDistConfig {
    /// Stability index in (0, 2]; 2 selects the Gaussian baseline.
    pub alpha: f64,
    /// Strictly increasing widths, each at least 2.
    pub widths: Vec<usize>,
    /// Output vectors drawn per width.
    pub n_samples: usize,
    pub inputs: InputSpec,
}

impl Default for LimitDistConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            widths: vec![1 << 10, 1 << 13, 1 << 16],
            n_samples: 10_000,
            inputs: InputSpec::AxisAligned { d: 1, k: 1 },
        }
    }
}

/// Kernel width sweep, prefactor calibration, and eigenvalue quantiles.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NtkLimitConfig {
    /// Stability index in (0, 2): the kernel limit needs a strictly stable
    /// half-index, so the Gaussian endpoint is excluded here.
    pub alpha: f64,
    pub widths: Vec<usize>,
    /// Kernel samples drawn per width.
    pub n_samples: usize,
    /// Draws from the limiting kernel law.
    pub n_limit: usize,
    /// Width for the real-data prefactor calibration (at least 65536).
    pub calibration_width: usize,
    /// Kernel samples for the calibration run.
    pub calibration_samples: usize,
    /// Width for the minimum-eigenvalue quantile batch.
    pub eigen_width: usize,
    /// Independent seeds in the quantile batch.
    pub eigen_seeds: usize,
    /// Monte Carlo draws for activation-region probabilities.
    pub orthant_samples: usize,
    pub inputs: InputSpec,
}

impl Default for NtkLimitConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            widths: vec![1 << 4, 1 << 8, 1 << 12, 1 << 16],
            n_samples: 10_000,
            n_limit: 40_000,
            calibration_width: 1 << 16,
            calibration_samples: 4_000,
            eigen_width: 4096,
            eigen_seeds: 200,
            orthant_samples: 100_000,
            inputs: InputSpec::AxisAligned { d: 1, k: 1 },
        }
    }
}

/// Gradient-descent batches with decay certificates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    /// Stability index in (0, 2].
    pub alpha: f64,
    /// Network width.
    pub width: usize,
    /// Independent initialization seeds trained per run.
    pub seeds: u64,
    /// Integration horizon.
    pub t_max: f64,
    /// Step size; omit for the stability-scaled default.
    pub dt: Option<f64>,
    /// Learning rate; omit for the width-matched default (log m)^{2/alpha}.
    pub eta: Option<f64>,
    /// Record diagnostics every this many steps (first and last steps are
    /// always recorded). 1 records everything the per-step decay check needs.
    pub record_every: usize,
    /// The run passes only if at least this fraction of seeds satisfies the
    /// per-step decay certificate.
    pub min_certified_fraction: f64,
    pub targets: TargetSpec,
    pub inputs: InputSpec,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            width: 4096,
            seeds: 10,
            t_max: 20.0,
            dt: None,
            eta: None,
            record_every: 1,
            min_certified_fraction: 0.9,
            targets: TargetSpec::Random,
            inputs: InputSpec::Orthonormal { d: 4, k: 4 },
        }
    }
}

/// Bounded-activation surfaces over the unit square.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// One surface per stability index, each in (0, 2].
    pub alphas: Vec<f64>,
    /// Network width.
    pub width: usize,
    /// Grid points per axis on [0, 1]^2 (1 evaluates the origin only).
    pub grid_points: usize,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            alphas: vec![2.0, 1.5, 1.0, 0.5],
            width: 1024,
            grid_points: 33,
        }
    }
}

/// Standalone prefactor calibration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    /// Stability index in (0, 2).
    pub alpha: f64,
    /// Finite-network width generating the observed kernels (at least 65536,
    /// so the finite-width law is close enough to discriminate conventions).
    pub width: usize,
    /// Observed kernel samples.
    pub n_samples: usize,
    pub inputs: InputSpec,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            width: 1 << 16,
            n_samples: 4_000,
            inputs: InputSpec::AxisAligned { d: 1, k: 1 },
        }
    }
}

/// The full experiment document. Every field has a default, so an empty
/// document (or no `--config` at all) is valid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root seed for every random stream in the run.
    pub master_seed: u64,
    /// Worker threads for replicate batches; 0 uses all cores. Results are
    /// byte-identical for every value, so this key is excluded from the
    /// config digest stamped on result files.
    pub workers: usize,
    /// Directory receiving one subdirectory per command.
    pub out_dir: PathBuf,
    pub limit_dist: LimitDistConfig,
    pub ntk_limit: NtkLimitConfig,
    pub train: TrainCmdConfig,
    pub paths: PathsConfig,
    pub calibrate: CalibrateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 271828,
            workers: 0,
            out_dir: PathBuf::from("results"),
            limit_dist: LimitDistConfig::default(),
            ntk_limit: NtkLimitConfig::default(),
            train: TrainCmdConfig::default(),
            paths: PathsConfig::default(),
            calibrate: CalibrateConfig::default(),
        }
    }
}

fn check_alpha(name: &str, alpha: f64, allow_gaussian: bool) -> Result<()> {
    let ok = alpha > 0.0 && alpha.is_finite() && (alpha < 2.0 || (allow_gaussian && alpha == 2.0));
    if ok {
        Ok(())
    } else {
        let range = if allow_gaussian { "(0, 2]" } else { "(0, 2)" };
        Err(InvalidInput(format!(
            "{name}: stability index {alpha} outside {range}"
        )))
    }
}

fn check_widths(name: &str, widths: &[usize]) -> Result<()> {
    if widths.is_empty() {
        return Err(InvalidInput(format!("{name}: width list is empty")));
    }
    for pair in widths.windows(2) {
        if pair[1] <= pair[0] {
            return Err(InvalidInput(format!(
                "{name}: widths must be strictly increasing, got {widths:?}"
            )));
        }
    }
    if widths[0] < 2 {
        return Err(InvalidInput(format!("{name}: width {} < 2", widths[0])));
    }
    Ok(())
}

fn check_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(InvalidInput(format!("{name}: must be positive")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Validates every section (the document is one record; all fields must
    /// be coherent regardless of which command runs).
    pub fn validate(&self) -> Result<()> {
        check_alpha("limit_dist.alpha", self.limit_dist.alpha, true)?;
        check_widths("limit_dist.widths", &self.limit_dist.widths)?;
        check_positive("limit_dist.n_samples", self.limit_dist.n_samples)?;

        check_alpha("ntk_limit.alpha", self.ntk_limit.alpha, false)?;
        check_widths("ntk_limit.widths", &self.ntk_limit.widths)?;
        check_positive("ntk_limit.n_samples", self.ntk_limit.n_samples)?;
        check_positive("ntk_limit.n_limit", self.ntk_limit.n_limit)?;
        check_positive("ntk_limit.eigen_seeds", self.ntk_limit.eigen_seeds)?;
        check_positive("ntk_limit.orthant_samples", self.ntk_limit.orthant_samples)?;

        check_alpha("train.alpha", self.train.alpha, true)?;
        check_positive("train.record_every", self.train.record_every)?;
        if self.train.seeds == 0 {
            return Err(InvalidInput("train.seeds: must be positive".into()));
        }
        if !(self.train.t_max > 0.0 && self.train.t_max.is_finite()) {
            return Err(InvalidInput(format!(
                "train.t_max: must be positive and finite, got {}",
                self.train.t_max
            )));
        }
        if let Some(dt) = self.train.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(InvalidInput(format!(
                    "train.dt: must be positive and finite, got {dt}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.train.min_certified_fraction) {
            return Err(InvalidInput(format!(
                "train.min_certified_fraction: {} outside [0, 1]",
                self.train.min_certified_fraction
            )));
        }

        for &alpha in &self.paths.alphas {
            check_alpha("paths.alphas", alpha, true)?;
        }
        if self.paths.alphas.is_empty() {
            return Err(InvalidInput("paths.alphas: list is empty".into()));
        }
        check_positive("paths.grid_points", self.paths.grid_points)?;
        check_positive("paths.width", self.paths.width)?;

        check_alpha("calibrate.alpha", self.calibrate.alpha, false)?;
        check_positive("calibrate.n_samples", self.calibrate.n_samples)?;
        Ok(())
    }

    /// Canonical text form of this configuration with plumbing keys
    /// (`workers`, `out_dir`) normalized away, and its digest. The digest
    /// stamps every result file, so it must not change with settings that
    /// cannot change any number.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        canonical.out_dir = PathBuf::from("-");
        let text = toml::to_string_pretty(&canonical)
            .expect("a validated config always serializes");
        config_digest(&text)
    }

    /// The effective document as TOML, used by `--dry-run`.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("a validated config always serializes")
    }
}

/// Environment-variable prefix for config overrides.
pub const ENV_PREFIX: &str = "STABLELAB_";

/// Applies `STABLELAB_*` variables on top of a TOML document (see module
/// docs for the naming scheme). Unknown keys are caught later by schema
/// validation, so typos fail loudly instead of being ignored.
pub fn apply_env_overrides(
    doc: &mut toml::Table,
    vars: impl Iterator<Item = (String, String)>,
) -> Result<()> {
    let mut sorted: Vec<(String, String)> = vars
        .filter(|(name, _)| name.starts_with(ENV_PREFIX))
        .collect();
    // Deterministic application order regardless of environment iteration.
    sorted.sort();
    for (name, raw) in sorted {
        let rest = &name[ENV_PREFIX.len()..];
        let value = parse_env_value(&raw);
        match rest.split_once("__") {
            Some((section, key)) => {
                let section = section.to_ascii_lowercase();
                let key = key.to_ascii_lowercase();
                let entry = doc
                    .entry(section.clone())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                let table = entry.as_table_mut().ok_or_else(|| {
                    InvalidInput(format!("{name}: config key `{section}` is not a section"))
                })?;
                table.insert(key, value);
            }
            None => {
                doc.insert(rest.to_ascii_lowercase(), value);
            }
        }
    }
    Ok(())
}

/// Interprets an override value as a TOML scalar or array, falling back to
/// a plain string (so `STABLELAB_OUT_DIR=results` needs no quoting).
fn parse_env_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    if let Ok(table) = wrapped.parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

/// Full precedence chain: defaults, optional file text, environment,
/// then flag overrides, followed by validation.
pub fn load(
    file_text: Option<&str>,
    env: impl Iterator<Item = (String, String)>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = match file_text {
        Some(text) => text
            .parse()
            .map_err(|e| InvalidInput(format!("config: {e}")))?,
        None => toml::Table::new(),
    };
    apply_env_overrides(&mut doc, env)?;
    let mut cfg: ExperimentConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e| InvalidInput(format!("config: {e}")))?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(workers) = workers {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = load(Some(""), std::iter::empty(), None, None, None).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.master_seed, 271828);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = load(
            Some("master_sed = 3"),
            std::iter::empty(),
            None,
            None,
            None,
        )
        .unwrap_err();
        assert!(err.0.contains("master_sed"), "{}", err.0);
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let err = load(
            Some("[limit_dist]\nalpha = 2.5"),
            std::iter::empty(),
            None,
            None,
            None,
        )
        .unwrap_err();
        assert!(err.0.contains("alpha"), "{}", err.0);
        // The kernel sweep also rejects the Gaussian endpoint.
        let err = load(
            Some("[ntk_limit]\nalpha = 2.0"),
            std::iter::empty(),
            None,
            None,
            None,
        )
        .unwrap_err();
        assert!(err.0.contains("ntk_limit"), "{}", err.0);
    }

    #[test]
    fn env_overrides_file_and_flags_override_env() {
        let env = vec![
            ("STABLELAB_MASTER_SEED".to_string(), "7".to_string()),
            ("STABLELAB_TRAIN__T_MAX".to_string(), "3.5".to_string()),
            (
                "STABLELAB_LIMIT_DIST__WIDTHS".to_string(),
                "[64, 128]".to_string(),
            ),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let cfg = load(
            Some("master_seed = 1\n[train]\nt_max = 9.0"),
            env.clone().into_iter(),
            None,
            None,
            None,
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.train.t_max, 3.5);
        assert_eq!(cfg.limit_dist.widths, vec![64, 128]);

        let cfg = load(Some(""), env.into_iter(), Some(9), None, Some(2)).unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.workers, 2);
    }

    #[test]
    fn env_value_parsing_falls_back_to_string() {
        let mut doc = toml::Table::new();
        apply_env_overrides(
            &mut doc,
            vec![("STABLELAB_OUT_DIR".to_string(), "plain/path".to_string())].into_iter(),
        )
        .unwrap();
        assert_eq!(
            doc.get("out_dir"),
            Some(&toml::Value::String("plain/path".into()))
        );
    }

    #[test]
    fn env_typo_in_section_key_fails_validation() {
        let err = load(
            Some(""),
            vec![("STABLELAB_TRAIN__TMAX".to_string(), "3".to_string())].into_iter(),
            None,
            None,
            None,
        )
        .unwrap_err();
        assert!(err.0.contains("tmax"), "{}", err.0);
    }

    #[test]
    fn digest_ignores_workers_and_out_dir_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.workers = 5;
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.master_seed = 1;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn explicit_dependent_columns_are_rejected_for_kernel_inputs() {
        let spec = InputSpec::Explicit {
            columns: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            unit_norm: true,
        };
        let err = spec.realize(1, "test/inputs").unwrap_err();
        assert!(err.0.contains("linearly dependent"), "{}", err.0);
    }

    #[test]
    fn generated_inputs_are_reproducible() {
        let spec = InputSpec::RandomUnitSphere { d: 3, k: 2 };
        let a = spec.realize(11, "test/inputs").unwrap();
        let b = spec.realize(11, "test/inputs").unwrap();
        assert_eq!(a, b);
    }
}
