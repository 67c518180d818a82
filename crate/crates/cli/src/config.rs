//! Run configuration: a TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use peace_core::evaluation::SemChoice;
use peace_core::indices::TertileConvention;
use peace_core::meta::sha256_hex;
use peace_core::scoring::{DEFAULT_FLAG_N, DEFAULT_TOP_N};
use peace_core::{LrHyper, Normalization, RfHyper};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    /// Word-list files; the bundled lists are used when unset.
    pub stopwords: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub entity_heuristic: bool,
    pub boilerplate_threshold: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            stopwords: None,
            gazetteer: None,
            lemmas: None,
            entity_heuristic: true,
            boilerplate_threshold: peace_core::text::DEFAULT_BOILERPLATE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Tab-separated `country<TAB>path` list of JSONL article files.
    pub manifest: Option<PathBuf>,
    /// Directory of precomputed `<country>.csv` frequency tables; replaces
    /// the preprocess stage.
    pub freq_dir: Option<PathBuf>,
    /// Raw index averages, `country,GPI,PPI,WHI,FSI,HDI`.
    pub indices: Option<PathBuf>,
    /// `country,class` labels taking precedence over the tertile vote.
    pub labels_file: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub k: usize,
    pub normalization: Normalization,
    pub min_articles: usize,
    pub tertile: TertileConvention,
    pub n_runs: usize,
    pub sem_choice: SemChoice,
    pub top_n: usize,
    pub flag_n: usize,
    pub filter: FilterSection,
    pub logistic: LrHyper,
    pub forest: RfHyper,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            freq_dir: None,
            indices: None,
            labels_file: None,
            out: PathBuf::from("out"),
            seed: 0,
            k: peace_core::features::DEFAULT_TOP_K,
            normalization: Normalization::default(),
            min_articles: peace_core::corpus::DEFAULT_MIN_ARTICLES,
            tertile: TertileConvention::default(),
            n_runs: peace_core::evaluation::DEFAULT_RUNS,
            sem_choice: SemChoice::default(),
            top_n: DEFAULT_TOP_N,
            flag_n: DEFAULT_FLAG_N,
            filter: FilterSection::default(),
            logistic: LrHyper::default(),
            forest: RfHyper::default(),
        }
    }
}

/// Flag values that replace config-file settings.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    pub indices: Option<PathBuf>,
    #[arg(long, global = true)]
    pub labels_file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub freq_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Most frequent words kept per country.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// `per_million` or `raw_count`.
    #[arg(long, global = true)]
    pub normalization: Option<Normalization>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

/// Paths in a config file are relative to the file's directory.
fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn load(overrides: &Overrides) -> anyhow::Result<RunConfig> {
        let mut cfg = match &overrides.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))
                    .map_err(UsageError::from)?;
                let mut cfg: RunConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
                    .map_err(UsageError::from)?;
                let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
                for p in [
                    &mut cfg.manifest,
                    &mut cfg.freq_dir,
                    &mut cfg.indices,
                    &mut cfg.labels_file,
                    &mut cfg.filter.stopwords,
                    &mut cfg.filter.gazetteer,
                    &mut cfg.filter.lemmas,
                ] {
                    rebase(&base, p);
                }
                if cfg.out.is_relative() {
                    cfg.out = base.join(&cfg.out);
                }
                cfg
            }
            None => RunConfig::default(),
        };
        let o = overrides.clone();
        cfg.manifest = o.manifest.or(cfg.manifest);
        cfg.indices = o.indices.or(cfg.indices);
        cfg.labels_file = o.labels_file.or(cfg.labels_file);
        cfg.freq_dir = o.freq_dir.or(cfg.freq_dir);
        cfg.out = o.out.unwrap_or(cfg.out);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        cfg.k = o.k.unwrap_or(cfg.k);
        cfg.normalization = o.normalization.unwrap_or(cfg.normalization);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let problem = if self.k == 0 {
            "k must be at least 1"
        } else if self.n_runs == 0 {
            "n_runs must be at least 1"
        } else if self.top_n == 0 {
            "top_n must be at least 1"
        } else {
            return Ok(());
        };
        Err(UsageError::from(anyhow::anyhow!(problem)).into())
    }

    /// SHA-256 of the canonical JSON form. Output location and worker count
    /// are not part of it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        sha256_hex(json.as_bytes())
    }

    pub fn require_manifest(&self) -> anyhow::Result<&Path> {
        match &self.manifest {
            Some(p) => Ok(p),
            None => bail!(UsageError::from(anyhow::anyhow!(
                "no corpus manifest: set `manifest` in the config or pass --manifest"
            ))),
        }
    }
}
