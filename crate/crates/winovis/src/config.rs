//! Run configuration: a TOML file overlaid by command-line flags.
//!
//! ```toml
//! jobs = 4
//! formats = ["json", "csv"]
//!
//! [pipeline]
//! quantile = 0.9
//! overlap_threshold = 0.4
//! decision_threshold = 0.4
//!
//! [paths]            # relative paths resolve against the config file
//! instances = "corpus.jsonl"
//! bundles = "bundles"
//! stacks = "stacks"
//! labels = "caption_flags.csv"
//! out = "out"
//!
//! [llm]
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4"
//! api_key_env = "WINOVIS_LLM_API_KEY"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use winovis_core::disambiguation::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub quantile: Option<f64>,
    pub overlap_threshold: Option<f64>,
    pub decision_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub instances: Option<PathBuf>,
    pub bundles: Option<PathBuf>,
    pub stacks: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub target_count: Option<usize>,
    pub request_cap: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub redundancy_threshold: Option<f64>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub seed_samples: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub jobs: Option<usize>,
    pub formats: Option<Vec<Format>>,
    pub out_size: Option<String>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub llm: LlmSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("bad config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.instances, &mut p.bundles, &mut p.stacks, &mut p.labels, &mut p.out] {
            resolve(slot, base);
        }
        resolve(&mut cfg.llm.seed_samples, base);
        resolve(&mut cfg.llm.transcript, base);
        Ok(cfg)
    }
}

fn resolve(slot: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = slot {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

/// Effective settings after flags have been applied on top of the file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub pipeline: PipelineConfig,
    pub instances: Option<PathBuf>,
    pub bundles: Option<PathBuf>,
    pub stacks: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: PathBuf,
    pub jobs: usize,
    pub formats: Vec<Format>,
}

/// Flag values; `None` leaves the file value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub instances: Option<PathBuf>,
    pub bundles: Option<PathBuf>,
    pub stacks: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub quantile: Option<f64>,
    pub overlap_threshold: Option<f64>,
    pub decision_threshold: Option<f64>,
    pub jobs: Option<usize>,
    pub formats: Vec<Format>,
}

pub fn resolve_config(file: &FileConfig, flags: Overrides) -> anyhow::Result<Resolved> {
    let defaults = PipelineConfig::default();
    let pipeline = PipelineConfig {
        quantile_q: flags.quantile.or(file.pipeline.quantile).unwrap_or(defaults.quantile_q),
        overlap_threshold: flags
            .overlap_threshold
            .or(file.pipeline.overlap_threshold)
            .unwrap_or(defaults.overlap_threshold),
        decision_threshold: flags
            .decision_threshold
            .or(file.pipeline.decision_threshold)
            .unwrap_or(defaults.decision_threshold),
    };
    pipeline.validate().map_err(|e| anyhow::anyhow!("invalid thresholds: {e}"))?;
    let jobs = flags
        .jobs
        .or(file.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        anyhow::bail!("--jobs must be at least 1");
    }
    let mut formats = if flags.formats.is_empty() {
        file.formats.clone().unwrap_or_else(|| vec![Format::Json, Format::Csv])
    } else {
        flags.formats
    };
    formats.sort();
    formats.dedup();
    let p = &file.paths;
    Ok(Resolved {
        pipeline,
        instances: flags.instances.or_else(|| p.instances.clone()),
        bundles: flags.bundles.or_else(|| p.bundles.clone()),
        stacks: flags.stacks.or_else(|| p.stacks.clone()),
        labels: flags.labels.or_else(|| p.labels.clone()),
        out: flags.out.or_else(|| p.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        jobs,
        formats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "jobs = 3\nformats = [\"csv\"]\n[pipeline]\nquantile = 0.8\ndecision_threshold = 0.3\n[paths]\nout = \"o\"\n",
        )
        .unwrap();
        let r = resolve_config(&file, Overrides { decision_threshold: Some(0.5), ..Default::default() }).unwrap();
        assert_eq!(r.pipeline.quantile_q, 0.8);
        assert_eq!(r.pipeline.decision_threshold, 0.5);
        assert_eq!(r.pipeline.overlap_threshold, 0.4);
        assert_eq!(r.jobs, 3);
        assert_eq!(r.formats, vec![Format::Csv]);
        assert_eq!(r.out, PathBuf::from("o"));
    }

    #[test]
    fn invalid_values_rejected() {
        let file = FileConfig::default();
        assert!(resolve_config(&file, Overrides { quantile: Some(1.5), ..Default::default() }).is_err());
        assert!(resolve_config(&file, Overrides { jobs: Some(0), ..Default::default() }).is_err());
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[paths]\ninstances = \"c.jsonl\"\nout = \"/abs\"\n").unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.instances, Some(dir.path().join("c.jsonl")));
        assert_eq!(cfg.paths.out, Some(PathBuf::from("/abs")));
    }
}
