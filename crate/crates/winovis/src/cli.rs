//! Subcommands. Each returns a process exit code: 0 success, 2 partial
//! result (missing or unusable inputs for some instances, or nothing to
//! process), 1 hard failure.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use winovis_core::attribution::aggregate_all;
use winovis_core::calibration::{agreement_curve, select_threshold, threshold_grid};
use winovis_core::corpus::{
    corpus_distribution, redundancy_scan, validate_instance, ContextType, FilterVerdict, PromptTemplate,
    WinoVisInstance, DEFAULT_SEED_SAMPLES,
};
use winovis_core::disambiguation::{evaluate_instance, Entity, InstanceVerdict, PipelineConfig, TokenRole};
use winovis_core::fixtures::{synth_bundle, synth_suite};
use winovis_core::metrics::{compare_proportion, render_percent, MetricsReport, ProportionMetric};

use crate::bundle_io::{self, role_heatmaps, write_atomic, HeatmapBundle};
use crate::config::{resolve_config, FileConfig, Format, Overrides, Resolved};
use crate::cycle::{run_cycle, CycleConfig};
use crate::instances::{read_instances, write_instances};
use crate::labels;
use crate::llm::{HttpClient, LlmClient, SamplingParams, ScriptedClient};
use crate::report_io::{report_from_json, report_to_json, write_errors_csv, write_verdicts_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "winovis", version, about = "Pronoun disambiguation evaluation for text-to-image attention maps")]
pub struct Cli {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory of heatmap bundles (.wvhm).
    #[arg(long, global = true)]
    pub bundles: Option<PathBuf>,
    /// Instances file, one JSON object per line.
    #[arg(long, global = true)]
    pub instances: Option<PathBuf>,
    /// Labels CSV: caption flags (evaluate, aggregate), calibration pairs
    /// (calibrate) or filter labels (validate-corpus).
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quantile: Option<f64>,
    #[arg(long, global = true)]
    pub overlap_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub decision_threshold: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Vec<Format>,
    /// Print the resolved configuration and planned writes, then stop.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verdict pipeline over bundles and write verdicts plus report.
    Evaluate,
    /// Turn raw attention stacks (.wvas) into heatmap bundles.
    Aggregate {
        /// Directory of stack files.
        #[arg(long)]
        stacks: Option<PathBuf>,
        /// Target heatmap size as WIDTHxHEIGHT.
        #[arg(long)]
        out_size: Option<String>,
    },
    /// Agreement curve and selected threshold from human labels.
    Calibrate {
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
        /// Drop grid points below this value.
        #[arg(long, default_value_t = 0.0)]
        grid_start: f64,
    },
    /// Generate candidate instances with a language model.
    GenerateCorpus {
        /// Scripted transcript (JSON array) used instead of the HTTP client.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        request_cap: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// File with seed examples spliced into the prompt.
        #[arg(long)]
        seed_samples: Option<PathBuf>,
    },
    /// Check instances structurally and flag near-duplicates.
    ValidateCorpus {
        #[arg(long, default_value_t = 0.8)]
        redundancy_threshold: f64,
    },
    /// Write synthetic bundles with expected verdicts.
    SynthFixtures {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Two-proportion Z-tests between two report files.
    Compare { a: PathBuf, b: PathBuf },
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let stacks = match &cli.command {
        Command::Aggregate { stacks, .. } => stacks.clone(),
        _ => None,
    };
    let cfg = resolve_config(
        &file,
        Overrides {
            instances: cli.instances,
            bundles: cli.bundles,
            stacks,
            labels: cli.labels,
            out: cli.out,
            quantile: cli.quantile,
            overlap_threshold: cli.overlap_threshold,
            decision_threshold: cli.decision_threshold,
            jobs: cli.jobs,
            formats: cli.format,
        },
    )?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    let dry = cli.dry_run;
    pool.install(|| match cli.command {
        Command::Evaluate => cmd_evaluate(&cfg, dry),
        Command::Aggregate { out_size, .. } => {
            let size = out_size.or_else(|| file.out_size.clone()).unwrap_or_else(|| "512x512".into());
            cmd_aggregate(&cfg, parse_size(&size)?, dry)
        }
        Command::Calibrate { grid_step, grid_start } => cmd_calibrate(&cfg, grid_step, grid_start, dry),
        Command::GenerateCorpus { transcript, target, request_cap, batch_size, seed_samples } => {
            let llm = &file.llm;
            let opts = GenerateOptions {
                transcript: transcript.or_else(|| llm.transcript.clone()),
                seed_samples: seed_samples.or_else(|| llm.seed_samples.clone()),
                batch_size: batch_size.or(llm.batch_size).unwrap_or(10),
                cycle: CycleConfig {
                    target_count: target.or(llm.target_count).unwrap_or(10),
                    request_cap: request_cap.or(llm.request_cap).unwrap_or(50),
                    max_retries: llm.max_retries.unwrap_or(4),
                    backoff_base: Duration::from_millis(llm.backoff_ms.unwrap_or(1000)),
                    redundancy_threshold: llm.redundancy_threshold.unwrap_or(0.8),
                    sampling: SamplingParams {
                        temperature: llm.temperature.unwrap_or(0.8),
                        top_p: llm.top_p.unwrap_or(1.0),
                    },
                    ..CycleConfig::default()
                },
                endpoint: llm.endpoint.clone().unwrap_or_else(|| "https://api.openai.com/v1/chat/completions".into()),
                model: llm.model.clone().unwrap_or_else(|| "gpt-4".into()),
                api_key_env: llm.api_key_env.clone().unwrap_or_else(|| "WINOVIS_LLM_API_KEY".into()),
                timeout: Duration::from_secs(llm.timeout_secs.unwrap_or(120)),
            };
            cmd_generate_corpus(&cfg, &opts, dry)
        }
        Command::ValidateCorpus { redundancy_threshold } => cmd_validate_corpus(&cfg, redundancy_threshold, dry),
        Command::SynthFixtures { count, seed } => cmd_synth_fixtures(&cfg, count, seed, dry),
        Command::Compare { a, b } => cmd_compare(&a, &b),
    })
}

fn parse_size(s: &str) -> anyhow::Result<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| anyhow!("size {s:?} is not WIDTHxHEIGHT"))?;
    let w: usize = w.trim().parse().with_context(|| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().with_context(|| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        bail!("size {s:?} has a zero dimension");
    }
    Ok((w, h))
}

fn print_plan(cfg: &Resolved, writes: &[PathBuf]) -> anyhow::Result<i32> {
    println!("{}", serde_json::to_string_pretty(cfg)?);
    for w in writes {
        println!("would write {}", w.display());
    }
    Ok(EXIT_OK)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("{flag} is required"))
}

fn load_instances(path: &Path) -> anyhow::Result<Vec<WinoVisInstance>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_instances(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn files_with_ext(dir: &Path, ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("cannot read directory {}", dir.display()))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Writes via an in-memory buffer and an atomic rename.
fn write_file(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_atomic(path, &buf).with_context(|| format!("cannot write {}", path.display()))
}

fn evaluate_bundle(
    path: &Path,
    instances: &BTreeMap<String, WinoVisInstance>,
    flags: &BTreeMap<String, bool>,
    cfg: &PipelineConfig,
) -> Result<InstanceVerdict, (String, String)> {
    let tag = |msg: String| (path.display().to_string(), msg);
    let bundle = bundle_io::load_bundle(path).map_err(|e| tag(e.to_string()))?;
    let id = bundle.instance_id.clone();
    let fail = |msg: String| (id.clone(), msg);
    let inst = instances.get(&id).ok_or_else(|| fail("bundle for unknown instance".into()))?;
    let gold = Entity::from_answer(inst.answer).ok_or_else(|| fail(format!("answer {} is not 0 or 1", inst.answer)))?;
    let caption = flags.get(&id).copied().unwrap_or(bundle.caption_flag);
    let roles = bundle.role_tokens().map_err(|e| fail(e.to_string()))?;
    let set = bundle.heatmap_set().map_err(|e| fail(e.to_string()))?;
    let maps = role_heatmaps(&set, &roles).map_err(|e| fail(e.to_string()))?;
    evaluate_instance(&id, maps, gold, caption, cfg).map_err(|e| fail(e.to_string()))
}

pub fn cmd_evaluate(cfg: &Resolved, dry: bool) -> anyhow::Result<i32> {
    let instances_path = require(&cfg.instances, "--instances")?;
    let bundles_dir = require(&cfg.bundles, "--bundles")?;
    let instances = load_instances(instances_path)?;
    let flags = match &cfg.labels {
        Some(p) => labels::read_caption_flags(labels::open(p)?)?,
        None => BTreeMap::new(),
    };
    let files = files_with_ext(bundles_dir, "wvhm")?;
    let out = &cfg.out;
    let mut writes = vec![out.join("errors.csv")];
    if cfg.formats.contains(&Format::Csv) {
        writes.push(out.join("verdicts.csv"));
    }
    if cfg.formats.contains(&Format::Json) {
        writes.push(out.join("report.json"));
    }
    if dry {
        println!("{} instances, {} bundles", instances.len(), files.len());
        return print_plan(cfg, &writes);
    }

    let by_id: BTreeMap<String, WinoVisInstance> = instances.into_iter().map(|i| (i.id.clone(), i)).collect();
    let results: Vec<Result<InstanceVerdict, (String, String)>> =
        files.par_iter().map(|p| evaluate_bundle(p, &by_id, &flags, &cfg.pipeline)).collect();

    let mut verdicts: BTreeMap<String, InstanceVerdict> = BTreeMap::new();
    let mut errors: Vec<(String, String)> = Vec::new();
    for r in results {
        match r {
            Ok(v) if verdicts.contains_key(&v.instance_id) => {
                errors.push((v.instance_id, "more than one bundle for this instance".into()))
            }
            Ok(v) => {
                verdicts.insert(v.instance_id.clone(), v);
            }
            Err(e) => errors.push(e),
        }
    }
    for id in by_id.keys() {
        if !verdicts.contains_key(id) && !errors.iter().any(|(e, _)| e == id) {
            errors.push((id.clone(), "missing bundle".into()));
        }
    }
    errors.sort();
    let verdicts: Vec<InstanceVerdict> = verdicts.into_values().collect();
    let report = winovis_core::metrics::build_report(&verdicts, &by_id)?;

    write_file(&out.join("errors.csv"), |b| Ok(write_errors_csv(b, &errors)?))?;
    if cfg.formats.contains(&Format::Csv) {
        write_file(&out.join("verdicts.csv"), |b| Ok(write_verdicts_csv(b, &verdicts)?))?;
    }
    if cfg.formats.contains(&Format::Json) {
        let json = report_to_json(&report)?;
        write_file(&out.join("report.json"), |b| Ok(b.write_all(json.as_bytes())?))?;
    }
    print_summary(&report);
    for (id, msg) in &errors {
        eprintln!("warning: {id}: {msg}");
    }
    Ok(if errors.is_empty() && !files.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

fn print_summary(r: &MetricsReport) {
    let c = &r.counts;
    println!(
        "total {} captioned {} overlapped {} evaluable {} (correct {} incorrect {} neither {})",
        c.total(),
        c.captioned,
        c.overlapped,
        c.evaluable(),
        c.correct,
        c.incorrect,
        c.neither
    );
    println!(
        "precision {} recall {} f1 {} certainty {}{}",
        render_percent(r.precision),
        render_percent(r.recall),
        render_percent(r.f1),
        render_percent(r.certainty),
        if r.low_support { " (low support)" } else { "" }
    );
}

/// Role map from instance options and pronoun; a leading article on an
/// option is ignored when matching tokens.
pub fn roles_from_instance(tokens: &[String], inst: &WinoVisInstance) -> BTreeMap<String, TokenRole> {
    let strip = |s: &str| {
        let l = s.trim().to_lowercase();
        for a in ["the ", "a ", "an "] {
            if let Some(rest) = l.strip_prefix(a) {
                return rest.to_string();
            }
        }
        l
    };
    let targets = [
        (strip(&inst.options[0]), TokenRole::Entity1),
        (strip(&inst.options[1]), TokenRole::Entity2),
        (inst.pronoun.trim().to_lowercase(), TokenRole::Pronoun),
    ];
    let mut roles = BTreeMap::new();
    for (want, role) in targets {
        if let Some(t) = tokens.iter().find(|t| strip(t) == want) {
            roles.entry(t.clone()).or_insert(role);
        }
    }
    roles
}

fn safe_file_stem(id: &str) -> Option<&str> {
    let ok = !id.is_empty() && !id.starts_with('.') && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    ok.then_some(id)
}

pub fn cmd_aggregate(cfg: &Resolved, (w, h): (usize, usize), dry: bool) -> anyhow::Result<i32> {
    let stacks_dir = require(&cfg.stacks, "--stacks")?;
    let files = files_with_ext(stacks_dir, "wvas")?;
    let instances: BTreeMap<String, WinoVisInstance> = match &cfg.instances {
        Some(p) => load_instances(p)?.into_iter().map(|i| (i.id.clone(), i)).collect(),
        None => BTreeMap::new(),
    };
    let flags = match &cfg.labels {
        Some(p) => labels::read_caption_flags(labels::open(p)?)?,
        None => BTreeMap::new(),
    };
    if dry {
        println!("{} stacks, output {w}x{h}", files.len());
        let writes: Vec<PathBuf> = files.iter().map(|f| cfg.out.join(f.with_extension("wvhm").file_name().unwrap())).collect();
        return print_plan(cfg, &writes);
    }
    if files.is_empty() {
        eprintln!("warning: no .wvas files in {}", stacks_dir.display());
        return Ok(EXIT_PARTIAL);
    }
    std::fs::create_dir_all(&cfg.out)?;
    let convert = |path: &PathBuf| -> anyhow::Result<PathBuf> {
        let stack = bundle_io::load_stack(path)?;
        let id = safe_file_stem(&stack.instance_id).ok_or_else(|| anyhow!("instance id {:?} is not a safe file name", stack.instance_id))?;
        let roles = match &stack.roles {
            Some(r) => r.clone(),
            None => {
                let inst = instances.get(id).ok_or_else(|| anyhow!("stack has no roles and instance {id} is unknown"))?;
                roles_from_instance(&stack.tokens, inst)
            }
        };
        let set = aggregate_all(&stack.attention_stack()?, w, h)?;
        let caption = flags.get(id).copied().unwrap_or(false);
        let bundle = HeatmapBundle::from_heatmaps(id, &set, roles, caption)?;
        let dest = cfg.out.join(format!("{id}.wvhm"));
        bundle_io::save_bundle(&dest, &bundle)?;
        Ok(dest)
    };
    let results: Vec<_> = files.par_iter().map(|p| (p, convert(p))).collect();
    let mut failed = 0;
    for (src, r) in results {
        match r {
            Ok(dest) => println!("{} -> {}", src.display(), dest.display()),
            Err(e) => {
                failed += 1;
                eprintln!("error: {}: {e:#}", src.display());
            }
        }
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

pub fn cmd_calibrate(cfg: &Resolved, step: f64, start: f64, dry: bool) -> anyhow::Result<i32> {
    let path = require(&cfg.labels, "--labels")?;
    let pairs = labels::read_calibration(labels::open(path)?)?;
    let grid: Vec<f64> = threshold_grid(step)?.into_iter().filter(|t| *t >= start - 1e-12).collect();
    let dest = cfg.out.join("agreement_curve.csv");
    if dry {
        println!("{} labeled pairs, {} thresholds", pairs.len(), grid.len());
        return print_plan(cfg, &[dest]);
    }
    let curve = agreement_curve(&pairs, &grid)?;
    let selected = select_threshold(&curve).ok_or_else(|| anyhow!("empty curve"))?;
    write_file(&dest, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["threshold", "agreement"])?;
        for p in &curve {
            w.write_record([format!("{:.2}", p.threshold), p.agreement.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let best = curve.iter().map(|p| p.agreement).fold(0.0, f64::max);
    println!("selected threshold {selected:.2} (agreement {best})");
    Ok(EXIT_OK)
}

pub struct GenerateOptions {
    pub transcript: Option<PathBuf>,
    pub seed_samples: Option<PathBuf>,
    pub batch_size: usize,
    pub cycle: CycleConfig,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout: Duration,
}

pub fn cmd_generate_corpus(cfg: &Resolved, opts: &GenerateOptions, dry: bool) -> anyhow::Result<i32> {
    let seeds = match &opts.seed_samples {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        None => DEFAULT_SEED_SAMPLES.to_string(),
    };
    let tmpl = PromptTemplate::standard(&seeds, opts.batch_size)?;
    let candidates = cfg.out.join("candidates.jsonl");
    let audit = cfg.out.join("audit.jsonl");
    if dry {
        println!("target {} request cap {} batch {}", opts.cycle.target_count, opts.cycle.request_cap, opts.batch_size);
        return print_plan(cfg, &[candidates, audit]);
    }
    let mut client: Box<dyn LlmClient> = match &opts.transcript {
        Some(p) => Box::new(ScriptedClient::from_file(p)?),
        None => Box::new(HttpClient::from_env(&opts.endpoint, &opts.model, &opts.api_key_env, opts.timeout)?),
    };
    let outcome = run_cycle(client.as_mut(), &tmpl, &opts.cycle, &mut std::thread::sleep);
    write_file(&candidates, |b| Ok(write_instances(b, &outcome.accepted)?))?;
    write_file(&audit, |b| {
        for rec in &outcome.audit {
            serde_json::to_writer(&mut *b, rec)?;
            b.push(b'\n');
        }
        Ok(())
    })?;
    println!("{} candidates after {} requests", outcome.accepted.len(), outcome.audit.len());
    if let Some(msg) = outcome.aborted {
        eprintln!("error: cycle aborted, partial results kept: {msg}");
        return Ok(EXIT_FAILURE);
    }
    if outcome.accepted.len() < opts.cycle.target_count {
        eprintln!("warning: request cap reached before the target count");
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate_corpus(cfg: &Resolved, threshold: f64, dry: bool) -> anyhow::Result<i32> {
    let path = require(&cfg.instances, "--instances")?;
    let instances = load_instances(path)?;
    let filter = match &cfg.labels {
        Some(p) => Some(labels::read_filter_labels(labels::open(p)?)?),
        None => None,
    };
    let violations_path = cfg.out.join("violations.csv");
    let redundancy_path = cfg.out.join("redundancy.csv");
    if dry {
        println!("{} instances", instances.len());
        return print_plan(cfg, &[violations_path, redundancy_path]);
    }
    let violations: Vec<(String, String)> = instances
        .par_iter()
        .map(|i| validate_instance(i).into_iter().map(|v| (i.id.clone(), v.to_string())).collect::<Vec<_>>())
        .flatten()
        .collect();
    let flags = redundancy_scan(&instances, threshold);
    write_file(&violations_path, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["instance_id", "violation"])?;
        for (id, v) in &violations {
            w.write_record([id, v])?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_file(&redundancy_path, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["first", "second", "jaccard"])?;
        for f in &flags {
            w.write_record([f.first.clone(), f.second.clone(), f.jaccard.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;

    for (id, v) in &violations {
        println!("violation {id}: {v}");
    }
    for f in &flags {
        println!("review {} ~ {} (jaccard {:.3})", f.first, f.second, f.jaccard);
    }
    let d = corpus_distribution(&instances);
    println!("{} instances: disparate {:.1}% distinct {:.1}% untagged {}", d.total, d.disparate, d.distinct, d.untagged);
    for (c, share) in ContextType::ALL.iter().zip(d.context) {
        println!("  {} {:.1}%", c.as_str(), share);
    }
    if let Some(labels) = filter {
        let known: std::collections::BTreeSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
        if let Some(l) = labels.iter().find(|l| !known.contains(l.instance_id.as_str())) {
            bail!("filter label for unknown instance {}", l.instance_id);
        }
        for v in FilterVerdict::ALL {
            println!("  filter {}: {}", v.as_str(), labels.iter().filter(|l| l.verdict == v).count());
        }
    }
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}

pub fn cmd_synth_fixtures(cfg: &Resolved, count: usize, seed: u64, dry: bool) -> anyhow::Result<i32> {
    let out = &cfg.out;
    let bundles_dir = out.join("bundles");
    if dry {
        println!("{count} scenarios from seed {seed}");
        return print_plan(
            cfg,
            &[bundles_dir, out.join("instances.jsonl"), out.join("expected_verdicts.csv")],
        );
    }
    let generated = synth_suite(count, seed)
        .par_iter()
        .map(|s| synth_bundle(s, &cfg.pipeline))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(&bundles_dir)?;
    let mut expected = Vec::with_capacity(generated.len());
    let mut instances = Vec::with_capacity(generated.len());
    for g in &generated {
        let roles = g.tokens.iter().cloned().zip(g.roles.iter().copied()).collect();
        let bundle = HeatmapBundle {
            instance_id: g.instance.id.clone(),
            width: g.width,
            height: g.height,
            tokens: g.tokens.clone(),
            caption_flag: g.caption_flag,
            roles,
            grids: g.grids.clone(),
        };
        bundle_io::save_bundle(&bundles_dir.join(format!("{}.wvhm", g.instance.id)), &bundle)?;
        expected.push(g.expected.clone());
        instances.push(g.instance.clone());
    }
    expected.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    instances.sort_by(|a, b| a.id.cmp(&b.id));
    write_file(&out.join("instances.jsonl"), |b| Ok(write_instances(b, &instances)?))?;
    write_file(&out.join("expected_verdicts.csv"), |b| Ok(write_verdicts_csv(b, &expected)?))?;
    println!("{} scenarios written to {}", generated.len(), out.display());
    Ok(EXIT_OK)
}

pub fn cmd_compare(a: &Path, b: &Path) -> anyhow::Result<i32> {
    let read = |p: &Path| -> anyhow::Result<MetricsReport> {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        Ok(report_from_json(&text)?)
    };
    let (ra, rb) = (read(a)?, read(b)?);
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "metric,a,b,z,p_two_sided")?;
    for m in [ProportionMetric::Precision, ProportionMetric::Recall, ProportionMetric::Certainty] {
        let (ca, na) = m.sample(&ra.counts);
        let (cb, nb) = m.sample(&rb.counts);
        let row = match compare_proportion(m, &ra.counts, &rb.counts) {
            Ok(t) => format!("{:.6},{:.6e}", t.z, t.p_two_sided),
            Err(e) => format!("N/A,{e}"),
        };
        writeln!(stdout, "{},{ca}/{na},{cb}/{nb},{row}", m.as_str())?;
    }
    Ok(EXIT_OK)
}
