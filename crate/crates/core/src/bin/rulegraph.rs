use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rulegraph::detector::{detect_stream, validate_ruleset, DetectionResult, Ruleset};
use rulegraph::event::{read_events_strict, Label, TypeConfig};
use rulegraph::harness::bench::bench;
use rulegraph::harness::generate::{preset, Corpus, GeneratorSpec};
use rulegraph::harness::metrics::evaluate;
use rulegraph::harness::perturb::{perturb, PerturbMode};
use rulegraph::harness::sweep::{sweep, to_csv, trend_notes};
use rulegraph::hypergraph::RuleHypergraph;
use rulegraph::regex::parse;
use rulegraph::similarity::{top_pairs, vertex_scores_with, LabelModel, ScoreMode};
use rulegraph::synth::{synthesize, SynthParams};
use rulegraph::trainer::{train, TrainConfig};

#[derive(Parser)]
#[command(name = "rulegraph", version, about = "Learn regex rulesets from JSON events and flag events no rule accepts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic train/test corpus and its type config.
    Gen(GenArgs),
    /// Learn a ruleset; prints the training report as JSON.
    Train(TrainArgs),
    /// Classify events; one JSON result per input line.
    Detect(DetectArgs),
    /// Precision, recall and F1 of detection results against labels.
    Eval(EvalArgs),
    /// Drop, duplicate or shuffle a fraction of a JSONL stream.
    Perturb(PerturbArgs),
    /// Train and evaluate over a grid of k values and thresholds; CSV out.
    Sweep(SweepArgs),
    /// Detection throughput with and without JSON parsing.
    Bench(BenchArgs),
    /// Merge two patterns while avoiding negatives.
    Synth(SynthArgs),
    /// Most similar same-key/type entity pairs of a training set.
    Simdump(SimdumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Normalized,
    Raw,
}

/// Similarity and training knobs. Flags override `--config`.
#[derive(Args, Clone, Default)]
struct SimArgs {
    /// JSON object with any of: decay, iters_k, threshold, samples, seed,
    /// max_rounds, score, verify.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long = "iters-k")]
    iters_k: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long, value_enum)]
    score: Option<ScoreArg>,
    /// Re-check rule overlap after every merge.
    #[arg(long)]
    verify: bool,
}

impl SimArgs {
    fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        if let Some(path) = &self.config {
            let v = read_json(path)?;
            let obj = v.as_object().ok_or_else(|| anyhow!("{}: expected a JSON object", path.display()))?;
            for (k, x) in obj {
                let num = || x.as_f64().ok_or_else(|| anyhow!("config {k}: expected a number"));
                let int = || x.as_u64().ok_or_else(|| anyhow!("config {k}: expected a non-negative integer"));
                match k.as_str() {
                    "decay" => c.sim.decay_factor = num()?,
                    "iters_k" => c.sim.iterations = int()? as usize,
                    "threshold" => c.sim.merge_threshold = num()?,
                    "samples" => c.sim.sample_count = int()? as usize,
                    "seed" => c.sim.seed = int()?,
                    "max_rounds" => c.max_rounds = int()? as usize,
                    "verify" => c.verify_each_merge = x.as_bool().ok_or_else(|| anyhow!("config verify: expected a bool"))?,
                    "score" => {
                        c.sim.mode = match x.as_str() {
                            Some("normalized") => ScoreMode::Normalized,
                            Some("raw") => ScoreMode::Raw,
                            _ => bail!("config score: expected \"normalized\" or \"raw\""),
                        }
                    }
                    other => bail!("config: unknown key {other:?}"),
                }
            }
        }
        if let Some(x) = self.decay {
            c.sim.decay_factor = x;
        }
        if let Some(x) = self.iters_k {
            c.sim.iterations = x;
        }
        if let Some(x) = self.threshold {
            c.sim.merge_threshold = x;
        }
        if let Some(x) = self.samples {
            c.sim.sample_count = x;
        }
        if let Some(x) = self.seed {
            c.sim.seed = x;
        }
        if let Some(x) = self.max_rounds {
            c.max_rounds = x;
        }
        if let Some(s) = self.score {
            c.sim.mode = match s {
                ScoreArg::Normalized => ScoreMode::Normalized,
                ScoreArg::Raw => ScoreMode::Raw,
            };
        }
        c.verify_each_merge |= self.verify;
        c.sim.validate()?;
        if c.max_rounds == 0 {
            bail!("max_rounds must be positive");
        }
        Ok(c)
    }
}

#[derive(Args)]
struct GenArgs {
    /// motivating, benchmark or throughput.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Generator spec as JSON; missing fields take benchmark defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_events: Option<usize>,
    #[arg(long)]
    test_events: Option<usize>,
    /// Receives train.jsonl, test.jsonl and types.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    events: PathBuf,
    /// Type config JSON; keys default to their own path as type.
    #[arg(long)]
    types: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    ruleset: PathBuf,
    #[arg(long)]
    events: PathBuf,
    /// Results JSONL; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the type config stored in the ruleset.
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long)]
    single_core: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    results: PathBuf,
    /// Events JSONL carrying `_label`, aligned with the results.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    events: PathBuf,
    /// drop, duplicate or shuffle.
    #[arg(long)]
    mode: PerturbMode,
    #[arg(long)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "3,4,6")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.64,0.8")]
    thresholds: Vec<f64>,
    #[command(flatten)]
    sim: SimArgs,
    /// CSV file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    ruleset: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long)]
    single_core: bool,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// The two patterns to merge; give the flag twice.
    #[arg(long, required = true)]
    pos: Vec<String>,
    /// Patterns the result must not intersect.
    #[arg(long)]
    neg: Vec<String>,
    /// List every candidate with its cost and verdict.
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 64)]
    union_bound: usize,
    #[arg(long, default_value_t = 1024)]
    candidate_cap: usize,
}

#[derive(Args)]
struct SimdumpArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    types: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

fn load_types(path: Option<&Path>) -> Result<TypeConfig> {
    match path {
        Some(p) => Ok(TypeConfig::from_json(&read_json(p)?).with_context(|| format!("type config {}", p.display()))?),
        None => Ok(TypeConfig::default()),
    }
}

fn load_events(path: &Path, types: &TypeConfig) -> Result<Vec<rulegraph::event::EventRecord>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    read_events_strict(BufReader::new(f), types).with_context(|| format!("events {}", path.display()))
}

fn load_ruleset(path: &Path) -> Result<Ruleset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Ruleset>().with_context(|| format!("ruleset {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_jsonl(path: &Path, docs: &[Value]) -> Result<()> {
    let mut w = sink(Some(path))?;
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let corpus: Corpus = match (&a.preset, &a.config) {
        (Some(name), _) if name == "motivating" => preset(name, a.seed)?,
        (p, c) => {
            let mut spec = match (p.as_deref(), c) {
                (Some("benchmark"), _) | (None, None) => GeneratorSpec::benchmark(a.seed),
                (Some("throughput"), _) => GeneratorSpec::throughput(a.seed),
                (Some(other), _) => return Err(preset(other, a.seed).unwrap_err().into()),
                (None, Some(path)) => {
                    let mut s: GeneratorSpec = serde_json::from_value(read_json(path)?)
                        .with_context(|| format!("generator spec {}", path.display()))?;
                    s.seed = a.seed;
                    s
                }
            };
            if let Some(n) = a.train_events {
                spec.train_events = n;
            }
            if let Some(n) = a.test_events {
                spec.test_events = n;
            }
            spec.generate()?
        }
    };
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_jsonl(&a.out_dir.join("train.jsonl"), &corpus.train)?;
    write_jsonl(&a.out_dir.join("test.jsonl"), &corpus.test)?;
    fs::write(a.out_dir.join("types.json"), serde_json::to_string_pretty(&corpus.types)? + "\n")?;
    let anomalies = corpus.test.iter().filter(|e| e["_label"] == "anomaly").count();
    print_json(&json!({"train": corpus.train.len(), "test": corpus.test.len(), "anomalies": anomalies}))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let config = a.sim.train_config()?;
    let types = load_types(a.types.as_deref())?;
    let events = load_events(&a.events, &types)?;
    let (rs, report) = train(&events, &types, &config)?;
    fs::write(&a.out, rs.to_string_pretty()).with_context(|| format!("writing {}", a.out.display()))?;
    print_json(&report)
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let rs = load_ruleset(&a.ruleset)?;
    let overlaps = validate_ruleset(&rs);
    if !overlaps.is_empty() {
        bail!("ruleset has overlapping rules: {overlaps:?}");
    }
    let types = match &a.types {
        Some(p) => load_types(Some(p))?,
        None => rs.types()?,
    };
    let lines = read_lines(&a.events)?;
    let (results, summary) = detect_stream(&rs, &types, &lines, a.single_core);
    let mut w = sink(a.out.as_deref())?;
    for r in &results {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    drop(w);
    let text = serde_json::to_string(&summary)?;
    if a.out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let results: Vec<DetectionResult> = read_lines(&a.results)?
        .iter()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("results line {}", i + 1)))
        .collect::<Result<_>>()?;
    let labels: Vec<Label> = read_lines(&a.labels)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let v: Value = serde_json::from_str(l).with_context(|| format!("labels line {}", i + 1))?;
            serde_json::from_value(v.get("_label").cloned().unwrap_or(Value::Null))
                .map_err(|_| anyhow!("labels line {}: missing or invalid _label", i + 1))
        })
        .collect::<Result<_>>()?;
    print_json(&evaluate(&results, &labels)?)
}

fn cmd_perturb(a: PerturbArgs) -> Result<()> {
    let lines = read_lines(&a.events)?;
    let out = perturb(&lines, a.mode, a.level, a.seed)?;
    let mut w = sink(Some(&a.out))?;
    for l in &out {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    print_json(&json!({"input": lines.len(), "output": out.len()}))
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let base = a.sim.train_config()?;
    if a.ks.iter().any(|k| *k <= 2) {
        bail!("every k must exceed 2");
    }
    for t in &a.thresholds {
        if !(*t > 0.0 && *t <= 1.0) {
            bail!("threshold {t} outside (0, 1]");
        }
    }
    let types = load_types(a.types.as_deref())?;
    let train_events = load_events(&a.train, &types)?;
    let test = load_events(&a.test, &types)?;
    let rows = sweep(&train_events, &test, &types, &a.ks, &a.thresholds, &base)?;
    for n in trend_notes(&rows) {
        eprintln!("note: {n}");
    }
    let mut w = sink(a.out.as_deref())?;
    w.write_all(to_csv(&rows).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let rs = load_ruleset(&a.ruleset)?;
    let types = match &a.types {
        Some(p) => load_types(Some(p))?,
        None => rs.types()?,
    };
    let lines = read_lines(&a.events)?;
    print_json(&bench(&rs, &types, &lines, a.single_core, a.rounds))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.pos.len() != 2 {
        bail!("synth needs exactly two --pos patterns, got {}", a.pos.len());
    }
    let p1 = parse(&a.pos[0])?;
    let p2 = parse(&a.pos[1])?;
    let negs = a.neg.iter().map(|n| parse(n)).collect::<Result<Vec<_>, _>>()?;
    if a.union_bound == 0 || a.candidate_cap == 0 {
        bail!("union_bound and candidate_cap must be positive");
    }
    let params = SynthParams {
        union_bound: a.union_bound,
        candidate_cap: a.candidate_cap,
    };
    let out = synthesize(&p1, &p2, &negs, &params, a.all);
    let mut doc = json!({"result": out.result.as_ref().map(|p| p.render())});
    if let Some(p) = &out.result {
        let c = p.cost();
        doc["cost"] = json!({"nodes": c.node_count, "log_words": c.log_word_count, "scalar": c.scalar()});
    }
    if a.all {
        doc["candidates"] = out
            .candidates
            .iter()
            .map(|c| json!({"pattern": c.rendered, "cost": c.cost.scalar(), "rejected_by": c.rejected_by.map(|i| &a.neg[i])}))
            .collect();
    }
    print_json(&doc)
}

fn cmd_simdump(a: SimdumpArgs) -> Result<()> {
    let config = a.sim.train_config()?;
    let types = load_types(a.types.as_deref())?;
    let events = load_events(&a.events, &types)?;
    let g = RuleHypergraph::build_from_events(&events)?;
    let labels = LabelModel::new(config.sim.sample_count, config.sim.seed);
    let scores = vertex_scores_with(&g, &config.sim, &labels);
    let mut w = sink(a.out.as_deref())?;
    for p in top_pairs(&g, &scores, a.top) {
        serde_json::to_writer(&mut w, &p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Detect(a) => cmd_detect(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Perturb(a) => cmd_perturb(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Simdump(a) => cmd_simdump(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
