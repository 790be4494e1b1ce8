//! The `sensemble` command line.
//!
//! Exit status: 0 success, 2 usage, 3 data or format, 4 worker protocol,
//! 5 numeric failure. Every file written carries the resolved configuration
//! and seed of the run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    accuracy, overlap_analysis, render_report, CorrectnessBitmap, EvaluationReport, ReportFormat, SystemAccuracy,
};
use crate::dataset::{dataset_stats, parse_samples, render_stats_table, FormatConfig, Sample};
use crate::de::{write_de_trace, DEConfig};
use crate::ensemble::{
    combine, fit_weights_traced, load_score_matrix, majority_vote, serve_toy, write_logits_file, EnsembleWeights,
    LoadOptions, ScoreMatrix, ScoreTransform, ScorerBackend,
};
use crate::error::{Error, Result};
use crate::scorer::{accuracy_on, train_scorer, write_trace, ToyScorerParams, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "sensemble", version, about = "Commonsense multiple-choice scoring and ensembling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample counts and mean token lengths per split.
    Stats(StatsArgs),
    /// Train the in-process toy scorer.
    TrainToy(TrainArgs),
    /// Score a split with one backend and write a logits file.
    Score(ScoreArgs),
    /// Fit ensemble weights on a development split.
    FitWeights(FitArgs),
    /// Accuracy of each backend and of the weighted ensemble.
    Evaluate(EvaluateArgs),
    /// Overlap of single-model correctness, cross-tabulated with the ensemble.
    Overlap(EvaluateArgs),
    /// Run the toy scorer as a worker on standard input and output.
    ServeToy(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Data file (delimiter-separated).
    #[arg(long)]
    pub data: PathBuf,
    /// JSON format config describing the columns of the data file.
    #[arg(long = "format")]
    pub format: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Split to describe, as NAME=PATH or PATH; repeatable.
    #[arg(long = "data", required = true)]
    pub data: Vec<String>,
    #[arg(long = "format")]
    pub format: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long = "format")]
    pub format: PathBuf,
    /// JSON train config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Receives params.json, trace.csv and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_fraction: Option<f64>,
    #[arg(long)]
    pub adam_epsilon: Option<f64>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Backend as kind:id:source, kind one of toy, logits, worker.
    #[arg(long)]
    pub backend: ScorerBackend,
    /// Logits file to write; a `.meta.json` sidecar records the run.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DeArgs {
    /// Maximum DE generations.
    #[arg(long)]
    pub de_iterations: Option<usize>,
    /// DE relative tolerance on the population's objective spread.
    #[arg(long)]
    pub de_rel_tol: Option<f64>,
    /// Population size per weight.
    #[arg(long)]
    pub de_popsize: Option<usize>,
    /// Mutation factor range, dithered per generation.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub de_mutation: Option<Vec<f64>>,
    /// Crossover probability.
    #[arg(long)]
    pub de_crossover: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl DeArgs {
    fn resolve(&self) -> Result<DEConfig> {
        let mut c = DEConfig::default();
        if let Some(v) = self.de_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.de_rel_tol {
            c.relative_tolerance = v;
        }
        if let Some(v) = self.de_popsize {
            c.population_multiplier = v;
        }
        if let Some(v) = &self.de_mutation {
            c.mutation = [v[0], v[1]];
        }
        if let Some(v) = self.de_crossover {
            c.crossover = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Backend as kind:id:source; repeat once per ensemble member.
    #[arg(long = "backend", required = true)]
    pub backends: Vec<ScorerBackend>,
    #[command(flatten)]
    pub de: DeArgs,
    /// Softmax each backend's scores before weighting.
    #[arg(long)]
    pub softmax: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Best objective value per generation, as CSV.
    #[arg(long)]
    pub de_trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Backend as kind:id:source; one per backend named in the weights file.
    #[arg(long = "backend", required = true)]
    pub backends: Vec<ScorerBackend>,
    /// Weights file from fit-weights.
    #[arg(long)]
    pub weights: PathBuf,
    /// Also report majority voting, falling back to this backend when no
    /// label has a strict majority.
    #[arg(long)]
    pub vote_fallback: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    #[serde(skip)]
    pub report_format: ReportFormat,
    /// Write the structured report here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub params: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Stats(a) => stats(&a),
        Command::TrainToy(a) => train_toy(&a),
        Command::Score(a) => score(&a),
        Command::FitWeights(a) => fit(&a),
        Command::Evaluate(a) => evaluate(&a, false),
        Command::Overlap(a) => evaluate(&a, true),
        Command::ServeToy(a) => {
            let (params, _) = ToyScorerParams::load(&a.params)?;
            serve_toy(&params, io::stdin().lock(), io::stdout().lock())
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn print(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn load_split(data: &DataArgs) -> Result<(FormatConfig, Vec<Sample>)> {
    let format = FormatConfig::load(&data.format)?;
    let samples = parse_samples(&data.data, &format)?;
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no samples", data.data.display())));
    }
    Ok((format, samples))
}

fn gold(samples: &[Sample]) -> BTreeMap<String, usize> {
    samples.iter().map(|s| (s.id().to_string(), s.label())).collect()
}

fn load_matrices(backends: &[ScorerBackend], format: &FormatConfig, samples: &[Sample]) -> Result<Vec<ScoreMatrix>> {
    let options = LoadOptions { template: format.template.clone(), toy_params: None };
    backends.iter().map(|b| load_score_matrix(b, samples, &options)).collect()
}

fn stats(a: &StatsArgs) -> Result<()> {
    let format = FormatConfig::load(&a.format)?;
    let mut splits = Vec::new();
    for spec in &a.data {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let n = p.file_stem().map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                (n, p)
            }
        };
        let samples = parse_samples(&path, &format)?;
        splits.push((name, dataset_stats(&samples)));
    }
    print(&render_stats_table(&splits));
    if let Some(out) = &a.out {
        let reports: BTreeMap<_, _> = splits.iter().cloned().collect();
        write_json(out, &json!({ "splits": reports, "config": to_value(a) }))?;
    }
    Ok(())
}

fn train_toy(a: &TrainArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag { config.$($field).+ = v; })*
        };
    }
    set!(
        epochs => epochs,
        learning_rate => learning_rate,
        weight_decay => weight_decay,
        dropout => dropout,
        batch_size => batch_size,
        warmup_fraction => warmup_fraction,
        adam_epsilon => adam_epsilon,
        max_seq_len => max_sequence_length,
        embedding_dim => dims.embedding_dim,
        hidden_dim => dims.hidden_dim,
        buckets => dims.buckets,
        seed => seed,
    );
    let format = FormatConfig::load(&a.format)?;
    config.template = format.template.clone();
    let train = parse_samples(&a.train, &format)?;
    let dev = match &a.dev {
        Some(p) => parse_samples(p, &format)?,
        None => Vec::new(),
    };
    let outcome = train_scorer(&train, &dev, &config)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let provenance = json!({ "train": to_value(&config), "seed": config.seed, "args": to_value(a) });
    outcome.params.save(a.out_dir.join("params.json"), provenance.clone())?;
    write_trace(a.out_dir.join("trace.csv"), &outcome.trace)?;
    let train_accuracy = accuracy_on(&outcome.params, &train)?;
    let dev_accuracy = if dev.is_empty() { None } else { Some(accuracy_on(&outcome.params, &dev)?) };
    write_json(
        &a.out_dir.join("summary.json"),
        &json!({
            "best_epoch": outcome.best_epoch,
            "train_accuracy": train_accuracy,
            "dev_accuracy": dev_accuracy,
            "trace": outcome.trace,
            "config": provenance,
        }),
    )?;
    let dev_text = dev_accuracy.map_or_else(|| "-".to_string(), |d| format!("{:.2}%", 100.0 * d));
    print(&format!(
        "best epoch {} of {}: train {:.2}%, dev {dev_text}\n",
        outcome.best_epoch,
        config.epochs,
        100.0 * train_accuracy
    ));
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<()> {
    let (format, samples) = load_split(&a.data)?;
    let matrix = load_matrices(std::slice::from_ref(&a.backend), &format, &samples)?.remove(0);
    write_logits_file(&a.out, &matrix)?;
    let mut meta = a.out.clone().into_os_string();
    meta.push(".meta.json");
    let seed = match a.backend.kind {
        crate::ensemble::BackendKind::Toy => Some(ToyScorerParams::load(&a.backend.source)?.0.seed),
        _ => None,
    };
    write_json(
        Path::new(&meta),
        &json!({ "backend": a.backend.to_string(), "samples": matrix.len(), "seed": seed, "config": to_value(a) }),
    )?;
    print(&format!("{} score vectors written to {}\n", matrix.len(), a.out.display()));
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    let de = a.de.resolve()?;
    let (format, samples) = load_split(&a.data)?;
    let matrices = load_matrices(&a.backends, &format, &samples)?;
    let labels = gold(&samples);
    let transform = if a.softmax { ScoreTransform::Softmax } else { ScoreTransform::Raw };
    let (mut weights, search) = fit_weights_traced(&matrices, &labels, &de, transform)?;
    if let Value::Object(map) = &mut weights.config {
        map.insert("args".into(), to_value(a));
    }
    weights.save(&a.out)?;
    if let Some(trace) = &a.de_trace {
        write_de_trace(trace, &search)?;
    }
    let mut text = String::new();
    for m in &matrices {
        text += &format!("{:<12} dev {:.2}%\n", m.backend_id, 100.0 * accuracy(&m.predictions(), &labels)?);
    }
    text += &format!(
        "{:<12} dev {:.2}%  weights {:?}\n",
        "ensemble",
        100.0 * weights.dev_accuracy.unwrap_or(f64::NAN),
        weights.weights
    );
    print(&text);
    Ok(())
}

/// Matrices reordered to the backend order of the weights file.
fn align_to_weights(matrices: Vec<ScoreMatrix>, weights: &EnsembleWeights) -> Result<Vec<ScoreMatrix>> {
    let mut by_id: BTreeMap<String, ScoreMatrix> = matrices.into_iter().map(|m| (m.backend_id.clone(), m)).collect();
    let ordered = weights
        .backends
        .iter()
        .map(|b| {
            by_id
                .remove(b)
                .ok_or_else(|| Error::InvalidInput(format!("weights name backend {b:?}, which was not given")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = by_id.keys().next() {
        return Err(Error::InvalidInput(format!("backend {extra:?} has no weight")));
    }
    Ok(ordered)
}

fn ensemble_predictions(matrices: &[ScoreMatrix], weights: &EnsembleWeights) -> Result<BTreeMap<String, usize>> {
    let ids: Vec<String> = matrices[0].ids().map(String::from).collect();
    ids.into_iter()
        .map(|id| {
            let vectors: Vec<Vec<f64>> = matrices
                .iter()
                .map(|m| weights.transform.apply(m.get(&id).expect("matrices cover the split")))
                .collect();
            let refs: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
            let combined = combine(&weights.weights, &refs)?;
            Ok((id, crate::scorer::argmax(&combined)))
        })
        .collect()
}

fn evaluate(a: &EvaluateArgs, overlap: bool) -> Result<()> {
    let weights = EnsembleWeights::load(&a.weights)?;
    let (format, samples) = load_split(&a.data)?;
    let matrices = align_to_weights(load_matrices(&a.backends, &format, &samples)?, &weights)?;
    let labels = gold(&samples);
    let n = labels.len();

    let singles: Vec<(String, BTreeMap<String, usize>)> =
        matrices.iter().map(|m| (m.backend_id.clone(), m.predictions())).collect();
    let ensemble = ensemble_predictions(&matrices, &weights)?;

    let mut accuracies = Vec::new();
    for (id, preds) in &singles {
        accuracies.push(SystemAccuracy { system: id.clone(), accuracy: accuracy(preds, &labels)?, samples: n });
    }
    accuracies.push(SystemAccuracy { system: "ensemble".into(), accuracy: accuracy(&ensemble, &labels)?, samples: n });
    if let Some(fallback) = &a.vote_fallback {
        let f = weights
            .backends
            .iter()
            .position(|b| b == fallback)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fallback backend {fallback:?}")))?;
        let votes: BTreeMap<String, usize> = labels
            .keys()
            .map(|id| {
                let ls: Vec<usize> = singles.iter().map(|(_, p)| p[id]).collect();
                (id.clone(), majority_vote(&ls, f))
            })
            .collect();
        accuracies.push(SystemAccuracy {
            system: "majority-vote".into(),
            accuracy: accuracy(&votes, &labels)?,
            samples: n,
        });
    }

    let venn = if overlap {
        let bitmaps = singles
            .iter()
            .map(|(id, p)| CorrectnessBitmap::from_predictions(id.clone(), p, &labels))
            .collect::<Result<Vec<_>>>()?;
        let ens = CorrectnessBitmap::from_predictions("ensemble", &ensemble, &labels)?;
        Some(overlap_analysis(&bitmaps, &ens)?)
    } else {
        None
    };

    let report = EvaluationReport {
        accuracies,
        weights: Some(weights.clone()),
        venn,
        config: json!({ "args": to_value(a), "seed": weights.seed }),
    };
    print(&render_report(&report, a.report_format));
    if let Some(out) = &a.out {
        let text = render_report(&report, ReportFormat::Structured);
        fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}
