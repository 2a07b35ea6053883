//! `dkg`: preprocess text-game data, train the graph updater, evaluate it and
//! decode belief graphs from single observations.

mod config;

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dkg_core::data::{
    load_with, preprocess_dir, read_split, synth, write_dataset, CanonicalFormat, DatasetStats, GataFormat, Manifest,
    PreprocessConfig, RecordAdapter, RuleTokenizer, Tokenizer,
};
use dkg_core::embedding::{load_word_vectors, TemporalMode};
use dkg_core::eval::{evaluate, Greedy, Metric};
use dkg_core::graph::{events_to_commands, to_dot, ApplyMode, BeliefGraph, GraphExport};
use dkg_core::nn::{DType, Device, Model};
use dkg_core::train::{load_checkpoint, Trainer};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "dkg",
    version,
    about = "Dynamic knowledge graphs from text-game observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Canonical,
    Gata,
}

impl Format {
    fn adapter(self) -> Box<dyn RecordAdapter> {
        match self {
            Format::Canonical => Box::new(CanonicalFormat),
            Format::Gata => Box::new(GataFormat),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Tf,
    Fr,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Print statistics of a raw `.jsonl` split.
    Stats {
        data: PathBuf,
        #[arg(long, value_enum, default_value = "canonical")]
        format: Format,
    },
    /// Convert a directory of raw `.jsonl` splits into event sequences.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Split colored items into item and color nodes.
        #[arg(long)]
        multi: bool,
        /// Fail on commands that cannot be converted.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "canonical")]
        format: Format,
    },
    /// Train on a preprocessed directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Zero every temporal embedding.
        #[arg(long)]
        no_temp: bool,
        #[arg(long)]
        multi: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Stop once validation reaches this score.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Score a checkpoint on a preprocessed split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_enum, default_value = "both")]
        metric: MetricArg,
        #[arg(long)]
        multi: bool,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 100)]
        max_events: usize,
    },
    /// Decode the events of one observation and export the resulting graph.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        observation: String,
        #[arg(long, default_value = "")]
        action: String,
        /// Starting graph as exported JSON; empty when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        step: u32,
        #[arg(long, default_value_t = 100)]
        max_events: usize,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render an exported graph JSON as Graphviz DOT.
    ExportDot {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset in the raw layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        games: usize,
        #[arg(long, default_value_t = 5)]
        walkthrough_steps: usize,
        #[arg(long, default_value_t = 4)]
        random_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

type Outcome = Result<(), String>;

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn write(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn stats(data: &Path, format: Format) -> Outcome {
    let examples = load_with(data, format.adapter().as_ref()).map_err(fail)?;
    let s = DatasetStats::compute(&examples, &RuleTokenizer);
    println!("examples                 {}", s.examples);
    println!("games                    {}", s.games);
    println!("avg observation tokens   {:.2}", s.avg_observation_tokens);
    println!("avg commands per step    {:.2}", s.avg_commands);
    println!("node types               {}", s.node_types);
    println!("edge types               {}", s.edge_types);
    println!("avg connections          {:.2}", s.avg_connections);
    Ok(())
}

fn preprocess(input: &Path, out: &Path, multi: bool, strict: bool, seed: u64, format: Format) -> Outcome {
    let config = PreprocessConfig {
        multi_mode: multi,
        strict,
        ..PreprocessConfig::default()
    };
    let manifest =
        preprocess_dir(input, out, &config, seed, &RuleTokenizer, format.adapter().as_ref()).map_err(fail)?;
    for split in &manifest.splits {
        println!(
            "{}: {} datapoints, {} trajectories",
            split.name, split.examples, split.trajectories
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    data: &Path,
    config: Option<&Path>,
    out: &Path,
    no_temp: bool,
    multi: bool,
    seed: Option<u64>,
    max_steps: Option<usize>,
    target: Option<f64>,
) -> Outcome {
    let mut run = RunConfig::load(config)?;
    let manifest = Manifest::load(data).map_err(fail)?;
    if multi && !manifest.config.multi_mode {
        return Err(format!("{} was preprocessed without --multi", data.display()));
    }
    run.train.multi_mode = manifest.config.multi_mode;
    if no_temp {
        run.model.encoding.temporal_mode = TemporalMode::Zero;
    }
    if let Some(seed) = seed {
        run.train.seed = seed;
    }
    if let Some(steps) = max_steps {
        run.train.max_steps = steps;
    }
    let train = read_split(Manifest::split_path(data, "train")).map_err(fail)?;
    let dev = ["valid", "dev"]
        .iter()
        .map(|s| Manifest::split_path(data, s))
        .find(|p| p.exists())
        .map(read_split)
        .transpose()
        .map_err(fail)?;
    let vectors = match &run.embeddings {
        Some(path) => {
            let (v, found) = load_word_vectors(path, &manifest.vocab.words, run.model.word_dim).map_err(fail)?;
            log::info!(
                "{found} of {} words found in {}",
                manifest.vocab.words.len(),
                path.display()
            );
            Some(v)
        }
        None => None,
    };
    let seed = run.train.seed;
    let model = Model::new(
        run.model.clone(),
        manifest.vocab.clone(),
        vectors,
        seed,
        DType::F32,
        &Device::Cpu,
    )
    .map_err(fail)?;
    let mut trainer = Trainer::new(model, run.train.clone(), manifest.rules.clone(), seed).map_err(fail)?;
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let mut log_lines = String::new();
    let summary = trainer
        .fit(&train, Some(dev.as_ref().unwrap_or(&train)), Some(out), |p| {
            log_lines.push_str(&serde_json::to_string(p).unwrap_or_default());
            log_lines.push('\n');
            match (p.validation, target) {
                (Some(v), Some(t)) if v >= t => ControlFlow::Break(()),
                _ => ControlFlow::Continue(()),
            }
        })
        .map_err(fail)?;
    write(&out.join("train_log.jsonl"), &log_lines)?;
    write(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).map_err(fail)?,
    )?;
    write(&out.join("config.toml"), &toml::to_string(&run).map_err(fail)?)?;
    println!("trained {} steps; best validation {:?}", summary.steps, summary.best);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    checkpoint: &Path,
    data: &Path,
    split: &str,
    metric: MetricArg,
    multi: bool,
    report: &Path,
    max_events: usize,
) -> Outcome {
    let ckpt = load_checkpoint(checkpoint, &Device::Cpu).map_err(fail)?;
    let corpus = read_split(Manifest::split_path(data, split)).map_err(fail)?;
    let metric = match metric {
        MetricArg::Tf => Metric::Tf,
        MetricArg::Fr => Metric::Fr,
        MetricArg::Both => Metric::Both,
    };
    let multi = multi || ckpt.meta.multi_mode;
    let greedy = Greedy {
        model: &ckpt.model,
        max_events,
    };
    let result = evaluate(&greedy, &corpus, metric, multi, &ckpt.meta.rules).map_err(fail)?;
    write(report, &serde_json::to_string_pretty(&result).map_err(fail)?)?;
    let show = |v: Option<f64>| v.map_or("N/A".to_string(), |x| format!("{x:.4}"));
    println!("tf_f1 {}  fr_f1 {}", show(result.tf_f1), show(result.fr_f1));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn generate(
    checkpoint: &Path,
    observation: &str,
    action: &str,
    graph: Option<&Path>,
    step: u32,
    max_events: usize,
    dot: Option<&Path>,
    json: Option<&Path>,
) -> Outcome {
    let ckpt = load_checkpoint(checkpoint, &Device::Cpu).map_err(fail)?;
    let mut belief = match graph {
        Some(path) => read_graph(path)?,
        None => BeliefGraph::new(),
    };
    let before = belief.clone();
    let obs = RuleTokenizer.tokenize(observation);
    let act = RuleTokenizer.tokenize(action);
    let events = ckpt
        .model
        .generate_events(&obs, &act, &mut belief, step, max_events)
        .map_err(fail)?;
    println!("events:");
    for e in &events {
        println!("  {}", serde_json::to_string(e).map_err(fail)?);
    }
    let commands = events_to_commands(&events, &mut before.clone(), ApplyMode::Lenient).map_err(fail)?;
    println!("commands:");
    for c in &commands {
        println!("  {c}");
    }
    if let Some(path) = dot {
        write(path, &to_dot(&belief))?;
    }
    if let Some(path) = json {
        write(
            path,
            &serde_json::to_string_pretty(&GraphExport::from(&belief)).map_err(fail)?,
        )?;
    }
    Ok(())
}

fn read_graph(path: &Path) -> Result<BeliefGraph, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let export: GraphExport = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    BeliefGraph::try_from(export).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Stats { data, format } => stats(&data, format),
        Command::Preprocess {
            input,
            out,
            multi,
            strict,
            seed,
            format,
        } => preprocess(&input, &out, multi, strict, seed, format),
        Command::Train {
            data,
            config,
            out,
            no_temp,
            multi,
            seed,
            max_steps,
            target,
        } => train(&data, config.as_deref(), &out, no_temp, multi, seed, max_steps, target),
        Command::Eval {
            checkpoint,
            data,
            split,
            metric,
            multi,
            report,
            max_events,
        } => eval(&checkpoint, &data, &split, metric, multi, &report, max_events),
        Command::Generate {
            checkpoint,
            observation,
            action,
            graph,
            step,
            max_events,
            dot,
            json,
        } => generate(
            &checkpoint,
            &observation,
            &action,
            graph.as_deref(),
            step,
            max_events,
            dot.as_deref(),
            json.as_deref(),
        ),
        Command::ExportDot { graph, out } => {
            let dot = to_dot(&read_graph(&graph)?);
            match out {
                Some(path) => write(&path, &dot),
                None => {
                    print!("{dot}");
                    Ok(())
                }
            }
        }
        Command::Synth {
            out,
            games,
            walkthrough_steps,
            random_steps,
            seed,
        } => {
            let config = synth::SynthConfig {
                games,
                walkthrough_steps,
                random_steps,
                seed,
            };
            fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let path = out.join("train.jsonl");
            write_dataset(&path, &synth::generate(&config)).map_err(fail)?;
            println!("wrote {} examples to {}", config.examples(), path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for --help
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
