use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use treemend_core::corpus::{toy_corpus, BugFix, CorpusConfig};
use treemend_core::graph::{Record, Vocab};
use treemend_core::lang::{LineSpan, TestCase};
use treemend_core::prepare::prepare;
use treemend_core::rules::GrammarSchema;
use treemend_neural::checkpoint::{load_checkpoint, save_checkpoint};
use treemend_neural::train::{train_ensemble, Example, TrainConfig};
use treemend_neural::{Model, ModelConfig};
use treemend_repair::pipeline::{concrete_candidates, generate};
use treemend_repair::{repair, validate, BeamConfig, BugInput, RepairOptions};

#[derive(Parser)]
#[command(name = "treemend", version, about = "Rule-guided neural repair for a small imperative language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bug/fix corpus as JSON lines.
    Toy {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a bug/fix corpus into model records.
    Preprocess {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train candidate models and keep the best ones.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_distill: bool,
    },
    /// Generate ranked patches for one bug.
    Infer {
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Validate patches against the tests of one bug.
    Validate {
        #[arg(long)]
        bug: PathBuf,
        #[arg(long)]
        patches: PathBuf,
    },
    /// Generate and validate; prints a repair report.
    Repair {
        #[command(flatten)]
        search: SearchArgs,
    },
}

#[derive(Args)]
struct SearchArgs {
    /// Comma-separated checkpoint directories.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    bug: PathBuf,
    #[arg(long, default_value_t = 100)]
    beam: usize,
    #[arg(long, default_value_t = 64)]
    max_steps: usize,
    #[arg(long)]
    no_shaping: bool,
}

/// Bug description on disk; paths are relative to the file.
#[derive(Deserialize)]
struct BugFile {
    #[serde(default)]
    id: Option<String>,
    program_path: PathBuf,
    buggy_span: [u32; 2],
    #[serde(default)]
    tests_path: Option<PathBuf>,
    #[serde(default)]
    focal: Option<String>,
}

#[derive(Deserialize)]
struct TrainFile {
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default = "default_val_fraction")]
    val_fraction: f64,
}

fn default_val_fraction() -> f64 {
    0.1
}

#[derive(Deserialize)]
struct PatchLine {
    patch: String,
}

#[derive(Serialize)]
struct InferLine {
    rank: usize,
    score: f64,
    support: usize,
    valid: bool,
    tree: String,
    patches: Vec<String>,
}

/// Input problems exit with 2; everything else the command decides.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Res<T> = Result<T, InputError>;

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Res<Vec<T>> {
    let f = File::open(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| InputError(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

fn load_bug(path: &Path) -> Res<BugInput> {
    let text = fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let b: BugFile = serde_json::from_str(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let source = fs::read_to_string(dir.join(&b.program_path))
        .map_err(|e| InputError(format!("{}: {e}", b.program_path.display())))?;
    let tests: Vec<TestCase> = match &b.tests_path {
        Some(t) => serde_json::from_str(&fs::read_to_string(dir.join(t))?)?,
        None => Vec::new(),
    };
    if b.buggy_span[0] == 0 || b.buggy_span[1] < b.buggy_span[0] {
        return Err(InputError(format!("bad buggy span {:?}", b.buggy_span)));
    }
    Ok(BugInput {
        id: b.id.unwrap_or_else(|| path.display().to_string()),
        source,
        focal: b.focal,
        span: LineSpan::new(b.buggy_span[0], b.buggy_span[1]),
        tests,
    })
}

fn load_models(paths: &[PathBuf]) -> Res<Vec<Model<f32>>> {
    paths
        .iter()
        .map(|p| load_checkpoint(p).map_err(|e| InputError(format!("{}: {e}", p.display()))))
        .collect()
}

fn options(s: &SearchArgs) -> RepairOptions {
    RepairOptions {
        beam: BeamConfig {
            width: s.beam,
            max_steps: s.max_steps,
            shaping: !s.no_shaping,
            ..BeamConfig::default()
        },
        ..RepairOptions::default()
    }
}

fn print_json<T: Serialize>(v: &T) -> Res<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Res<ExitCode> {
    let vocab = Vocab::default();
    let schema = GrammarSchema::desk();
    match cli.command {
        Command::Toy { n, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bugs = toy_corpus(&mut rng, n, &CorpusConfig::default(), &vocab);
            let mut w = BufWriter::new(File::create(out)?);
            for b in &bugs {
                writeln!(w, "{}", serde_json::to_string(b)?)?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Preprocess { corpus, out } => {
            let bugs: Vec<BugFix> = read_jsonl(&corpus)?;
            fs::create_dir_all(&out)?;
            let mut w = BufWriter::new(File::create(out.join("records.jsonl"))?);
            let mut skipped = 0;
            for b in &bugs {
                let rec = prepare(&b.buggy_source, &b.focal, b.span, &vocab).and_then(|p| p.record(&b.id, &b.patch, &vocab));
                match rec {
                    Ok(r) => writeln!(w, "{}", serde_json::to_string(&r)?)?,
                    Err(e) => {
                        skipped += 1;
                        eprintln!("skipping {}: {e}", b.id);
                    }
                }
            }
            w.flush()?;
            eprintln!("{} records, {skipped} skipped", bugs.len() - skipped);
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { config, data, out, no_distill } => {
            let file: TrainFile = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => serde_json::from_str("{}")?,
            };
            let mut cfg = file.train;
            if no_distill {
                cfg.distill = false;
            }
            let base = file.model.unwrap_or_else(|| ModelConfig::desk(&vocab));
            let records: Vec<Record> = read_jsonl(&data.join("records.jsonl"))?;
            let examples = records
                .iter()
                .map(|r| Example::from_record(r, &vocab, &schema))
                .collect::<Result<Vec<_>, _>>()?;
            let n_val = ((examples.len() as f64) * file.val_fraction).round() as usize;
            let (val, train) = examples.split_at(n_val.min(examples.len()));
            fs::create_dir_all(&out)?;
            let dir = out.clone();
            let mut sink = |i: usize| -> Option<Box<dyn Write>> {
                File::create(dir.join(format!("candidate-{i}.metrics.jsonl"))).ok().map(|f| Box::new(f) as Box<dyn Write>)
            };
            let models = train_ensemble(&base, train, val, &cfg, Some(&mut sink))?;
            for (j, m) in models.iter().enumerate() {
                save_checkpoint(m, &out.join(format!("model-{j}")))?;
            }
            eprintln!("saved {} models to {}", models.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Infer { search } => {
            let bug = load_bug(&search.bug)?;
            let models = load_models(&search.models)?;
            let opts = options(&search);
            let prepared = bug.prepare(&vocab)?;
            let gen = generate(&models, &prepared, &vocab, &schema, &opts.beam)?;
            let mut out = io::stdout().lock();
            for (rank, t) in gen.trees.iter().enumerate() {
                let (patches, _) = concrete_candidates(std::slice::from_ref(t), &prepared, &opts);
                let line = InferLine {
                    rank,
                    score: t.mean_score,
                    support: t.support,
                    valid: t.valid,
                    tree: t.text(),
                    patches: patches.into_iter().map(|(p, _)| p).collect(),
                };
                writeln!(out, "{}", serde_json::to_string(&line)?)?;
            }
            Ok(if gen.trees.is_empty() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Validate { bug, patches } => {
            let bug = load_bug(&bug)?;
            let lines: Vec<PatchLine> = read_jsonl(&patches)?;
            let texts: Vec<String> = lines.into_iter().map(|l| l.patch).collect();
            let log = validate(&bug.source, bug.span, &texts, &bug.tests, &RepairOptions::default().validate);
            print_json(&log)?;
            Ok(if log.plausible.is_some() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Repair { search } => {
            let bug = load_bug(&search.bug)?;
            let models = load_models(&search.models)?;
            let report = repair(&bug, &models, &vocab, &schema, &options(&search))?;
            print_json(&report)?;
            Ok(if report.plausible.is_some() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(InputError(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
