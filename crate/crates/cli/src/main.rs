use std::io::{self, Read, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use lpwp_core::canonical::{canonicalize, CanonicalForm};
use lpwp_core::dataset::{self, Corpus, Domain};
use lpwp_core::evaluator::{evaluate_predictions, GoldEntry, Prediction};
use lpwp_core::ir::{parse_ir, print_ir, EntitySpan};
use lpwp_core::lexicon::Lexicon;
use lpwp_core::solver::solve_canonical;
use lpwp_core::suggest::{suggest_with, tag_with, RuleGenerator};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "lpwp",
    version,
    about = "LP word problems: IR, canonical tables, solving, evaluation"
)]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Lexicon file replacing the bundled one.
    #[arg(long, global = true, env = "LPWP_LEXICON")]
    lexicon: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorpusFormat {
    /// One problem record per line.
    Records,
    /// One `{id: entry}` object per line, as released with the dataset.
    Released,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an IR file and print it back normalized.
    Parse {
        #[arg(long)]
        ir: PathBuf,
    },
    /// Print the canonical `a·x <= b` table of an IR file.
    Canon {
        #[arg(long)]
        ir: PathBuf,
        /// Fixed-width table (the default without --json).
        #[arg(long)]
        table: bool,
    },
    /// Solve a canonical form given as JSON.
    Solve {
        #[arg(long)]
        canon: PathBuf,
        /// Drop the `x >= 0` bounds.
        #[arg(long)]
        free: bool,
    },
    /// Declaration-level accuracy of predictions against gold problems.
    Eval {
        /// JSON lines with `id` and `ir` (corpus records also work).
        #[arg(long)]
        pred: PathBuf,
        /// JSON lines with `id` and `gold_ir`.
        #[arg(long)]
        gold: PathBuf,
        /// Per-problem CSV instead of the summary.
        #[arg(long)]
        csv: bool,
    },
    /// Tag entities in a problem description.
    Tag {
        #[arg(long)]
        text: PathBuf,
    },
    /// Suggest declarations for a problem description.
    Suggest {
        #[arg(long)]
        text: PathBuf,
        /// JSON array of entity spans to use instead of tagging.
        #[arg(long)]
        entities: Option<PathBuf>,
    },
    /// Corpus statistics.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "records")]
        format: CorpusFormat,
    },
    /// Check every record of a corpus; exits 1 when any is rejected.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "records")]
        format: CorpusFormat,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "LPWP_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "LPWP_HOST", default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory for per-session action logs.
        #[arg(long, env = "LPWP_PERSIST_DIR")]
        persist_dir: Option<PathBuf>,
        /// Browser origin allowed to call the API (`*` for any).
        #[arg(long, env = "LPWP_CORS_ORIGIN")]
        cors_origin: Option<String>,
    },
}

/// A domain failure: message for stderr, exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Failure(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn emit_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn lexicon(cli: &Cli) -> Result<Lexicon, Failure> {
    match &cli.lexicon {
        Some(p) => Ok(Lexicon::load(p)?),
        None => Ok(Lexicon::shared().clone()),
    }
}

fn corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, Failure> {
    let text = read(path)?;
    Ok(match format {
        CorpusFormat::Records => dataset::parse_corpus(&text)?,
        CorpusFormat::Released => dataset::import::import_generation_jsonl(&text, Domain::Sales, None)?,
    })
}

fn ok(success: bool) -> ExitCode {
    if success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Parse { ir } => {
            let parsed = parse_ir(&read(ir)?)?;
            if cli.json {
                emit_json(&json!({
                    "document": parsed.document,
                    "errors": parsed.errors,
                    "block_count": parsed.block_count,
                }))?;
            } else {
                print!("{}", print_ir(&parsed.document));
            }
            for e in &parsed.errors {
                eprintln!("error: {e}");
            }
            Ok(ok(parsed.errors.is_empty()))
        }
        Command::Canon { ir, .. } => {
            let doc = parse_ir(&read(ir)?)?.into_complete()?;
            let form = canonicalize(&doc)?;
            if cli.json {
                emit_json(&form)?;
            } else {
                print!("{}", form.table());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { canon, free } => {
            let form: CanonicalForm = serde_json::from_str(&read(canon)?)?;
            let sol = solve_canonical(&form, !free)?;
            if cli.json {
                emit_json(&json!({ "variables": form.variables, "solution": sol }))?;
            } else {
                println!(
                    "status {}",
                    serde_json::to_value(sol.status)?.as_str().unwrap_or_default()
                );
                if let Some(v) = sol.objective {
                    println!("objective {v}");
                }
                for (name, v) in form.variables.iter().zip(&sol.x) {
                    println!("{name} = {v}");
                }
                for r in &sol.infeasible_rows {
                    println!("conflict row {r}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { pred, gold, csv } => {
            let pred: Vec<Prediction> = read_lines(pred)?;
            let gold: Vec<GoldEntry> = read_lines(gold)?;
            let report = evaluate_predictions(&pred, &gold)?;
            if cli.json {
                emit_json(&report)?;
            } else if *csv {
                print!("{}", report.to_csv());
            } else {
                println!("problems {}", report.per_problem.len());
                println!("accuracy {:.6}", report.accuracy);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tag { text } => {
            let description = read(text)?;
            let entities = tag_with(&description, &lexicon(&cli)?);
            if cli.json {
                emit_json(&entities)?;
            } else {
                for e in &entities {
                    println!("{}\t{}\t{}\t{}", e.start, e.end, e.label.tag(), e.text);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Suggest { text, entities } => {
            let description = read(text)?;
            let lex = Arc::new(lexicon(&cli)?);
            let spans: Vec<EntitySpan> = match entities {
                Some(p) => serde_json::from_str(&read(p)?)?,
                None => tag_with(&description, &lex),
            };
            let generator = RuleGenerator::new(lex);
            let suggestions = suggest_with(&generator, &description, &spans)?;
            if cli.json {
                emit_json(&suggestions)?;
            } else {
                let mut first = true;
                for s in &suggestions {
                    match &s.outcome {
                        Ok(g) => {
                            if !first {
                                println!();
                            }
                            first = false;
                            print!("{}", g.ir);
                        }
                        Err(f) => eprintln!("warning: {f}"),
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { corpus: path, format } => {
            let c = corpus(path, *format)?;
            let s = dataset::stats(&c.records);
            if cli.json {
                emit_json(&s)?;
            } else {
                print!("{s}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { corpus: path, format } => {
            let c = corpus(path, *format)?;
            if cli.json {
                emit_json(&json!({ "records": c.records.len(), "rejections": c.rejections }))?;
            } else {
                println!("records {}", c.records.len());
                for r in &c.rejections {
                    for v in &r.violations {
                        println!("line {} {}: {v}", r.line, r.id);
                    }
                }
            }
            Ok(ok(c.rejections.is_empty()))
        }
        Command::Serve {
            port,
            host,
            persist_dir,
            cors_origin,
        } => {
            tracing_subscriber::fmt().with_writer(io::stderr).init();
            let config = lpwp_server::ServerConfig {
                host: *host,
                port: *port,
                lexicon: cli.lexicon.clone(),
                persist_dir: persist_dir.clone(),
                cors_origin: cors_origin.clone(),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(lpwp_server::serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
