//! Command-line surface: zeta table generation, training, encoding,
//! querying, evaluation, and with/without-hinge comparison.
//!
//! Exit codes: 0 success, 1 usage, 2 data/format/config, 3 divergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::code_bounds;
use crate::config::ExperimentConfig;
use crate::datasets;
use crate::error::{HhfError, Result};
use crate::experiment::{self, median, RunOutput, Variant};
use crate::hamming::{self, BinaryCode};
use crate::metrics::{self, EvalReport, RelevanceJudge};
use crate::num::Matrix;
use crate::train::{load_checkpoint, save_checkpoint, write_history_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Parser)]
#[command(
    name = "hhf",
    version,
    about = "Deep-hashing toolkit: hinge-clamped metric losses, Hamming retrieval, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the inflection-constant table for all (K, C) pairs.
    ZetaTable(ZetaTableArgs),
    /// Train an encoder per an experiment config.
    Train(TrainArgs),
    /// Encode a feature file into a binary code file with a checkpoint.
    Encode(EncodeArgs),
    /// Query a code database by Hamming distance.
    Query(QueryArgs),
    /// Evaluate retrieval and quantization quality.
    Evaluate(EvaluateArgs),
    /// Train and evaluate several loss variants over the seed list.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ZetaTableArgs {
    #[arg(long)]
    max_bits: usize,
    #[arg(long)]
    max_classes: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Run seed; defaults to the first entry of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Loss variant, e.g. `proxy_anchor+hhf`; defaults to the config's
    /// [loss] section.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the continuous latent codes as CSV.
    #[arg(long)]
    latents_out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    db: PathBuf,
    /// Code file whose entries all become queries.
    #[arg(long, conflicts_with = "code")]
    query_file: Option<PathBuf>,
    /// Inline K-bit query, e.g. `0110...` (1 encodes +1).
    #[arg(long)]
    code: Option<String>,
    #[arg(long, short)]
    n: usize,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// CSV of database latent codes, one row per database record.
    #[arg(long)]
    latents: PathBuf,
    #[arg(long, default_value_t = 100)]
    map_n: usize,
    #[arg(long, default_value = "single")]
    judge: String,
    /// Comma-separated precision/recall cutoffs.
    #[arg(long)]
    pr_grid: Option<String>,
    /// Output prefix: writes {prefix}report.json, {prefix}pr.csv,
    /// {prefix}precision_at.csv.
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated variants, e.g. `proxy_anchor,proxy_anchor+hhf`.
    #[arg(long)]
    variants: String,
    /// Comparison table CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Directory for per-run artifacts (checkpoints, codes, reports).
    #[arg(long)]
    out_dir: PathBuf,
}

/// Entry point for the binary.
pub fn run_from_env() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::ZetaTable(args) => cmd_zeta_table(args),
        Command::Train(args) => cmd_train(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Query(args) => cmd_query(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HhfError::Divergence { .. } => EXIT_DIVERGED,
                _ => EXIT_DATA,
            }
        }
    }
}

fn cmd_zeta_table(args: ZetaTableArgs) -> Result<i32> {
    let table = code_bounds::generate_table(args.max_bits, args.max_classes)?;
    code_bounds::save_table(&table, &args.out)?;
    let (lo, hi) = table.zeta_range().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "wrote {} entries (K <= {}, C <= {}) to {}; zeta in [{lo}, {hi}]",
        table.len(),
        table.max_bits(),
        table.max_classes(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn write_run_artifacts(dir: &Path, run: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| HhfError::io(dir.display().to_string(), e))?;
    save_checkpoint(&run.state, &run.train_cfg, dir.join("checkpoint.hhfk"))?;
    write_history_csv(&run.state.history, dir.join("history.csv"))?;
    hamming::save_codes(&run.db, dir.join("db.hhfc"))?;
    hamming::save_codes(&run.queries, dir.join("queries.hhfc"))?;
    run.db_latents.save_csv(dir.join("db_latents.csv"))?;
    write_report(&run.report, &format!("{}/", dir.display()))?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seeds[0]);
    let variant = match &args.variant {
        Some(s) => Variant::parse(s)?,
        None => Variant {
            kind: cfg.loss_kind()?,
            hhf: cfg.loss.hhf,
        },
    };
    let run = experiment::run_single(&cfg, variant, seed)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| HhfError::io(args.out_dir.display().to_string(), e))?;
    save_checkpoint(
        &run.state,
        &run.train_cfg,
        args.out_dir.join("checkpoint.hhfk"),
    )?;
    write_history_csv(&run.state.history, args.out_dir.join("history.csv"))?;
    let last = run.state.history.last().expect("at least one epoch");
    println!(
        "trained {} for {} epochs (seed {seed}): metric {:.6}, quantization {:.6}, total {:.6}",
        variant.name(),
        run.state.epoch,
        last.metric,
        last.quantization,
        last.total
    );
    println!(
        "eval: mAP@{} {:.4}, HPE {:.4}, eta_global {:.4}, eta_local {:.4}",
        run.report.map_n, run.report.map_at_n, run.report.hpe, run.report.eta_global,
        run.report.eta_local
    );
    Ok(EXIT_OK)
}

fn cmd_encode(args: EncodeArgs) -> Result<i32> {
    let (state, _) = load_checkpoint(&args.checkpoint)?;
    let dataset = datasets::load_features(&args.features)?;
    let (latents, codes) = crate::train::encode_database(&state, &dataset.features)?;
    let db = hamming::CodeDatabase::from_codes(&codes, dataset.labels.clone())?;
    hamming::save_codes(&db, &args.out)?;
    if let Some(latents_out) = &args.latents_out {
        latents.save_csv(latents_out)?;
    }
    println!(
        "encoded {} records at K={} into {}",
        db.len(),
        db.bits(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn parse_inline_code(bits: &str) -> Result<BinaryCode> {
    let signs: Vec<i8> = bits
        .chars()
        .map(|c| match c {
            '1' => Ok(1),
            '0' => Ok(-1),
            other => Err(HhfError::InvalidArgument(format!(
                "inline code may only contain 0 and 1, found {other:?}"
            ))),
        })
        .collect::<Result<_>>()?;
    BinaryCode::pack(&signs)
}

fn cmd_query(args: QueryArgs) -> Result<i32> {
    let db = hamming::load_codes(&args.db)?;
    let mut lines = Vec::new();
    match (&args.query_file, &args.code) {
        (Some(path), None) => {
            let queries = hamming::load_codes(path)?;
            lines.push("query,id,distance".to_string());
            for qi in 0..queries.len() {
                let result = db.top_n(&queries.code(qi), args.n)?;
                for (id, dist) in result.hits {
                    lines.push(format!("{qi},{id},{dist}"));
                }
            }
        }
        (None, Some(bits)) => {
            let query = parse_inline_code(bits)?;
            lines.push("id,distance".to_string());
            let result = db.top_n(&query, args.n)?;
            for (id, dist) in result.hits {
                lines.push(format!("{id},{dist}"));
            }
        }
        _ => {
            return Err(HhfError::InvalidArgument(
                "provide exactly one of --query-file or --code".into(),
            ))
        }
    }
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| HhfError::io(path.display().to_string(), e))?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn write_report(report: &EvalReport, prefix: &str) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    let path = format!("{prefix}report.json");
    std::fs::write(&path, json + "\n").map_err(|e| HhfError::io(path.clone(), e))?;

    let mut pr = String::from("cutoff,recall,precision\n");
    let mut prec = String::from("cutoff,precision\n");
    for p in &report.precision_at {
        pr.push_str(&format!("{},{:.17e},{:.17e}\n", p.cutoff, p.recall, p.precision));
        prec.push_str(&format!("{},{:.17e}\n", p.cutoff, p.precision));
    }
    let pr_path = format!("{prefix}pr.csv");
    std::fs::write(&pr_path, pr).map_err(|e| HhfError::io(pr_path.clone(), e))?;
    let prec_path = format!("{prefix}precision_at.csv");
    std::fs::write(&prec_path, prec).map_err(|e| HhfError::io(prec_path.clone(), e))?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<i32> {
    let db = hamming::load_codes(&args.db)?;
    let queries = hamming::load_codes(&args.queries)?;
    let latents = Matrix::load_csv(&args.latents)?;
    let judge: RelevanceJudge = args.judge.parse()?;
    let grid = match &args.pr_grid {
        Some(spec) => spec
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|e| {
                    HhfError::InvalidArgument(format!("bad pr-grid entry {tok:?}: {e}"))
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => metrics::default_pr_grid(db.len(), 50),
    };
    let report = metrics::evaluate(&queries, &db, &latents, args.map_n, judge, &grid)?;
    write_report(&report, &args.out_prefix)?;
    println!(
        "mAP@{} {:.4}, HPE {:.4}, eta_global {:.4}, eta_local {:.4} ({} queries, {} records)",
        report.map_n,
        report.map_at_n,
        report.hpe,
        report.eta_global,
        report.eta_local,
        queries.len(),
        db.len()
    );
    Ok(EXIT_OK)
}

struct CompareRow {
    variant: String,
    seed: u64,
    report: Option<EvalReport>,
}

fn cmd_compare(args: CompareArgs) -> Result<i32> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let variants: Vec<Variant> = args
        .variants
        .split(',')
        .map(|tok| Variant::parse(tok.trim()))
        .collect::<Result<_>>()?;
    if variants.len() < 2 {
        return Err(HhfError::InvalidArgument(
            "compare needs at least two variants".into(),
        ));
    }

    let mut rows: Vec<CompareRow> = Vec::new();
    let mut any_ok = false;
    for variant in &variants {
        for &seed in &cfg.seeds {
            let cell_dir = args
                .out_dir
                .join(variant.name())
                .join(format!("seed_{seed}"));
            match experiment::run_single(&cfg, *variant, seed) {
                Ok(run) => {
                    write_run_artifacts(&cell_dir, &run)?;
                    any_ok = true;
                    rows.push(CompareRow {
                        variant: variant.name(),
                        seed,
                        report: Some(run.report),
                    });
                }
                Err(HhfError::Divergence { epoch, step }) => {
                    eprintln!(
                        "warning: {} seed {seed} diverged at epoch {epoch}, step {step}",
                        variant.name()
                    );
                    rows.push(CompareRow {
                        variant: variant.name(),
                        seed,
                        report: None,
                    });
                }
                Err(other) => return Err(other),
            }
        }
    }

    let mut csv = String::from("variant,seed,map_at_n,hpe,eta_global,eta_local,status\n");
    for row in &rows {
        match &row.report {
            Some(r) => csv.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},ok\n",
                row.variant, row.seed, r.map_at_n, r.hpe, r.eta_global, r.eta_local
            )),
            None => csv.push_str(&format!(
                "{},{},,,,,failed\n",
                row.variant, row.seed
            )),
        }
    }
    for variant in &variants {
        let ok_reports: Vec<&EvalReport> = rows
            .iter()
            .filter(|r| r.variant == variant.name())
            .filter_map(|r| r.report.as_ref())
            .collect();
        if ok_reports.is_empty() {
            csv.push_str(&format!("{},median,,,,,failed\n", variant.name()));
            continue;
        }
        let maps: Vec<f64> = ok_reports.iter().map(|r| r.map_at_n).collect();
        let hpes: Vec<f64> = ok_reports.iter().map(|r| r.hpe).collect();
        let globals: Vec<f64> = ok_reports.iter().map(|r| r.eta_global).collect();
        let locals: Vec<f64> = ok_reports.iter().map(|r| r.eta_local).collect();
        csv.push_str(&format!(
            "{},median,{:.17e},{:.17e},{:.17e},{:.17e},ok\n",
            variant.name(),
            median(&maps),
            median(&hpes),
            median(&globals),
            median(&locals)
        ));
        println!(
            "{}: median mAP@{} {:.4}, HPE {:.4}, eta_global {:.4}, eta_local {:.4}",
            variant.name(),
            cfg.eval.map_n,
            median(&maps),
            median(&hpes),
            median(&globals),
            median(&locals)
        );
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| HhfError::io(parent.display().to_string(), e))?;
        }
    }
    let mut file = std::fs::File::create(&args.out)
        .map_err(|e| HhfError::io(args.out.display().to_string(), e))?;
    file.write_all(csv.as_bytes())
        .map_err(|e| HhfError::io(args.out.display().to_string(), e))?;

    if any_ok {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_DIVERGED)
    }
}
