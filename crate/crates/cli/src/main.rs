//! Batch driver: score, synth, abtest, compare. Every successful run writes
//! a manifest (command, config, input digests, seed, version, outputs) so it
//! can be replayed byte-for-byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use bridgescore::helpfulness::write_rater_stats_tsv;
use bridgescore::ingest::{parse_notes, parse_ratings, write_notes_tsv, write_ratings_tsv};
use bridgescore::model::NoteLabel;
use bridgescore::pipeline::{
    compare_scorers, score_notes, supermajority_labels, write_comparison_tsv,
    write_diagnostics_json, write_note_scores_tsv,
};
use bridgescore::synth::{generate_community, write_ground_truth_tsv, SynthConfig};
use bridgescore::{Error, Run, ScoringConfig};

const SEED_ENV: &str = "BRIDGESCORE_SEED";

#[derive(Parser)]
#[command(name = "bridgescore", version, about = "Bridging-based note scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score notes: two-pass matrix factorization with rater filtering.
    Score(ScoreArgs),
    /// Generate a synthetic two-cluster rating community.
    Synth(SynthArgs),
    /// Two-proportion engagement comparison from a counts TSV.
    Abtest(AbtestArgs),
    /// Score notes and compare against the supermajority baseline.
    Compare(ScoreArgs),
}

#[derive(Args)]
struct ScoringFlags {
    /// Intercept regularization weight.
    #[arg(long, default_value_t = 0.15)]
    lambda_i: f64,
    /// Factor regularization weight.
    #[arg(long, default_value_t = 0.03)]
    lambda_f: f64,
    /// Intercept at or above which a note is rated helpful.
    #[arg(long, default_value_t = 0.40)]
    helpful_threshold: f64,
    /// Intercept at or below which a note is rated not helpful.
    #[arg(long, default_value_t = -0.08)]
    not_helpful_threshold: f64,
    /// Minimum ratings for a note to be scored.
    #[arg(long, default_value_t = 5)]
    min_note_ratings: usize,
    /// Minimum ratings for a rater to enter the matrix.
    #[arg(long, default_value_t = 10)]
    min_rater_ratings: usize,
    /// Minimum rater helpfulness for the final pass.
    #[arg(long, default_value_t = 0.66)]
    rater_helpfulness_min: f64,
    /// Factor initialization seed (overridden by BRIDGESCORE_SEED).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gradient descent learning rate.
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Epoch cap.
    #[arg(long, default_value_t = 2000)]
    max_epochs: usize,
    /// Relative loss improvement treated as converged.
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
}

impl ScoringFlags {
    fn to_config(&self) -> Result<ScoringConfig, Error> {
        Ok(ScoringConfig {
            lambda_i: self.lambda_i,
            lambda_f: self.lambda_f,
            helpful_threshold: self.helpful_threshold,
            not_helpful_threshold: self.not_helpful_threshold,
            min_ratings_per_note: self.min_note_ratings,
            min_ratings_per_rater: self.min_rater_ratings,
            rater_helpfulness_min: self.rater_helpfulness_min,
            seed: seed_override(self.seed)?,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            convergence_tolerance: self.tolerance,
            ..ScoringConfig::default()
        })
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Notes TSV path.
    #[arg(long)]
    notes: PathBuf,
    /// Ratings TSV path.
    #[arg(long)]
    ratings: PathBuf,
    #[command(flatten)]
    flags: ScoringFlags,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    raters_per_cluster: usize,
    #[arg(long, default_value_t = 50)]
    partisan_notes_per_cluster: usize,
    #[arg(long, default_value_t = 50)]
    bridging_notes: usize,
    #[arg(long, default_value_t = 50)]
    low_quality_notes: usize,
    /// Minimum ratings drawn per rater.
    #[arg(long, default_value_t = 15)]
    ratings_min: usize,
    /// Maximum ratings drawn per rater.
    #[arg(long, default_value_t = 40)]
    ratings_max: usize,
    /// Generator seed (overridden by BRIDGESCORE_SEED).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AbtestArgs {
    /// Input TSV: label, test/control counts and impressions.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    tool_version: &'static str,
    seed: u64,
    config: serde_json::Value,
    /// Input path -> SHA-256 of contents.
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

fn seed_override(flag: u64) -> Result<u64, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::InvalidInput(format!("{SEED_ENV}: `{v}` is not a seed"))),
        Err(_) => Ok(flag),
    }
}

fn digest(path: &Path) -> Result<String, Error> {
    let mut file =
        File::open(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), Error> {
    let mut out = create(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut out, manifest)
        .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
    writeln!(out)?;
    Ok(())
}

fn out_path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn cmd_score(args: &ScoreArgs, compare: bool) -> Result<(), Error> {
    let config = args.flags.to_config()?;
    let notes = parse_notes(open(&args.notes)?)?;
    let ratings = parse_ratings(open(&args.ratings)?, args.ratings.display().to_string())?;
    let run: Run = score_notes(&notes, &ratings, &config)?;

    let dir = &args.out_dir;
    let mut outputs = Vec::new();
    if compare {
        let baseline: BTreeMap<String, NoteLabel> = supermajority_labels(&ratings, &config)
            .into_iter()
            .filter(|(id, _)| run.final_scores.contains_key(id))
            .collect();
        let report = compare_scorers(&run, &baseline)?;
        write_comparison_tsv(&report, create(dir, "comparison.tsv")?)?;
        outputs.push(out_path(dir, "comparison.tsv"));
    } else {
        write_note_scores_tsv(&run.final_scores, create(dir, "note-scores.tsv")?)?;
        write_rater_stats_tsv(&run.rater_records, create(dir, "rater-stats.tsv")?)?;
        write_diagnostics_json(&run.diagnostics, create(dir, "diagnostics.json")?)?;
        outputs.extend([
            out_path(dir, "note-scores.tsv"),
            out_path(dir, "rater-stats.tsv"),
            out_path(dir, "diagnostics.json"),
        ]);
    }

    let mut inputs = BTreeMap::new();
    inputs.insert(args.notes.display().to_string(), digest(&args.notes)?);
    inputs.insert(args.ratings.display().to_string(), digest(&args.ratings)?);
    write_manifest(
        dir,
        &RunManifest {
            command: if compare { "compare" } else { "score" }.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config: serde_json::to_value(&config)
                .map_err(|e| Error::InvalidInput(e.to_string()))?,
            inputs,
            outputs,
        },
    )
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Error> {
    let config = SynthConfig {
        n_raters_per_cluster: args.raters_per_cluster,
        n_partisan_notes_per_cluster: args.partisan_notes_per_cluster,
        n_bridging_notes: args.bridging_notes,
        n_low_quality_notes: args.low_quality_notes,
        ratings_per_rater: (args.ratings_min, args.ratings_max),
        seed: seed_override(args.seed)?,
        ..SynthConfig::default()
    };
    let (notes, ratings, truth) = generate_community(&config)?;

    let dir = &args.out_dir;
    write_notes_tsv(&notes, create(dir, "notes.tsv")?)?;
    write_ratings_tsv(&ratings, create(dir, "ratings.tsv")?)?;
    write_ground_truth_tsv(&truth, create(dir, "ground-truth.tsv")?)?;
    write_manifest(
        dir,
        &RunManifest {
            command: "synth".to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config: serde_json::json!({
                "n_raters_per_cluster": config.n_raters_per_cluster,
                "n_partisan_notes_per_cluster": config.n_partisan_notes_per_cluster,
                "n_bridging_notes": config.n_bridging_notes,
                "n_low_quality_notes": config.n_low_quality_notes,
                "ratings_per_rater": [config.ratings_per_rater.0, config.ratings_per_rater.1],
                "in_cluster_helpful_prob": config.in_cluster_helpful_prob,
                "cross_cluster_helpful_prob_partisan": config.cross_cluster_helpful_prob_partisan,
                "helpful_prob_bridging": config.helpful_prob_bridging,
                "helpful_prob_low_quality": config.helpful_prob_low_quality,
                "somewhat_prob": config.somewhat_prob,
                "seed": config.seed,
            }),
            inputs: BTreeMap::new(),
            outputs: vec![
                out_path(dir, "notes.tsv"),
                out_path(dir, "ratings.tsv"),
                out_path(dir, "ground-truth.tsv"),
            ],
        },
    )
}

fn cmd_abtest(args: &AbtestArgs) -> Result<(), Error> {
    let rows = bridgescore::abstats::parse_ab_input(open(&args.input)?)?;
    let mut reports = Vec::with_capacity(rows.len());
    for row in rows {
        let delta: bridgescore::Delta =
            bridgescore::abstats::engagement_delta(row.test, row.control)?;
        reports.push((row.label, delta));
    }
    let dir = &args.out_dir;
    bridgescore::abstats::write_ab_report_tsv(&reports, create(dir, "ab-report.tsv")?)?;
    let mut inputs = BTreeMap::new();
    inputs.insert(args.input.display().to_string(), digest(&args.input)?);
    write_manifest(
        dir,
        &RunManifest {
            command: "abtest".to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: 0,
            config: serde_json::json!({}),
            inputs,
            outputs: vec![out_path(dir, "ab-report.tsv")],
        },
    )
}

/// 2: bad input, schema, or infeasible config. 3: pipeline/training failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Pipeline { .. } | Error::Divergence(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Score(args) => cmd_score(args, false),
        Command::Compare(args) => cmd_score(args, true),
        Command::Synth(args) => cmd_synth(args),
        Command::Abtest(args) => cmd_abtest(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
