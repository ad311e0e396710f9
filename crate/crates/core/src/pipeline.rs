//! The four-step scoring pipeline and the supermajority baseline.
//!
//! density filter -> pass-1 fit -> provisional labels -> helpfulness
//! records -> user filter -> drop excluded users -> re-apply note minimum ->
//! pass-2 fit -> final labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::helpfulness::{
    author_stats, filter_users, merge_records, rater_helpfulness, valid_ratings, RaterRecord,
};
use crate::ingest::{apply_density_filter, NoteSet, RatingSet};
use crate::model::{
    helpful_ratio, label_note, ModelParameters, NoteLabel, NoteScore, RatingValue, RatingsMatrix,
    ScoringConfig,
};
use crate::scalar::Scalar;
use crate::trainer::{train, TrainReport};

/// Raw helpful-vote rate at or above this labels a note helpful under the
/// supermajority baseline.
pub const SUPERMAJORITY_THRESHOLD: f64 = 0.84;

/// Entity counts after a pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageCounts {
    pub stage: String,
    pub notes: usize,
    pub raters: usize,
    pub ratings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub stage_counts: Vec<StageCounts>,
    pub pass1_loss_history: Vec<f64>,
    pub pass2_loss_history: Vec<f64>,
    pub pass1_rmse: f64,
    pub pass2_rmse: f64,
    pub seed: u64,
    pub config: ScoringConfig,
}

/// Everything a scoring run produced, enough to export and audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRun<T> {
    pub config: ScoringConfig,
    pub pass1_params: ModelParameters<T>,
    pub pass1_report: TrainReport<T>,
    pub provisional_labels: BTreeMap<String, NoteScore<T>>,
    pub rater_records: BTreeMap<String, RaterRecord>,
    pub included_raters: BTreeSet<String>,
    pub pass2_params: ModelParameters<T>,
    pub pass2_report: TrainReport<T>,
    pub final_scores: BTreeMap<String, NoteScore<T>>,
    pub diagnostics: Diagnostics,
}

fn count_stage<T: Scalar>(stage: &str, m: &RatingsMatrix<T>) -> StageCounts {
    StageCounts {
        stage: stage.to_string(),
        notes: m.n_notes(),
        raters: m.n_raters(),
        ratings: m.entries.len(),
    }
}

/// Score every note in a matrix against fitted parameters.
fn score_matrix<T: Scalar>(
    params: &ModelParameters<T>,
    matrix: &RatingsMatrix<T>,
    config: &ScoringConfig,
) -> Result<BTreeMap<String, NoteScore<T>>> {
    let one = T::one();
    let mut helpful_counts = vec![0usize; matrix.n_notes()];
    for e in &matrix.entries {
        if e.value == one {
            helpful_counts[e.col] += 1;
        }
    }
    let mut scores = BTreeMap::new();
    for (col, note_id) in matrix.note_ids.iter().enumerate() {
        let p = params.note_index[note_id];
        let intercept = params.note_intercepts[p];
        let factor = params.note_factor(p)[0];
        let n_ratings = matrix.ratings_per_note[col];
        scores.insert(
            note_id.clone(),
            NoteScore {
                note_id: note_id.clone(),
                intercept,
                factor,
                label: label_note(intercept, config)?,
                n_ratings,
                helpful_ratio: helpful_counts[col] as f64 / n_ratings as f64,
            },
        );
    }
    Ok(scores)
}

/// Keep only entries from included raters, then drop notes that fall below
/// the note minimum, rebuilding ordinals by first appearance.
fn filter_matrix<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    included: &BTreeSet<String>,
    config: &ScoringConfig,
) -> RatingsMatrix<T> {
    let keep_row: Vec<bool> = matrix
        .rater_ids
        .iter()
        .map(|id| included.contains(id))
        .collect();
    let mut note_counts = vec![0usize; matrix.n_notes()];
    for e in &matrix.entries {
        if keep_row[e.row] {
            note_counts[e.col] += 1;
        }
    }
    RatingsMatrix::from_observations(matrix.entries.iter().filter_map(|e| {
        if keep_row[e.row] && note_counts[e.col] >= config.min_ratings_per_note {
            Some((
                matrix.rater_ids[e.row].as_str(),
                matrix.note_ids[e.col].as_str(),
                e.value,
                e.created_at,
            ))
        } else {
            None
        }
    }))
}

fn stage_err(stage: &'static str, e: Error) -> Error {
    match e {
        Error::EmptyInput(_) => Error::Pipeline {
            stage,
            message: "matrix is empty".to_string(),
        },
        other => other,
    }
}

/// Run the full two-pass scoring algorithm.
pub fn score_notes<T: Scalar>(
    notes: &NoteSet,
    ratings: &RatingSet,
    config: &ScoringConfig,
) -> Result<ScoringRun<T>> {
    let mut stage_counts = Vec::new();

    let raw_raters: BTreeSet<&str> = ratings
        .ratings
        .iter()
        .map(|r| r.rater_id.as_str())
        .collect();
    let raw_notes: BTreeSet<&str> = ratings.ratings.iter().map(|r| r.note_id.as_str()).collect();
    stage_counts.push(StageCounts {
        stage: "raw".to_string(),
        notes: raw_notes.len(),
        raters: raw_raters.len(),
        ratings: ratings.len(),
    });

    let matrix1: RatingsMatrix<T> = apply_density_filter(ratings, config);
    stage_counts.push(count_stage("density_filter", &matrix1));
    if matrix1.is_empty() {
        return Err(Error::Pipeline {
            stage: "density_filter",
            message: "no ratings survive the density filter".to_string(),
        });
    }

    let (pass1_params, pass1_report) =
        train(&matrix1, config).map_err(|e| stage_err("pass1_train", e))?;
    let provisional_labels = score_matrix(&pass1_params, &matrix1, config)?;

    let note_created_at: HashMap<String, u64> = notes
        .notes
        .iter()
        .map(|n| (n.note_id.clone(), n.created_at))
        .collect();
    let valid = valid_ratings(ratings, &provisional_labels, &note_created_at, config)?;
    stage_counts.push(StageCounts {
        stage: "valid_ratings".to_string(),
        notes: valid
            .ratings
            .iter()
            .map(|r| r.note_id.as_str())
            .collect::<BTreeSet<_>>()
            .len(),
        raters: valid
            .ratings
            .iter()
            .map(|r| r.rater_id.as_str())
            .collect::<BTreeSet<_>>()
            .len(),
        ratings: valid.len(),
    });

    let rater_records = rater_helpfulness(&valid, &provisional_labels);
    let author_records = author_stats(notes, &provisional_labels);
    let mut rater_records = merge_records(rater_records, author_records);
    let included_raters = filter_users(&mut rater_records, config);

    let matrix2 = filter_matrix(&matrix1, &included_raters, config);
    stage_counts.push(count_stage("user_filter", &matrix2));
    if matrix2.is_empty() {
        return Err(Error::Pipeline {
            stage: "pass2_train",
            message: "no ratings survive the user filter".to_string(),
        });
    }

    let (pass2_params, pass2_report) =
        train(&matrix2, config).map_err(|e| stage_err("pass2_train", e))?;
    let final_scores = score_matrix(&pass2_params, &matrix2, config)?;
    stage_counts.push(StageCounts {
        stage: "final".to_string(),
        notes: final_scores.len(),
        raters: matrix2.n_raters(),
        ratings: matrix2.entries.len(),
    });

    let diagnostics = Diagnostics {
        stage_counts,
        pass1_loss_history: pass1_report
            .loss_history
            .iter()
            .map(|l| l.as_f64())
            .collect(),
        pass2_loss_history: pass2_report
            .loss_history
            .iter()
            .map(|l| l.as_f64())
            .collect(),
        pass1_rmse: pass1_report.rmse_train.as_f64(),
        pass2_rmse: pass2_report.rmse_train.as_f64(),
        seed: config.seed,
        config: config.clone(),
    };

    Ok(ScoringRun {
        config: config.clone(),
        pass1_params,
        pass1_report,
        provisional_labels,
        rater_records,
        included_raters,
        pass2_params,
        pass2_report,
        final_scores,
        diagnostics,
    })
}

/// Supermajority baseline: helpful when the raw helpful-vote rate reaches
/// the threshold with at least the note minimum of ratings; the baseline
/// defines no not-helpful tier.
pub fn supermajority_label(ratings: &[RatingValue], config: &ScoringConfig) -> NoteLabel {
    if ratings.len() < config.min_ratings_per_note {
        return NoteLabel::NeedsMoreRatings;
    }
    let ratio = helpful_ratio(ratings).expect("non-empty by the minimum check");
    if ratio >= SUPERMAJORITY_THRESHOLD {
        NoteLabel::CurrentlyRatedHelpful
    } else {
        NoteLabel::NeedsMoreRatings
    }
}

/// Baseline labels for every note in a rating set.
pub fn supermajority_labels(
    ratings: &RatingSet,
    config: &ScoringConfig,
) -> BTreeMap<String, NoteLabel> {
    let mut by_note: BTreeMap<String, Vec<RatingValue>> = BTreeMap::new();
    for r in &ratings.ratings {
        by_note.entry(r.note_id.clone()).or_default().push(r.value);
    }
    by_note
        .into_iter()
        .map(|(id, vals)| {
            let label = supermajority_label(&vals, config);
            (id, label)
        })
        .collect()
}

/// MF-vs-baseline comparison over an identical note universe.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// (note_id, mf label, baseline label), sorted by note id.
    pub pairs: Vec<(String, NoteLabel, NoteLabel)>,
    /// Rows: MF label; columns: baseline label; order
    /// [NotHelpful, NeedsMoreRatings, Helpful].
    pub confusion: [[usize; 3]; 3],
    pub disagreements: Vec<String>,
}

fn label_ordinal(label: NoteLabel) -> usize {
    match label {
        NoteLabel::CurrentlyRatedNotHelpful => 0,
        NoteLabel::NeedsMoreRatings => 1,
        NoteLabel::CurrentlyRatedHelpful => 2,
    }
}

pub fn compare_scorers<T: Scalar>(
    run: &ScoringRun<T>,
    baseline: &BTreeMap<String, NoteLabel>,
) -> Result<ComparisonReport> {
    let mf_ids: BTreeSet<&String> = run.final_scores.keys().collect();
    let base_ids: BTreeSet<&String> = baseline.keys().collect();
    if mf_ids != base_ids {
        return Err(Error::InvalidInput(format!(
            "note universes differ: {} scored vs {} baseline notes",
            mf_ids.len(),
            base_ids.len()
        )));
    }
    let mut pairs = Vec::with_capacity(baseline.len());
    let mut confusion = [[0usize; 3]; 3];
    let mut disagreements = Vec::new();
    for (id, score) in &run.final_scores {
        let b = baseline[id];
        confusion[label_ordinal(score.label)][label_ordinal(b)] += 1;
        if score.label != b {
            disagreements.push(id.clone());
        }
        pairs.push((id.clone(), score.label, b));
    }
    Ok(ComparisonReport {
        pairs,
        confusion,
        disagreements,
    })
}

/// Note-scores TSV export.
pub fn write_note_scores_tsv<T: Scalar, W: Write>(
    scores: &BTreeMap<String, NoteScore<T>>,
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "noteId\tintercept\tfactor\tlabel\tnRatings\thelpfulRatio"
    )?;
    for s in scores.values() {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{:.6}",
            s.note_id,
            s.intercept.as_f64(),
            s.factor.as_f64(),
            s.label.as_token(),
            s.n_ratings,
            s.helpful_ratio
        )?;
    }
    Ok(())
}

pub fn write_comparison_tsv<W: Write>(report: &ComparisonReport, mut out: W) -> Result<()> {
    writeln!(out, "noteId\tmfLabel\tbaselineLabel\tagrees")?;
    for (id, mf, base) in &report.pairs {
        writeln!(
            out,
            "{id}\t{}\t{}\t{}",
            mf.as_token(),
            base.as_token(),
            mf == base
        )?;
    }
    Ok(())
}

pub fn write_diagnostics_json<W: Write>(diag: &Diagnostics, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, diag)
        .map_err(|e| Error::InvalidInput(format!("diagnostics serialization: {e}")))
}
