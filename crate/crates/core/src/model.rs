//! Domain types shared by all modules, the prediction equation, the labeling
//! rule, and the raw helpful-ratio statistic.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A rater's judgment of a note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RatingValue {
    Helpful,
    SomewhatHelpful,
    NotHelpful,
}

impl RatingValue {
    /// Matrix encoding: helpful 1, not helpful 0, somewhat helpful 0.5.
    pub fn numeric<T: Scalar>(self) -> T {
        match self {
            RatingValue::Helpful => T::one(),
            RatingValue::SomewhatHelpful => T::from_config(0.5),
            RatingValue::NotHelpful => T::zero(),
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "HELPFUL" => Some(RatingValue::Helpful),
            "SOMEWHAT_HELPFUL" => Some(RatingValue::SomewhatHelpful),
            "NOT_HELPFUL" => Some(RatingValue::NotHelpful),
            _ => None,
        }
    }

    pub fn as_token(self) -> &'static str {
        match self {
            RatingValue::Helpful => "HELPFUL",
            RatingValue::SomewhatHelpful => "SOMEWHAT_HELPFUL",
            RatingValue::NotHelpful => "NOT_HELPFUL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rating {
    pub rater_id: String,
    pub note_id: String,
    pub value: RatingValue,
    /// Milliseconds since epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Misleading,
    NotMisleading,
    Unknown,
}

impl Classification {
    pub fn from_token(token: &str) -> Self {
        match token {
            "MISINFORMED_OR_POTENTIALLY_MISLEADING" => Classification::Misleading,
            "NOT_MISLEADING" => Classification::NotMisleading,
            _ => Classification::Unknown,
        }
    }

    pub fn as_token(self) -> &'static str {
        match self {
            Classification::Misleading => "MISINFORMED_OR_POTENTIALLY_MISLEADING",
            Classification::NotMisleading => "NOT_MISLEADING",
            Classification::Unknown => "UNKNOWN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Note {
    pub note_id: String,
    pub author_id: String,
    pub tweet_id: String,
    pub created_at: u64,
    pub classification: Classification,
    pub summary: String,
}

/// One observed cell of the sparse rater×note matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixEntry<T> {
    pub row: usize,
    pub col: usize,
    pub value: T,
    pub created_at: u64,
}

/// Sparse rater×note matrix with index maps and per-row/column counts.
/// Row/column ordinals are assigned by first appearance in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix<T> {
    pub rater_ids: Vec<String>,
    pub note_ids: Vec<String>,
    pub rater_index: HashMap<String, usize>,
    pub note_index: HashMap<String, usize>,
    pub entries: Vec<MatrixEntry<T>>,
    pub ratings_per_rater: Vec<usize>,
    pub ratings_per_note: Vec<usize>,
}

impl<T: Scalar> RatingsMatrix<T> {
    pub fn new() -> Self {
        RatingsMatrix {
            rater_ids: Vec::new(),
            note_ids: Vec::new(),
            rater_index: HashMap::new(),
            note_index: HashMap::new(),
            entries: Vec::new(),
            ratings_per_rater: Vec::new(),
            ratings_per_note: Vec::new(),
        }
    }

    /// Build from (rater_id, note_id, value, created_at) tuples, assigning
    /// ordinals by first appearance. Input must be duplicate-free.
    pub fn from_observations<'a, I>(observations: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, T, u64)>,
    {
        let mut m = Self::new();
        for (rater_id, note_id, value, created_at) in observations {
            let row = match m.rater_index.get(rater_id) {
                Some(&r) => r,
                None => {
                    let r = m.rater_ids.len();
                    m.rater_ids.push(rater_id.to_string());
                    m.rater_index.insert(rater_id.to_string(), r);
                    m.ratings_per_rater.push(0);
                    r
                }
            };
            let col = match m.note_index.get(note_id) {
                Some(&c) => c,
                None => {
                    let c = m.note_ids.len();
                    m.note_ids.push(note_id.to_string());
                    m.note_index.insert(note_id.to_string(), c);
                    m.ratings_per_note.push(0);
                    c
                }
            };
            m.ratings_per_rater[row] += 1;
            m.ratings_per_note[col] += 1;
            m.entries.push(MatrixEntry {
                row,
                col,
                value,
                created_at,
            });
        }
        m
    }

    pub fn n_raters(&self) -> usize {
        self.rater_ids.len()
    }

    pub fn n_notes(&self) -> usize {
        self.note_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: Scalar> Default for RatingsMatrix<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Fitted factorization parameters: global intercept, per-rater and per-note
/// intercepts, and latent factors (`factor_dimension` values per entity,
/// stored entity-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    pub mu: T,
    pub rater_intercepts: Vec<T>,
    pub note_intercepts: Vec<T>,
    pub rater_factors: Vec<T>,
    pub note_factors: Vec<T>,
    pub factor_dimension: usize,
    pub rater_ids: Vec<String>,
    pub note_ids: Vec<String>,
    pub rater_index: HashMap<String, usize>,
    pub note_index: HashMap<String, usize>,
}

impl<T: Scalar> ModelParameters<T> {
    /// Zero-valued parameters shaped to a matrix.
    pub fn zeros(matrix: &RatingsMatrix<T>, factor_dimension: usize) -> Self {
        let n_u = matrix.n_raters();
        let n_n = matrix.n_notes();
        ModelParameters {
            mu: T::zero(),
            rater_intercepts: vec![T::zero(); n_u],
            note_intercepts: vec![T::zero(); n_n],
            rater_factors: vec![T::zero(); n_u * factor_dimension],
            note_factors: vec![T::zero(); n_n * factor_dimension],
            factor_dimension,
            rater_ids: matrix.rater_ids.clone(),
            note_ids: matrix.note_ids.clone(),
            rater_index: matrix.rater_index.clone(),
            note_index: matrix.note_index.clone(),
        }
    }

    pub fn rater_factor(&self, row: usize) -> &[T] {
        let d = self.factor_dimension;
        &self.rater_factors[row * d..(row + 1) * d]
    }

    pub fn note_factor(&self, col: usize) -> &[T] {
        let d = self.factor_dimension;
        &self.note_factors[col * d..(col + 1) * d]
    }

    /// Prediction at known ordinals: mu + i_u + i_n + f_u . f_n.
    pub fn predict_at(&self, row: usize, col: usize) -> T {
        let d = self.factor_dimension;
        let mut dot = T::zero();
        for k in 0..d {
            dot = dot + self.rater_factors[row * d + k] * self.note_factors[col * d + k];
        }
        self.mu + self.rater_intercepts[row] + self.note_intercepts[col] + dot
    }
}

/// Predicted rating for a (rater, note) pair.
pub fn predict<T: Scalar>(params: &ModelParameters<T>, rater_id: &str, note_id: &str) -> Result<T> {
    let row = *params
        .rater_index
        .get(rater_id)
        .ok_or_else(|| Error::UnknownRater(rater_id.to_string()))?;
    let col = *params
        .note_index
        .get(note_id)
        .ok_or_else(|| Error::UnknownNote(note_id.to_string()))?;
    Ok(params.predict_at(row, col))
}

/// Final status label. Ordering reflects the intercept bands:
/// not helpful < needs more ratings < helpful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NoteLabel {
    CurrentlyRatedNotHelpful,
    NeedsMoreRatings,
    CurrentlyRatedHelpful,
}

impl NoteLabel {
    pub fn as_token(self) -> &'static str {
        match self {
            NoteLabel::CurrentlyRatedHelpful => "CURRENTLY_RATED_HELPFUL",
            NoteLabel::CurrentlyRatedNotHelpful => "CURRENTLY_RATED_NOT_HELPFUL",
            NoteLabel::NeedsMoreRatings => "NEEDS_MORE_RATINGS",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "CURRENTLY_RATED_HELPFUL" => Some(NoteLabel::CurrentlyRatedHelpful),
            "CURRENTLY_RATED_NOT_HELPFUL" => Some(NoteLabel::CurrentlyRatedNotHelpful),
            "NEEDS_MORE_RATINGS" => Some(NoteLabel::NeedsMoreRatings),
            _ => None,
        }
    }
}

/// A scored note: intercept, factor, label, and rating stats.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteScore<T> {
    pub note_id: String,
    pub intercept: T,
    pub factor: T,
    pub label: NoteLabel,
    pub n_ratings: usize,
    pub helpful_ratio: f64,
}

/// All tunables, with the deployed defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Regularization on intercept terms (mu, i_u, i_n).
    pub lambda_i: f64,
    /// Regularization on factor terms.
    pub lambda_f: f64,
    /// A note is helpful when its intercept is at least this.
    pub helpful_threshold: f64,
    /// A note is not helpful when its intercept is at most this.
    pub not_helpful_threshold: f64,
    pub min_ratings_per_note: usize,
    pub min_ratings_per_rater: usize,
    pub rater_helpfulness_min: f64,
    /// Authored helpful notes must be at least this many times the
    /// authored not-helpful notes.
    pub author_ratio_min: f64,
    pub author_mean_intercept_min: f64,
    /// Valid-rating recency window relative to note creation.
    pub valid_rating_window_ms: u64,
    /// Valid ratings must be among the first this-many ratings of a note.
    pub valid_rating_max_ordinal: usize,
    /// Alternative valid-rating rule: any rating among a note's first
    /// `min_ratings_per_note` ratings, regardless of the 48h window.
    pub valid_rating_prepublication_rule: bool,
    /// Iterate the density filter to a fixed point instead of one pass.
    pub density_filter_fixed_point: bool,
    pub factor_dimension: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub convergence_tolerance: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            lambda_i: 0.15,
            lambda_f: 0.03,
            helpful_threshold: 0.40,
            not_helpful_threshold: -0.08,
            min_ratings_per_note: 5,
            min_ratings_per_rater: 10,
            rater_helpfulness_min: 0.66,
            author_ratio_min: 5.0,
            author_mean_intercept_min: 0.05,
            valid_rating_window_ms: 48 * 60 * 60 * 1000,
            valid_rating_max_ordinal: 5,
            valid_rating_prepublication_rule: false,
            density_filter_fixed_point: false,
            factor_dimension: 1,
            learning_rate: 0.05,
            max_epochs: 2000,
            convergence_tolerance: 1e-7,
            init_scale: 0.05,
            seed: 0,
        }
    }
}

/// Three-band labeling rule on the note intercept. Both boundaries are
/// inclusive.
pub fn label_note<T: Scalar>(intercept: T, config: &ScoringConfig) -> Result<NoteLabel> {
    if !intercept.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite intercept {intercept}"
        )));
    }
    if intercept >= T::from_config(config.helpful_threshold) {
        Ok(NoteLabel::CurrentlyRatedHelpful)
    } else if intercept <= T::from_config(config.not_helpful_threshold) {
        Ok(NoteLabel::CurrentlyRatedNotHelpful)
    } else {
        Ok(NoteLabel::NeedsMoreRatings)
    }
}

/// Fraction of ratings that are exactly Helpful (somewhat-helpful counts in
/// the denominator only).
pub fn helpful_ratio(ratings: &[RatingValue]) -> Result<f64> {
    if ratings.is_empty() {
        return Err(Error::EmptyInput("helpful_ratio over no ratings"));
    }
    let helpful = ratings
        .iter()
        .filter(|v| **v == RatingValue::Helpful)
        .count();
    Ok(helpful as f64 / ratings.len() as f64)
}
