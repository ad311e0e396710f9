//! TSV ingestion for notes and ratings, plus the pre-factorization density
//! filter.
//!
//! Layout follows the public data release: tab-separated, header row
//! required, columns matched by name so extra columns are ignored.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{Classification, Note, Rating, RatingValue, RatingsMatrix, ScoringConfig};
use crate::scalar::Scalar;

pub const RATINGS_COLUMNS: [&str; 4] = [
    "noteId",
    "raterParticipantId",
    "createdAtMillis",
    "helpfulnessLevel",
];

pub const NOTES_COLUMNS: [&str; 6] = [
    "noteId",
    "noteAuthorParticipantId",
    "tweetId",
    "createdAtMillis",
    "classification",
    "summary",
];

/// Ratings with at most one entry per (rater, note) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingSet {
    pub ratings: Vec<Rating>,
    pub source: String,
}

impl RatingSet {
    /// Build from pre-validated ratings, enforcing pair uniqueness.
    pub fn new(ratings: Vec<Rating>, source: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ratings.len());
        for (i, r) in ratings.iter().enumerate() {
            if !seen.insert((r.rater_id.as_str(), r.note_id.as_str())) {
                return Err(Error::Duplicate {
                    line: i + 1,
                    what: format!("rating pair ({}, {})", r.rater_id, r.note_id),
                });
            }
        }
        Ok(RatingSet {
            ratings,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoteSet {
    pub notes: Vec<Note>,
}

impl NoteSet {
    pub fn new(notes: Vec<Note>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(notes.len());
        for (i, n) in notes.iter().enumerate() {
            if !seen.insert(n.note_id.as_str()) {
                return Err(Error::Duplicate {
                    line: i + 1,
                    what: format!("note id {}", n.note_id),
                });
            }
        }
        Ok(NoteSet { notes })
    }
}

/// Column positions resolved against a header row.
fn resolve_header(line: &str, required: &[&str]) -> Result<HashMap<String, usize>> {
    let positions: HashMap<String, usize> = line
        .split('\t')
        .enumerate()
        .map(|(i, name)| (name.trim_end_matches('\r').to_string(), i))
        .collect();
    for col in required {
        if !positions.contains_key(*col) {
            return Err(Error::MissingColumn((*col).to_string()));
        }
    }
    Ok(positions)
}

fn field<'a>(
    fields: &[&'a str],
    positions: &HashMap<String, usize>,
    col: &str,
    line: usize,
) -> Result<&'a str> {
    let idx = positions[col];
    fields.get(idx).copied().ok_or_else(|| Error::Row {
        line,
        message: format!("row has too few fields for column `{col}`"),
    })
}

fn parse_millis(token: &str, line: usize) -> Result<u64> {
    token.parse::<u64>().map_err(|_| Error::Row {
        line,
        message: format!("unparseable timestamp `{token}`"),
    })
}

/// Parse a ratings TSV stream. Line numbers in errors are 1-based and
/// include the header.
pub fn parse_ratings<R: BufRead>(input: R, source: impl Into<String>) -> Result<RatingSet> {
    let source = source.into();
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(Error::EmptyInput("ratings stream has no header"))??;
    let positions = resolve_header(&header, &RATINGS_COLUMNS)?;

    let mut ratings = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let note_id = field(&fields, &positions, "noteId", line_no)?.to_string();
        let rater_id = field(&fields, &positions, "raterParticipantId", line_no)?.to_string();
        let created_at = parse_millis(
            field(&fields, &positions, "createdAtMillis", line_no)?,
            line_no,
        )?;
        let token = field(&fields, &positions, "helpfulnessLevel", line_no)?;
        let value = RatingValue::from_token(token).ok_or_else(|| Error::Row {
            line: line_no,
            message: format!("unknown helpfulness token `{token}`"),
        })?;
        if !seen.insert((rater_id.clone(), note_id.clone())) {
            return Err(Error::Duplicate {
                line: line_no,
                what: format!("rating pair ({rater_id}, {note_id})"),
            });
        }
        ratings.push(Rating {
            rater_id,
            note_id,
            value,
            created_at,
        });
    }
    Ok(RatingSet { ratings, source })
}

/// Parse a notes TSV stream.
pub fn parse_notes<R: BufRead>(input: R) -> Result<NoteSet> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(Error::EmptyInput("notes stream has no header"))??;
    let positions = resolve_header(&header, &NOTES_COLUMNS)?;

    let mut notes = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let note_id = field(&fields, &positions, "noteId", line_no)?.to_string();
        let author_id = field(&fields, &positions, "noteAuthorParticipantId", line_no)?.to_string();
        let tweet_id = field(&fields, &positions, "tweetId", line_no)?.to_string();
        let created_at = parse_millis(
            field(&fields, &positions, "createdAtMillis", line_no)?,
            line_no,
        )?;
        let classification =
            Classification::from_token(field(&fields, &positions, "classification", line_no)?);
        let summary = field(&fields, &positions, "summary", line_no)?.to_string();
        if !seen.insert(note_id.clone()) {
            return Err(Error::Duplicate {
                line: line_no,
                what: format!("note id {note_id}"),
            });
        }
        notes.push(Note {
            note_id,
            author_id,
            tweet_id,
            created_at,
            classification,
            summary,
        });
    }
    Ok(NoteSet { notes })
}

pub fn write_ratings_tsv<W: Write>(set: &RatingSet, mut out: W) -> Result<()> {
    writeln!(out, "{}", RATINGS_COLUMNS.join("\t"))?;
    for r in &set.ratings {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.note_id,
            r.rater_id,
            r.created_at,
            r.value.as_token()
        )?;
    }
    Ok(())
}

pub fn write_notes_tsv<W: Write>(set: &NoteSet, mut out: W) -> Result<()> {
    writeln!(out, "{}", NOTES_COLUMNS.join("\t"))?;
    for n in &set.notes {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            n.note_id,
            n.author_id,
            n.tweet_id,
            n.created_at,
            n.classification.as_token(),
            n.summary
        )?;
    }
    Ok(())
}

/// Drop raters below the rater minimum, then notes below the note minimum,
/// and build the sparse matrix. With `density_filter_fixed_point` set the
/// two passes repeat until stable.
pub fn apply_density_filter<T: Scalar>(
    ratings: &RatingSet,
    config: &ScoringConfig,
) -> RatingsMatrix<T> {
    let mut rater_counts: HashMap<&str, usize> = HashMap::new();
    let mut note_counts: HashMap<&str, usize> = HashMap::new();
    for r in &ratings.ratings {
        *rater_counts.entry(r.rater_id.as_str()).or_default() += 1;
        *note_counts.entry(r.note_id.as_str()).or_default() += 1;
    }

    let mut kept: Vec<bool> = vec![true; ratings.ratings.len()];
    loop {
        // Rater pass.
        let mut changed = false;
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (r, k) in ratings.ratings.iter().zip(kept.iter()) {
            if *k {
                *counts.entry(r.rater_id.as_str()).or_default() += 1;
            }
        }
        for (r, k) in ratings.ratings.iter().zip(kept.iter_mut()) {
            if *k
                && counts.get(r.rater_id.as_str()).copied().unwrap_or(0)
                    < config.min_ratings_per_rater
            {
                *k = false;
                changed = true;
            }
        }
        // Note pass on the post-rater counts.
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (r, k) in ratings.ratings.iter().zip(kept.iter()) {
            if *k {
                *counts.entry(r.note_id.as_str()).or_default() += 1;
            }
        }
        for (r, k) in ratings.ratings.iter().zip(kept.iter_mut()) {
            if *k
                && counts.get(r.note_id.as_str()).copied().unwrap_or(0)
                    < config.min_ratings_per_note
            {
                *k = false;
                changed = true;
            }
        }
        if !config.density_filter_fixed_point || !changed {
            break;
        }
    }

    RatingsMatrix::from_observations(
        ratings
            .ratings
            .iter()
            .zip(kept.iter())
            .filter(|(_, k)| **k)
            .map(|(r, _)| {
                (
                    r.rater_id.as_str(),
                    r.note_id.as_str(),
                    r.value.numeric::<T>(),
                    r.created_at,
                )
            }),
    )
}
