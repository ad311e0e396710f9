//! Rater-helpfulness and author-helpfulness statistics computed from
//! provisional labels, and the user filter that gates the second
//! factorization pass.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::{NoteSet, RatingSet};
use crate::model::{NoteLabel, NoteScore, Rating, RatingValue, ScoringConfig};
use crate::scalar::Scalar;

/// Per-user record: valid-rating stats as a rater, authored-note stats as an
/// author, and the final inclusion flag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RaterRecord {
    pub rater_id: String,
    pub valid_rating_count: usize,
    pub valid_match_count: usize,
    pub rater_helpfulness: Option<f64>,
    pub authored_scored_notes: usize,
    pub authored_helpful: usize,
    pub authored_not_helpful: usize,
    pub authored_mean_intercept: Option<f64>,
    pub included: bool,
}

fn is_binary(label: NoteLabel) -> bool {
    matches!(
        label,
        NoteLabel::CurrentlyRatedHelpful | NoteLabel::CurrentlyRatedNotHelpful
    )
}

/// Keep a rating iff its note is provisionally binary-labeled, it falls in
/// the recency window, and it is among the note's first
/// `valid_rating_max_ordinal` ratings (ordered by timestamp, ties broken by
/// rater id ascending).
///
/// With `valid_rating_prepublication_rule` set, the window and ordinal
/// conditions are replaced by: among the note's first `min_ratings_per_note`
/// ratings, i.e. made before the note could have received a label.
pub fn valid_ratings<T: Scalar>(
    ratings: &RatingSet,
    provisional: &BTreeMap<String, NoteScore<T>>,
    note_created_at: &HashMap<String, u64>,
    config: &ScoringConfig,
) -> Result<RatingSet> {
    for r in &ratings.ratings {
        if !note_created_at.contains_key(&r.note_id) {
            return Err(Error::MissingNote(r.note_id.clone()));
        }
    }

    // Rank every rating within its note by (created_at, rater_id).
    let mut by_note: HashMap<&str, Vec<&Rating>> = HashMap::new();
    for r in &ratings.ratings {
        by_note.entry(r.note_id.as_str()).or_default().push(r);
    }
    let mut rank: HashMap<(&str, &str), usize> = HashMap::new();
    for (note_id, mut rs) in by_note {
        rs.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.rater_id.cmp(&b.rater_id))
        });
        for (i, r) in rs.iter().enumerate() {
            rank.insert((note_id, r.rater_id.as_str()), i);
        }
    }

    let max_ordinal = if config.valid_rating_prepublication_rule {
        config.min_ratings_per_note
    } else {
        config.valid_rating_max_ordinal
    };

    let kept: Vec<Rating> = ratings
        .ratings
        .iter()
        .filter(|r| {
            let binary = provisional
                .get(&r.note_id)
                .map(|s| is_binary(s.label))
                .unwrap_or(false);
            if !binary {
                return false;
            }
            let early = rank[&(r.note_id.as_str(), r.rater_id.as_str())] < max_ordinal;
            if config.valid_rating_prepublication_rule {
                return early;
            }
            let age = r.created_at.saturating_sub(note_created_at[&r.note_id]);
            early && age <= config.valid_rating_window_ms
        })
        .cloned()
        .collect();
    Ok(RatingSet {
        ratings: kept,
        source: ratings.source.clone(),
    })
}

/// Rater helpfulness: fraction of a rater's valid ratings that match the
/// note's provisional binary label. SomewhatHelpful matches neither label.
pub fn rater_helpfulness<T: Scalar>(
    valid: &RatingSet,
    provisional: &BTreeMap<String, NoteScore<T>>,
) -> BTreeMap<String, RaterRecord> {
    let mut records: BTreeMap<String, RaterRecord> = BTreeMap::new();
    for r in &valid.ratings {
        let label = match provisional.get(&r.note_id) {
            Some(s) => s.label,
            None => continue,
        };
        let matches = matches!(
            (r.value, label),
            (RatingValue::Helpful, NoteLabel::CurrentlyRatedHelpful)
                | (RatingValue::NotHelpful, NoteLabel::CurrentlyRatedNotHelpful)
        );
        let rec = records
            .entry(r.rater_id.clone())
            .or_insert_with(|| RaterRecord {
                rater_id: r.rater_id.clone(),
                ..RaterRecord::default()
            });
        rec.valid_rating_count += 1;
        if matches {
            rec.valid_match_count += 1;
        }
    }
    for rec in records.values_mut() {
        rec.rater_helpfulness = Some(rec.valid_match_count as f64 / rec.valid_rating_count as f64);
    }
    records
}

/// Authored-note statistics over provisionally scored notes (notes in the
/// provisional map are exactly those that met the rating minimum).
pub fn author_stats<T: Scalar>(
    notes: &NoteSet,
    provisional: &BTreeMap<String, NoteScore<T>>,
) -> BTreeMap<String, RaterRecord> {
    let mut records: BTreeMap<String, RaterRecord> = BTreeMap::new();
    let mut intercept_sums: BTreeMap<String, f64> = BTreeMap::new();
    for note in &notes.notes {
        let score = match provisional.get(&note.note_id) {
            Some(s) => s,
            None => continue,
        };
        let rec = records
            .entry(note.author_id.clone())
            .or_insert_with(|| RaterRecord {
                rater_id: note.author_id.clone(),
                ..RaterRecord::default()
            });
        rec.authored_scored_notes += 1;
        match score.label {
            NoteLabel::CurrentlyRatedHelpful => rec.authored_helpful += 1,
            NoteLabel::CurrentlyRatedNotHelpful => rec.authored_not_helpful += 1,
            NoteLabel::NeedsMoreRatings => {}
        }
        *intercept_sums.entry(note.author_id.clone()).or_default() += score.intercept.as_f64();
    }
    for (author, rec) in records.iter_mut() {
        rec.authored_mean_intercept =
            Some(intercept_sums[author] / rec.authored_scored_notes as f64);
    }
    records
}

/// Merge rater and author records per user id.
pub fn merge_records(
    rater: BTreeMap<String, RaterRecord>,
    author: BTreeMap<String, RaterRecord>,
) -> BTreeMap<String, RaterRecord> {
    let mut merged = rater;
    for (id, a) in author {
        let rec = merged.entry(id.clone()).or_insert_with(|| RaterRecord {
            rater_id: id,
            ..RaterRecord::default()
        });
        rec.authored_scored_notes = a.authored_scored_notes;
        rec.authored_helpful = a.authored_helpful;
        rec.authored_not_helpful = a.authored_not_helpful;
        rec.authored_mean_intercept = a.authored_mean_intercept;
    }
    merged
}

/// Inclusion rule: at least one valid rating, rater helpfulness at the
/// minimum or above, and (if the user authored any scored notes) the author
/// ratio and mean-intercept criteria.
pub fn filter_users(
    records: &mut BTreeMap<String, RaterRecord>,
    config: &ScoringConfig,
) -> BTreeSet<String> {
    let mut included = BTreeSet::new();
    for (id, rec) in records.iter_mut() {
        let rating_ok = rec.valid_rating_count >= 1
            && rec
                .rater_helpfulness
                .map(|h| h >= config.rater_helpfulness_min)
                .unwrap_or(false);
        let author_ok = rec.authored_scored_notes == 0
            || (rec.authored_helpful as f64
                >= config.author_ratio_min * rec.authored_not_helpful as f64
                && rec
                    .authored_mean_intercept
                    .map(|m| m >= config.author_mean_intercept_min)
                    .unwrap_or(false));
        rec.included = rating_ok && author_ok;
        if rec.included {
            included.insert(id.clone());
        }
    }
    included
}

/// Rater-stats TSV export.
pub fn write_rater_stats_tsv<W: Write>(
    records: &BTreeMap<String, RaterRecord>,
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "raterParticipantId\tvalidRatings\traterHelpfulness\tauthoredHelpful\tauthoredNotHelpful\tmeanNoteIntercept\tincluded"
    )?;
    for rec in records.values() {
        let helpfulness = rec
            .rater_helpfulness
            .map(|h| format!("{h:.6}"))
            .unwrap_or_default();
        let mean = rec
            .authored_mean_intercept
            .map(|m| format!("{m:.6}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            rec.rater_id,
            rec.valid_rating_count,
            helpfulness,
            rec.authored_helpful,
            rec.authored_not_helpful,
            mean,
            rec.included
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Note;

    fn score(note_id: &str, intercept: f64, label: NoteLabel) -> NoteScore<f64> {
        NoteScore {
            note_id: note_id.to_string(),
            intercept,
            factor: 0.0,
            label,
            n_ratings: 5,
            helpful_ratio: 0.5,
        }
    }

    fn rating(rater: &str, note: &str, value: RatingValue, t: u64) -> Rating {
        Rating {
            rater_id: rater.to_string(),
            note_id: note.to_string(),
            value,
            created_at: t,
        }
    }

    fn provisional_helpful(note: &str) -> BTreeMap<String, NoteScore<f64>> {
        let mut m = BTreeMap::new();
        m.insert(
            note.to_string(),
            score(note, 0.5, NoteLabel::CurrentlyRatedHelpful),
        );
        m
    }

    #[test]
    fn valid_ratings_first_five_kept() {
        let ratings = RatingSet::new(
            (0..7)
                .map(|i| rating(&format!("u{i}"), "n1", RatingValue::Helpful, 1000 + i))
                .collect(),
            "test",
        )
        .unwrap();
        let provisional = provisional_helpful("n1");
        let created: HashMap<String, u64> = [("n1".to_string(), 1000u64)].into();
        let cfg = ScoringConfig::default();
        let valid = valid_ratings(&ratings, &provisional, &created, &cfg).unwrap();
        assert_eq!(valid.len(), 5);
        let kept: Vec<&str> = valid.ratings.iter().map(|r| r.rater_id.as_str()).collect();
        assert_eq!(kept, vec!["u0", "u1", "u2", "u3", "u4"]);
    }

    #[test]
    fn valid_ratings_window_boundary() {
        let cfg = ScoringConfig::default();
        let window = cfg.valid_rating_window_ms;
        let ratings = RatingSet::new(
            vec![
                rating("u1", "n1", RatingValue::Helpful, 1000 + window),
                rating("u2", "n1", RatingValue::Helpful, 1000 + window + 1),
            ],
            "test",
        )
        .unwrap();
        let provisional = provisional_helpful("n1");
        let created: HashMap<String, u64> = [("n1".to_string(), 1000u64)].into();
        let valid = valid_ratings(&ratings, &provisional, &created, &cfg).unwrap();
        // Exactly 48h in, exactly 48h + 1ms out.
        assert_eq!(valid.len(), 1);
        assert_eq!(valid.ratings[0].rater_id, "u1");
    }

    #[test]
    fn valid_ratings_needs_more_ratings_excluded() {
        let ratings =
            RatingSet::new(vec![rating("u1", "n1", RatingValue::Helpful, 1000)], "test").unwrap();
        let mut provisional = BTreeMap::new();
        provisional.insert(
            "n1".to_string(),
            score("n1", 0.1, NoteLabel::NeedsMoreRatings),
        );
        let created: HashMap<String, u64> = [("n1".to_string(), 1000u64)].into();
        let valid =
            valid_ratings(&ratings, &provisional, &created, &ScoringConfig::default()).unwrap();
        assert!(valid.is_empty());
    }

    #[test]
    fn valid_ratings_tie_break_by_rater_id() {
        // Six ratings at the same timestamp: first five by rater id survive.
        let ratings = RatingSet::new(
            ["f", "a", "d", "b", "e", "c"]
                .iter()
                .map(|u| rating(u, "n1", RatingValue::Helpful, 2000))
                .collect(),
            "test",
        )
        .unwrap();
        let provisional = provisional_helpful("n1");
        let created: HashMap<String, u64> = [("n1".to_string(), 1000u64)].into();
        let valid =
            valid_ratings(&ratings, &provisional, &created, &ScoringConfig::default()).unwrap();
        let mut kept: Vec<&str> = valid.ratings.iter().map(|r| r.rater_id.as_str()).collect();
        kept.sort();
        assert_eq!(kept, vec!["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn valid_ratings_missing_note_creation() {
        let ratings =
            RatingSet::new(vec![rating("u1", "nX", RatingValue::Helpful, 1000)], "test").unwrap();
        let provisional = provisional_helpful("nX");
        let created: HashMap<String, u64> = HashMap::new();
        assert!(matches!(
            valid_ratings(&ratings, &provisional, &created, &ScoringConfig::default()),
            Err(Error::MissingNote(_))
        ));
    }

    #[test]
    fn rater_helpfulness_fractions() {
        let provisional = provisional_helpful("n1");
        // 3 matches out of 4 valid: u1 rates helpful three times on helpful
        // notes plus one miss.
        let mut prov = provisional.clone();
        for n in ["n2", "n3", "n4"] {
            prov.insert(
                n.to_string(),
                score(n, 0.5, NoteLabel::CurrentlyRatedHelpful),
            );
        }
        let valid = RatingSet::new(
            vec![
                rating("u1", "n1", RatingValue::Helpful, 1),
                rating("u1", "n2", RatingValue::Helpful, 2),
                rating("u1", "n3", RatingValue::Helpful, 3),
                rating("u1", "n4", RatingValue::NotHelpful, 4),
            ],
            "test",
        )
        .unwrap();
        let records = rater_helpfulness(&valid, &prov);
        assert_eq!(records["u1"].rater_helpfulness, Some(0.75));
    }

    #[test]
    fn rater_helpfulness_two_thirds_passes_minimum() {
        let mut prov = BTreeMap::new();
        for n in ["n1", "n2", "n3"] {
            prov.insert(
                n.to_string(),
                score(n, 0.5, NoteLabel::CurrentlyRatedHelpful),
            );
        }
        let valid = RatingSet::new(
            vec![
                rating("u1", "n1", RatingValue::Helpful, 1),
                rating("u1", "n2", RatingValue::Helpful, 2),
                rating("u1", "n3", RatingValue::NotHelpful, 3),
            ],
            "test",
        )
        .unwrap();
        let mut records = rater_helpfulness(&valid, &prov);
        let h = records["u1"].rater_helpfulness.unwrap();
        assert!((h - 2.0 / 3.0).abs() < 1e-12);
        let included = filter_users(&mut records, &ScoringConfig::default());
        assert!(included.contains("u1"));
    }

    #[test]
    fn somewhat_helpful_never_matches() {
        let prov = provisional_helpful("n1");
        let valid = RatingSet::new(
            vec![rating("u1", "n1", RatingValue::SomewhatHelpful, 1)],
            "test",
        )
        .unwrap();
        let records = rater_helpfulness(&valid, &prov);
        assert_eq!(records["u1"].valid_match_count, 0);
        assert_eq!(records["u1"].rater_helpfulness, Some(0.0));
    }

    fn note(note_id: &str, author: &str) -> Note {
        Note {
            note_id: note_id.to_string(),
            author_id: author.to_string(),
            tweet_id: "t".to_string(),
            created_at: 0,
            classification: crate::model::Classification::Misleading,
            summary: String::new(),
        }
    }

    #[test]
    fn author_stats_counts_and_mean() {
        let notes = NoteSet::new(vec![
            note("n1", "a1"),
            note("n2", "a1"),
            note("n3", "a1"),
            note("n4", "a2"),
            note("n5", "a3"), // unscored: exempt
        ])
        .unwrap();
        let mut prov = BTreeMap::new();
        prov.insert(
            "n1".to_string(),
            score("n1", 0.5, NoteLabel::CurrentlyRatedHelpful),
        );
        prov.insert(
            "n2".to_string(),
            score("n2", -0.1, NoteLabel::CurrentlyRatedNotHelpful),
        );
        prov.insert(
            "n3".to_string(),
            score("n3", 0.2, NoteLabel::NeedsMoreRatings),
        );
        prov.insert(
            "n4".to_string(),
            score("n4", 0.05, NoteLabel::NeedsMoreRatings),
        );
        let records = author_stats(&notes, &prov);
        assert_eq!(records["a1"].authored_scored_notes, 3);
        assert_eq!(records["a1"].authored_helpful, 1);
        assert_eq!(records["a1"].authored_not_helpful, 1);
        let mean = records["a1"].authored_mean_intercept.unwrap();
        assert!((mean - (0.5 - 0.1 + 0.2) / 3.0).abs() < 1e-12);
        assert!(!records.contains_key("a3"));
    }

    fn record(
        valid: usize,
        matches: usize,
        scored: usize,
        helpful: usize,
        not_helpful: usize,
        mean: Option<f64>,
    ) -> RaterRecord {
        RaterRecord {
            rater_id: "u".to_string(),
            valid_rating_count: valid,
            valid_match_count: matches,
            rater_helpfulness: if valid > 0 {
                Some(matches as f64 / valid as f64)
            } else {
                None
            },
            authored_scored_notes: scored,
            authored_helpful: helpful,
            authored_not_helpful: not_helpful,
            authored_mean_intercept: mean,
            included: false,
        }
    }

    fn run_filter(rec: RaterRecord) -> bool {
        let mut m = BTreeMap::new();
        m.insert("u".to_string(), rec);
        let included = filter_users(&mut m, &ScoringConfig::default());
        included.contains("u")
    }

    #[test]
    fn filter_users_rules() {
        // helpfulness 0.66, no authored notes: in.
        assert!(run_filter(record(100, 66, 0, 0, 0, None)));
        // helpfulness 0.9 but 4 helpful vs 1 not helpful authored: out.
        assert!(!run_filter(record(10, 9, 5, 4, 1, Some(0.3))));
        // 5 helpful vs 1 not helpful, mean 0.2: in.
        assert!(run_filter(record(10, 9, 6, 5, 1, Some(0.2))));
        // mean intercept exactly 0.05 passes.
        assert!(run_filter(record(10, 9, 6, 5, 1, Some(0.05))));
        // helpfulness 0.5: out regardless of authorship.
        assert!(!run_filter(record(10, 5, 0, 0, 0, None)));
        // zero valid ratings: out.
        assert!(!run_filter(record(0, 0, 0, 0, 0, None)));
    }

    #[test]
    fn valid_ratings_prepublication_rule() {
        let cfg = ScoringConfig {
            valid_rating_prepublication_rule: true,
            ..ScoringConfig::default()
        };
        let window = cfg.valid_rating_window_ms;
        // Rating far outside the 48h window but among the first 5: kept
        // under the alternative rule.
        let ratings = RatingSet::new(
            vec![rating("u1", "n1", RatingValue::Helpful, 1000 + 10 * window)],
            "test",
        )
        .unwrap();
        let provisional = provisional_helpful("n1");
        let created: HashMap<String, u64> = [("n1".to_string(), 1000u64)].into();
        let valid = valid_ratings(&ratings, &provisional, &created, &cfg).unwrap();
        assert_eq!(valid.len(), 1);
    }
}
