//! Seeded generator for synthetic polarized communities with ground-truth
//! note categories. Two rater clusters, partisan notes visible mostly to
//! their own cluster, bridging notes rated helpful by both, low-quality
//! notes rated helpful by neither.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{NoteSet, RatingSet};
use crate::model::{Classification, Note, Rating, RatingValue};

/// Fraction of each cluster's partisan notes that live in an echo chamber:
/// consumed almost exclusively by that cluster's zealots, so their raw
/// helpful rate can reach a supermajority.
const ECHO_FRACTION: f64 = 0.3;

/// Fraction of each cluster's raters who are zealots: they engage almost
/// only with their own cluster's echo notes, and they author the
/// low-quality notes.
const ZEALOT_FRACTION: f64 = 0.25;

/// Exposure weights for ordinary raters. Contested partisan notes travel
/// cross-cluster more than within (quote-dunk amplification), bridging
/// notes ride viral posts, echo notes barely escape their chamber.
const EXPOSURE_OWN_CONTESTED: f64 = 1.0;
const EXPOSURE_CROSS_CONTESTED: f64 = 2.0;
const EXPOSURE_BRIDGING: f64 = 2.0;
const EXPOSURE_LOW_QUALITY: f64 = 1.0;
const EXPOSURE_ECHO_NORMAL: f64 = 0.005;

/// Exposure weights for zealots.
const EXPOSURE_ZEALOT_ECHO: f64 = 1.0;
const EXPOSURE_ZEALOT_OFF_TARGET: f64 = 0.001;

/// Minimum expected ratings per note for a config to be feasible.
const MIN_EXPECTED_RATINGS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_raters_per_cluster: usize,
    pub n_partisan_notes_per_cluster: usize,
    pub n_bridging_notes: usize,
    pub n_low_quality_notes: usize,
    /// Inclusive draw range for the number of ratings each rater makes.
    pub ratings_per_rater: (usize, usize),
    pub in_cluster_helpful_prob: f64,
    pub cross_cluster_helpful_prob_partisan: f64,
    pub helpful_prob_bridging: f64,
    pub helpful_prob_low_quality: f64,
    /// Probability a drawn rating is replaced by SomewhatHelpful.
    pub somewhat_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_raters_per_cluster: 100,
            n_partisan_notes_per_cluster: 50,
            n_bridging_notes: 50,
            n_low_quality_notes: 50,
            ratings_per_rater: (15, 40),
            in_cluster_helpful_prob: 0.9,
            cross_cluster_helpful_prob_partisan: 0.1,
            helpful_prob_bridging: 0.85,
            helpful_prob_low_quality: 0.2,
            somewhat_prob: 0.07,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cluster {
    A,
    B,
}

impl Cluster {
    pub fn as_token(self) -> &'static str {
        match self {
            Cluster::A => "A",
            Cluster::B => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NoteCategory {
    PartisanA,
    PartisanB,
    Bridging,
    LowQuality,
}

impl NoteCategory {
    pub fn as_token(self) -> &'static str {
        match self {
            NoteCategory::PartisanA => "PARTISAN_A",
            NoteCategory::PartisanB => "PARTISAN_B",
            NoteCategory::Bridging => "BRIDGING",
            NoteCategory::LowQuality => "LOW_QUALITY",
        }
    }

    pub fn is_partisan(self) -> bool {
        matches!(self, NoteCategory::PartisanA | NoteCategory::PartisanB)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub note_category: BTreeMap<String, NoteCategory>,
    pub rater_cluster: BTreeMap<String, Cluster>,
}

fn validate(config: &SynthConfig) -> Result<()> {
    for (name, p) in [
        ("in_cluster_helpful_prob", config.in_cluster_helpful_prob),
        (
            "cross_cluster_helpful_prob_partisan",
            config.cross_cluster_helpful_prob_partisan,
        ),
        ("helpful_prob_bridging", config.helpful_prob_bridging),
        ("helpful_prob_low_quality", config.helpful_prob_low_quality),
        ("somewhat_prob", config.somewhat_prob),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InfeasibleConfig(format!(
                "{name} = {p} outside [0, 1]"
            )));
        }
    }
    if config.ratings_per_rater.0 > config.ratings_per_rater.1 {
        return Err(Error::InfeasibleConfig(
            "ratings_per_rater range is inverted".to_string(),
        ));
    }
    Ok(())
}

/// Whether the `i`th partisan note of a cluster is an echo note: the first
/// `ECHO_FRACTION` of each block are.
fn is_echo(index_in_block: usize, block_size: usize) -> bool {
    index_in_block < (ECHO_FRACTION * block_size as f64).round() as usize
}

/// Whether the `i`th rater of a cluster is a zealot: the first
/// `ZEALOT_FRACTION` of each cluster are.
fn is_zealot(index_in_cluster: usize, cluster_size: usize) -> bool {
    index_in_cluster < (ZEALOT_FRACTION * cluster_size as f64).round() as usize
}

/// Sampling weight a rater puts on a note.
fn exposure_weight(cluster: Cluster, zealot: bool, category: NoteCategory, echo: bool) -> f64 {
    let own = matches!(
        (cluster, category),
        (Cluster::A, NoteCategory::PartisanA) | (Cluster::B, NoteCategory::PartisanB)
    );
    if zealot {
        return if own && echo {
            EXPOSURE_ZEALOT_ECHO
        } else {
            EXPOSURE_ZEALOT_OFF_TARGET
        };
    }
    match category {
        NoteCategory::Bridging => EXPOSURE_BRIDGING,
        NoteCategory::LowQuality => EXPOSURE_LOW_QUALITY,
        _ if echo => EXPOSURE_ECHO_NORMAL,
        _ if own => EXPOSURE_OWN_CONTESTED,
        _ => EXPOSURE_CROSS_CONTESTED,
    }
}

/// Probability that a rater in `cluster` finds a note of `category` helpful.
fn helpful_prob(config: &SynthConfig, cluster: Cluster, category: NoteCategory) -> f64 {
    match (cluster, category) {
        (Cluster::A, NoteCategory::PartisanA) | (Cluster::B, NoteCategory::PartisanB) => {
            config.in_cluster_helpful_prob
        }
        (Cluster::A, NoteCategory::PartisanB) | (Cluster::B, NoteCategory::PartisanA) => {
            config.cross_cluster_helpful_prob_partisan
        }
        (_, NoteCategory::Bridging) => config.helpful_prob_bridging,
        (_, NoteCategory::LowQuality) => config.helpful_prob_low_quality,
    }
}

const NOTE_EPOCH_MS: u64 = 1_600_000_000_000;

/// Generate a community. Fully determined by the config's seed; timestamps
/// strictly increase per note and stay within the 48h valid-rating window.
pub fn generate_community(config: &SynthConfig) -> Result<(NoteSet, RatingSet, GroundTruth)> {
    validate(config)?;

    let block = config.n_partisan_notes_per_cluster;
    let mut categories = Vec::new();
    let mut echo_flags = Vec::new();
    for cat in [NoteCategory::PartisanA, NoteCategory::PartisanB] {
        for i in 0..block {
            categories.push(cat);
            echo_flags.push(is_echo(i, block));
        }
    }
    for _ in 0..config.n_bridging_notes {
        categories.push(NoteCategory::Bridging);
        echo_flags.push(false);
    }
    for _ in 0..config.n_low_quality_notes {
        categories.push(NoteCategory::LowQuality);
        echo_flags.push(false);
    }
    let n_notes = categories.len();
    let n_raters = 2 * config.n_raters_per_cluster;
    if n_notes == 0 || n_raters == 0 {
        return Err(Error::InfeasibleConfig(
            "community has no notes or no raters".to_string(),
        ));
    }

    let zealots_per_cluster =
        (ZEALOT_FRACTION * config.n_raters_per_cluster as f64).round() as usize;

    // Low-quality notes are authored by zealots (round-robin across both
    // clusters); everything else gets a standalone author.
    let mut low_quality_seen = 0usize;
    let mut author_of = |i: usize, cat: NoteCategory| -> String {
        if cat == NoteCategory::LowQuality && zealots_per_cluster > 0 {
            let k = low_quality_seen;
            low_quality_seen += 1;
            let idx = (k / 2) % zealots_per_cluster;
            return if k.is_multiple_of(2) {
                format!("rater_a_{idx:04}")
            } else {
                format!("rater_b_{idx:04}")
            };
        }
        format!("author_{i:04}")
    };

    let mut notes = Vec::with_capacity(n_notes);
    let mut note_category = BTreeMap::new();
    for (i, &cat) in categories.iter().enumerate() {
        let note_id = format!("note_{i:04}");
        note_category.insert(note_id.clone(), cat);
        notes.push(Note {
            note_id,
            author_id: author_of(i, cat),
            tweet_id: format!("tweet_{i:04}"),
            created_at: NOTE_EPOCH_MS + i as u64 * 3_600_000,
            classification: Classification::Misleading,
            summary: format!("synthetic note {i}"),
        });
    }

    let mut rater_cluster = BTreeMap::new();
    let mut raters = Vec::with_capacity(n_raters);
    for i in 0..config.n_raters_per_cluster {
        raters.push((
            format!("rater_a_{i:04}"),
            Cluster::A,
            is_zealot(i, config.n_raters_per_cluster),
        ));
    }
    for i in 0..config.n_raters_per_cluster {
        raters.push((
            format!("rater_b_{i:04}"),
            Cluster::B,
            is_zealot(i, config.n_raters_per_cluster),
        ));
    }
    for (id, c, _) in &raters {
        rater_cluster.insert(id.clone(), *c);
    }

    // Feasibility: expected ratings per note under the exposure model,
    // summed over the four rater groups (cluster x zealotry).
    let mean_k = (config.ratings_per_rater.0 + config.ratings_per_rater.1) as f64 / 2.0;
    let groups: Vec<(Cluster, bool, f64)> = [Cluster::A, Cluster::B]
        .into_iter()
        .flat_map(|c| {
            [
                (c, true, zealots_per_cluster as f64),
                (
                    c,
                    false,
                    (config.n_raters_per_cluster - zealots_per_cluster) as f64,
                ),
            ]
        })
        .collect();
    let group_total: Vec<f64> = groups
        .iter()
        .map(|&(cluster, zealot, _)| {
            categories
                .iter()
                .zip(&echo_flags)
                .map(|(&cat, &echo)| exposure_weight(cluster, zealot, cat, echo))
                .sum()
        })
        .collect();
    for (note_idx, (&cat, &echo)) in categories.iter().zip(&echo_flags).enumerate() {
        let expected: f64 = groups
            .iter()
            .zip(&group_total)
            .map(|(&(cluster, zealot, count), &total)| {
                count * mean_k * exposure_weight(cluster, zealot, cat, echo) / total
            })
            .sum();
        if expected < MIN_EXPECTED_RATINGS {
            return Err(Error::InfeasibleConfig(format!(
                "note {note_idx} ({}) expects {expected:.2} ratings, below {MIN_EXPECTED_RATINGS}",
                cat.as_token()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut drawn: Vec<(String, usize, RatingValue)> = Vec::new();

    for (rater_id, cluster, zealot) in &raters {
        let k = rng.gen_range(config.ratings_per_rater.0..=config.ratings_per_rater.1);
        let k = k.min(n_notes);

        // Weighted sampling without replacement (Efraimidis-Spirakis):
        // key = u^(1/w), take the k largest.
        let mut keyed: Vec<(f64, usize)> = categories
            .iter()
            .zip(&echo_flags)
            .enumerate()
            .map(|(note_idx, (&cat, &echo))| {
                let w = exposure_weight(*cluster, *zealot, cat, echo);
                let u: f64 = rng.gen();
                (u.powf(1.0 / w), note_idx)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = keyed.iter().take(k).map(|&(_, i)| i).collect();
        chosen.sort_unstable();

        for note_idx in chosen {
            let cat = categories[note_idx];
            let p = helpful_prob(config, *cluster, cat);
            let mut value = if rng.gen::<f64>() < p {
                RatingValue::Helpful
            } else {
                RatingValue::NotHelpful
            };
            if rng.gen::<f64>() < config.somewhat_prob {
                value = RatingValue::SomewhatHelpful;
            }
            drawn.push((rater_id.clone(), note_idx, value));
        }
    }

    // Arrival order must not follow rater iteration order, or every note's
    // earliest ratings would come from one cluster. Shuffle, then hand out
    // strictly increasing per-note timestamps in arrival order.
    use rand::seq::SliceRandom;
    drawn.shuffle(&mut rng);
    let mut per_note_seq: Vec<u64> = vec![0; n_notes];
    let mut ratings = Vec::with_capacity(drawn.len());
    for (rater_id, note_idx, value) in drawn {
        per_note_seq[note_idx] += 1;
        ratings.push(Rating {
            rater_id,
            note_id: notes[note_idx].note_id.clone(),
            value,
            created_at: notes[note_idx].created_at + per_note_seq[note_idx] * 60_000,
        });
    }

    let note_set = NoteSet::new(notes)?;
    let rating_set = RatingSet::new(ratings, "synthetic")?;
    Ok((
        note_set,
        rating_set,
        GroundTruth {
            note_category,
            rater_cluster,
        },
    ))
}

/// Ground-truth TSV: one row per note and per rater.
pub fn write_ground_truth_tsv<W: Write>(truth: &GroundTruth, mut out: W) -> Result<()> {
    writeln!(out, "id\tkind\tcategory")?;
    for (id, cat) in &truth.note_category {
        writeln!(out, "{id}\tnote\t{}", cat.as_token())?;
    }
    for (id, cluster) in &truth.rater_cluster {
        writeln!(out, "{id}\trater\t{}", cluster.as_token())?;
    }
    Ok(())
}
