//! Planted-signal synthetic corpus.
//!
//! Each document is a sequence of role blocks in judgment order. The verdict
//! is recoverable from a single marker token in one Fact sentence. Distractor
//! markers of the opposite label appear in non-Fact sentences of some
//! documents, so only fact-based inputs carry a clean signal. The present
//! court's ruling states the outcome in plain words and is removed by every
//! input selection.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{parse_document, Document, RhetoricalRole, Split};
use crate::roles::RoleSequence;

pub const POSITIVE_MARKER: &str = "granted-marker";
pub const NEGATIVE_MARKER: &str = "dismissed-marker";
pub const MIN_DOCUMENTS: usize = 20;
pub const DISTRACTOR_RATE: f64 = 0.2;

/// Meta key holding the index of the sentence with the planted marker.
pub const META_PLANTED: &str = "planted_sentence";
/// Meta key holding the index of the distractor sentence, when present.
pub const META_DISTRACTOR: &str = "distractor_sentence";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyntheticError {
    #[error("need at least {MIN_DOCUMENTS} documents, got {0}")]
    TooFewDocuments(usize),
}

pub fn marker(label: u8) -> &'static str {
    if label == 1 {
        POSITIVE_MARKER
    } else {
        NEGATIVE_MARKER
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    /// Documents without roles, as they would be ingested.
    pub documents: Vec<Document>,
    /// Gold role sequences, one per document, same order.
    pub roles: Vec<RoleSequence>,
}

impl PlantedCorpus {
    /// Documents with the gold roles attached.
    pub fn annotated(&self) -> Vec<Document> {
        self.documents
            .iter()
            .zip(&self.roles)
            .map(|(d, r)| d.clone().with_roles(r))
            .collect()
    }
}

const PARTIES: &[&str] = &[
    "Ramesh", "Sunita", "Mohan", "Kavita", "Arjun", "Lakshmi", "Prakash", "Meena", "Vikram",
    "Anita", "Suresh", "Geeta",
];
const PLACES: &[&str] = &[
    "Pune", "Nagpur", "Indore", "Patna", "Madurai", "Jaipur", "Cuttack", "Ranchi", "Mysore",
];
const OBJECTS: &[&str] = &[
    "agricultural land", "a residential house", "a shop", "ancestral property", "a vehicle",
    "shares", "a warehouse",
];

const YEARS: &[u32] = &[1978, 1985, 1991, 1996, 2002, 2007, 2011];
const NUMBERS: &[u32] = &[12, 34, 90, 120, 302, 498];

/// Sentence templates per role. `{p}` party, `{q}` second party, `{l}`
/// place, `{o}` object, `{y}` year, `{n}` number.
fn templates(role: RhetoricalRole) -> &'static [&'static str] {
    use RhetoricalRole::*;
    match role {
        Fact => &[
            "The appellant {p} purchased {o} at {l} in the year {y}.",
            "A complaint was lodged by {q} alleging that {p} had occupied {o}.",
            "The incident occurred near {l} on the night of {n} March {y}.",
            "{p} was employed as a clerk and resided at {l} with the family.",
            "The deceased had executed a deed in favour of {q} concerning {o}.",
            "An FIR was filed at the police station in {l} against {p}.",
            "{p} and {q} were married in {y} and lived at {l}.",
            "The respondent alleged that {o} was never handed over to {p}.",
            "{q} was appointed as the guardian of {o} by the family.",
        ],
        Issue => &[
            "The question for determination is whether the sale in favour of {p} was valid.",
            "The issue that arises is whether {q} could claim possession of {o}.",
            "Whether the delay of {n} days can be condoned is the question before us.",
            "The main issue for consideration is the validity of the deed.",
        ],
        Argument => &[
            "Learned counsel for the appellant contended that the evidence was unreliable.",
            "It was submitted on behalf of {q} that the notice was never served.",
            "Counsel for the respondent argued that {p} had no title to {o}.",
            "The contention of the appellant is that the witnesses were interested.",
            "It is urged that the findings are contrary to the record.",
            "Learned counsel submits that the claim of {q} is barred by limitation.",
            "The submission on behalf of the State is that the recovery was proved.",
        ],
        Statute => &[
            "Section {n} of the Act provides for the transfer of {o}.",
            "The relevant provision is Article {n} of the Constitution.",
            "Rule {n} of the Code requires notice to every party.",
            "Under Section {n} of the Penal Code the offence is punishable.",
        ],
        Precedent => &[
            "Reliance was placed on the judgment reported in {y} where the Bench observed similarly.",
            "In an earlier decision of {y} this Court referred to the same principle.",
            "The precedent cited by counsel concerned a dispute at {l}.",
            "A larger Bench decision of {y} was relied upon by both sides.",
        ],
        RatioOfDecision => &[
            "We are therefore of the opinion that the evidence does not support the claim.",
            "Having considered the record we hold that the deed was validly executed.",
            "For these reasons we are satisfied that the view taken requires interference.",
            "Hence we conclude that the notice was properly served on {q}.",
            "In our view the findings on {o} cannot be sustained.",
            "We hold that the delay stands sufficiently explained.",
        ],
        RulingByLowerCourt => &[
            "The trial court convicted {p} and imposed a sentence of {n} years.",
            "The High Court at {l} acquitted {q} of all charges.",
            "The Sessions Judge decreed the suit in favour of {q}.",
            "The tribunal at {l} rejected the claim of {p}.",
        ],
        RulingByPresentCourt | None => &[],
    }
}

const RULING_POSITIVE: &[&str] = &[
    "The appeal is allowed and the impugned order is set aside.",
    "Accordingly the appeal is allowed and the decree of the trial court is restored.",
];
const RULING_NEGATIVE: &[&str] = &[
    "The appeal is dismissed with costs.",
    "Accordingly the appeal stands dismissed and the interim order is vacated.",
];

/// Block layout: role and inclusive block-size range.
const BLOCKS: &[(RhetoricalRole, usize, usize)] = &[
    (RhetoricalRole::Fact, 3, 6),
    (RhetoricalRole::RulingByLowerCourt, 1, 3),
    (RhetoricalRole::Issue, 1, 2),
    (RhetoricalRole::Argument, 3, 7),
    (RhetoricalRole::Statute, 1, 3),
    (RhetoricalRole::Precedent, 1, 3),
    (RhetoricalRole::RatioOfDecision, 3, 7),
    (RhetoricalRole::RulingByPresentCourt, 1, 2),
];

pub const MIN_SENTENCES: usize = 15;
pub const MAX_SENTENCES: usize = 40;

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let p = *PARTIES.choose(rng).expect("parties");
    let q = *PARTIES.choose(rng).expect("parties");
    let l = *PLACES.choose(rng).expect("places");
    let o = *OBJECTS.choose(rng).expect("objects");
    let y = YEARS.choose(rng).expect("years").to_string();
    let n = NUMBERS.choose(rng).expect("numbers").to_string();
    template
        .replace("{p}", p)
        .replace("{q}", q)
        .replace("{l}", l)
        .replace("{o}", o)
        .replace("{y}", &y)
        .replace("{n}", &n)
}

/// Inserts `word` before the sentence-final period.
fn insert_marker(sentence: &str, word: &str) -> String {
    let body = sentence.strip_suffix('.').unwrap_or(sentence);
    format!("{body} {word}.")
}

fn block_sizes(rng: &mut ChaCha8Rng) -> Vec<usize> {
    loop {
        let sizes: Vec<usize> = BLOCKS
            .iter()
            .map(|&(_, lo, hi)| rng.random_range(lo..=hi))
            .collect();
        let total: usize = sizes.iter().sum();
        if (MIN_SENTENCES..=MAX_SENTENCES).contains(&total) {
            return sizes;
        }
    }
}

fn generate_document(id: String, label: u8, split: Split, rng: &mut ChaCha8Rng) -> (Document, RoleSequence) {
    let mut roles = Vec::new();
    let mut sentences = Vec::new();
    for (&(role, _, _), size) in BLOCKS.iter().zip(block_sizes(rng)) {
        for _ in 0..size {
            let text = if role == RhetoricalRole::RulingByPresentCourt {
                let pool = if label == 1 { RULING_POSITIVE } else { RULING_NEGATIVE };
                pool.choose(rng).expect("rulings").to_string()
            } else {
                fill(templates(role).choose(rng).expect("templates"), rng)
            };
            roles.push(role);
            sentences.push(text);
        }
    }
    let fact_indices: Vec<usize> = (0..roles.len())
        .filter(|&i| roles[i] == RhetoricalRole::Fact)
        .collect();
    let planted = *fact_indices.choose(rng).expect("at least four facts");
    sentences[planted] = insert_marker(&sentences[planted], marker(label));
    let distractor = if rng.random_bool(DISTRACTOR_RATE) {
        let candidates: Vec<usize> = (0..roles.len())
            .filter(|&i| {
                !matches!(
                    roles[i],
                    RhetoricalRole::Fact | RhetoricalRole::RulingByPresentCourt
                )
            })
            .collect();
        let i = *candidates.choose(rng).expect("non-fact sentences");
        sentences[i] = insert_marker(&sentences[i], marker(1 - label));
        Some(i)
    } else {
        None
    };
    let mut doc = parse_document(&sentences.join(" "), &id).expect("templates are non-empty");
    assert_eq!(
        doc.sentences.len(),
        roles.len(),
        "template segmentation drifted for {id}"
    );
    doc.label = Some(label);
    doc.split = split;
    doc.meta.insert(META_PLANTED.into(), planted.to_string());
    if let Some(i) = distractor {
        doc.meta.insert(META_DISTRACTOR.into(), i.to_string());
    }
    let seq = RoleSequence::new(id, roles);
    (doc, seq)
}

/// Balanced labels (counts differ by at most one), stratified 60/20/20
/// train/dev/test splits, deterministic from `seed`.
pub fn generate_planted_corpus(n_docs: usize, seed: u64) -> Result<PlantedCorpus, SyntheticError> {
    if n_docs < MIN_DOCUMENTS {
        return Err(SyntheticError::TooFewDocuments(n_docs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<u8> = (0..n_docs).map(|i| (i % 2) as u8).collect();
    labels.shuffle(&mut rng);
    let mut splits = vec![Split::Train; n_docs];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..n_docs).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let train = (members.len() * 3).div_ceil(5);
        let dev = (members.len() - train).div_ceil(2);
        for (rank, &i) in members.iter().enumerate() {
            splits[i] = if rank < train {
                Split::Train
            } else if rank < train + dev {
                Split::Dev
            } else {
                Split::Test
            };
        }
    }
    let (documents, roles) = (0..n_docs)
        .map(|i| generate_document(format!("syn-{i:04}"), labels[i], splits[i], &mut rng))
        .unzip();
    Ok(PlantedCorpus { documents, roles })
}
