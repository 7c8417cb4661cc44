//! Rhetorical role tagging.
//!
//! A linear-chain model over hand-designed sentence features, trained with
//! the averaged structured perceptron and decoded exactly with Viterbi.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, RhetoricalRole};

const ROLES: usize = RhetoricalRole::COUNT;

/// Bumped whenever [`featurize`] changes meaning.
pub const FEATURE_SPEC_VERSION: u32 = 1;
pub const TAGGER_FORMAT: &str = "factlex-tagger";
pub const TAGGER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RolesError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("epochs must be at least 1")]
    InvalidEpochs,
    #[error("document {0:?} has no sentences")]
    EmptyDocument(String),
    #[error("malformed role sidecar line {line}: {reason}")]
    MalformedSidecar { line: usize, reason: String },
    #[error("unsupported tagger model: {0}")]
    UnsupportedModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One role per sentence plus the decoder's max-marginal margin for it.
///
/// Gold sequences carry no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSequence {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub roles: Vec<RhetoricalRole>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
}

impl RoleSequence {
    pub fn new(doc_id: impl Into<String>, roles: Vec<RhetoricalRole>) -> Self {
        Self {
            doc_id: doc_id.into(),
            roles,
            scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactMask {
    pub bits: Vec<bool>,
}

pub fn binarize(roles: &RoleSequence) -> FactMask {
    FactMask {
        bits: roles
            .roles
            .iter()
            .map(|&r| r == RhetoricalRole::Fact)
            .collect(),
    }
}

/// Built-in cue lexicons, lowercase tokens.
pub fn cue_lexicon(role: RhetoricalRole) -> &'static [&'static str] {
    use RhetoricalRole::*;
    match role {
        Fact => &[
            "filed", "alleged", "complaint", "lodged", "incident", "occurred", "fir", "deceased",
            "married", "purchased", "executed", "appointed", "employed", "resided", "property",
        ],
        Issue => &[
            "whether", "question", "questions", "issue", "issues", "arises", "arise",
            "determination", "consideration",
        ],
        Argument => &[
            "contended", "contends", "submitted", "submits", "argued", "argues", "urged",
            "counsel", "learned", "contention", "submission",
        ],
        Statute => &[
            "section", "sections", "act", "article", "articles", "provision", "provisions",
            "rule", "rules", "clause", "code", "constitution",
        ],
        Precedent => &[
            "relied", "reliance", "judgment", "reported", "observed", "decision", "precedent",
            "cited", "referred", "bench",
        ],
        RatioOfDecision => &[
            "held", "hold", "hence", "therefore", "opinion", "satisfied", "conclude",
            "considered", "reasons", "view",
        ],
        RulingByLowerCourt => &[
            "trial", "sessions", "tribunal", "lower", "magistrate", "convicted", "acquitted",
            "high",
        ],
        RulingByPresentCourt => &[
            "allowed", "dismissed", "disposed", "costs", "aside", "quashed", "restored",
            "ordered",
        ],
        None => &[],
    }
}

fn citation_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\bAIR \d{4}\b|\bSCC\b|\bSCR\b|\bvs?\s?\.|<CASEREF_\d+>")
            .expect("citation pattern")
    })
}

/// Sparse binary features for every sentence, in sentence order.
///
/// Feature ids: `bias`, `pos_decile_{0..9}`, `len_lt10` / `len_10_25` /
/// `len_gt25`, `cue_{Role}`, `is_first`, `is_last`, `has_citation`.
pub fn featurize(doc: &Document) -> Vec<Vec<String>> {
    let n = doc.sentences.len();
    doc.sentences
        .iter()
        .enumerate()
        .map(|(i, sentence)| {
            let mut feats = vec!["bias".to_string()];
            feats.push(format!("pos_decile_{}", (10 * i) / n.max(1)));
            let len = sentence.tokens.len();
            feats.push(
                match len {
                    0..=9 => "len_lt10",
                    10..=25 => "len_10_25",
                    _ => "len_gt25",
                }
                .to_string(),
            );
            let lowered: Vec<String> = sentence.tokens.iter().map(|t| t.to_lowercase()).collect();
            for role in RhetoricalRole::ALL {
                let lexicon = cue_lexicon(role);
                if lowered.iter().any(|t| lexicon.contains(&t.as_str())) {
                    feats.push(format!("cue_{role}"));
                }
            }
            if i == 0 {
                feats.push("is_first".to_string());
            }
            if i + 1 == n {
                feats.push("is_last".to_string());
            }
            if citation_pattern().is_match(&sentence.text) {
                feats.push("has_citation".to_string());
            }
            feats
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub path: Vec<usize>,
    pub score: f64,
    /// Per position: best path score with the chosen label minus the best
    /// path score with any other label at that position.
    pub margins: Vec<f64>,
}

/// Path score accumulated left to right: emission, then each transition
/// followed by its emission.
pub fn path_score(emissions: &[Vec<f64>], transitions: &[Vec<f64>], path: &[usize]) -> f64 {
    let mut score = emissions[0][path[0]];
    for i in 1..path.len() {
        score += transitions[path[i - 1]][path[i]];
        score += emissions[i][path[i]];
    }
    score
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Exact max-score decoding over label paths.
///
/// Among optimal paths the lexicographically smallest one is returned
/// (lower label index wins, earlier positions compared first). Decoding runs
/// a backward best-suffix pass and then picks labels greedily from the left.
pub fn viterbi(emissions: &[Vec<f64>], transitions: &[Vec<f64>]) -> Result<Decoded, RolesError> {
    let n = emissions.len();
    if n == 0 {
        return Err(RolesError::DimensionMismatch("empty emission matrix".into()));
    }
    let r = transitions.len();
    if r == 0 || transitions.iter().any(|row| row.len() != r) {
        return Err(RolesError::DimensionMismatch(
            "transition matrix must be square and non-empty".into(),
        ));
    }
    if let Some(i) = emissions.iter().position(|row| row.len() != r) {
        return Err(RolesError::DimensionMismatch(format!(
            "emission row {i} has {} labels, expected {r}",
            emissions[i].len()
        )));
    }

    // suffix[i][y]: best score of positions i+1.. given label y at i.
    let mut suffix = vec![vec![0.0; r]; n];
    for i in (0..n - 1).rev() {
        for y in 0..r {
            suffix[i][y] = (0..r)
                .map(|z| transitions[y][z] + emissions[i + 1][z] + suffix[i + 1][z])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    // prefix[i][y]: best score of positions ..=i ending in label y.
    let mut prefix = vec![vec![0.0; r]; n];
    prefix[0].clone_from(&emissions[0]);
    for i in 1..n {
        for y in 0..r {
            prefix[i][y] = emissions[i][y]
                + (0..r)
                    .map(|z| prefix[i - 1][z] + transitions[z][y])
                    .fold(f64::NEG_INFINITY, f64::max);
        }
    }

    let mut path = Vec::with_capacity(n);
    path.push(argmax_lowest((0..r).map(|y| emissions[0][y] + suffix[0][y])).0);
    for i in 1..n {
        let prev = path[i - 1];
        path.push(
            argmax_lowest((0..r).map(|y| transitions[prev][y] + emissions[i][y] + suffix[i][y])).0,
        );
    }

    let margins = (0..n)
        .map(|i| {
            let chosen = prefix[i][path[i]] + suffix[i][path[i]];
            let rival = (0..r)
                .filter(|&y| y != path[i])
                .map(|y| prefix[i][y] + suffix[i][y])
                .fold(f64::NEG_INFINITY, f64::max);
            if rival.is_finite() {
                chosen - rival
            } else {
                0.0
            }
        })
        .collect();

    let score = path_score(emissions, transitions, &path);
    Ok(Decoded {
        path,
        score,
        margins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    emissions: BTreeMap<String, [f64; ROLES]>,
    transitions: [[f64; ROLES]; ROLES],
    pub feature_spec_version: u32,
    pub meta: TrainingMeta,
}

impl Default for TaggerModel {
    fn default() -> Self {
        Self {
            emissions: BTreeMap::new(),
            transitions: [[0.0; ROLES]; ROLES],
            feature_spec_version: FEATURE_SPEC_VERSION,
            meta: TrainingMeta { epochs: 0, seed: 0 },
        }
    }
}

impl TaggerModel {
    pub fn emission_weight(&self, feature: &str, role: RhetoricalRole) -> f64 {
        self.emissions
            .get(feature)
            .map_or(0.0, |w| w[role.index()])
    }

    pub fn set_emission(&mut self, feature: &str, role: RhetoricalRole, weight: f64) {
        self.emissions
            .entry(feature.to_string())
            .or_insert([0.0; ROLES])[role.index()] = weight;
    }

    pub fn transition_weight(&self, from: RhetoricalRole, to: RhetoricalRole) -> f64 {
        self.transitions[from.index()][to.index()]
    }

    pub fn set_transition(&mut self, from: RhetoricalRole, to: RhetoricalRole, weight: f64) {
        self.transitions[from.index()][to.index()] = weight;
    }

    fn emission_matrix(&self, features: &[Vec<String>]) -> Vec<Vec<f64>> {
        emission_matrix(&self.emissions, features)
    }

    fn transition_matrix(&self) -> Vec<Vec<f64>> {
        self.transitions.iter().map(|row| row.to_vec()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RolesError> {
        let file = std::fs::File::create(path)?;
        self.write_json(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RolesError> {
        let file = std::fs::File::open(path)?;
        Self::read_json(std::io::BufReader::new(file))
    }

    pub fn write_json(&self, mut writer: impl Write) -> Result<(), RolesError> {
        serde_json::to_writer(&mut writer, &TaggerFile::from(self))?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_json(reader: impl std::io::Read) -> Result<Self, RolesError> {
        let file: TaggerFile = serde_json::from_reader(reader)?;
        file.try_into()
    }
}

/// On-disk tagger layout. Weights are sparse `(feature, role, weight)`
/// triples sorted by feature then role index; zero weights are omitted.
#[derive(Debug, Serialize, Deserialize)]
struct TaggerFile {
    format: String,
    version: u32,
    feature_spec: u32,
    roles: Vec<RhetoricalRole>,
    emissions: Vec<(String, RhetoricalRole, f64)>,
    transitions: Vec<(RhetoricalRole, RhetoricalRole, f64)>,
    meta: TrainingMeta,
}

impl From<&TaggerModel> for TaggerFile {
    fn from(model: &TaggerModel) -> Self {
        let emissions = model
            .emissions
            .iter()
            .flat_map(|(f, w)| {
                RhetoricalRole::ALL
                    .iter()
                    .filter(|r| w[r.index()] != 0.0)
                    .map(move |&r| (f.clone(), r, w[r.index()]))
            })
            .collect();
        let mut transitions = Vec::new();
        for from in RhetoricalRole::ALL {
            for to in RhetoricalRole::ALL {
                let w = model.transition_weight(from, to);
                if w != 0.0 {
                    transitions.push((from, to, w));
                }
            }
        }
        Self {
            format: TAGGER_FORMAT.to_string(),
            version: TAGGER_FORMAT_VERSION,
            feature_spec: model.feature_spec_version,
            roles: RhetoricalRole::ALL.to_vec(),
            emissions,
            transitions,
            meta: model.meta,
        }
    }
}

impl TryFrom<TaggerFile> for TaggerModel {
    type Error = RolesError;

    fn try_from(file: TaggerFile) -> Result<Self, Self::Error> {
        if file.format != TAGGER_FORMAT || file.version != TAGGER_FORMAT_VERSION {
            return Err(RolesError::UnsupportedModel(format!(
                "{} v{}",
                file.format, file.version
            )));
        }
        if file.feature_spec != FEATURE_SPEC_VERSION {
            return Err(RolesError::UnsupportedModel(format!(
                "feature spec v{}",
                file.feature_spec
            )));
        }
        let mut model = TaggerModel {
            feature_spec_version: file.feature_spec,
            meta: file.meta,
            ..TaggerModel::default()
        };
        for (feature, role, w) in file.emissions {
            if !w.is_finite() {
                return Err(RolesError::UnsupportedModel("non-finite weight".into()));
            }
            model.set_emission(&feature, role, w);
        }
        for (from, to, w) in file.transitions {
            if !w.is_finite() {
                return Err(RolesError::UnsupportedModel("non-finite weight".into()));
            }
            model.set_transition(from, to, w);
        }
        Ok(model)
    }
}

fn emission_matrix(
    weights: &impl WeightLookup,
    features: &[Vec<String>],
) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|feats| {
            let mut row = vec![0.0; ROLES];
            for f in feats {
                if let Some(w) = weights.lookup(f) {
                    for (acc, x) in row.iter_mut().zip(w) {
                        *acc += x;
                    }
                }
            }
            row
        })
        .collect()
}

trait WeightLookup {
    fn lookup(&self, feature: &str) -> Option<&[f64; ROLES]>;
}

impl WeightLookup for BTreeMap<String, [f64; ROLES]> {
    fn lookup(&self, feature: &str) -> Option<&[f64; ROLES]> {
        self.get(feature)
    }
}

impl WeightLookup for HashMap<String, [f64; ROLES]> {
    fn lookup(&self, feature: &str) -> Option<&[f64; ROLES]> {
        self.get(feature)
    }
}

pub fn tag(doc: &Document, model: &TaggerModel) -> Result<RoleSequence, RolesError> {
    if doc.sentences.is_empty() {
        return Err(RolesError::EmptyDocument(doc.id.clone()));
    }
    let features = featurize(doc);
    let decoded = viterbi(&model.emission_matrix(&features), &model.transition_matrix())?;
    Ok(RoleSequence {
        doc_id: doc.id.clone(),
        roles: decoded
            .path
            .iter()
            .map(|&y| RhetoricalRole::from_index(y).expect("label index in range"))
            .collect(),
        scores: decoded.margins,
    })
}

/// Perceptron weights with the running-sum trick for averaging: the average
/// after `c` steps is `w - acc / c`.
struct AveragedWeights {
    emissions: HashMap<String, [f64; ROLES]>,
    emission_acc: HashMap<String, [f64; ROLES]>,
    transitions: [[f64; ROLES]; ROLES],
    transition_acc: [[f64; ROLES]; ROLES],
    step: f64,
}

impl AveragedWeights {
    fn new() -> Self {
        Self {
            emissions: HashMap::new(),
            emission_acc: HashMap::new(),
            transitions: [[0.0; ROLES]; ROLES],
            transition_acc: [[0.0; ROLES]; ROLES],
            step: 1.0,
        }
    }

    fn bump_emission(&mut self, feature: &str, role: usize, delta: f64) {
        self.emissions
            .entry(feature.to_string())
            .or_insert([0.0; ROLES])[role] += delta;
        self.emission_acc
            .entry(feature.to_string())
            .or_insert([0.0; ROLES])[role] += self.step * delta;
    }

    fn bump_transition(&mut self, from: usize, to: usize, delta: f64) {
        self.transitions[from][to] += delta;
        self.transition_acc[from][to] += self.step * delta;
    }

    fn decode(&self, features: &[Vec<String>]) -> Vec<usize> {
        let transitions: Vec<Vec<f64>> = self.transitions.iter().map(|r| r.to_vec()).collect();
        viterbi(&emission_matrix(&self.emissions, features), &transitions)
            .expect("well-formed matrices")
            .path
    }

    fn averaged(&self, meta: TrainingMeta) -> TaggerModel {
        let mut model = TaggerModel {
            meta,
            ..TaggerModel::default()
        };
        for (feature, w) in &self.emissions {
            let acc = &self.emission_acc[feature];
            let mut avg = [0.0; ROLES];
            for r in 0..ROLES {
                avg[r] = w[r] - acc[r] / self.step;
            }
            if avg.iter().any(|&x| x != 0.0) {
                model.emissions.insert(feature.clone(), avg);
            }
        }
        for from in 0..ROLES {
            for to in 0..ROLES {
                model.transitions[from][to] =
                    self.transitions[from][to] - self.transition_acc[from][to] / self.step;
            }
        }
        model
    }
}

/// Averaged structured perceptron. Documents are visited in a seeded shuffle
/// each epoch.
pub fn train_tagger(
    labeled: &[(Document, RoleSequence)],
    epochs: usize,
    seed: u64,
) -> Result<TaggerModel, RolesError> {
    if epochs == 0 {
        return Err(RolesError::InvalidEpochs);
    }
    if labeled.is_empty() {
        return Err(RolesError::EmptyTrainingSet);
    }
    let mut examples = Vec::with_capacity(labeled.len());
    for (doc, gold) in labeled {
        if gold.roles.len() != doc.sentences.len() || doc.sentences.is_empty() {
            return Err(RolesError::DimensionMismatch(format!(
                "document {} has {} sentences but {} gold roles",
                doc.id,
                doc.sentences.len(),
                gold.roles.len()
            )));
        }
        let gold: Vec<usize> = gold.roles.iter().map(|r| r.index()).collect();
        examples.push((featurize(doc), gold));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = AveragedWeights::new();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let (features, gold) = &examples[idx];
            let predicted = weights.decode(features);
            if predicted != *gold {
                for (i, feats) in features.iter().enumerate() {
                    if predicted[i] != gold[i] {
                        for f in feats {
                            weights.bump_emission(f, gold[i], 1.0);
                            weights.bump_emission(f, predicted[i], -1.0);
                        }
                    }
                    if i > 0 {
                        weights.bump_transition(gold[i - 1], gold[i], 1.0);
                        weights.bump_transition(predicted[i - 1], predicted[i], -1.0);
                    }
                }
            }
            weights.step += 1.0;
        }
    }
    Ok(weights.averaged(TrainingMeta { epochs, seed }))
}

/// Reads the role sidecar JSONL (`{"id": str, "roles": [str]}`).
pub fn read_role_sidecar(reader: impl BufRead) -> Result<Vec<RoleSequence>, RolesError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: RoleSequence =
            serde_json::from_str(&line).map_err(|e| RolesError::MalformedSidecar {
                line: n + 1,
                reason: e.to_string(),
            })?;
        out.push(seq);
    }
    Ok(out)
}

pub fn load_role_sidecar(path: impl AsRef<Path>) -> Result<Vec<RoleSequence>, RolesError> {
    let file = std::fs::File::open(path)?;
    read_role_sidecar(std::io::BufReader::new(file))
}

pub fn write_role_sidecar(seqs: &[RoleSequence], mut writer: impl Write) -> Result<(), RolesError> {
    for seq in seqs {
        serde_json::to_writer(&mut writer, seq)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Attaches sidecar roles to documents by id.
pub fn attach_roles(docs: &mut [Document], seqs: &[RoleSequence]) -> Result<(), RolesError> {
    let by_id: HashMap<&str, &RoleSequence> =
        seqs.iter().map(|s| (s.doc_id.as_str(), s)).collect();
    for doc in docs.iter_mut() {
        let seq = by_id.get(doc.id.as_str()).ok_or_else(|| {
            RolesError::DimensionMismatch(format!("no roles for document {}", doc.id))
        })?;
        if seq.roles.len() != doc.sentences.len() {
            return Err(RolesError::DimensionMismatch(format!(
                "document {} has {} sentences but {} roles",
                doc.id,
                doc.sentences.len(),
                seq.roles.len()
            )));
        }
        doc.apply_roles(seq);
    }
    Ok(())
}
