//! Case documents: ingestion, sentence segmentation, tokenization, entity
//! masking and outcome stripping.
//!
//! Segmentation is rule based. A sentence ends at `.`, `?` or `;` when the
//! next whitespace-delimited word starts with an uppercase letter or a digit,
//! unless the word carrying the punctuation is one of the protected legal
//! abbreviations (`Sec.`, `vs.`, `Hon.` ...). Tokens are whitespace-split
//! words with leading and trailing punctuation detached as separate tokens.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::roles::RoleSequence;

/// Abbreviations after which a terminal period never ends a sentence.
pub const PROTECTED_ABBREVIATIONS: &[&str] = &[
    "No.", "Nos.", "vs.", "v.", "Sec.", "Art.", "Hon.", "Mr.", "Mrs.", "Dr.", "Ors.", "Anr.",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document {id:?} contains no sentences")]
    EmptyDocument { id: String },
    #[error("entity span out of range (sentence {sentence}, tokens {start}..{end}): {reason}")]
    SpanOutOfRange {
        sentence: usize,
        start: usize,
        end: usize,
        reason: String,
    },
    #[error("malformed line {line}: {reason}: {content}")]
    MalformedLine {
        line: usize,
        reason: String,
        content: String,
    },
    #[error("duplicate document id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Functional category of a sentence in a judgment.
///
/// The declaration order is the enumeration index used for tie-breaking in
/// decoding; `Fact` is role 0.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum RhetoricalRole {
    Fact,
    Issue,
    Argument,
    Statute,
    Precedent,
    RatioOfDecision,
    RulingByLowerCourt,
    RulingByPresentCourt,
    None,
}

impl RhetoricalRole {
    pub const ALL: [RhetoricalRole; 9] = [
        RhetoricalRole::Fact,
        RhetoricalRole::Issue,
        RhetoricalRole::Argument,
        RhetoricalRole::Statute,
        RhetoricalRole::Precedent,
        RhetoricalRole::RatioOfDecision,
        RhetoricalRole::RulingByLowerCourt,
        RhetoricalRole::RulingByPresentCourt,
        RhetoricalRole::None,
    ];
    pub const COUNT: usize = 9;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RhetoricalRole::Fact => "Fact",
            RhetoricalRole::Issue => "Issue",
            RhetoricalRole::Argument => "Argument",
            RhetoricalRole::Statute => "Statute",
            RhetoricalRole::Precedent => "Precedent",
            RhetoricalRole::RatioOfDecision => "RatioOfDecision",
            RhetoricalRole::RulingByLowerCourt => "RulingByLowerCourt",
            RhetoricalRole::RulingByPresentCourt => "RulingByPresentCourt",
            RhetoricalRole::None => "None",
        }
    }
}

impl fmt::Display for RhetoricalRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RhetoricalRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown rhetorical role {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<RhetoricalRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_score: Option<f64>,
}

impl Sentence {
    /// Role used by the input selectors; untagged sentences count as `None`.
    pub fn role_or_none(&self) -> RhetoricalRole {
        self.role.unwrap_or(RhetoricalRole::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default)]
    pub split: Split,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    /// Sentence texts joined by single spaces. Re-parsing this text yields the
    /// same sentence segmentation.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// Copies role labels and decode margins onto the sentences.
    ///
    /// Panics if the sequence length differs from the sentence count.
    pub fn with_roles(mut self, roles: &RoleSequence) -> Self {
        self.apply_roles(roles);
        self
    }

    pub fn apply_roles(&mut self, roles: &RoleSequence) {
        assert_eq!(
            roles.roles.len(),
            self.sentences.len(),
            "role sequence length must match sentence count for {}",
            self.id
        );
        for (i, s) in self.sentences.iter_mut().enumerate() {
            s.role = Some(roles.roles[i]);
            s.role_score = roles.scores.get(i).copied();
        }
    }

    pub fn roles(&self) -> Vec<RhetoricalRole> {
        self.sentences.iter().map(Sentence::role_or_none).collect()
    }

    /// Drops the listed sentences and renumbers the rest. Used for
    /// what-if exclusion.
    pub fn without_sentences(&self, excluded: &HashSet<usize>) -> Document {
        let mut doc = self.clone();
        doc.sentences = self
            .sentences
            .iter()
            .filter(|s| !excluded.contains(&s.index))
            .cloned()
            .enumerate()
            .map(|(i, mut s)| {
                s.index = i;
                s
            })
            .collect();
        doc
    }
}

/// An ordered subset of a document's sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct DocView<'a> {
    doc: &'a Document,
    indices: Vec<usize>,
}

impl<'a> DocView<'a> {
    pub fn full(doc: &'a Document) -> Self {
        Self {
            doc,
            indices: (0..doc.sentences.len()).collect(),
        }
    }

    /// Builds a view from arbitrary indices; out-of-range entries are dropped,
    /// the rest sorted and deduplicated.
    pub fn from_indices(doc: &'a Document, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices
            .into_iter()
            .filter(|&i| i < doc.sentences.len())
            .collect();
        indices.sort_unstable();
        indices.dedup();
        Self { doc, indices }
    }

    pub fn document(&self) -> &'a Document {
        self.doc
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &'a Sentence> + '_ {
        self.indices.iter().map(move |&i| &self.doc.sentences[i])
    }

    pub fn tokens(&self) -> Vec<&'a str> {
        self.sentences()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect()
    }

    pub fn word_count(&self) -> usize {
        self.sentences().map(|s| s.tokens.len()).sum()
    }

    pub fn retain(&self, mut keep: impl FnMut(&Sentence) -> bool) -> DocView<'a> {
        DocView {
            doc: self.doc,
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|&i| keep(&self.doc.sentences[i]))
                .collect(),
        }
    }

    pub fn without(&self, index: usize) -> DocView<'a> {
        self.retain(|s| s.index != index)
    }

    /// Keeps only sentence positions that are also in `subset` (positions
    /// relative to the document).
    pub fn restrict_to(&self, subset: &[usize]) -> DocView<'a> {
        let keep: HashSet<usize> = subset.iter().copied().collect();
        self.retain(|s| keep.contains(&s.index))
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
                | '\u{00AB}' | '\u{00BB}' | '\u{00A7}'
        )
}

fn ends_sentence(word: &str) -> bool {
    matches!(word.chars().last(), Some('.' | '?' | ';'))
}

fn is_protected(word: &str) -> bool {
    let core = word.trim_start_matches(is_punct_leading);
    PROTECTED_ABBREVIATIONS.contains(&core)
}

fn is_punct_leading(c: char) -> bool {
    is_punct(c) && c != '.'
}

fn starts_sentence(word: &str) -> bool {
    word.chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

/// Splits one whitespace-free word into tokens, detaching leading and
/// trailing punctuation characters one token each.
pub fn tokenize_word(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    while start < chars.len() && is_punct(chars[start]) {
        out.push(chars[start].to_string());
        start += 1;
    }
    if start == chars.len() {
        return;
    }
    let mut end = chars.len();
    while end > start && is_punct(chars[end - 1]) {
        end -= 1;
    }
    out.push(chars[start..end].iter().collect());
    out.extend(chars[end..].iter().map(|c| c.to_string()));
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        tokenize_word(word, &mut tokens);
    }
    tokens
}

/// Splits text into sentence strings with whitespace collapsed.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut sentences = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, &word) in words.iter().enumerate() {
        current.push(word);
        let boundary = ends_sentence(word)
            && !is_protected(word)
            && words.get(i + 1).is_some_and(|next| starts_sentence(next));
        if boundary {
            sentences.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        sentences.push(current.join(" "));
    }
    sentences
}

/// Parses raw case text into a [`Document`] with split `train`, no label and
/// no roles.
pub fn parse_document(raw: &str, id: &str) -> Result<Document, CorpusError> {
    let normalized: String = raw.nfc().collect();
    let sentences: Vec<Sentence> = segment_sentences(&normalized)
        .into_iter()
        .map(|text| {
            let tokens = tokenize(&text);
            (text, tokens)
        })
        .filter(|(_, tokens)| !tokens.is_empty())
        .enumerate()
        .map(|(index, (text, tokens))| Sentence {
            index,
            text,
            tokens,
            role: None,
            role_score: None,
        })
        .collect();
    if sentences.is_empty() {
        return Err(CorpusError::EmptyDocument { id: id.to_string() });
    }
    Ok(Document {
        id: id.to_string(),
        sentences,
        label: None,
        split: Split::Train,
        meta: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityCategory {
    Person,
    Judge,
    Org,
    Loc,
    Date,
    Caseref,
    Other,
}

impl EntityCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityCategory::Person => "PERSON",
            EntityCategory::Judge => "JUDGE",
            EntityCategory::Org => "ORG",
            EntityCategory::Loc => "LOC",
            EntityCategory::Date => "DATE",
            EntityCategory::Caseref => "CASEREF",
            EntityCategory::Other => "OTHER",
        }
    }
}

impl FromStr for EntityCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown entity category {s:?}"))
    }
}

/// Half-open token range inside one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    #[serde(rename = "sentence")]
    pub sentence_index: usize,
    #[serde(rename = "start")]
    pub token_start: usize,
    #[serde(rename = "end")]
    pub token_end: usize,
    pub category: EntityCategory,
}

/// Whether `token` is a masking placeholder such as `<PERSON_1>`.
pub fn is_placeholder(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

fn validate_spans(doc: &Document, spans: &[EntitySpan]) -> Result<(), CorpusError> {
    let out_of_range = |s: &EntitySpan, reason: &str| CorpusError::SpanOutOfRange {
        sentence: s.sentence_index,
        start: s.token_start,
        end: s.token_end,
        reason: reason.to_string(),
    };
    let mut per_sentence: BTreeMap<usize, Vec<&EntitySpan>> = BTreeMap::new();
    for span in spans {
        let sentence = doc
            .sentences
            .get(span.sentence_index)
            .ok_or_else(|| out_of_range(span, "no such sentence"))?;
        if span.token_start >= span.token_end || span.token_end > sentence.tokens.len() {
            return Err(out_of_range(span, "token range outside sentence"));
        }
        per_sentence.entry(span.sentence_index).or_default().push(span);
    }
    for list in per_sentence.values_mut() {
        list.sort_by_key(|s| s.token_start);
        if let Some(pair) = list.windows(2).find(|w| w[1].token_start < w[0].token_end) {
            return Err(out_of_range(pair[1], "overlaps another span"));
        }
    }
    Ok(())
}

/// Replaces each span with a single `<CATEGORY_k>` placeholder.
///
/// `k` counts distinct lowercased surface forms per category in document
/// order, starting at 1. Masked sentences have their text rebuilt from tokens.
pub fn mask_entities(doc: &Document, spans: &[EntitySpan]) -> Result<Document, CorpusError> {
    validate_spans(doc, spans)?;
    if spans.is_empty() {
        return Ok(doc.clone());
    }
    let mut ordered: Vec<&EntitySpan> = spans.iter().collect();
    ordered.sort_by_key(|s| (s.sentence_index, s.token_start));

    let mut numbering: HashMap<(EntityCategory, String), usize> = HashMap::new();
    let mut next_k: HashMap<EntityCategory, usize> = HashMap::new();
    let mut replacements: BTreeMap<usize, Vec<(usize, usize, String)>> = BTreeMap::new();
    for span in ordered {
        let sentence = &doc.sentences[span.sentence_index];
        let surface = sentence.tokens[span.token_start..span.token_end]
            .join(" ")
            .to_lowercase();
        let k = *numbering.entry((span.category, surface)).or_insert_with(|| {
            let counter = next_k.entry(span.category).or_insert(0);
            *counter += 1;
            *counter
        });
        replacements.entry(span.sentence_index).or_default().push((
            span.token_start,
            span.token_end,
            format!("<{}_{}>", span.category.as_str(), k),
        ));
    }

    let mut masked = doc.clone();
    for (sentence_index, reps) in replacements {
        let sentence = &mut masked.sentences[sentence_index];
        let mut tokens = Vec::with_capacity(sentence.tokens.len());
        let mut cursor = 0;
        for (start, end, placeholder) in reps {
            tokens.extend(sentence.tokens[cursor..start].iter().cloned());
            tokens.push(placeholder);
            cursor = end;
        }
        tokens.extend(sentence.tokens[cursor..].iter().cloned());
        sentence.text = tokens.join(" ");
        sentence.tokens = tokens;
    }
    Ok(masked)
}

fn builtin_patterns() -> &'static [(EntityCategory, Regex)] {
    static PATTERNS: OnceLock<Vec<(EntityCategory, Regex)>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let month = "(?:January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec)";
        let raw = [
            // Case references come first so they win over embedded years.
            (
                EntityCategory::Caseref,
                r"\b(?:Civil|Criminal) Appeal (?:\( [A-Za-z]+ \) )?Nos? \. \d+(?: (?:-|and|&) \d+)? of \d{4}\b".to_string(),
            ),
            (
                EntityCategory::Caseref,
                r"\b(?:Writ Petition|Special Leave Petition|SLP)(?: \( [A-Za-z]+ \))? Nos? \. \d+ of \d{4}\b".to_string(),
            ),
            (EntityCategory::Caseref, r"\bAIR \d{4} [A-Z][A-Za-z]* \d+\b".to_string()),
            (EntityCategory::Caseref, r"\( \d{4} \) \d+ SCC \d+\b".to_string()),
            (EntityCategory::Date, r"\b\d{1,2}[./-]\d{1,2}[./-]\d{2,4}\b".to_string()),
            (
                EntityCategory::Date,
                format!(r"\b\d{{1,2}}(?:st|nd|rd|th)? {month}(?: ,)? \d{{4}}\b"),
            ),
            (EntityCategory::Date, format!(r"\b{month} \d{{1,2}} , \d{{4}}\b")),
        ];
        raw.into_iter()
            .map(|(c, p)| (c, Regex::new(&p).expect("built-in entity pattern")))
            .collect()
    })
}

/// Pattern-based provider covering DATE and CASEREF only. Matches must align
/// with token boundaries and never include placeholders.
pub fn detect_builtin_entities(doc: &Document) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    for sentence in &doc.sentences {
        let joined = sentence.tokens.join(" ");
        let mut starts = HashMap::new();
        let mut ends = HashMap::new();
        let mut offset = 0;
        for (i, tok) in sentence.tokens.iter().enumerate() {
            starts.insert(offset, i);
            ends.insert(offset + tok.len(), i + 1);
            offset += tok.len() + 1;
        }
        let mut taken = vec![false; sentence.tokens.len()];
        let mut found = Vec::new();
        for (category, re) in builtin_patterns() {
            for m in re.find_iter(&joined) {
                let (Some(&start), Some(&end)) = (starts.get(&m.start()), ends.get(&m.end())) else {
                    continue;
                };
                if taken[start..end].iter().any(|&t| t)
                    || sentence.tokens[start..end].iter().any(|t| is_placeholder(t))
                {
                    continue;
                }
                taken[start..end].iter_mut().for_each(|t| *t = true);
                found.push(EntitySpan {
                    sentence_index: sentence.index,
                    token_start: start,
                    token_end: end,
                    category: *category,
                });
            }
        }
        found.sort_by_key(|s| s.token_start);
        spans.extend(found);
    }
    spans
}

pub fn strip_outcome<'a>(doc: &'a Document, roles: &RoleSequence) -> DocView<'a> {
    DocView::from_indices(
        doc,
        roles
            .roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r != RhetoricalRole::RulingByPresentCourt)
            .map(|(i, _)| i),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusLine {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<u8>,
    #[serde(default)]
    split: Option<Split>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
struct CorpusLineOut<'a> {
    id: &'a str,
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    split: Split,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a BTreeMap<String, String>,
}

fn truncate_for_echo(line: &str) -> String {
    const MAX: usize = 200;
    if line.chars().count() <= MAX {
        line.to_string()
    } else {
        let head: String = line.chars().take(MAX).collect();
        format!("{head}...")
    }
}

/// Parses corpus JSONL from a reader. Blank lines are skipped; line numbers
/// are 1-based.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CorpusError::MalformedLine {
            line: line_no,
            reason,
            content: truncate_for_echo(&line),
        };
        let parsed: CorpusLine =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if let Some(label) = parsed.label {
            if label > 1 {
                return Err(malformed(format!("label must be 0 or 1, got {label}")));
            }
        }
        if !seen.insert(parsed.id.clone()) {
            return Err(CorpusError::DuplicateId {
                id: parsed.id,
                line: line_no,
            });
        }
        let mut doc =
            parse_document(&parsed.text, &parsed.id).map_err(|e| malformed(e.to_string()))?;
        doc.label = parsed.label;
        doc.split = parsed.split.unwrap_or_default();
        doc.meta = parsed.meta;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

/// Writes documents in the corpus JSONL format accepted by [`read_corpus`].
pub fn write_corpus(docs: &[Document], mut writer: impl Write) -> Result<(), CorpusError> {
    for doc in docs {
        let line = CorpusLineOut {
            id: &doc.id,
            text: doc.text(),
            label: doc.label,
            split: doc.split,
            meta: &doc.meta,
        };
        serde_json::to_writer(&mut writer, &line).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct EntitySidecarLine {
    id: String,
    spans: Vec<EntitySpan>,
}

/// Reads the entity sidecar JSONL (`{"id", "spans": [...]}`) keyed by
/// document id.
pub fn read_entity_sidecar(
    reader: impl BufRead,
) -> Result<HashMap<String, Vec<EntitySpan>>, CorpusError> {
    let mut out: HashMap<String, Vec<EntitySpan>> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EntitySidecarLine =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: n + 1,
                reason: e.to_string(),
                content: truncate_for_echo(&line),
            })?;
        out.entry(parsed.id).or_default().extend(parsed.spans);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &Sentence) -> Vec<&str> {
        s.tokens.iter().map(String::as_str).collect()
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            parse_document("", "d0"),
            Err(CorpusError::EmptyDocument { .. })
        ));
        assert!(matches!(
            parse_document("  \n\t ", "d0"),
            Err(CorpusError::EmptyDocument { .. })
        ));
    }

    #[test]
    fn two_sentences_with_detached_punctuation() {
        let doc = parse_document("The appeal is allowed. Costs are waived.", "d1").unwrap();
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(toks(&doc.sentences[0]), ["The", "appeal", "is", "allowed", "."]);
        assert_eq!(toks(&doc.sentences[1]), ["Costs", "are", "waived", "."]);
        assert_eq!(doc.sentences[1].index, 1);
    }

    #[test]
    fn protected_abbreviation_does_not_split() {
        let doc = parse_document("Under Sec. 302 the appellant was convicted.", "d2").unwrap();
        assert_eq!(doc.sentences.len(), 1);
        let doc = parse_document("See Mr. Sharma and (Art. 21) here. Next one.", "d").unwrap();
        assert_eq!(doc.sentences.len(), 2);
    }

    #[test]
    fn split_requires_capital_or_digit() {
        let doc = parse_document("It was filed; thereafter it was heard. 2 witnesses came? Yes.", "d")
            .unwrap();
        let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(
            texts,
            ["It was filed; thereafter it was heard.", "2 witnesses came?", "Yes."]
        );
    }

    #[test]
    fn whitespace_is_collapsed_and_text_is_nfc() {
        let doc = parse_document("A  cafe\u{0301}\n  was   sold.", "d").unwrap();
        assert_eq!(doc.sentences[0].text, "A caf\u{e9} was sold.");
    }

    #[test]
    fn punctuation_only_words_become_single_char_tokens() {
        assert_eq!(tokenize("(\"granted-marker\"), ..."), [
            "(", "\"", "granted-marker", "\"", ")", ",", ".", ".", "."
        ]);
    }

    fn span(sentence: usize, start: usize, end: usize, category: EntityCategory) -> EntitySpan {
        EntitySpan {
            sentence_index: sentence,
            token_start: start,
            token_end: end,
            category,
        }
    }

    #[test]
    fn masking_without_spans_is_identity() {
        let doc = parse_document("Ram Lal filed a suit. It failed.", "d").unwrap();
        assert_eq!(mask_entities(&doc, &[]).unwrap(), doc);
    }

    #[test]
    fn same_surface_reuses_number() {
        let doc = parse_document(
            "Ram Lal filed a suit. It failed. He appealed. Then ram lal won.",
            "d",
        )
        .unwrap();
        let masked = mask_entities(
            &doc,
            &[
                span(0, 0, 2, EntityCategory::Person),
                span(3, 1, 3, EntityCategory::Person),
            ],
        )
        .unwrap();
        assert_eq!(masked.sentences[0].tokens[0], "<PERSON_1>");
        assert_eq!(masked.sentences[3].tokens[1], "<PERSON_1>");
        assert_eq!(masked.sentences[0].text, "<PERSON_1> filed a suit .");
    }

    #[test]
    fn distinct_surfaces_get_increasing_numbers() {
        let doc = parse_document("Ram Lal sued Shyam in Delhi.", "d").unwrap();
        let masked = mask_entities(
            &doc,
            &[
                span(0, 3, 4, EntityCategory::Person),
                span(0, 0, 2, EntityCategory::Person),
                span(0, 5, 6, EntityCategory::Loc),
            ],
        )
        .unwrap();
        assert_eq!(
            toks(&masked.sentences[0]),
            ["<PERSON_1>", "sued", "<PERSON_2>", "in", "<LOC_1>", "."]
        );
    }

    #[test]
    fn bad_spans_are_rejected() {
        let doc = parse_document("Ram Lal sued Shyam.", "d").unwrap();
        for bad in [
            span(1, 0, 1, EntityCategory::Person),
            span(0, 2, 2, EntityCategory::Person),
            span(0, 3, 9, EntityCategory::Person),
        ] {
            assert!(matches!(
                mask_entities(&doc, &[bad]),
                Err(CorpusError::SpanOutOfRange { .. })
            ));
        }
        let overlapping = [
            span(0, 0, 2, EntityCategory::Person),
            span(0, 1, 3, EntityCategory::Person),
        ];
        assert!(mask_entities(&doc, &overlapping).is_err());
    }

    #[test]
    fn builtin_provider_finds_dates_and_case_refs() {
        let doc = parse_document(
            "On 12.03.1998 the appellant filed Civil Appeal No. 1234 of 2005 citing AIR 1990 SC 123. Decided on 5th March, 2001.",
            "d",
        )
        .unwrap();
        let spans = detect_builtin_entities(&doc);
        let cats: Vec<_> = spans.iter().map(|s| s.category).collect();
        assert_eq!(
            cats,
            [
                EntityCategory::Date,
                EntityCategory::Caseref,
                EntityCategory::Caseref,
                EntityCategory::Date
            ]
        );
        let masked = mask_entities(&doc, &spans).unwrap();
        assert_eq!(
            masked.sentences[0].text,
            "On <DATE_1> the appellant filed <CASEREF_1> citing <CASEREF_2> ."
        );
        assert_eq!(masked.sentences[1].text, "Decided on <DATE_2> .");
        assert!(detect_builtin_entities(&masked).is_empty());
    }

    #[test]
    fn strip_outcome_drops_present_court_rulings() {
        use RhetoricalRole::*;
        let doc = parse_document("Facts here. The appeal is allowed.", "d").unwrap();
        let seq = |roles: Vec<RhetoricalRole>| RoleSequence::new("d", roles);
        assert_eq!(strip_outcome(&doc, &seq(vec![Fact, Issue])).indices(), [0, 1]);
        assert_eq!(
            strip_outcome(&doc, &seq(vec![Fact, RulingByPresentCourt])).indices(),
            [0]
        );
        assert!(strip_outcome(
            &doc,
            &seq(vec![RulingByPresentCourt, RulingByPresentCourt])
        )
        .is_empty());
    }

    #[test]
    fn corpus_reader_handles_errors() {
        assert!(read_corpus("".as_bytes()).unwrap().is_empty());
        match read_corpus(r#"{"text": "A case."}"#.as_bytes()) {
            Err(CorpusError::MalformedLine { line, content, .. }) => {
                assert_eq!(line, 1);
                assert!(content.contains("A case."));
            }
            other => panic!("expected MalformedLine, got {other:?}"),
        }
        let dup = "{\"id\":\"a\",\"text\":\"X.\"}\n{\"id\":\"a\",\"text\":\"Y.\"}\n";
        assert!(matches!(
            read_corpus(dup.as_bytes()),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
        let bad_label = r#"{"id":"a","text":"X.","label":2}"#;
        assert!(matches!(
            read_corpus(bad_label.as_bytes()),
            Err(CorpusError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn corpus_splits_and_labels_round_trip() {
        let input = concat!(
            "{\"id\":\"a\",\"text\":\"The appeal is allowed. Costs.\",\"label\":1,\"split\":\"train\"}\n",
            "{\"id\":\"b\",\"text\":\"Facts.\",\"split\":\"dev\"}\n",
            "{\"id\":\"c\",\"text\":\"Sec. 3 applies.\",\"label\":0,\"split\":\"test\"}\n",
        );
        let docs = read_corpus(input.as_bytes()).unwrap();
        let splits: Vec<Split> = docs.iter().map(|d| d.split).collect();
        assert_eq!(splits, [Split::Train, Split::Dev, Split::Test]);
        assert_eq!(docs[1].label, None);
        let mut buf = Vec::new();
        write_corpus(&docs, &mut buf).unwrap();
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), docs);
    }

    #[test]
    fn default_split_is_train() {
        let docs = read_corpus(r#"{"id":"a","text":"X."}"#.as_bytes()).unwrap();
        assert_eq!(docs[0].split, Split::Train);
    }

    #[test]
    fn role_strings_are_exact() {
        for role in RhetoricalRole::ALL {
            let json = serde_json::to_string(&role).unwrap();
            assert_eq!(json, format!("\"{}\"", role.as_str()));
            assert_eq!(role.as_str().parse::<RhetoricalRole>().unwrap(), role);
        }
        assert_eq!(RhetoricalRole::from_index(0), Some(RhetoricalRole::Fact));
    }
}
