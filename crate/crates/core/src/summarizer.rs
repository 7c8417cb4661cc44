//! Role-weighted extractive summarization as a budgeted 0/1 selection.
//!
//! maximize   sum_i x_i * score_i
//! subject to sum_i x_i * len_i <= budget
//!            sum_{i: role_i = r} x_i >= min(quota_r, count_r)   for every role r
//!            x_i in {0, 1}
//!
//! Up to [`EXACT_LIMIT`] sentences the program is solved exactly by
//! depth-first branch-and-bound with a fractional-knapsack bound. Larger
//! inputs use a density greedy that keeps the better of the greedy fill and
//! the best single item.
//!
//! Among optimal selections the one containing the lowest index of the
//! symmetric difference wins (i.e. the lexicographically largest incidence
//! vector). Scores that differ by less than a relative 1e-9 count as ties.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{DocView, Document, RhetoricalRole};
use crate::roles::RoleSequence;

/// Largest instance solved exactly.
pub const EXACT_LIMIT: usize = 30;
/// Share of the document's words used when no explicit budget is given.
pub const DEFAULT_BUDGET_RATIO: f64 = 0.34;
pub const DEFAULT_LAMBDA: f64 = 4.0;

const ROLES: usize = RhetoricalRole::COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("input lengths differ: {0}")]
    LengthMismatch(String),
    #[error("budget must be at least 1 word")]
    InvalidBudget,
    #[error("invalid summary spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleWeightScheme {
    pub name: String,
    pub weights: BTreeMap<RhetoricalRole, u32>,
}

impl RoleWeightScheme {
    /// Default segment weights.
    pub fn variation1() -> Self {
        use RhetoricalRole::*;
        Self {
            name: "variation1".to_string(),
            weights: BTreeMap::from([
                (RulingByPresentCourt, 128),
                (Issue, 64),
                (Fact, 32),
                (Statute, 8),
                (RatioOfDecision, 8),
                (Precedent, 8),
                (Argument, 2),
            ]),
        }
    }

    /// Weights favouring the ruling and the ratio of the decision.
    pub fn variation2() -> Self {
        use RhetoricalRole::*;
        Self {
            name: "variation2".to_string(),
            weights: BTreeMap::from([
                (RulingByPresentCourt, 128),
                (RatioOfDecision, 64),
                (Argument, 32),
                (Statute, 8),
                (Issue, 8),
                (Fact, 8),
                (Precedent, 2),
            ]),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "variation1" => Some(Self::variation1()),
            "variation2" => Some(Self::variation2()),
            _ => None,
        }
    }

    pub fn builtins() -> Vec<Self> {
        vec![Self::variation1(), Self::variation2()]
    }

    pub fn custom(weights: BTreeMap<RhetoricalRole, u32>) -> Self {
        Self {
            name: "custom".to_string(),
            weights,
        }
    }

    pub fn weight(&self, role: RhetoricalRole) -> u32 {
        self.weights.get(&role).copied().unwrap_or(0)
    }

    fn is_builtin(&self) -> bool {
        Self::builtin(&self.name).as_ref() == Some(self)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SchemeRepr {
    Name(String),
    Map(BTreeMap<RhetoricalRole, u32>),
}

impl Serialize for RoleWeightScheme {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_builtin() {
            SchemeRepr::Name(self.name.clone()).serialize(serializer)
        } else {
            SchemeRepr::Map(self.weights.clone()).serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for RoleWeightScheme {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match SchemeRepr::deserialize(deserializer)? {
            SchemeRepr::Name(name) => RoleWeightScheme::builtin(&name)
                .ok_or_else(|| D::Error::custom(format!("unknown weight scheme {name:?}"))),
            SchemeRepr::Map(weights) => Ok(RoleWeightScheme::custom(weights)),
        }
    }
}

fn default_quotas() -> BTreeMap<RhetoricalRole, u32> {
    BTreeMap::from([
        (RhetoricalRole::RulingByPresentCourt, 1),
        (RhetoricalRole::Issue, 1),
        (RhetoricalRole::Fact, 1),
    ])
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_scheme() -> RoleWeightScheme {
    RoleWeightScheme::variation1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarySpec {
    #[serde(default = "default_scheme")]
    pub scheme: RoleWeightScheme,
    /// `None` means [`DEFAULT_BUDGET_RATIO`] of the input's words.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_words: Option<u32>,
    #[serde(default = "default_quotas")]
    pub quotas: BTreeMap<RhetoricalRole, u32>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

impl Default for SummarySpec {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            budget_words: None,
            quotas: default_quotas(),
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl SummarySpec {
    pub fn with_scheme(scheme: RoleWeightScheme) -> Self {
        Self {
            scheme,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SummaryError> {
        if self.budget_words == Some(0) {
            return Err(SummaryError::InvalidBudget);
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(SummaryError::InvalidSpec(format!(
                "lambda must be a non-negative number, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn budget_for(&self, total_words: usize) -> u32 {
        self.budget_words.unwrap_or_else(|| {
            ((DEFAULT_BUDGET_RATIO * total_words as f64).round() as u32).max(1)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub selected: Vec<usize>,
    pub objective: f64,
    pub solver: SolverKind,
    /// Set when the quota-forced sentences alone exceed the budget.
    pub budget_violated: bool,
}

/// Fixed English stopword list (version 1).
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "neither",
    "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "said", "same", "shall", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "thus", "to", "too", "under", "until", "up",
    "upon", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
];

pub fn is_content_word(token: &str) -> bool {
    token.chars().count() >= 3 && !STOPWORDS.contains(&token.to_lowercase().as_str())
}

/// Share of a sentence's tokens that are content words.
pub fn content_word_density<S: AsRef<str>>(tokens: &[S]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let content = tokens.iter().filter(|t| is_content_word(t.as_ref())).count();
    content as f64 / tokens.len() as f64
}

fn score_sentence<S: AsRef<str>>(tokens: &[S], role: RhetoricalRole, spec: &SummarySpec) -> f64 {
    spec.scheme.weight(role) as f64 + spec.lambda * content_word_density(tokens)
}

pub fn sentence_scores(doc: &Document, roles: &RoleSequence, spec: &SummarySpec) -> Vec<f64> {
    doc.sentences
        .iter()
        .zip(&roles.roles)
        .map(|(s, &r)| score_sentence(&s.tokens, r, spec))
        .collect()
}

/// Strict "better" under the selection order: higher objective, then the
/// tie rule on incidence vectors.
fn better(a_value: f64, a: &[bool], b_value: f64, b: &[bool]) -> bool {
    let tol = tolerance(a_value.abs().max(b_value.abs()));
    if a_value > b_value + tol {
        return true;
    }
    if a_value < b_value - tol {
        return false;
    }
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(&x, _)| x)
}

fn tolerance(scale: f64) -> f64 {
    1e-9 * scale.max(1.0)
}

struct Problem<'a> {
    lengths: &'a [u32],
    scores: &'a [f64],
    roles: Vec<usize>,
    budget: u64,
    need: [usize; ROLES],
}

impl<'a> Problem<'a> {
    fn new(
        lengths: &'a [u32],
        scores: &'a [f64],
        role_of: &[RhetoricalRole],
        budget: u32,
        quotas: &BTreeMap<RhetoricalRole, u32>,
    ) -> Result<Self, SummaryError> {
        if lengths.len() != scores.len() || lengths.len() != role_of.len() {
            return Err(SummaryError::LengthMismatch(format!(
                "{} lengths, {} scores, {} roles",
                lengths.len(),
                scores.len(),
                role_of.len()
            )));
        }
        if budget == 0 {
            return Err(SummaryError::InvalidBudget);
        }
        let roles: Vec<usize> = role_of.iter().map(|r| r.index()).collect();
        let mut available = [0usize; ROLES];
        for &r in &roles {
            available[r] += 1;
        }
        let mut need = [0usize; ROLES];
        for (role, &q) in quotas {
            need[role.index()] = (q as usize).min(available[role.index()]);
        }
        Ok(Self {
            lengths,
            scores,
            roles,
            budget: budget as u64,
            need,
        })
    }

    fn n(&self) -> usize {
        self.lengths.len()
    }

    fn objective(&self, chosen: &[bool]) -> f64 {
        chosen
            .iter()
            .zip(self.scores)
            .filter(|(c, _)| **c)
            .map(|(_, s)| *s)
            .sum()
    }

    fn length_of(&self, chosen: &[bool]) -> u64 {
        chosen
            .iter()
            .zip(self.lengths)
            .filter(|(c, _)| **c)
            .map(|(_, &l)| l as u64)
            .sum()
    }

    /// Items sorted by score density, highest first; ties to lower index.
    fn density_order(&self, items: impl Iterator<Item = usize>) -> Vec<usize> {
        let density = |i: usize| {
            if self.lengths[i] == 0 {
                f64::INFINITY
            } else {
                self.scores[i] / self.lengths[i] as f64
            }
        };
        let mut order: Vec<usize> = items.collect();
        order.sort_by(|&a, &b| density(b).total_cmp(&density(a)).then(a.cmp(&b)));
        order
    }

    /// Per role, the quota-many shortest sentences (ties: higher score, then
    /// lower index).
    fn cheapest_quota_set(&self) -> Vec<bool> {
        let mut chosen = vec![false; self.n()];
        for role in 0..ROLES {
            if self.need[role] == 0 {
                continue;
            }
            let mut members: Vec<usize> =
                (0..self.n()).filter(|&i| self.roles[i] == role).collect();
            members.sort_by(|&a, &b| {
                self.lengths[a]
                    .cmp(&self.lengths[b])
                    .then(self.scores[b].total_cmp(&self.scores[a]))
                    .then(a.cmp(&b))
            });
            for &i in members.iter().take(self.need[role]) {
                chosen[i] = true;
            }
        }
        chosen
    }

    /// Per role, the quota-many highest-scoring sentences (ties: lower index).
    fn best_quota_set(&self) -> Vec<bool> {
        let mut chosen = vec![false; self.n()];
        for role in 0..ROLES {
            if self.need[role] == 0 {
                continue;
            }
            let mut members: Vec<usize> =
                (0..self.n()).filter(|&i| self.roles[i] == role).collect();
            members.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
            for &i in members.iter().take(self.need[role]) {
                chosen[i] = true;
            }
        }
        chosen
    }

    fn satisfies_quotas(&self, chosen: &[bool]) -> bool {
        let mut have = [0usize; ROLES];
        for (i, &c) in chosen.iter().enumerate() {
            if c {
                have[self.roles[i]] += 1;
            }
        }
        (0..ROLES).all(|r| have[r] >= self.need[r])
    }

    /// Adds items in density order while they fit.
    fn fill_by_density(&self, chosen: &mut [bool]) {
        let mut used = self.length_of(chosen);
        for i in self.density_order((0..self.n()).filter(|&i| !chosen[i])) {
            if self.scores[i] < 0.0 {
                continue;
            }
            if used + self.lengths[i] as u64 <= self.budget {
                chosen[i] = true;
                used += self.lengths[i] as u64;
            }
        }
    }

    fn summary(&self, chosen: &[bool], solver: SolverKind, budget_violated: bool) -> Summary {
        Summary {
            selected: (0..self.n()).filter(|&i| chosen[i]).collect(),
            objective: self.objective(chosen),
            solver,
            budget_violated,
        }
    }

    /// Quota sentences cannot fit: return the cheapest quota set, flagged.
    fn forced_result(&self, solver: SolverKind) -> Option<Summary> {
        let forced = self.cheapest_quota_set();
        (self.length_of(&forced) > self.budget).then(|| self.summary(&forced, solver, true))
    }
}

/// Depth-first branch-and-bound over the undecided items.
struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    order: Vec<usize>,
    /// remaining[d][r]: prefix sums of sorted lengths of role-r items in
    /// order[d..].
    remaining: Vec<Vec<Vec<u64>>>,
    cutoff: Cutoff,
    best: Option<(f64, Vec<bool>)>,
}

#[derive(Clone, Copy)]
enum Cutoff {
    /// Maximise; prune subtrees that cannot beat the incumbent.
    Improve,
    /// Stop at the first completion reaching this value.
    Reach(f64),
}

struct Node {
    chosen: Vec<bool>,
    used: u64,
    value: f64,
    need: [usize; ROLES],
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(problem: &'p Problem<'a>, undecided: Vec<usize>, cutoff: Cutoff) -> Self {
        let order = problem.density_order(undecided.into_iter());
        let mut remaining = Vec::with_capacity(order.len() + 1);
        for d in 0..=order.len() {
            let mut per_role = vec![Vec::new(); ROLES];
            for &i in &order[d..] {
                per_role[problem.roles[i]].push(problem.lengths[i] as u64);
            }
            let prefix: Vec<Vec<u64>> = per_role
                .into_iter()
                .map(|mut lens| {
                    lens.sort_unstable();
                    let mut acc = vec![0u64];
                    for l in lens {
                        acc.push(acc.last().unwrap() + l);
                    }
                    acc
                })
                .collect();
            remaining.push(prefix);
        }
        Self {
            problem,
            order,
            remaining,
            cutoff,
            best: None,
        }
    }

    fn done(&self) -> bool {
        matches!(self.cutoff, Cutoff::Reach(_)) && self.best.is_some()
    }

    fn quota_completable(&self, depth: usize, node: &Node) -> bool {
        let mut cost = 0u64;
        for r in 0..ROLES {
            let need = node.need[r];
            if need == 0 {
                continue;
            }
            let prefix = &self.remaining[depth][r];
            if need >= prefix.len() {
                return false;
            }
            cost += prefix[need];
        }
        node.used + cost <= self.problem.budget
    }

    fn upper_bound(&self, depth: usize, node: &Node) -> f64 {
        let mut capacity = self.problem.budget - node.used;
        let mut bound = node.value;
        for &i in &self.order[depth..] {
            let score = self.problem.scores[i];
            if score <= 0.0 {
                continue;
            }
            let len = self.problem.lengths[i] as u64;
            if len <= capacity {
                capacity -= len;
                bound += score;
            } else {
                bound += score * capacity as f64 / len as f64;
                break;
            }
        }
        bound
    }

    fn prune(&self, bound: f64) -> bool {
        match self.cutoff {
            Cutoff::Improve => self
                .best
                .as_ref()
                .is_some_and(|(v, _)| bound <= v + tolerance(v.abs())),
            Cutoff::Reach(target) => bound < target - tolerance(target.abs()),
        }
    }

    fn run(&mut self, root: Node) {
        self.dfs(0, root);
    }

    fn dfs(&mut self, depth: usize, node: Node) {
        if self.done() || !self.quota_completable(depth, &node) {
            return;
        }
        if depth == self.order.len() {
            let accept = match self.cutoff {
                Cutoff::Improve => self.best.as_ref().is_none_or(|(v, _)| node.value > *v),
                Cutoff::Reach(target) => node.value >= target - tolerance(target.abs()),
            };
            if accept {
                self.best = Some((node.value, node.chosen));
            }
            return;
        }
        if self.prune(self.upper_bound(depth, &node)) {
            return;
        }
        let item = self.order[depth];
        let len = self.problem.lengths[item] as u64;
        if node.used + len <= self.problem.budget {
            let mut chosen = node.chosen.clone();
            chosen[item] = true;
            let mut need = node.need;
            let role = self.problem.roles[item];
            need[role] = need[role].saturating_sub(1);
            self.dfs(
                depth + 1,
                Node {
                    chosen,
                    used: node.used + len,
                    value: node.value + self.problem.scores[item],
                    need,
                },
            );
        }
        self.dfs(depth + 1, node);
    }
}

fn root_node(problem: &Problem<'_>, fixed: &[Option<bool>]) -> Option<(Node, Vec<usize>)> {
    let n = problem.n();
    let mut chosen = vec![false; n];
    let mut need = problem.need;
    let mut used = 0u64;
    let mut value = 0.0;
    let mut undecided = Vec::new();
    for i in 0..n {
        match fixed[i] {
            Some(true) => {
                chosen[i] = true;
                used += problem.lengths[i] as u64;
                value += problem.scores[i];
                need[problem.roles[i]] = need[problem.roles[i]].saturating_sub(1);
            }
            Some(false) => {}
            None => undecided.push(i),
        }
    }
    (used <= problem.budget).then_some((
        Node {
            chosen,
            used,
            value,
            need,
        },
        undecided,
    ))
}

fn exact_on(problem: &Problem<'_>) -> Summary {
    if let Some(forced) = problem.forced_result(SolverKind::Exact) {
        return forced;
    }
    let n = problem.n();

    // Phase 1: optimal value, seeded with cheapest quota set + density fill.
    let mut seed = problem.cheapest_quota_set();
    problem.fill_by_density(&mut seed);
    let free = vec![None; n];
    let (root, undecided) = root_node(problem, &free).expect("empty selection fits");
    let mut search = Search::new(problem, undecided, Cutoff::Improve);
    search.best = Some((problem.objective(&seed), seed));
    search.run(root);
    let optimum = search.best.expect("seed is feasible").0;

    // Phase 2: fix items in index order, preferring inclusion whenever an
    // optimal completion still exists.
    let mut fixed = free;
    for i in 0..n {
        fixed[i] = Some(true);
        let reachable = root_node(problem, &fixed).is_some_and(|(root, undecided)| {
            let mut probe = Search::new(problem, undecided, Cutoff::Reach(optimum));
            probe.run(root);
            probe.best.is_some()
        });
        if !reachable {
            fixed[i] = Some(false);
        }
    }
    let chosen: Vec<bool> = fixed.into_iter().map(|x| x == Some(true)).collect();
    problem.summary(&chosen, SolverKind::Exact, false)
}

fn greedy_on(problem: &Problem<'_>) -> Summary {
    let n = problem.n();
    let mut chosen = problem.best_quota_set();
    if problem.length_of(&chosen) > problem.budget {
        chosen = problem.cheapest_quota_set();
        if problem.length_of(&chosen) > problem.budget {
            return problem.summary(&chosen, SolverKind::Greedy, true);
        }
    }
    problem.fill_by_density(&mut chosen);
    let fill_value = problem.objective(&chosen);

    let mut best_single: Option<(f64, Vec<bool>)> = None;
    for i in 0..n {
        if problem.lengths[i] as u64 > problem.budget {
            continue;
        }
        let mut single = vec![false; n];
        single[i] = true;
        if !problem.satisfies_quotas(&single) {
            continue;
        }
        let value = problem.scores[i];
        if best_single
            .as_ref()
            .is_none_or(|(v, s)| better(value, &single, *v, s))
        {
            best_single = Some((value, single));
        }
    }
    if let Some((value, single)) = best_single {
        if better(value, &single, fill_value, &chosen) {
            chosen = single;
        }
    }
    problem.summary(&chosen, SolverKind::Greedy, false)
}

/// Exact solver regardless of size.
pub fn exact_selection(
    lengths: &[u32],
    scores: &[f64],
    role_of: &[RhetoricalRole],
    budget: u32,
    quotas: &BTreeMap<RhetoricalRole, u32>,
) -> Result<Summary, SummaryError> {
    Ok(exact_on(&Problem::new(lengths, scores, role_of, budget, quotas)?))
}

/// Greedy solver regardless of size.
pub fn greedy_selection(
    lengths: &[u32],
    scores: &[f64],
    role_of: &[RhetoricalRole],
    budget: u32,
    quotas: &BTreeMap<RhetoricalRole, u32>,
) -> Result<Summary, SummaryError> {
    Ok(greedy_on(&Problem::new(lengths, scores, role_of, budget, quotas)?))
}

/// Exact for up to [`EXACT_LIMIT`] items, greedy beyond.
pub fn solve_budgeted_selection(
    lengths: &[u32],
    scores: &[f64],
    role_of: &[RhetoricalRole],
    budget: u32,
    quotas: &BTreeMap<RhetoricalRole, u32>,
) -> Result<Summary, SummaryError> {
    let problem = Problem::new(lengths, scores, role_of, budget, quotas)?;
    Ok(if problem.n() <= EXACT_LIMIT {
        exact_on(&problem)
    } else {
        greedy_on(&problem)
    })
}

/// Summarizes the sentences of a view, reading roles from the sentences.
/// Returned indices refer to the underlying document.
pub fn summarize_view(view: &DocView<'_>, spec: &SummarySpec) -> Result<Summary, SummaryError> {
    spec.validate()?;
    let sentences: Vec<_> = view.sentences().collect();
    if sentences.is_empty() {
        return Ok(Summary {
            selected: Vec::new(),
            objective: 0.0,
            solver: SolverKind::Exact,
            budget_violated: false,
        });
    }
    let lengths: Vec<u32> = sentences.iter().map(|s| s.tokens.len() as u32).collect();
    let roles: Vec<RhetoricalRole> = sentences.iter().map(|s| s.role_or_none()).collect();
    let scores: Vec<f64> = sentences
        .iter()
        .map(|s| score_sentence(&s.tokens, s.role_or_none(), spec))
        .collect();
    let budget = spec.budget_for(view.word_count());
    let mut summary = solve_budgeted_selection(&lengths, &scores, &roles, budget, &spec.quotas)?;
    for idx in summary.selected.iter_mut() {
        *idx = sentences[*idx].index;
    }
    Ok(summary)
}

pub fn summarize(
    doc: &Document,
    roles: &RoleSequence,
    spec: &SummarySpec,
) -> Result<Summary, SummaryError> {
    if roles.roles.len() != doc.sentences.len() {
        return Err(SummaryError::LengthMismatch(format!(
            "{} sentences but {} roles",
            doc.sentences.len(),
            roles.roles.len()
        )));
    }
    let annotated = doc.clone().with_roles(roles);
    summarize_view(&DocView::full(&annotated), spec)
}

fn select_roles<'a>(
    doc: &'a Document,
    roles: &RoleSequence,
    keep: impl Fn(RhetoricalRole) -> bool,
) -> DocView<'a> {
    DocView::from_indices(
        doc,
        roles
            .roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| keep(r))
            .map(|(i, _)| i),
    )
}

/// Fact sentences in document order. An empty view signals "no facts".
pub fn select_facts<'a>(doc: &'a Document, roles: &RoleSequence) -> DocView<'a> {
    select_roles(doc, roles, |r| r == RhetoricalRole::Fact)
}

/// Fact and lower-court ruling sentences in document order.
pub fn select_facts_rlc<'a>(doc: &'a Document, roles: &RoleSequence) -> DocView<'a> {
    select_roles(doc, roles, |r| {
        matches!(r, RhetoricalRole::Fact | RhetoricalRole::RulingByLowerCourt)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_document;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use RhetoricalRole::*;

    fn no_quotas() -> BTreeMap<RhetoricalRole, u32> {
        BTreeMap::new()
    }

    /// Exhaustive oracle: enumerate all 2^n subsets; keep the best feasible
    /// one under (objective, lowest index of symmetric difference). With no
    /// feasible subset, the cheapest quota set is expected, flagged.
    pub(crate) fn brute_force(
        lengths: &[u32],
        scores: &[f64],
        roles: &[RhetoricalRole],
        budget: u32,
        quotas: &BTreeMap<RhetoricalRole, u32>,
    ) -> Option<(Vec<usize>, f64)> {
        let n = lengths.len();
        let mut best: Option<(Vec<bool>, f64)> = Option::None;
        for mask in 0u32..(1 << n) {
            let chosen: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            let len: u32 = (0..n).filter(|&i| chosen[i]).map(|i| lengths[i]).sum();
            if len > budget {
                continue;
            }
            let ok = quotas.iter().all(|(role, &q)| {
                let available = roles.iter().filter(|r| *r == role).count();
                let have = (0..n).filter(|&i| chosen[i] && roles[i] == *role).count();
                have >= (q as usize).min(available)
            });
            if !ok {
                continue;
            }
            let value: f64 = (0..n).filter(|&i| chosen[i]).map(|i| scores[i]).sum();
            let wins = match &best {
                Option::None => true,
                Some((b, bv)) => {
                    value > *bv
                        || (value == *bv
                            && chosen.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(&x, _)| x))
                }
            };
            if wins {
                best = Some((chosen, value));
            }
        }
        best.map(|(c, v)| ((0..n).filter(|&i| c[i]).collect(), v))
    }

    #[test]
    fn three_items_budget_ten() {
        let s = solve_budgeted_selection(&[5, 5, 5], &[10.0, 9.0, 1.0], &[None; 3], 10, &no_quotas())
            .unwrap();
        assert_eq!(s.selected, [0, 1]);
        assert_eq!(s.objective, 19.0);
        assert_eq!(s.solver, SolverKind::Exact);
        assert!(!s.budget_violated);
    }

    #[test]
    fn unconstrained_budget_takes_everything() {
        let s = solve_budgeted_selection(&[3, 1, 4], &[1.0, 0.0, 2.0], &[Fact; 3], 100, &no_quotas())
            .unwrap();
        assert_eq!(s.selected, [0, 1, 2]);
    }

    #[test]
    fn equal_items_tie_to_lower_index() {
        let s =
            solve_budgeted_selection(&[4, 4], &[5.0, 5.0], &[None; 2], 4, &no_quotas()).unwrap();
        assert_eq!(s.selected, [0]);
        let g = greedy_selection(&[4, 4], &[5.0, 5.0], &[None; 2], 4, &no_quotas()).unwrap();
        assert_eq!(g.selected, [0]);
    }

    #[test]
    fn many_identical_items_do_not_explode() {
        let n = 30;
        let s = solve_budgeted_selection(
            &vec![5; n],
            &vec![32.0; n],
            &vec![Fact; n],
            75,
            &no_quotas(),
        )
        .unwrap();
        assert_eq!(s.selected, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn quota_forces_low_scoring_role() {
        let quotas = BTreeMap::from([(Issue, 1)]);
        let s = solve_budgeted_selection(
            &[5, 5, 5],
            &[50.0, 40.0, 1.0],
            &[Fact, Fact, Issue],
            10,
            &quotas,
        )
        .unwrap();
        assert_eq!(s.selected, [0, 2]);
    }

    #[test]
    fn quota_exceeding_budget_is_flagged() {
        let quotas = BTreeMap::from([(Issue, 1), (Fact, 1)]);
        let s = solve_budgeted_selection(&[6, 6, 3], &[1.0, 2.0, 3.0], &[Fact, Issue, None], 8, &quotas)
            .unwrap();
        assert!(s.budget_violated);
        assert_eq!(s.selected, [0, 1]);
        let g = greedy_selection(&[6, 6, 3], &[1.0, 2.0, 3.0], &[Fact, Issue, None], 8, &quotas)
            .unwrap();
        assert!(g.budget_violated);
    }

    #[test]
    fn quota_clamped_by_availability() {
        let quotas = BTreeMap::from([(Issue, 3)]);
        let s = solve_budgeted_selection(&[2, 2], &[1.0, 1.0], &[Issue, Fact], 2, &quotas).unwrap();
        assert_eq!(s.selected, [0]);
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            solve_budgeted_selection(&[1], &[1.0, 2.0], &[Fact], 3, &no_quotas()),
            Err(SummaryError::LengthMismatch("1 lengths, 2 scores, 1 roles".into()))
        );
        assert_eq!(
            solve_budgeted_selection(&[1], &[1.0], &[Fact], 0, &no_quotas()),
            Err(SummaryError::InvalidBudget)
        );
    }

    #[test]
    fn large_inputs_use_greedy() {
        let n = 40;
        let s = solve_budgeted_selection(
            &vec![2; n],
            &(0..n).map(|i| i as f64).collect::<Vec<_>>(),
            &vec![Fact; n],
            10,
            &no_quotas(),
        )
        .unwrap();
        assert_eq!(s.solver, SolverKind::Greedy);
        assert_eq!(s.selected, [35, 36, 37, 38, 39]);
    }

    #[test]
    fn greedy_prefers_best_single_when_better() {
        let s = greedy_selection(&[1, 10], &[2.0, 15.0], &[None; 2], 10, &no_quotas()).unwrap();
        assert_eq!(s.selected, [1]);
    }

    type Instance = (Vec<u32>, Vec<f64>, Vec<RhetoricalRole>, u32, BTreeMap<RhetoricalRole, u32>);

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, with_quotas: bool) -> Instance {
        let lengths: Vec<u32> = (0..n).map(|_| rng.random_range(1..=20)).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..=100) as f64).collect();
        let roles: Vec<RhetoricalRole> = (0..n)
            .map(|_| RhetoricalRole::ALL[rng.random_range(0..4)])
            .collect();
        let total: u32 = lengths.iter().sum();
        let budget = rng.random_range(1..=total.max(1));
        let quotas = if with_quotas {
            RhetoricalRole::ALL[..4]
                .iter()
                .map(|&r| (r, rng.random_range(0..=1)))
                .collect()
        } else {
            BTreeMap::new()
        };
        (lengths, scores, roles, budget, quotas)
    }

    #[test]
    fn exact_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..120 {
            let n = rng.random_range(1..=12);
            let (l, s, r, b, q) = random_instance(&mut rng, n, case % 2 == 0);
            let got = exact_selection(&l, &s, &r, b, &q).unwrap();
            match brute_force(&l, &s, &r, b, &q) {
                Some((sel, value)) => {
                    assert!(!got.budget_violated, "case {case}");
                    assert_eq!(got.objective, value, "case {case}");
                    assert_eq!(got.selected, sel, "case {case}");
                }
                Option::None => assert!(got.budget_violated, "case {case}"),
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn scaling_scores_keeps_selection(seed in any::<u64>(), factor in 1u32..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=12);
            let (l, s, r, b, q) = random_instance(&mut rng, n, true);
            let scaled: Vec<f64> = s.iter().map(|x| x * factor as f64).collect();
            let a = exact_selection(&l, &s, &r, b, &q).unwrap();
            let c = exact_selection(&l, &scaled, &r, b, &q).unwrap();
            prop_assert_eq!(a.selected, c.selected);
        }

        #[test]
        fn larger_budget_never_hurts(seed in any::<u64>(), extra in 1u32..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=12);
            let (l, s, r, b, _) = random_instance(&mut rng, n, false);
            let small = exact_selection(&l, &s, &r, b, &no_quotas()).unwrap();
            let big = exact_selection(&l, &s, &r, b + extra, &no_quotas()).unwrap();
            prop_assert!(big.objective >= small.objective);
            let used: u32 = small.selected.iter().map(|&i| l[i]).sum();
            prop_assert!(used <= b);
        }
    }

    #[test]
    fn scores_follow_weights_and_density() {
        let doc = parse_document("The appellant filed suit.", "d").unwrap();
        let spec0 = SummarySpec {
            lambda: 0.0,
            ..SummarySpec::default()
        };
        let fact = sentence_scores(&doc, &RoleSequence::new("d", vec![Fact]), &spec0);
        assert_eq!(fact, [32.0]);
        let none = sentence_scores(&doc, &RoleSequence::new("d", vec![None]), &spec0);
        assert_eq!(none, [0.0]);

        // 10 tokens, 5 content words: court, granted, leave, appeal, hearing.
        let doc = parse_document("The court granted a leave to appeal for hearing.", "d").unwrap();
        assert_eq!(doc.sentences[0].tokens.len(), 10);
        let spec = SummarySpec {
            lambda: 10.0,
            ..SummarySpec::default()
        };
        let s = sentence_scores(&doc, &RoleSequence::new("d", vec![Statute]), &spec);
        assert_eq!(s, [13.0]);
    }

    #[test]
    fn weight_schemes_contrast() {
        let doc = parse_document("It was held so. The appellant filed.", "d").unwrap();
        let roles = RoleSequence::new("d", vec![RatioOfDecision, Fact]);
        let spec = |scheme| SummarySpec {
            scheme,
            budget_words: Some(5),
            quotas: BTreeMap::new(),
            lambda: 0.0,
        };
        let v1 = summarize(&doc, &roles, &spec(RoleWeightScheme::variation1())).unwrap();
        assert_eq!(v1.selected, [1]);
        let v2 = summarize(&doc, &roles, &spec(RoleWeightScheme::variation2())).unwrap();
        assert_eq!(v2.selected, [0]);
    }

    #[test]
    fn big_budget_and_issue_quota() {
        let doc = parse_document("Some facts here. Whether it holds? Law applies.", "d").unwrap();
        let roles = RoleSequence::new("d", vec![Fact, Issue, Statute]);
        let all = summarize(
            &doc,
            &roles,
            &SummarySpec {
                budget_words: Some(1000),
                ..SummarySpec::default()
            },
        )
        .unwrap();
        assert_eq!(all.selected, [0, 1, 2]);
        let spec = SummarySpec {
            scheme: RoleWeightScheme::variation2(),
            budget_words: Some(4),
            quotas: BTreeMap::from([(Issue, 1)]),
            lambda: 0.0,
        };
        assert_eq!(summarize(&doc, &roles, &spec).unwrap().selected, [1]);
    }

    #[test]
    fn selectors() {
        let doc = parse_document("A one. B two. C three.", "d").unwrap();
        let r = RoleSequence::new("d", vec![Fact, Issue, Fact]);
        assert_eq!(select_facts(&doc, &r).indices(), [0, 2]);
        let r = RoleSequence::new("d", vec![Issue, Issue, Issue]);
        assert!(select_facts(&doc, &r).is_empty());
        let r = RoleSequence::new("d", vec![Fact, Fact, Fact]);
        assert_eq!(select_facts(&doc, &r).indices(), [0, 1, 2]);
        let r = RoleSequence::new("d", vec![Fact, RulingByLowerCourt, Issue]);
        assert_eq!(select_facts_rlc(&doc, &r).indices(), [0, 1]);
        let r = RoleSequence::new("d", vec![Fact, Statute, Issue]);
        assert_eq!(select_facts_rlc(&doc, &r).indices(), select_facts(&doc, &r).indices());
    }

    #[test]
    fn scheme_json_forms() {
        let v1 = RoleWeightScheme::variation1();
        assert_eq!(serde_json::to_string(&v1).unwrap(), "\"variation1\"");
        let spec: SummarySpec = serde_json::from_str(
            r#"{"scheme": {"Fact": 5, "Issue": 1}, "budget_words": 20, "quotas": {}, "lambda": 0}"#,
        )
        .unwrap();
        assert_eq!(spec.scheme.weight(Fact), 5);
        assert_eq!(spec.scheme.weight(Argument), 0);
        assert!(serde_json::from_str::<SummarySpec>(r#"{"scheme": "variation9"}"#).is_err());
        let defaults: SummarySpec = serde_json::from_str("{}").unwrap();
        assert_eq!(defaults, SummarySpec::default());
        assert_eq!(defaults.budget_for(100), 34);
    }
}
