//! Canonical in-memory corpus types.
//!
//! A corpus is a set of [`Thread`]s; each thread owns its [`Message`]s in
//! canonical order (timestamp, then message id) and a derived participant set.
//! Alongside the threads live the organizational [`DominanceSet`], per-address
//! [`ParticipantRecord`]s, and the deterministic [`CorpusSplit`].

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("thread {thread_id}: duplicate message id {msg_id}")]
    DuplicateMessageId { thread_id: String, msg_id: String },
    #[error("thread {thread_id}: message {msg_id} references unknown parent {parent_id}")]
    UnknownParent {
        thread_id: String,
        msg_id: String,
        parent_id: String,
    },
    #[error("thread {thread_id}: message {msg_id} has an empty sender address")]
    EmptySender { thread_id: String, msg_id: String },
    #[error("thread {thread_id} contains no messages")]
    EmptyThread { thread_id: String },
    #[error("split proportions must be positive and sum to 1 (got {train}:{dev}:{test})")]
    BadSplitProportions { train: f64, dev: f64, test: f64 },
}

/// Resolved gender of a participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Indeterminate,
}

impl Gender {
    /// Stable lowercase token used in CSV and JSON outputs.
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Indeterminate => "indeterminate",
        }
    }
}

impl std::str::FromStr for Gender {
    type Err = String;

    /// Accepts the single-letter codes used in override files as well as the
    /// full words this crate writes.
    fn from_str(s: &str) -> Result<Gender, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Gender::Male),
            "f" | "female" => Ok(Gender::Female),
            "indeterminate" => Ok(Gender::Indeterminate),
            other => Err(format!("unknown gender code {other:?}")),
        }
    }
}

/// How a participant's gender value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// From a gold override file.
    Manual,
    /// Resolved from name statistics.
    Auto,
    /// No assignment was possible.
    None,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Manual => "manual",
            Provenance::Auto => "auto",
            Provenance::None => "none",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Provenance, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "manual" => Ok(Provenance::Manual),
            "auto" => Ok(Provenance::Auto),
            "none" => Ok(Provenance::None),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// Dialog act of a single sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaLabel {
    RequestAction,
    RequestInformation,
    Inform,
    Conventional,
}

impl DaLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DaLabel::RequestAction => "request_action",
            DaLabel::RequestInformation => "request_information",
            DaLabel::Inform => "inform",
            DaLabel::Conventional => "conventional",
        }
    }
}

/// A labeled sentence inside a message body, as byte offsets into the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub da: DaLabel,
    /// Whether the sentence is an overt display of power.
    #[serde(default)]
    pub odp: bool,
}

/// A token annotation inside a message body (needed for part-of-speech ngrams).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub start: usize,
    pub end: usize,
    pub lemma: String,
    pub pos: String,
}

/// One email message within a thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub msg_id: String,
    /// Message this one replies to, if any; `None` for thread-initial messages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub from: String,
    #[serde(default)]
    pub to: Vec<String>,
    #[serde(default)]
    pub cc: Vec<String>,
    pub body: String,
    /// Sentence-level dialog annotations; absent until an annotation pass runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<SentenceSpan>>,
    /// Token-level annotations; absent unless a tagged sidecar was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenAnnotation>>,
}

impl Message {
    /// All recipient addresses (To then Cc), deduplicated, in recipient-list order.
    pub fn recipients(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for addr in self.to.iter().chain(self.cc.iter()) {
            if seen.insert(addr.as_str()) {
                out.push(addr.as_str());
            }
        }
        out
    }

    /// Whether the body contains anything beyond whitespace.
    pub fn has_content(&self) -> bool {
        !self.body.trim().is_empty()
    }
}

/// An email thread: messages in canonical order plus the derived participant set.
///
/// Construct through [`Thread::new`], which normalizes addresses, orders the
/// messages, and computes the participant set; the fields stay consistent from
/// then on because they are only exposed read-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    thread_id: String,
    messages: Vec<Message>,
    participants: BTreeSet<String>,
}

fn normalize_addr(addr: &str) -> String {
    addr.trim().to_lowercase()
}

impl Thread {
    /// Builds a canonical thread from raw messages.
    ///
    /// Normalization: addresses are trimmed and lowercased, recipient lists are
    /// deduplicated, and a Cc entry that also appears in To is dropped from Cc.
    /// Messages are sorted by (timestamp, msg_id); the participant set is the
    /// union of senders and recipients.
    pub fn new(thread_id: String, mut messages: Vec<Message>) -> Result<Thread, ModelError> {
        if messages.is_empty() {
            return Err(ModelError::EmptyThread { thread_id });
        }
        let mut ids = BTreeSet::new();
        for msg in &messages {
            if !ids.insert(msg.msg_id.clone()) {
                return Err(ModelError::DuplicateMessageId {
                    thread_id,
                    msg_id: msg.msg_id.clone(),
                });
            }
        }
        for msg in &mut messages {
            msg.from = normalize_addr(&msg.from);
            if msg.from.is_empty() {
                return Err(ModelError::EmptySender {
                    thread_id,
                    msg_id: msg.msg_id.clone(),
                });
            }
            let mut seen = BTreeSet::new();
            msg.to = msg
                .to
                .iter()
                .map(|a| normalize_addr(a))
                .filter(|a| !a.is_empty() && seen.insert(a.clone()))
                .collect();
            msg.cc = msg
                .cc
                .iter()
                .map(|a| normalize_addr(a))
                .filter(|a| !a.is_empty() && seen.insert(a.clone()))
                .collect();
        }
        for msg in &messages {
            if let Some(parent) = &msg.parent_id {
                if !ids.contains(parent) {
                    return Err(ModelError::UnknownParent {
                        thread_id,
                        msg_id: msg.msg_id.clone(),
                        parent_id: parent.clone(),
                    });
                }
            }
        }
        messages.sort_by(|a, b| (a.timestamp, &a.msg_id).cmp(&(b.timestamp, &b.msg_id)));
        let participants = derive_participants(&messages);
        Ok(Thread {
            thread_id,
            messages,
            participants,
        })
    }

    pub fn thread_id(&self) -> &str {
        &self.thread_id
    }

    /// Messages in canonical (timestamp, msg_id) order.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Every address that sent or received a message in this thread.
    pub fn participants(&self) -> &BTreeSet<String> {
        &self.participants
    }

    pub fn message(&self, msg_id: &str) -> Option<&Message> {
        self.messages.iter().find(|m| m.msg_id == msg_id)
    }

    /// Replaces a message's annotations in place. Returns false if the id is unknown.
    pub(crate) fn annotate_message(
        &mut self,
        msg_id: &str,
        sentences: Vec<SentenceSpan>,
        tokens: Option<Vec<TokenAnnotation>>,
    ) -> bool {
        match self.messages.iter_mut().find(|m| m.msg_id == msg_id) {
            Some(msg) => {
                msg.sentences = Some(sentences);
                if tokens.is_some() {
                    msg.tokens = tokens;
                }
                true
            }
            None => false,
        }
    }

    /// Mutable access for annotation passes that tag every message.
    pub fn messages_mut(&mut self) -> &mut [Message] {
        &mut self.messages
    }
}

fn derive_participants(messages: &[Message]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for msg in messages {
        out.insert(msg.from.clone());
        for addr in msg.to.iter().chain(msg.cc.iter()) {
            out.insert(addr.clone());
        }
    }
    out
}

/// Per-address resolution result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub email: String,
    /// Display names observed for this address across the corpus.
    pub display_names: BTreeSet<String>,
    pub gender: Gender,
    /// Ambiguity score of the chosen first-name candidate, when one resolved.
    pub ambiguity_score: Option<f64>,
    pub provenance: Provenance,
}

/// Organizational dominance relation: immediate edges and their transitive closure.
///
/// A pair `(a, b)` reads "a dominates b". Build with
/// [`DominanceSet::from_immediate`], which closes the relation and rejects
/// cyclic input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceSet {
    immediate: BTreeSet<(String, String)>,
    closed: BTreeSet<(String, String)>,
}

impl DominanceSet {
    /// Closes the immediate relation under transitivity.
    ///
    /// Fails if any address would dominate itself, reporting one witness cycle.
    pub fn from_immediate<I>(edges: I) -> Result<DominanceSet, DominanceError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut immediate = BTreeSet::new();
        for (sup, sub) in edges {
            let sup = normalize_addr(&sup);
            let sub = normalize_addr(&sub);
            if sup == sub {
                return Err(DominanceError::SelfDominance { email: sup });
            }
            immediate.insert((sup, sub));
        }
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (sup, sub) in &immediate {
            adjacency.entry(sup).or_default().push(sub);
        }
        if let Some(cycle) = find_cycle(&adjacency) {
            return Err(DominanceError::Cycle { cycle });
        }
        let mut closed = BTreeSet::new();
        for root in adjacency.keys() {
            // BFS collects everyone below this root.
            let mut queue = vec![*root];
            let mut seen = BTreeSet::new();
            while let Some(node) = queue.pop() {
                if let Some(subs) = adjacency.get(node) {
                    for sub in subs {
                        if seen.insert(*sub) {
                            closed.insert((root.to_string(), sub.to_string()));
                            queue.push(sub);
                        }
                    }
                }
            }
        }
        Ok(DominanceSet { immediate, closed })
    }

    pub fn immediate(&self) -> &BTreeSet<(String, String)> {
        &self.immediate
    }

    pub fn closed(&self) -> &BTreeSet<(String, String)> {
        &self.closed
    }

    /// Whether `sup` dominates `sub` directly or through a chain.
    pub fn dominates(&self, sup: &str, sub: &str) -> bool {
        self.closed.contains(&(sup.to_string(), sub.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum DominanceError {
    #[error("hierarchy lists {email} as dominating itself")]
    SelfDominance { email: String },
    #[error("hierarchy contains a dominance cycle: {}", cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
}

/// DFS over the immediate edges; returns one cycle (closed: first == last) if any.
fn find_cycle(adjacency: &BTreeMap<&str, Vec<&str>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Open,
        Done,
    }
    let mut state: BTreeMap<&str, State> = BTreeMap::new();
    let mut stack: Vec<&str> = Vec::new();

    fn visit<'a>(
        node: &'a str,
        adjacency: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, State>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        state.insert(node, State::Open);
        stack.push(node);
        for next in adjacency.get(node).into_iter().flatten() {
            match state.get(next) {
                Some(State::Open) => {
                    let start = stack.iter().position(|n| n == next).unwrap();
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(next.to_string());
                    return Some(cycle);
                }
                Some(State::Done) => {}
                None => {
                    if let Some(cycle) = visit(next, adjacency, state, stack) {
                        return Some(cycle);
                    }
                }
            }
        }
        stack.pop();
        state.insert(node, State::Done);
        None
    }

    for node in adjacency.keys() {
        if !state.contains_key(node) {
            if let Some(cycle) = visit(node, adjacency, &mut state, &mut stack) {
                return Some(cycle);
            }
        }
    }
    None
}

/// Which partition a thread belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Split, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split name {other:?}")),
        }
    }
}

/// Train/dev/test proportions. Must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitProportions {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitProportions {
    fn default() -> Self {
        SplitProportions {
            train: 0.50,
            dev: 0.24,
            test: 0.26,
        }
    }
}

impl SplitProportions {
    pub fn validate(self) -> Result<Self, ModelError> {
        let sum = self.train + self.dev + self.test;
        if self.train <= 0.0 || self.dev <= 0.0 || self.test <= 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::BadSplitProportions {
                train: self.train,
                dev: self.dev,
                test: self.test,
            });
        }
        Ok(self)
    }
}

/// Deterministic thread-level partition of the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    assignment: BTreeMap<String, Split>,
}

impl CorpusSplit {
    /// Assigns each thread id to a partition by hashing (seed, thread_id).
    ///
    /// The hash drops each thread at a stable point in [0, 1); the proportion
    /// boundaries carve that interval. Membership of a thread therefore depends
    /// only on the seed and its own id, never on the rest of the corpus.
    pub fn assign<'a, I>(
        thread_ids: I,
        proportions: SplitProportions,
        seed: u64,
    ) -> Result<CorpusSplit, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let proportions = proportions.validate()?;
        let train_edge = proportions.train;
        let dev_edge = proportions.train + proportions.dev;
        let mut assignment = BTreeMap::new();
        for id in thread_ids {
            let point = split_point(seed, id);
            let split = if point < train_edge {
                Split::Train
            } else if point < dev_edge {
                Split::Dev
            } else {
                Split::Test
            };
            assignment.insert(id.to_string(), split);
        }
        Ok(CorpusSplit { assignment })
    }

    /// Builds a split from explicit (thread_id, split) pairs.
    pub fn from_assignments<I>(pairs: I) -> CorpusSplit
    where
        I: IntoIterator<Item = (String, Split)>,
    {
        CorpusSplit {
            assignment: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, thread_id: &str) -> Option<Split> {
        self.assignment.get(thread_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Split)> {
        self.assignment.iter().map(|(id, s)| (id.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

/// Stable point in [0, 1) for a (seed, thread id) pair.
///
/// FNV-1a over the seed's little-endian bytes followed by the id's bytes, then
/// a splitmix64 finalizer to spread the low-entropy FNV output, mapped onto
/// [0, 1) through the top 53 bits. Frozen: changing this remaps every split.
fn split_point(seed: u64, thread_id: &str) -> f64 {
    const FNV_OFFSET: u64 = 0xcbf29ce484222325;
    const FNV_PRIME: u64 = 0x100000001b3;
    let mut hash = FNV_OFFSET;
    for byte in seed.to_le_bytes().iter().chain(thread_id.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finalizer
    let mut z = hash.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}
