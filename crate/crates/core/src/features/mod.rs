//! Dialog-structure features of a person over a reference message set.
//!
//! Twenty structural features describe how a person behaves inside a set of
//! messages M: where they enter and leave, how much they write, how they
//! address others, which dialog acts they produce, and how often they overtly
//! display power. For a pair (p1, p2) in a thread every feature comes in four
//! variants: each person measured over the pair's interaction messages, and
//! each person measured over the whole thread.
//!
//! Submodules: [`taggers`] holds the pluggable dialog-act/ODP taggers and
//! their rule-based baselines; [`ngrams`] holds lexical feature extraction.

pub mod ngrams;
pub mod taggers;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{DaLabel, Gender, Message, SentenceSpan, Thread};
use crate::pairs::{GenderEnvironment, PairContext};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(
        "message {msg_id} has no sentence annotations; apply a sidecar or run a dialog-act tagger"
    )]
    MissingSentences { msg_id: String },
    #[error("message {msg_id} lacks token annotations required for {family} ngrams; supply a tagged sidecar")]
    MissingTokens {
        msg_id: String,
        family: &'static str,
    },
}

/// One surface token with its lowercase form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
}

/// Splits a body into maximal runs of letters, digits, and apostrophes.
pub fn tokenize(body: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in body.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else if !current.is_empty() {
            out.push(Token {
                lower: current.to_lowercase(),
                surface: std::mem::take(&mut current),
            });
        }
    }
    if !current.is_empty() {
        out.push(Token {
            lower: current.to_lowercase(),
            surface: current,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositionalFeatures {
    pub initiator: f64,
    pub first_msg_pos: f64,
    pub last_msg_pos: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerbosityFeatures {
    pub msg_count: f64,
    pub msg_ratio: f64,
    pub token_count: f64,
    pub token_ratio: f64,
    pub token_per_msg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThreadStructureFeatures {
    pub avg_recipients: f64,
    pub avg_to_recipients: f64,
    pub in_to_list_pct: f64,
    pub add_person: f64,
    pub remove_person: f64,
    pub reply_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DialogActFeatures {
    pub req_action_count: f64,
    pub req_inform_count: f64,
    pub inform_count: f64,
    pub conventional_count: f64,
    pub dangling_req_pct: f64,
}

/// All twenty structural features of one person over one reference set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StructuralFeatures {
    pub positional: PositionalFeatures,
    pub verbosity: VerbosityFeatures,
    pub thread_structure: ThreadStructureFeatures,
    pub dialog_acts: DialogActFeatures,
    pub odp_count: f64,
}

/// Column names in the order [`StructuralFeatures::values`] emits.
pub const STRUCTURAL_COLUMNS: [&str; 20] = [
    "initiator",
    "first_msg_pos",
    "last_msg_pos",
    "msg_count",
    "msg_ratio",
    "token_count",
    "token_ratio",
    "token_per_msg",
    "avg_recipients",
    "avg_to_recipients",
    "in_to_list_pct",
    "add_person",
    "remove_person",
    "reply_rate",
    "req_action_count",
    "req_inform_count",
    "inform_count",
    "conventional_count",
    "dangling_req_pct",
    "odp_count",
];

/// The structural feature families, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StructuralGroup {
    Positional,
    Verbosity,
    ThreadStructure,
    DialogActs,
    Odp,
}

impl StructuralGroup {
    pub const ALL: [StructuralGroup; 5] = [
        StructuralGroup::Positional,
        StructuralGroup::Verbosity,
        StructuralGroup::ThreadStructure,
        StructuralGroup::DialogActs,
        StructuralGroup::Odp,
    ];

    /// Index range of this group within [`STRUCTURAL_COLUMNS`].
    pub fn columns(self) -> std::ops::Range<usize> {
        match self {
            StructuralGroup::Positional => 0..3,
            StructuralGroup::Verbosity => 3..8,
            StructuralGroup::ThreadStructure => 8..14,
            StructuralGroup::DialogActs => 14..19,
            StructuralGroup::Odp => 19..20,
        }
    }
}

impl StructuralFeatures {
    /// Values aligned with [`STRUCTURAL_COLUMNS`].
    pub fn values(&self) -> [f64; 20] {
        [
            self.positional.initiator,
            self.positional.first_msg_pos,
            self.positional.last_msg_pos,
            self.verbosity.msg_count,
            self.verbosity.msg_ratio,
            self.verbosity.token_count,
            self.verbosity.token_ratio,
            self.verbosity.token_per_msg,
            self.thread_structure.avg_recipients,
            self.thread_structure.avg_to_recipients,
            self.thread_structure.in_to_list_pct,
            self.thread_structure.add_person,
            self.thread_structure.remove_person,
            self.thread_structure.reply_rate,
            self.dialog_acts.req_action_count,
            self.dialog_acts.req_inform_count,
            self.dialog_acts.inform_count,
            self.dialog_acts.conventional_count,
            self.dialog_acts.dangling_req_pct,
            self.odp_count,
        ]
    }
}

/// Position of p's first and last message within M, scaled to [0, 1].
///
/// A person who sent nothing in M gets Initiator 0 and both positions 1 (the
/// latest possible entry); a single-message M uses denominator 1 so the only
/// position is 0.
pub fn positional(p: &str, m: &[&Message]) -> PositionalFeatures {
    assert!(!m.is_empty(), "reference message set must be nonempty");
    let denom = (m.len() - 1).max(1) as f64;
    let mut first = None;
    let mut last = None;
    for (idx, msg) in m.iter().enumerate() {
        if msg.from == p {
            first.get_or_insert(idx);
            last = Some(idx);
        }
    }
    match (first, last) {
        (Some(first), Some(last)) => PositionalFeatures {
            initiator: if first == 0 { 1.0 } else { 0.0 },
            first_msg_pos: first as f64 / denom,
            last_msg_pos: last as f64 / denom,
        },
        _ => PositionalFeatures {
            initiator: 0.0,
            first_msg_pos: 1.0,
            last_msg_pos: 1.0,
        },
    }
}

/// Message and token production of p within M.
pub fn verbosity(p: &str, m: &[&Message]) -> VerbosityFeatures {
    assert!(!m.is_empty(), "reference message set must be nonempty");
    let mut msg_count = 0usize;
    let mut token_count = 0usize;
    let mut total_tokens = 0usize;
    for msg in m {
        let tokens = tokenize(&msg.body).len();
        total_tokens += tokens;
        if msg.from == p {
            msg_count += 1;
            token_count += tokens;
        }
    }
    VerbosityFeatures {
        msg_count: msg_count as f64,
        msg_ratio: msg_count as f64 / m.len() as f64,
        token_count: token_count as f64,
        token_ratio: if total_tokens == 0 {
            0.0
        } else {
            token_count as f64 / total_tokens as f64
        },
        token_per_msg: if msg_count == 0 {
            0.0
        } else {
            token_count as f64 / msg_count as f64
        },
    }
}

fn participant_set(msg: &Message) -> BTreeSet<&str> {
    let mut set: BTreeSet<&str> = msg.recipients().into_iter().collect();
    set.insert(msg.from.as_str());
    set
}

/// How p addresses others and is addressed within M.
///
/// AddPerson fires when some reply by p widens the parent's participant set;
/// RemovePerson when some reply by p drops a parent participant other than p.
/// Reply links resolve through parent ids within M only.
pub fn thread_structure(p: &str, m: &[&Message]) -> ThreadStructureFeatures {
    let mut sent = 0usize;
    let mut recipient_sum = 0usize;
    let mut to_sum = 0usize;
    let mut received = 0usize;
    let mut received_in_to = 0usize;
    let mut add_person = false;
    let mut remove_person = false;
    let mut replies_to_p = 0usize;

    let by_id: std::collections::BTreeMap<&str, &Message> =
        m.iter().map(|msg| (msg.msg_id.as_str(), *msg)).collect();
    let sent_by_p: BTreeSet<&str> = m
        .iter()
        .filter(|msg| msg.from == p)
        .map(|msg| msg.msg_id.as_str())
        .collect();

    for msg in m {
        if msg.from == p {
            sent += 1;
            recipient_sum += msg.recipients().len();
            to_sum += msg.to.len();
            if let Some(parent) = msg.parent_id.as_deref().and_then(|id| by_id.get(id)) {
                let parent_set = participant_set(parent);
                let reply_set = participant_set(msg);
                if !reply_set.is_subset(&parent_set) {
                    add_person = true;
                }
                if parent_set
                    .iter()
                    .any(|member| *member != p && !reply_set.contains(member))
                {
                    remove_person = true;
                }
            }
        }
        if msg.to.iter().any(|a| a == p) {
            received += 1;
            received_in_to += 1;
        } else if msg.cc.iter().any(|a| a == p) {
            received += 1;
        }
        if let Some(parent_id) = msg.parent_id.as_deref() {
            if sent_by_p.contains(parent_id) {
                replies_to_p += 1;
            }
        }
    }

    ThreadStructureFeatures {
        avg_recipients: if sent == 0 {
            0.0
        } else {
            recipient_sum as f64 / sent as f64
        },
        avg_to_recipients: if sent == 0 {
            0.0
        } else {
            to_sum as f64 / sent as f64
        },
        in_to_list_pct: if received == 0 {
            0.0
        } else {
            100.0 * received_in_to as f64 / received as f64
        },
        add_person: if add_person { 1.0 } else { 0.0 },
        remove_person: if remove_person { 1.0 } else { 0.0 },
        reply_rate: if sent == 0 {
            0.0
        } else {
            replies_to_p as f64 / sent as f64
        },
    }
}

/// Sentence spans of a message: annotated spans, or none for an empty body.
/// A contentful message without annotations is an error.
fn sentences_of(msg: &Message) -> Result<&[SentenceSpan], FeatureError> {
    match &msg.sentences {
        Some(spans) => Ok(spans),
        None if !msg.has_content() => Ok(&[]),
        None => Err(FeatureError::MissingSentences {
            msg_id: msg.msg_id.clone(),
        }),
    }
}

fn is_request(da: DaLabel) -> bool {
    matches!(da, DaLabel::RequestAction | DaLabel::RequestInformation)
}

/// Dialog-act class counts over p's sentences, plus the share of p's
/// request-bearing messages that never got a reply within M.
pub fn dialog_act_counts(p: &str, m: &[&Message]) -> Result<DialogActFeatures, FeatureError> {
    let mut counts = DialogActFeatures::default();
    let mut request_messages = 0usize;
    let mut dangling = 0usize;
    for msg in m.iter().filter(|msg| msg.from == p) {
        let spans = sentences_of(msg)?;
        for span in spans {
            match span.da {
                DaLabel::RequestAction => counts.req_action_count += 1.0,
                DaLabel::RequestInformation => counts.req_inform_count += 1.0,
                DaLabel::Inform => counts.inform_count += 1.0,
                DaLabel::Conventional => counts.conventional_count += 1.0,
            }
        }
        if spans.iter().any(|s| is_request(s.da)) {
            request_messages += 1;
            let answered = m
                .iter()
                .any(|r| r.parent_id.as_deref() == Some(msg.msg_id.as_str()));
            if !answered {
                dangling += 1;
            }
        }
    }
    counts.dangling_req_pct = if request_messages == 0 {
        0.0
    } else {
        100.0 * dangling as f64 / request_messages as f64
    };
    Ok(counts)
}

/// Number of overt displays of power in p's sentences within M.
pub fn odp_count(p: &str, m: &[&Message]) -> Result<f64, FeatureError> {
    let mut count = 0usize;
    for msg in m.iter().filter(|msg| msg.from == p) {
        count += sentences_of(msg)?.iter().filter(|s| s.odp).count();
    }
    Ok(count as f64)
}

/// All twenty structural features of p over M.
pub fn structural_features(p: &str, m: &[&Message]) -> Result<StructuralFeatures, FeatureError> {
    Ok(StructuralFeatures {
        positional: positional(p, m),
        verbosity: verbosity(p, m),
        thread_structure: thread_structure(p, m),
        dialog_acts: dialog_act_counts(p, m)?,
        odp_count: odp_count(p, m)?,
    })
}

/// The four per-pair variants of the structural features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    P1Im,
    P2Im,
    P1Mt,
    P2Mt,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::P1Im, Variant::P2Im, Variant::P1Mt, Variant::P2Mt];

    /// Column prefix for this variant in exported matrices.
    pub fn prefix(self) -> &'static str {
        match self {
            Variant::P1Im => "p1_im_",
            Variant::P2Im => "p2_im_",
            Variant::P1Mt => "p1_mt_",
            Variant::P2Mt => "p2_mt_",
        }
    }
}

/// GEN block column names: one-hot genders of both sides.
pub const GEN_COLUMNS: [&str; 4] = [
    "gen_p1_male",
    "gen_p1_female",
    "gen_p2_male",
    "gen_p2_female",
];

/// GNE block column names for p1's environment (the default singleton block).
pub const GNE_P1_COLUMNS: [&str; 3] = ["gne_p1_female_env", "gne_p1_mixed_env", "gne_p1_male_env"];

/// GNE block column names for p2's environment (optional companion block).
pub const GNE_P2_COLUMNS: [&str; 3] = ["gne_p2_female_env", "gne_p2_mixed_env", "gne_p2_male_env"];

/// Structural, gender, and environment features of one ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    /// Indexed by [`Variant::ALL`] order: p1/IM, p2/IM, p1/Mt, p2/Mt.
    pub variants: [StructuralFeatures; 4],
    /// One-hot `[p1 male, p1 female, p2 male, p2 female]`; present only when
    /// both genders are resolved.
    pub gen: Option<[f64; 4]>,
    /// One-hot `[female, mixed, male]` environment of p1.
    pub gne_p1: Option<[f64; 3]>,
    /// One-hot environment of p2.
    pub gne_p2: Option<[f64; 3]>,
}

fn env_one_hot(env: GenderEnvironment) -> [f64; 3] {
    match env {
        GenderEnvironment::FemaleEnv => [1.0, 0.0, 0.0],
        GenderEnvironment::MixedEnv => [0.0, 1.0, 0.0],
        GenderEnvironment::MaleEnv => [0.0, 0.0, 1.0],
    }
}

fn gender_one_hot(gender: Gender) -> Option<[f64; 2]> {
    match gender {
        Gender::Male => Some([1.0, 0.0]),
        Gender::Female => Some([0.0, 1.0]),
        Gender::Indeterminate => None,
    }
}

/// Computes all four structural variants plus gender/environment blocks for
/// the ordered pair (p1, p2) described by `ctx`.
pub fn pair_features(
    thread: &Thread,
    p1: &str,
    p2: &str,
    ctx: &PairContext,
) -> Result<PairFeatures, FeatureError> {
    let mt: Vec<&Message> = thread.messages().iter().collect();
    let im_ids: BTreeSet<&str> = ctx.im_messages.iter().map(|s| s.as_str()).collect();
    let im: Vec<&Message> = thread
        .messages()
        .iter()
        .filter(|m| im_ids.contains(m.msg_id.as_str()))
        .collect();
    let variants = [
        structural_features(p1, &im)?,
        structural_features(p2, &im)?,
        structural_features(p1, &mt)?,
        structural_features(p2, &mt)?,
    ];
    let gen = match (
        ctx.gender_p1.and_then(gender_one_hot),
        ctx.gender_p2.and_then(gender_one_hot),
    ) {
        (Some(g1), Some(g2)) => Some([g1[0], g1[1], g2[0], g2[1]]),
        _ => None,
    };
    Ok(PairFeatures {
        variants,
        gen,
        gne_p1: ctx.env_p1.map(env_one_hot),
        gne_p2: ctx.env_p2.map(env_one_hot),
    })
}

/// Column names of the 80-column structural block, variant-major.
pub fn structural_matrix_columns() -> Vec<String> {
    let mut out = Vec::with_capacity(80);
    for variant in Variant::ALL {
        for column in STRUCTURAL_COLUMNS {
            out.push(format!("{}{}", variant.prefix(), column));
        }
    }
    out
}

impl PairFeatures {
    /// The 80 structural values, aligned with [`structural_matrix_columns`].
    pub fn structural_row(&self) -> Vec<f64> {
        self.variants.iter().flat_map(|v| v.values()).collect()
    }
}
