//! Pluggable sentence taggers with rule-based baselines.
//!
//! The feature extractors consume per-sentence dialog-act labels and
//! overt-display-of-power flags. High-quality labels arrive through the
//! annotation sidecar; these baselines exist so the pipeline runs end to end
//! without one. They are deliberately simple pattern rules — do not expect
//! them to approach the accuracy of a trained tagger — and they never
//! overwrite annotations that are already present.

use std::sync::LazyLock;

use regex::Regex;

use crate::model::{DaLabel, SentenceSpan, Thread};

/// Splits a body into sentences and labels each with a dialog act.
/// Implementations must leave `odp` false; flagging is the [`OdpTagger`]'s job.
pub trait DialogActTagger {
    fn tag(&self, body: &str) -> Vec<SentenceSpan>;
}

/// Decides whether a labeled sentence overtly displays power.
pub trait OdpTagger {
    fn flag(&self, sentence: &str, da: DaLabel) -> bool;
}

/// Rule-based dialog-act baseline.
///
/// Sentences end at runs of terminal punctuation or at newlines. Labels, in
/// precedence order: a sentence ending in `?` asks for information; one
/// opening with a greeting/closing word is conventional; one opening with an
/// imperative-lexicon verb or "please" requests an action; anything else
/// informs.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineDaTagger;

const GREETING_WORDS: &[&str] = &[
    "hi",
    "hello",
    "hey",
    "dear",
    "greetings",
    "thanks",
    "thank",
    "thx",
    "regards",
    "best",
    "cheers",
    "sincerely",
    "welcome",
    "congrats",
    "congratulations",
    "goodbye",
    "bye",
];

const IMPERATIVE_WORDS: &[&str] = &[
    "please", "send", "call", "let", "review", "forward", "attach", "schedule", "confirm", "check",
    "prepare", "update", "submit", "provide", "complete", "sign", "print", "file", "remember",
    "ensure", "make", "give", "get", "draft", "finish", "fix", "keep", "take",
];

impl BaselineDaTagger {
    fn label(sentence: &str) -> DaLabel {
        let trimmed = sentence.trim_end();
        if trimmed.ends_with('?') {
            return DaLabel::RequestInformation;
        }
        let first = super::tokenize(sentence)
            .into_iter()
            .next()
            .map(|t| t.lower);
        match first {
            Some(word) if GREETING_WORDS.contains(&word.as_str()) => DaLabel::Conventional,
            Some(word) if IMPERATIVE_WORDS.contains(&word.as_str()) => DaLabel::RequestAction,
            _ => DaLabel::Inform,
        }
    }
}

impl DialogActTagger for BaselineDaTagger {
    fn tag(&self, body: &str) -> Vec<SentenceSpan> {
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut end = 0usize;
        let mut terminal_run = false;
        let close = |spans: &mut Vec<SentenceSpan>, start: &mut Option<usize>, end: usize| {
            if let Some(s) = start.take() {
                if s < end {
                    spans.push(SentenceSpan {
                        start: s,
                        end,
                        da: DaLabel::Inform,
                        odp: false,
                    });
                }
            }
        };
        for (idx, ch) in body.char_indices() {
            let is_terminal = matches!(ch, '.' | '!' | '?');
            if ch == '\n' {
                close(&mut spans, &mut start, end);
                terminal_run = false;
                continue;
            }
            if terminal_run && !is_terminal {
                close(&mut spans, &mut start, end);
                terminal_run = false;
            }
            if !ch.is_whitespace() {
                if start.is_none() {
                    start = Some(idx);
                }
                end = idx + ch.len_utf8();
                if is_terminal {
                    terminal_run = true;
                }
            }
        }
        close(&mut spans, &mut start, body.len().min(end));
        for span in &mut spans {
            span.da = Self::label(&body[span.start..span.end]);
        }
        spans
    }
}

/// Rule-based overt-display-of-power baseline.
///
/// A sentence counts when it is a request or statement (not a conventional
/// nicety), expresses necessity or a deadline, and carries no softening
/// marker.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineOdpTagger;

static NECESSITY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        \b(i|we)\s+need\b
        | \bneed\s+(you|this|it|him|her|them)\b
        | \bmust\b
        | \bhave\s+to\b
        | \basap\b
        | \bby\s+( (mon|tues|wednes|thurs|fri|satur|sun)day
                 | tomorrow | today | tonight | noon | eod
                 | end\s+of | close\s+of | \d )",
    )
    .expect("static pattern compiles")
});

static MITIGATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(could\s+you|would\s+you|please\s+try)\b").expect("static pattern compiles")
});

impl OdpTagger for BaselineOdpTagger {
    fn flag(&self, sentence: &str, da: DaLabel) -> bool {
        if da == DaLabel::Conventional {
            return false;
        }
        NECESSITY.is_match(sentence) && !MITIGATION.is_match(sentence)
    }
}

/// Tags every unannotated message in place with the given taggers. Messages
/// that already carry sentence annotations are left untouched; empty bodies
/// get an empty annotation so downstream feature passes accept them.
pub fn tag_threads(threads: &mut [Thread], da: &dyn DialogActTagger, odp: &dyn OdpTagger) {
    for thread in threads {
        for msg in thread.messages_mut() {
            if msg.sentences.is_some() {
                continue;
            }
            let mut spans = if msg.has_content() {
                da.tag(&msg.body)
            } else {
                Vec::new()
            };
            for span in &mut spans {
                span.odp = odp.flag(&msg.body[span.start..span.end], span.da);
            }
            msg.sentences = Some(spans);
        }
    }
}
