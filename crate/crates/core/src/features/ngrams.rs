//! Lexical ngram features: lemma, part-of-speech, and mixed families.
//!
//! Each family yields unigram and bigram counts over a person's messages.
//! The lemma family falls back to lowercased surface tokens when no token
//! annotations exist; the part-of-speech and mixed families require them.
//! The mixed family is the part-of-speech stream with closed-class tokens
//! replaced by their lemmas, so function words stay visible while content
//! words generalize.
//!
//! Vocabularies are fit on training data only; lookups of unseen keys return
//! nothing and the caller drops them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::model::Message;

/// Ngram feature family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramFamily {
    Lemma,
    Pos,
    Mixed,
}

impl NgramFamily {
    pub const ALL: [NgramFamily; 3] = [NgramFamily::Lemma, NgramFamily::Pos, NgramFamily::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            NgramFamily::Lemma => "lemma",
            NgramFamily::Pos => "pos",
            NgramFamily::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for NgramFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<NgramFamily, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lemma" => Ok(NgramFamily::Lemma),
            "pos" => Ok(NgramFamily::Pos),
            "mixed" => Ok(NgramFamily::Mixed),
            other => Err(format!("unknown ngram family {other:?}")),
        }
    }
}

/// Penn-style tags treated as closed classes in the mixed family.
const CLOSED_CLASS_TAGS: &[&str] = &[
    "CC", "DT", "EX", "IN", "MD", "PDT", "POS", "PRP", "PRP$", "RP", "TO", "UH", "WDT", "WP",
    "WP$", "WRB",
];

fn is_closed_class(pos: &str) -> bool {
    CLOSED_CLASS_TAGS.contains(&pos)
}

/// The per-family token stream of one message.
fn message_stream(msg: &Message, family: NgramFamily) -> Result<Vec<String>, FeatureError> {
    match (family, &msg.tokens) {
        (NgramFamily::Lemma, Some(tokens)) => {
            Ok(tokens.iter().map(|t| t.lemma.to_lowercase()).collect())
        }
        (NgramFamily::Lemma, None) => Ok(super::tokenize(&msg.body)
            .into_iter()
            .map(|t| t.lower)
            .collect()),
        (NgramFamily::Pos, Some(tokens)) => Ok(tokens.iter().map(|t| t.pos.clone()).collect()),
        (NgramFamily::Mixed, Some(tokens)) => Ok(tokens
            .iter()
            .map(|t| {
                if is_closed_class(&t.pos) {
                    t.lemma.to_lowercase()
                } else {
                    t.pos.clone()
                }
            })
            .collect()),
        (family, None) => {
            if msg.has_content() {
                Err(FeatureError::MissingTokens {
                    msg_id: msg.msg_id.clone(),
                    family: family.as_str(),
                })
            } else {
                Ok(Vec::new())
            }
        }
    }
}

/// Key for one ngram: family, order, and space-joined items.
fn key(family: NgramFamily, items: &[&str]) -> String {
    format!("{}:{}:{}", family.as_str(), items.len(), items.join(" "))
}

fn add_stream_counts(counts: &mut BTreeMap<String, u64>, family: NgramFamily, stream: &[String]) {
    for item in stream {
        *counts.entry(key(family, &[item])).or_insert(0) += 1;
    }
    for window in stream.windows(2) {
        *counts
            .entry(key(family, &[&window[0], &window[1]]))
            .or_insert(0) += 1;
    }
}

/// Unigram and bigram counts of the requested families over p's messages in M.
/// Bigrams never cross message boundaries.
pub fn person_ngrams(
    p: &str,
    m: &[&Message],
    families: &[NgramFamily],
) -> Result<BTreeMap<String, u64>, FeatureError> {
    let mut counts = BTreeMap::new();
    for msg in m.iter().filter(|msg| msg.from == p) {
        for family in families {
            let stream = message_stream(msg, *family)?;
            add_stream_counts(&mut counts, *family, &stream);
        }
    }
    Ok(counts)
}

/// The four per-pair ngram blocks, keyed with the same variant prefixes the
/// structural matrix uses.
pub fn pair_ngrams(
    thread: &crate::model::Thread,
    p1: &str,
    p2: &str,
    im_message_ids: &[String],
    families: &[NgramFamily],
) -> Result<BTreeMap<String, u64>, FeatureError> {
    use super::Variant;
    let im_ids: std::collections::BTreeSet<&str> =
        im_message_ids.iter().map(|s| s.as_str()).collect();
    let mt: Vec<&Message> = thread.messages().iter().collect();
    let im: Vec<&Message> = thread
        .messages()
        .iter()
        .filter(|m| im_ids.contains(m.msg_id.as_str()))
        .collect();
    let mut out = BTreeMap::new();
    for (variant, person, reference) in [
        (Variant::P1Im, p1, &im),
        (Variant::P2Im, p2, &im),
        (Variant::P1Mt, p1, &mt),
        (Variant::P2Mt, p2, &mt),
    ] {
        for (k, v) in person_ngrams(person, reference, families)? {
            out.insert(format!("{}{}", variant.prefix(), k), v);
        }
    }
    Ok(out)
}

/// A frozen key-to-id mapping fit on training data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramVocabulary {
    ids: BTreeMap<String, u32>,
}

impl NgramVocabulary {
    /// Assigns dense ids to the distinct keys, in sorted order.
    pub fn fit<I, S>(keys: I) -> NgramVocabulary
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let distinct: std::collections::BTreeSet<String> =
            keys.into_iter().map(Into::into).collect();
        NgramVocabulary {
            ids: distinct
                .into_iter()
                .enumerate()
                .map(|(id, key)| (key, id as u32))
                .collect(),
        }
    }

    pub fn id(&self, key: &str) -> Option<u32> {
        self.ids.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// (key, id) pairs in id order.
    pub fn entries(&self) -> Vec<(&str, u32)> {
        let mut out: Vec<(&str, u32)> = self.ids.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        out.sort_by_key(|(_, id)| *id);
        out
    }

    /// Projects raw counts through the vocabulary, dropping unseen keys.
    /// Output is sorted by id.
    pub fn project(&self, counts: &BTreeMap<String, u64>) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = counts
            .iter()
            .filter_map(|(key, count)| self.id(key).map(|id| (id, *count as f64)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }

    /// Half-open id ranges grouping keys by their leading segment (the part
    /// before the first ':', e.g. "p1_im_lemma"). Ids follow sorted key
    /// order, so each group is contiguous.
    pub fn family_blocks(&self) -> Vec<(u32, u32)> {
        let mut blocks: Vec<(u32, u32)> = Vec::new();
        let mut current: Option<(&str, u32)> = None;
        for (key, id) in self.entries() {
            let segment = key.split(':').next().unwrap_or(key);
            match current {
                Some((seg, _)) if seg == segment => {}
                Some((_, start)) => {
                    blocks.push((start, id));
                    current = Some((segment, id));
                }
                None => current = Some((segment, id)),
            }
        }
        if let Some((_, start)) = current {
            blocks.push((start, self.ids.len() as u32));
        }
        blocks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Thread, TokenAnnotation};
    use chrono::TimeZone;

    fn msg(id: &str, from: &str, body: &str) -> Message {
        Message {
            msg_id: id.to_string(),
            parent_id: None,
            timestamp: chrono::Utc.timestamp_opt(0, 0).unwrap(),
            from: from.to_string(),
            to: vec!["sink@x.com".to_string()],
            cc: vec![],
            body: body.to_string(),
            sentences: None,
            tokens: None,
        }
    }

    fn with_tokens(mut m: Message, tokens: &[(&str, &str)]) -> Message {
        // Offsets synthesized: one byte per token, strictly ascending.
        m.tokens = Some(
            tokens
                .iter()
                .enumerate()
                .map(|(i, (lemma, pos))| TokenAnnotation {
                    start: i,
                    end: i + 1,
                    lemma: lemma.to_string(),
                    pos: pos.to_string(),
                })
                .collect(),
        );
        m
    }

    #[test]
    fn surface_fallback_unigrams_and_bigrams() {
        let m = msg("m1", "a@x.com", "send the report");
        let counts = person_ngrams("a@x.com", &[&m], &[NgramFamily::Lemma]).unwrap();
        assert_eq!(counts["lemma:1:send"], 1);
        assert_eq!(counts["lemma:1:the"], 1);
        assert_eq!(counts["lemma:1:report"], 1);
        assert_eq!(counts["lemma:2:send the"], 1);
        assert_eq!(counts["lemma:2:the report"], 1);
        assert_eq!(counts.len(), 5);
    }

    #[test]
    fn pos_and_mixed_need_annotations() {
        let plain = msg("m1", "a@x.com", "send the report");
        let err = person_ngrams("a@x.com", &[&plain], &[NgramFamily::Pos]).unwrap_err();
        assert!(matches!(
            err,
            FeatureError::MissingTokens { family: "pos", .. }
        ));

        let tagged = with_tokens(
            msg("m2", "a@x.com", "abc"),
            &[("send", "VB"), ("the", "DT"), ("report", "NN")],
        );
        let counts = person_ngrams(
            "a@x.com",
            &[&tagged],
            &[NgramFamily::Pos, NgramFamily::Mixed],
        )
        .unwrap();
        assert_eq!(counts["pos:2:VB DT"], 1);
        assert_eq!(counts["pos:2:DT NN"], 1);
        // Mixed keeps the determiner's lemma, generalizes the open classes.
        assert_eq!(counts["mixed:2:VB the"], 1);
        assert_eq!(counts["mixed:2:the NN"], 1);
        assert_eq!(counts["mixed:1:the"], 1);
        assert!(!counts.contains_key("mixed:1:DT"));
    }

    #[test]
    fn empty_reference_set_yields_nothing() {
        let counts = person_ngrams("a@x.com", &[], &[NgramFamily::Lemma]).unwrap();
        assert!(counts.is_empty());
    }

    #[test]
    fn bigrams_stay_within_messages() {
        let m1 = msg("m1", "a@x.com", "alpha beta");
        let m2 = msg("m2", "a@x.com", "gamma delta");
        let counts = person_ngrams("a@x.com", &[&m1, &m2], &[NgramFamily::Lemma]).unwrap();
        assert!(counts.contains_key("lemma:2:alpha beta"));
        assert!(!counts.contains_key("lemma:2:beta gamma"));
    }

    #[test]
    fn pair_blocks_carry_variant_prefixes() {
        let thread = Thread::new(
            "t".into(),
            vec![msg("m1", "a@x.com", "alpha beta"), {
                let mut m = msg("m2", "b@x.com", "gamma");
                m.timestamp = chrono::Utc.timestamp_opt(60, 0).unwrap();
                m
            }],
        )
        .unwrap();
        let counts = pair_ngrams(
            &thread,
            "a@x.com",
            "b@x.com",
            &["m1".to_string()],
            &[NgramFamily::Lemma],
        )
        .unwrap();
        assert_eq!(counts["p1_im_lemma:1:alpha"], 1);
        assert_eq!(counts["p1_mt_lemma:1:alpha"], 1);
        // b sent nothing inside IM but did send within the thread.
        assert!(!counts.contains_key("p2_im_lemma:1:gamma"));
        assert_eq!(counts["p2_mt_lemma:1:gamma"], 1);
    }

    #[test]
    fn vocabulary_projects_and_drops_unseen() {
        let vocab = NgramVocabulary::fit(["b", "a", "c", "a"]);
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.id("a"), Some(0));
        assert_eq!(vocab.id("c"), Some(2));
        let mut counts = BTreeMap::new();
        counts.insert("c".to_string(), 2u64);
        counts.insert("zzz".to_string(), 9u64);
        counts.insert("a".to_string(), 1u64);
        let projected = vocab.project(&counts);
        assert_eq!(projected, vec![(0, 1.0), (2, 2.0)]);
    }

    #[test]
    fn family_blocks_tile_the_vocabulary() {
        let vocab = NgramVocabulary::fit([
            "p1_im_lemma:1:a",
            "p1_im_lemma:2:a b",
            "p1_im_pos:1:NN",
            "p2_mt_lemma:1:c",
        ]);
        let blocks = vocab.family_blocks();
        assert_eq!(blocks, vec![(0, 2), (2, 3), (3, 4)]);
        assert!(NgramVocabulary::default().family_blocks().is_empty());
    }
}
