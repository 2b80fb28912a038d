//! Interacting participant pairs, power labels, and gender environments.
//!
//! Two participants interact in a thread when at least one nonempty message
//! passes between them (sender on one side, To/Cc recipient on the other).
//! Pairs whose members are related in the organizational hierarchy carry a
//! power label giving the direction of dominance. Independently, each
//! participant sees a gender environment: the gender mix of everyone else in
//! the thread.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DominanceSet, Gender, ParticipantRecord, Thread};

#[derive(Debug, Error)]
pub enum PairError {
    #[error("thread {thread_id}: {p1} and {p2} dominate each other; the hierarchy is corrupt")]
    BothDirections {
        thread_id: String,
        p1: String,
        p2: String,
    },
    #[error("thread {thread_id}: {email} is the only participant, no gender environment exists")]
    SingleParticipant { thread_id: String, email: String },
    #[error("thread {thread_id}: participant {email} has no resolved gender")]
    UnresolvedGender { thread_id: String, email: String },
}

/// Direction of power from p1's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HpLabel {
    Superior,
    Subordinate,
}

impl HpLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            HpLabel::Superior => "superior",
            HpLabel::Subordinate => "subordinate",
        }
    }

    /// Label seen from the other side of the pair.
    pub fn flipped(self) -> HpLabel {
        match self {
            HpLabel::Superior => HpLabel::Subordinate,
            HpLabel::Subordinate => HpLabel::Superior,
        }
    }
}

impl std::str::FromStr for HpLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<HpLabel, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "superior" => Ok(HpLabel::Superior),
            "subordinate" => Ok(HpLabel::Subordinate),
            other => Err(format!("unknown power label {other:?}")),
        }
    }
}

/// Gender mix of a thread as seen by one participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderEnvironment {
    FemaleEnv,
    MixedEnv,
    MaleEnv,
}

impl GenderEnvironment {
    pub fn as_str(self) -> &'static str {
        match self {
            GenderEnvironment::FemaleEnv => "female_env",
            GenderEnvironment::MixedEnv => "mixed_env",
            GenderEnvironment::MaleEnv => "male_env",
        }
    }
}

impl std::str::FromStr for GenderEnvironment {
    type Err = String;

    fn from_str(s: &str) -> Result<GenderEnvironment, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female_env" => Ok(GenderEnvironment::FemaleEnv),
            "mixed_env" => Ok(GenderEnvironment::MixedEnv),
            "male_env" => Ok(GenderEnvironment::MaleEnv),
            other => Err(format!("unknown gender environment {other:?}")),
        }
    }
}

/// Identifies one ordered pair within one thread.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub thread_id: String,
    pub p1: String,
    pub p2: String,
}

/// Everything attached to a pair: its interaction messages, the power label
/// when the pair is in the hierarchy, and genders/environments when resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairContext {
    /// Ids of the interaction messages, in thread order. Never empty.
    pub im_messages: Vec<String>,
    /// Present exactly when the two sides are related in the hierarchy.
    pub hp_label: Option<HpLabel>,
    pub gender_p1: Option<Gender>,
    pub gender_p2: Option<Gender>,
    pub env_p1: Option<GenderEnvironment>,
    pub env_p2: Option<GenderEnvironment>,
}

/// Interaction messages between two participants: nonempty-body messages where
/// one is the sender and the other a To/Cc recipient. Symmetric in (p1, p2).
pub fn interaction_messages(thread: &Thread, p1: &str, p2: &str) -> Vec<String> {
    let mut out = Vec::new();
    for msg in thread.messages() {
        if !msg.has_content() {
            continue;
        }
        let recipients = msg.recipients();
        let forward = msg.from == p1 && recipients.contains(&p2);
        let backward = msg.from == p2 && recipients.contains(&p1);
        if forward || backward {
            out.push(msg.msg_id.clone());
        }
    }
    out
}

/// All interacting pairs of a thread with their interaction messages, keyed by
/// the unordered pair in lexicographic order.
pub fn interaction_map(thread: &Thread) -> BTreeMap<(String, String), Vec<String>> {
    let mut map: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for msg in thread.messages() {
        if !msg.has_content() {
            continue;
        }
        for recipient in msg.recipients() {
            if recipient == msg.from {
                continue;
            }
            let key = if msg.from.as_str() < recipient {
                (msg.from.clone(), recipient.to_string())
            } else {
                (recipient.to_string(), msg.from.clone())
            };
            let ids = map.entry(key).or_default();
            if ids.last().map(|last| last != &msg.msg_id).unwrap_or(true) {
                ids.push(msg.msg_id.clone());
            }
        }
    }
    map
}

/// Unordered interacting pairs of a thread.
pub fn interacting_pairs(thread: &Thread) -> BTreeSet<(String, String)> {
    interaction_map(thread).into_keys().collect()
}

/// Power label for the ordered pair (p1, p2), or `None` when the two are
/// unrelated in the hierarchy.
pub fn power_label(
    thread_id: &str,
    p1: &str,
    p2: &str,
    dominance: &DominanceSet,
) -> Result<Option<HpLabel>, PairError> {
    let forward = dominance.dominates(p1, p2);
    let backward = dominance.dominates(p2, p1);
    match (forward, backward) {
        (true, true) => Err(PairError::BothDirections {
            thread_id: thread_id.to_string(),
            p1: p1.to_string(),
            p2: p2.to_string(),
        }),
        (true, false) => Ok(Some(HpLabel::Superior)),
        (false, true) => Ok(Some(HpLabel::Subordinate)),
        (false, false) => Ok(None),
    }
}

/// Hierarchy-related interacting pairs of a thread, in canonical order
/// (lexicographically smaller address first) with the label for that order.
pub fn related_pairs(
    thread: &Thread,
    dominance: &DominanceSet,
) -> Result<Vec<(PairKey, HpLabel)>, PairError> {
    let mut out = Vec::new();
    for (p1, p2) in interacting_pairs(thread) {
        if let Some(label) = power_label(thread.thread_id(), &p1, &p2, dominance)? {
            out.push((
                PairKey {
                    thread_id: thread.thread_id().to_string(),
                    p1,
                    p2,
                },
                label,
            ));
        }
    }
    Ok(out)
}

/// Gender environment of participant `p`: the share of women among the other
/// participants, bucketed at exact thirds.
///
/// With `f` women among `n` others: female above 2/3, male below 1/3, mixed
/// otherwise — both boundaries land in mixed. Compared in integers (`3f` vs
/// `2n` and `n`), so no floating-point rounding can move the boundary.
pub fn gender_environment(
    thread: &Thread,
    p: &str,
    records: &BTreeMap<String, ParticipantRecord>,
) -> Result<GenderEnvironment, PairError> {
    let mut women = 0u64;
    let mut others = 0u64;
    for member in thread.participants() {
        if member == p {
            continue;
        }
        match records.get(member).map(|r| r.gender) {
            Some(Gender::Female) => {
                women += 1;
                others += 1;
            }
            Some(Gender::Male) => others += 1,
            Some(Gender::Indeterminate) | None => {
                return Err(PairError::UnresolvedGender {
                    thread_id: thread.thread_id().to_string(),
                    email: member.clone(),
                })
            }
        }
    }
    if others == 0 {
        return Err(PairError::SingleParticipant {
            thread_id: thread.thread_id().to_string(),
            email: p.to_string(),
        });
    }
    Ok(if 3 * women > 2 * others {
        GenderEnvironment::FemaleEnv
    } else if 3 * women < others {
        GenderEnvironment::MaleEnv
    } else {
        GenderEnvironment::MixedEnv
    })
}

/// Assembles one (key, context) per interacting pair of a thread, in canonical
/// pair order. Genders and environments are filled where resolvable and left
/// empty otherwise; only a corrupt hierarchy is an error.
pub fn build_pairs(
    thread: &Thread,
    dominance: &DominanceSet,
    records: &BTreeMap<String, ParticipantRecord>,
) -> Result<Vec<(PairKey, PairContext)>, PairError> {
    let mut out = Vec::new();
    for ((p1, p2), im_messages) in interaction_map(thread) {
        let hp_label = power_label(thread.thread_id(), &p1, &p2, dominance)?;
        let resolved_gender = |email: &str| {
            records
                .get(email)
                .map(|r| r.gender)
                .filter(|g| *g != Gender::Indeterminate)
        };
        let key = PairKey {
            thread_id: thread.thread_id().to_string(),
            p1: p1.clone(),
            p2: p2.clone(),
        };
        let context = PairContext {
            im_messages,
            hp_label,
            gender_p1: resolved_gender(&p1),
            gender_p2: resolved_gender(&p2),
            env_p1: gender_environment(thread, &p1, records).ok(),
            env_p2: gender_environment(thread, &p2, records).ok(),
        };
        out.push((key, context));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Message, Provenance};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn msg(id: &str, secs: i64, from: &str, to: &[&str], cc: &[&str], body: &str) -> Message {
        Message {
            msg_id: id.to_string(),
            parent_id: None,
            timestamp: chrono::Utc.timestamp_opt(secs, 0).unwrap(),
            from: from.to_string(),
            to: to.iter().map(|s| s.to_string()).collect(),
            cc: cc.iter().map(|s| s.to_string()).collect(),
            body: body.to_string(),
            sentences: None,
            tokens: None,
        }
    }

    fn records(genders: &[(&str, Gender)]) -> BTreeMap<String, ParticipantRecord> {
        genders
            .iter()
            .map(|(email, gender)| {
                (
                    email.to_string(),
                    ParticipantRecord {
                        email: email.to_string(),
                        display_names: BTreeSet::new(),
                        gender: *gender,
                        ambiguity_score: None,
                        provenance: Provenance::Auto,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn interaction_requires_content_and_direct_link() {
        let thread = Thread::new(
            "t".into(),
            vec![
                msg("m1", 0, "a@x.com", &["b@x.com", "c@x.com"], &[], "hi"),
                msg("m2", 60, "a@x.com", &["b@x.com"], &[], "   "),
                msg("m3", 120, "c@x.com", &[], &["a@x.com"], "cc works"),
            ],
        )
        .unwrap();
        assert_eq!(interaction_messages(&thread, "a@x.com", "b@x.com"), ["m1"]);
        assert_eq!(
            interaction_messages(&thread, "b@x.com", "a@x.com"),
            interaction_messages(&thread, "a@x.com", "b@x.com"),
        );
        // Cc counts as a recipient; co-recipients do not interact.
        assert_eq!(
            interaction_messages(&thread, "a@x.com", "c@x.com"),
            ["m1", "m3"]
        );
        assert!(interaction_messages(&thread, "b@x.com", "c@x.com").is_empty());
        let pairs = interacting_pairs(&thread);
        assert_eq!(pairs.len(), 2);
        assert!(pairs.contains(&("a@x.com".to_string(), "b@x.com".to_string())));
        assert!(pairs.contains(&("a@x.com".to_string(), "c@x.com".to_string())));
    }

    #[test]
    fn two_directions_one_pair() {
        let thread = Thread::new(
            "t".into(),
            vec![
                msg("m1", 0, "a@x.com", &["b@x.com"], &[], "ping"),
                msg("m2", 60, "b@x.com", &["a@x.com"], &[], "pong"),
            ],
        )
        .unwrap();
        let map = interaction_map(&thread);
        assert_eq!(map.len(), 1);
        assert_eq!(
            map[&("a@x.com".to_string(), "b@x.com".to_string())],
            ["m1", "m2"]
        );
    }

    #[test]
    fn power_labels_follow_the_hierarchy() {
        let dom = DominanceSet::from_immediate(vec![
            ("boss@x.com".to_string(), "mid@x.com".to_string()),
            ("mid@x.com".to_string(), "worker@x.com".to_string()),
        ])
        .unwrap();
        // Chain dominance labels the distant pair too.
        assert_eq!(
            power_label("t", "boss@x.com", "worker@x.com", &dom).unwrap(),
            Some(HpLabel::Superior)
        );
        assert_eq!(
            power_label("t", "worker@x.com", "boss@x.com", &dom).unwrap(),
            Some(HpLabel::Subordinate)
        );
        assert_eq!(
            power_label("t", "boss@x.com", "other@x.com", &dom).unwrap(),
            None
        );
    }

    #[test]
    fn related_pairs_filters_and_orders() {
        let dom = DominanceSet::from_immediate(vec![(
            "boss@x.com".to_string(),
            "worker@x.com".to_string(),
        )])
        .unwrap();
        let thread = Thread::new(
            "t".into(),
            vec![
                msg("m1", 0, "worker@x.com", &["boss@x.com"], &[], "report"),
                msg("m2", 60, "worker@x.com", &["outsider@x.com"], &[], "aside"),
            ],
        )
        .unwrap();
        let ripp = related_pairs(&thread, &dom).unwrap();
        assert_eq!(ripp.len(), 1);
        let (key, label) = &ripp[0];
        // Canonical order puts boss first; the label describes that side.
        assert_eq!(
            (key.p1.as_str(), key.p2.as_str()),
            ("boss@x.com", "worker@x.com")
        );
        assert_eq!(*label, HpLabel::Superior);
    }

    #[test]
    fn corrupt_hierarchy_is_detected() {
        // from_immediate would reject this, so forge the set through serde.
        let dom: DominanceSet = serde_json::from_value(serde_json::json!({
            "immediate": [["a@x.com", "b@x.com"], ["b@x.com", "a@x.com"]],
            "closed": [["a@x.com", "b@x.com"], ["b@x.com", "a@x.com"]],
        }))
        .unwrap();
        let err = power_label("t", "a@x.com", "b@x.com", &dom).unwrap_err();
        assert!(matches!(err, PairError::BothDirections { .. }));
    }

    #[test]
    fn environment_boundaries_are_exact() {
        // Six participants: five women and one man.
        let everyone = records(&[
            ("man@x.com", Gender::Male),
            ("w1@x.com", Gender::Female),
            ("w2@x.com", Gender::Female),
            ("w3@x.com", Gender::Female),
            ("w4@x.com", Gender::Female),
            ("w5@x.com", Gender::Female),
        ]);
        let thread = Thread::new(
            "t".into(),
            vec![msg(
                "m1",
                0,
                "man@x.com",
                &["w1@x.com", "w2@x.com", "w3@x.com", "w4@x.com", "w5@x.com"],
                &[],
                "hi",
            )],
        )
        .unwrap();
        // The man sees 5/5 women; a woman sees 4/5.
        assert_eq!(
            gender_environment(&thread, "man@x.com", &everyone).unwrap(),
            GenderEnvironment::FemaleEnv
        );
        assert_eq!(
            gender_environment(&thread, "w1@x.com", &everyone).unwrap(),
            GenderEnvironment::FemaleEnv
        );

        // Exactly 2/3 women among the others is still mixed, as is exactly 1/3.
        let four = records(&[
            ("p@x.com", Gender::Male),
            ("w1@x.com", Gender::Female),
            ("w2@x.com", Gender::Female),
            ("m1@x.com", Gender::Male),
        ]);
        let thread = Thread::new(
            "t".into(),
            vec![msg(
                "m1",
                0,
                "p@x.com",
                &["w1@x.com", "w2@x.com", "m1@x.com"],
                &[],
                "hi",
            )],
        )
        .unwrap();
        assert_eq!(
            gender_environment(&thread, "p@x.com", &four).unwrap(),
            GenderEnvironment::MixedEnv
        );
        let flipped = records(&[
            ("p@x.com", Gender::Male),
            ("w1@x.com", Gender::Female),
            ("m1@x.com", Gender::Male),
            ("m2@x.com", Gender::Male),
        ]);
        let thread2 = Thread::new(
            "t".into(),
            vec![msg(
                "m1",
                0,
                "p@x.com",
                &["w1@x.com", "m1@x.com", "m2@x.com"],
                &[],
                "hi",
            )],
        )
        .unwrap();
        assert_eq!(
            gender_environment(&thread2, "p@x.com", &flipped).unwrap(),
            GenderEnvironment::MixedEnv
        );
    }

    #[test]
    fn environment_thousandths_above_boundary_is_female() {
        // 667 women among 1000 others: 3*667 = 2001 > 2000, so strictly above
        // two thirds even though the decimal expansion rounds to 66.7%.
        let mut genders: Vec<(String, Gender)> = vec![("viewer@x.com".to_string(), Gender::Male)];
        for i in 0..667 {
            genders.push((format!("w{i}@x.com"), Gender::Female));
        }
        for i in 0..333 {
            genders.push((format!("m{i}@x.com"), Gender::Male));
        }
        let records: BTreeMap<String, ParticipantRecord> = genders
            .iter()
            .map(|(email, gender)| {
                (
                    email.clone(),
                    ParticipantRecord {
                        email: email.clone(),
                        display_names: BTreeSet::new(),
                        gender: *gender,
                        ambiguity_score: None,
                        provenance: Provenance::Auto,
                    },
                )
            })
            .collect();
        let others: Vec<String> = genders[1..].iter().map(|(e, _)| e.clone()).collect();
        let to: Vec<&str> = others.iter().map(|s| s.as_str()).collect();
        let thread = Thread::new(
            "t".into(),
            vec![msg("m1", 0, "viewer@x.com", &to, &[], "hi")],
        )
        .unwrap();
        assert_eq!(
            gender_environment(&thread, "viewer@x.com", &records).unwrap(),
            GenderEnvironment::FemaleEnv
        );
    }

    #[test]
    fn environment_error_cases() {
        let solo = Thread::new(
            "t".into(),
            vec![msg("m1", 0, "a@x.com", &["a@x.com"], &[], "note to self")],
        )
        .unwrap();
        let recs = records(&[("a@x.com", Gender::Male)]);
        assert!(matches!(
            gender_environment(&solo, "a@x.com", &recs),
            Err(PairError::SingleParticipant { .. })
        ));

        let thread = Thread::new(
            "t".into(),
            vec![msg("m1", 0, "a@x.com", &["b@x.com"], &[], "hi")],
        )
        .unwrap();
        let partial = records(&[("a@x.com", Gender::Male)]);
        assert!(matches!(
            gender_environment(&thread, "a@x.com", &partial),
            Err(PairError::UnresolvedGender { ref email, .. }) if email == "b@x.com"
        ));
    }

    #[test]
    fn build_pairs_fills_what_it_can() {
        let dom =
            DominanceSet::from_immediate(vec![("a@x.com".to_string(), "b@x.com".to_string())])
                .unwrap();
        let recs = records(&[("a@x.com", Gender::Male), ("b@x.com", Gender::Female)]);
        let thread = Thread::new(
            "t".into(),
            vec![
                msg("m1", 0, "a@x.com", &["b@x.com"], &[], "hello"),
                msg("m2", 60, "b@x.com", &["a@x.com", "c@x.com"], &[], "reply"),
            ],
        )
        .unwrap();
        let pairs = build_pairs(&thread, &dom, &recs).unwrap();
        assert_eq!(pairs.len(), 2);
        let ab = &pairs[0];
        assert_eq!((ab.0.p1.as_str(), ab.0.p2.as_str()), ("a@x.com", "b@x.com"));
        assert_eq!(ab.1.hp_label, Some(HpLabel::Superior));
        assert_eq!(ab.1.gender_p1, Some(Gender::Male));
        assert_eq!(ab.1.gender_p2, Some(Gender::Female));
        // c has no record, so environments cannot be computed anywhere.
        assert_eq!(ab.1.env_p1, None);
        let bc = &pairs[1];
        assert_eq!((bc.0.p1.as_str(), bc.0.p2.as_str()), ("b@x.com", "c@x.com"));
        assert_eq!(bc.1.hp_label, None);
        assert_eq!(bc.1.gender_p2, None);
    }

    /// Brute-force oracle: a pair interacts iff some contentful message passes
    /// between its two members.
    fn brute_force_ipp(thread: &Thread) -> BTreeSet<(String, String)> {
        let participants: Vec<&String> = thread.participants().iter().collect();
        let mut out = BTreeSet::new();
        for i in 0..participants.len() {
            for j in (i + 1)..participants.len() {
                if !interaction_messages(thread, participants[i], participants[j]).is_empty() {
                    out.insert((participants[i].clone(), participants[j].clone()));
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn interacting_pairs_match_brute_force(
            raw in proptest::collection::vec(
                (
                    0u8..8,
                    proptest::collection::vec(0u8..8, 0..4),
                    proptest::collection::vec(0u8..8, 0..3),
                    prop::bool::ANY,
                ),
                1..10,
            )
        ) {
            let addr = |i: u8| format!("p{i}@x.com");
            let messages: Vec<Message> = raw
                .iter()
                .enumerate()
                .map(|(idx, (from, to, cc, empty))| {
                    let to: Vec<String> = to.iter().map(|i| addr(*i)).collect();
                    let cc: Vec<String> = cc.iter().map(|i| addr(*i)).collect();
                    Message {
                        msg_id: format!("m{idx}"),
                        parent_id: None,
                        timestamp: chrono::Utc.timestamp_opt(idx as i64, 0).unwrap(),
                        from: addr(*from),
                        to,
                        cc,
                        body: if *empty { String::new() } else { "content".into() },
                        sentences: None,
                        tokens: None,
                    }
                })
                .collect();
            let thread = Thread::new("t".into(), messages).unwrap();
            prop_assert_eq!(interacting_pairs(&thread), brute_force_ipp(&thread));

            // IM symmetry on every participant pair.
            let participants: Vec<&String> = thread.participants().iter().collect();
            for a in &participants {
                for b in &participants {
                    if a < b {
                        prop_assert_eq!(
                            interaction_messages(&thread, a, b),
                            interaction_messages(&thread, b, a)
                        );
                    }
                }
            }
        }

        #[test]
        fn hp_label_flips_with_orientation(
            edges in proptest::collection::btree_set((0u8..6, 0u8..6), 0..10)
        ) {
            let edges: Vec<(String, String)> = edges
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| {
                    let (hi, lo) = if a < b { (a, b) } else { (b, a) };
                    (format!("p{hi}@x.com"), format!("p{lo}@x.com"))
                })
                .collect();
            let dom = DominanceSet::from_immediate(edges).unwrap();
            for i in 0..6u8 {
                for j in 0..6u8 {
                    if i == j {
                        continue;
                    }
                    let a = format!("p{i}@x.com");
                    let b = format!("p{j}@x.com");
                    let fwd = power_label("t", &a, &b, &dom).unwrap();
                    let rev = power_label("t", &b, &a, &dom).unwrap();
                    prop_assert_eq!(fwd, rev.map(HpLabel::flipped));
                }
            }
        }
    }
}
