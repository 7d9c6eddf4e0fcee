use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::{MaskedSentence, TopicLabel};

/// Orders per-topic sentences as content, form, context. Missing topics are
/// omitted with a warning.
pub fn compose_description(
    sentences: &BTreeMap<TopicLabel, MaskedSentence>,
) -> Vec<MaskedSentence> {
    let mut out = Vec::with_capacity(TopicLabel::COUNT);
    for topic in TopicLabel::ALL {
        match sentences.get(&topic) {
            Some(s) => out.push(s.clone()),
            None => log::warn!("no {topic} sentence; omitted from the description"),
        }
    }
    out
}
