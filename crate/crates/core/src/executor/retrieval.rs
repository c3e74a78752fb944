//! Lexical TF-IDF retrieval over operator cards.
//!
//! Documents are a card's description followed by its tags. Terms are
//! lower-cased alphanumeric runs; term frequency is the raw count and the
//! inverse document frequency is the smoothed `ln((1 + N) / (1 + df)) + 1`.
//! Query terms absent from every card are ignored. Cards are ranked by cosine
//! similarity, ties broken by ascending name.

use std::collections::BTreeMap;

use super::OperatorCard;

pub const DEFAULT_K: usize = 4;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn document(card: &OperatorCard) -> String {
    let mut doc = card.description.clone();
    for tag in &card.tags {
        doc.push(' ');
        doc.push_str(tag);
    }
    doc
}

fn counts(tokens: &[String]) -> BTreeMap<&str, f64> {
    let mut tf = BTreeMap::new();
    for t in tokens {
        *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    tf
}

/// Cosine similarity of the goal against every card, in library order.
pub fn scores(goal: &str, library: &[OperatorCard]) -> Vec<f64> {
    let docs: Vec<Vec<String>> = library.iter().map(|c| tokenize(&document(c))).collect();
    let tfs: Vec<BTreeMap<&str, f64>> = docs.iter().map(|d| counts(d)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &tfs {
        for term in tf.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let n = library.len() as f64;
    let idf = |term: &str| -> Option<f64> {
        df.get(term)
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
    };

    let goal_tokens = tokenize(goal);
    let query: BTreeMap<&str, f64> = counts(&goal_tokens)
        .into_iter()
        .filter_map(|(t, c)| idf(t).map(|w| (t, c * w)))
        .collect();
    let q_norm = query.values().map(|v| v * v).sum::<f64>().sqrt();

    tfs.iter()
        .map(|tf| {
            let weights: BTreeMap<&str, f64> = tf
                .iter()
                .map(|(t, c)| (*t, c * idf(t).expect("document term has df")))
                .collect();
            let d_norm = weights.values().map(|v| v * v).sum::<f64>().sqrt();
            if q_norm == 0.0 || d_norm == 0.0 {
                return 0.0;
            }
            let dot: f64 = query
                .iter()
                .map(|(t, q)| q * weights.get(t).copied().unwrap_or(0.0))
                .sum();
            dot / (q_norm * d_norm)
        })
        .collect()
}

/// The `k` best cards for `goal`. `k = 0` yields nothing, which is how
/// free generation (no retrieval) is expressed.
pub fn retrieve_ops(goal: &str, library: &[OperatorCard], k: usize) -> Vec<OperatorCard> {
    let s = scores(goal, library);
    let mut ranked: Vec<(f64, &OperatorCard)> = s.into_iter().zip(library).collect();
    ranked.sort_by(|(sa, a), (sb, b)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    ranked.into_iter().take(k).map(|(_, c)| c.clone()).collect()
}
