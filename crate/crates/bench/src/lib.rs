//! Deterministic synthetic inputs shared by the benchmarks.

use scinews_core::EvidenceAbstract;

const VOCAB: &[&str] = &[
    "virus", "vaccine", "trial", "dose", "mask", "cells", "risk", "study", "patients", "infection", "immune",
    "response", "antibody", "variant", "hospital", "mortality", "cohort", "symptoms", "transmission", "protein",
];

/// Cheap linear congruential word stream so inputs stay identical across runs.
fn words(seed: u64, n: usize) -> String {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            VOCAB[(state >> 33) as usize % VOCAB.len()]
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn abstracts(count: usize, len: usize) -> Vec<EvidenceAbstract> {
    (0..count)
        .map(|i| EvidenceAbstract {
            id: format!("abs-{i:05}"),
            title: words(i as u64 * 7 + 1, 8),
            abstract_text: words(i as u64, len),
            doi: None,
            external_ids: Default::default(),
        })
        .collect()
}

pub fn text(seed: u64, len: usize) -> String {
    words(seed, len)
}

pub const DOV_RESPONSE: &str = "Reasoning first.\n```json\n{\"prediction\": \"refute\", \"reason\": \"The claim overstates the trial.\", \"scores\": {\"Alignment\": -1, \"Causation Confusion\": -0.5, \"Accuracy\": -1, \"Generalization\": -1, \"Contextual Fidelity\": 0}}\n```";

pub const MALFORMED_RESPONSE: &str = "{prediction: \"refute\", // unsure\n reason: \"dose, not cure\", scores: {Alignment: -1, \"Causation Confusion\": -0.5, Accuracy: -1, Generalization: -1, \"Contextual Fidelity\": 0,},}";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_deterministic() {
        assert_eq!(abstracts(3, 20), abstracts(3, 20));
        assert_eq!(text(5, 10).split_whitespace().count(), 10);
        assert!(scinews_core::detection::parse_verdict(DOV_RESPONSE, true).is_ok());
        assert!(scinews_core::detection::parse_verdict(MALFORMED_RESPONSE, true).is_ok());
    }
}
