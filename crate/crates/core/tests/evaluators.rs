mod common;

use common::*;
use govdag_core::bench::{
    eval_classification, eval_dedup, eval_filtering, eval_imputation, eval_integration,
    eval_refinement, DEFAULT_ATOL,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn filtering_matches_oracle((e, p) in filtering_case()) {
        prop_assert_eq!(eval_filtering(&e, &p, "id").score, oracle_filtering(&e, &p, "id"));
        if !e.is_empty() {
            prop_assert_eq!(eval_filtering(&e, &e, "id").score, 1.0);
        }
    }

    #[test]
    fn refinement_matches_oracle((e, p) in refinement_case()) {
        let got = eval_refinement(&e, &p, "id", "text", true).score;
        prop_assert_eq!(got, oracle_refinement(&e, &p, "id", "text"));
        prop_assert_eq!(eval_refinement(&e, &e, "id", "text", true).score, 1.0);
    }

    #[test]
    fn imputation_matches_oracle((cand, gt, raw) in imputation_case()) {
        let got = eval_imputation(&cand, &gt, &raw, DEFAULT_ATOL).score;
        prop_assert_eq!(got, oracle_imputation(&cand, &gt, &raw, DEFAULT_ATOL));
        prop_assert_eq!(eval_imputation(&gt, &gt, &raw, DEFAULT_ATOL).score, 1.0);
    }

    #[test]
    fn dedup_matches_oracle((gt, p) in dedup_case()) {
        prop_assert_eq!(eval_dedup(&gt, &p, "id").score, oracle_dedup(&gt, &p, "id"));
        prop_assert_eq!(eval_dedup(&gt, &gt, "id").score, 1.0);
    }

    #[test]
    fn dedup_ignores_gt_order((gt, p) in dedup_case()) {
        let mut reversed = gt.clone();
        reversed.reverse();
        prop_assert_eq!(eval_dedup(&gt, &p, "id").score, eval_dedup(&reversed, &p, "id").score);
    }

    #[test]
    fn integration_matches_oracle((header, gt, p) in integration_case()) {
        prop_assert_eq!(eval_integration(&header, &gt, &p).score, oracle_integration(&header, &gt, &p));
        prop_assert_eq!(eval_integration(&header, &gt, &gt).score, 1.0);
    }

    #[test]
    fn classification_matches_oracle((gt, p) in classification_case()) {
        let got = eval_classification(&gt, &p, "id", "label").score;
        prop_assert_eq!(got, oracle_classification(&gt, &p, "id", "label"));
        if !gt.is_empty() {
            prop_assert_eq!(eval_classification(&gt, &gt, "id", "label").score, 1.0);
        }
    }
}

/// The generators must reach both outcomes, or agreement proves little.
#[test]
fn generators_cover_passing_and_failing_cases() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;

    let mut runner = TestRunner::deterministic();
    let mut seen = [[false; 2]; 3];
    for _ in 0..300 {
        let (c, g, r) = imputation_case().new_tree(&mut runner).unwrap().current();
        seen[0][oracle_imputation(&c, &g, &r, DEFAULT_ATOL) as usize] = true;
        let (h, g, p) = integration_case().new_tree(&mut runner).unwrap().current();
        seen[1][oracle_integration(&h, &g, &p) as usize] = true;
        let (g, p) = dedup_case().new_tree(&mut runner).unwrap().current();
        seen[2][(oracle_dedup(&g, &p, "id") == 1.0) as usize] = true;
    }
    assert_eq!(seen, [[true; 2]; 3]);
}

#[test]
fn dedup_extra_duplicate_walkthrough() {
    let gt: Vec<_> = (0..4)
        .map(|i| row(serde_json::json!({"id": i, "v": i})))
        .collect();
    let mut p = gt.clone();
    p.push(gt[2].clone());
    // precision 4/5, recall 1
    let want = 2.0 * 0.8 / 1.8;
    assert!((eval_dedup(&gt, &p, "id").score - want).abs() < 1e-12);
}

#[test]
fn classification_case_flip_costs_a_tenth() {
    let gt: Vec<_> = (0..10)
        .map(|i| row(serde_json::json!({"id": i, "label": "positive"})))
        .collect();
    let mut p = gt.clone();
    p[3].insert("label".into(), "Positive".into());
    assert_eq!(eval_classification(&gt, &p, "id", "label").score, 0.9);
}
