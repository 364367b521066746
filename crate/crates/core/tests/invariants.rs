mod common;

use common::*;
use kgusage_core::ki::KnowledgeGraph;
use kgusage_core::rule::{rule_from_ki, rule_to_ki};
use kgusage_core::syntax::rules::parse_rules;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matcher_agrees_with_brute_force(m in match_instance()) {
        prop_assert_eq!(check_matcher(&m), Ok(()));
    }

    #[test]
    fn singleton_tiers_follow_the_literal_loop(case in rule_set_case()) {
        prop_assert_eq!(check_tier_loop(&case), Ok(()));
    }

    #[test]
    fn no_rules_means_denied(case in bare_case()) {
        prop_assert_eq!(check_fail_closed(&case), Ok(()));
    }

    #[test]
    fn trusted_graph_grows_with_kis(case in trust_case()) {
        prop_assert_eq!(check_monotone(&case), Ok(()));
    }

    #[test]
    fn trusted_graph_ignores_rule_order(case in trust_case()) {
        prop_assert_eq!(check_confluent(&case), Ok(()));
    }

    #[test]
    fn redaction_partitions_elements(case in redaction_case()) {
        prop_assert_eq!(check_redaction(&case), Ok(()));
    }

    #[test]
    fn traces_replay(case in rule_set_case()) {
        prop_assert_eq!(check_replay(&rule_set_engine(&case), &request("Reader", "Read", "item")), Ok(()));
    }

    #[test]
    fn rules_print_and_parse_back(rules in random_rules()) {
        prop_assert_eq!(check_round_trip(&rules), Ok(()));
    }

    #[test]
    fn rules_survive_publication(rules in random_rules()) {
        let mut kg = KnowledgeGraph::new();
        for r in &rules {
            let ki = rule_to_ki(r, &mut kg).unwrap();
            prop_assert_eq!(&rule_from_ki(&kg, &ki).unwrap(), r);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fixture_decisions_ignore_rule_order(order in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        prop_assert_eq!(check_fixture_order_free(&order), Ok(()));
    }
}

#[test]
fn fixture_traces_replay() {
    let engine = fixture_engine();
    for r in scenario_requests() {
        assert_eq!(check_replay(&engine, &r), Ok(()), "{r:?}");
    }
}

#[test]
fn fixture_rules_round_trip() {
    let file = parse_rules(&fixture_rules_text()).unwrap();
    assert_eq!(file.rules.len(), 6);
    assert_eq!(check_round_trip(&file.rules), Ok(()));
}
