mod common;

use common::*;
use kgusage_core::engine::context_graph;
use kgusage_core::error::EvalError;
use kgusage_core::par::ExecMode;
use kgusage_core::rule::AuthValue;
use kgusage_core::term::{vocab, Term};
use kgusage_core::usage::ActionResult;

#[test]
fn fixture_loads_expected_counts() {
    let e = fixture_engine();
    assert_eq!(e.rules().len(), 6);
    // five content KIs plus one KI per rule
    assert_eq!(e.kg().ki_count(), 11);
}

#[test]
fn tiers_of_scenario_a() {
    let e = fixture_engine();
    let d = e.eval_request(&request("Ed", "Read", "georgeOfficerReliefOrg")).unwrap();
    assert_eq!(d.trace.tier_plan[0], vec![ex("ruleTransp")]);
    assert!(d.trace.tier_plan.iter().skip(1).any(|t| t.contains(&ex("ruleGeorge1"))));
    // tier 0 decided, so later tiers were not evaluated
    assert_eq!(d.trace.tiers.len(), 1);
}

#[test]
fn donation_is_handled_by_the_logger_when_allowed() {
    let mut e = fixture_engine();
    // Without the NonProfit conclusion ruleEd2 cannot fire, and the
    // per-action default is opened up for the test.
    let mut config = e.config().clone();
    config.actions.get_mut(&ex("Donate")).unwrap().default_authorization = Some(AuthValue::Allowed);
    let mut opened = kgusage_core::Engine::new(config);
    opened.load_trig(&fixture_kg_text(), None).unwrap();
    opened.load_rules(&fixture_rules_text(), None).unwrap();
    let membership = kgusage_core::term::Triple::new(
        Term::iri(ex("AccreditBoard")),
        Term::iri(vocab::RDF_TYPE),
        Term::iri(ex("CertificationAgency")),
    )
    .in_graph(kgusage_core::term::GraphId::new(ex("TrustedGraphEd")));
    assert!(opened.remove_quad(&membership));
    let d = opened.eval_request(&request("Ed", "Donate", "donationRequest")).unwrap();
    assert_eq!(d.authorization.value, AuthValue::Allowed);
    assert!(d.authorization.is_default());
    assert!(matches!(d.action_result, Some(ActionResult::Handled { ref handler, .. }) if handler == "log"));

    assert!(e.remove_quad(&membership));
    let d = e.eval_request(&request("Ed", "Donate", "donationRequest")).unwrap();
    assert_eq!(d.authorization.value, AuthValue::Denied);
    assert!(d.authorization.is_default());
}

#[test]
fn errors_for_unknown_names() {
    let e = fixture_engine();
    assert!(matches!(
        e.eval_request(&request("Ed", "Fly", "georgeOfficerReliefOrg")),
        Err(EvalError::UnknownAction(_))
    ));
    assert!(matches!(
        e.eval_request(&request("Ed", "Read", "nothing")),
        Err(EvalError::UnknownKi(_))
    ));
    assert!(matches!(
        e.eval_request(&request("Nobody", "Read", "georgeOfficerReliefOrg")),
        Err(EvalError::UnknownAgent(_))
    ));
}

#[test]
fn sequential_and_parallel_batches_agree() {
    let e = fixture_engine();
    let requests: Vec<_> = scenario_requests().into_iter().cycle().take(40).collect();
    let seq = e.eval_batch_with(ExecMode::Sequential, &requests);
    let par = e.eval_batch_with(ExecMode::Parallel, &requests);
    assert_eq!(seq.len(), par.len());
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
    }
}

#[test]
fn context_becomes_request_triples() {
    let r = request("Ed", "Read", "x").with_context(vocab::REQUEST_TIME, Term::string("2024"));
    let g = context_graph(&r);
    assert!(g.contains(&Term::iri(vocab::REQUEST), &Term::iri(vocab::REQUEST_TIME), &Term::string("2024")));
}

#[test]
fn context_rules_see_the_request() {
    let mut e = fixture_engine();
    e.load_rules(
        r#"@prefix : <http://example.org/kg#> .
rule :lateReads author :George {
  when {
    assertions(?requestKI) includes { ?O :officer :George } .
    context kgu:requestTime ge "2030"
  }
  then authorize Allowed for ?requestAction
}"#,
        None,
    )
    .unwrap();
    let early = request("Ed", "Read", "georgeOwnerAuditInc").with_context(vocab::REQUEST_TIME, Term::string("2024"));
    let late = request("Ed", "Read", "georgeOwnerAuditInc").with_context(vocab::REQUEST_TIME, Term::string("2031"));
    // deny-overrides within George's tier
    assert_eq!(e.eval_request(&early).unwrap().authorization.rule, Some(ex("ruleGeorge1")));
    let d = e.eval_request(&late).unwrap();
    assert_eq!(d.authorization.value, AuthValue::Denied);
    let outcomes: Vec<_> = d.trace.tiers.iter().flat_map(|t| &t.rules).map(|r| (r.rule.clone(), r.outcome)).collect();
    assert!(outcomes.contains(&(ex("lateReads"), kgusage_core::Outcome::Allowed)));
}
