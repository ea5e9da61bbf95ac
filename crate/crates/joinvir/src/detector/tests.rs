use super::*;
use crate::context::{refined_context, worm_topology};
use crate::malware::{build_virus, build_worm, Class, MalwareSpec, ReplicationMech, TargetRoutine};
use crate::syntax::parse;

fn a(s: &str) -> Atom {
    Atom::name(s)
}

fn refined2() -> Context {
    refined_context(2, &[a("f1"), a("f2")]).unwrap()
}

fn class3(targets: &[&str]) -> Process {
    let t = TargetRoutine::Hardcoded(targets.iter().map(|s| a(s)).collect());
    build_virus(&MalwareSpec::virus(Class::III, ReplicationMech::Overwrite, t)).unwrap()
}

use crate::syntax::Process;

fn toy_ctx() -> Context {
    Context::from_jc("#! resources: sw1\ndef sw1<x> | content1<y> |> content1<x> in content1<f1> | HOLE").unwrap()
}

fn toy_budgets() -> Budgets {
    Budgets { payload_names: vec![Name::new("p")], ..Budgets::default() }
}

#[test]
fn class3_virus_is_vulnerable_quickly() {
    let v = explore(&refined2(), &class3(&["sw1", "sw2"]), &Budgets::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Vulnerable);
    assert!(v.stats.explored < 500, "{:?}", v.stats);
    let w = v.witness.unwrap();
    assert!(w.replay().unwrap());
    let last = w.steps.last().unwrap();
    assert!(last.redex.consumed.iter().any(|m| &*m.channel.base == "sw1"));
}

#[test]
fn null_explores_one_state() {
    let v = explore(&refined2(), &Process::Null, &Budgets::default()).unwrap();
    assert_eq!(v.outcome, Outcome::NotVulnerable);
    assert_eq!(v.stats.explored, 1);
}

#[test]
fn append_class1_is_vulnerable() {
    let t = TargetRoutine::Hardcoded(vec![Atom::pair(a("sw1"), a("sr1")), Atom::pair(a("sw2"), a("sr2"))]);
    let p = build_virus(&MalwareSpec::virus(Class::I, ReplicationMech::Append, t)).unwrap();
    let v = explore(&refined2(), &p, &Budgets::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Vulnerable);
}

#[test]
fn worms_escape() {
    let ctx = worm_topology(&parse("received<d>").unwrap()).unwrap();
    for class in Class::ALL {
        let p = build_worm(&MalwareSpec::worm(class, ReplicationMech::Overwrite)).unwrap();
        assert_eq!(explore(&ctx, &p, &Budgets::default()).unwrap().outcome, Outcome::Vulnerable, "{class}");
    }
}

#[test]
fn workers_agree_with_inline_search() {
    let p = class3(&["sw1", "sw2"]);
    let one = explore(&refined2(), &p, &Budgets::default()).unwrap();
    let four = explore(&refined2(), &p, &Budgets { workers: 4, ..Budgets::default() }).unwrap();
    assert_eq!(one.outcome, four.outcome);
    assert_eq!(one.stats, four.stats);
    let dfs = explore(&refined2(), &p, &Budgets { strategy: Strategy::DepthFirst, ..Budgets::default() }).unwrap();
    assert_eq!(dfs.outcome, Outcome::Vulnerable);
}

#[test]
fn diverging_program_exhausts_budget() {
    let p = parse("def v<x> |> 0 and grow<n> |> grow<pair(n, z)> in grow<z>").unwrap();
    for max in [10, 100, 1000] {
        let b = Budgets { max_states: max, ..Budgets::default() };
        assert_eq!(explore(&refined2(), &p, &b).unwrap().outcome, Outcome::BudgetExhausted);
    }
}

#[test]
fn viral_set_second_round_hits_second_target() {
    let v = viral_set_member(&refined2(), &class3(&["sw1", "sw2"]), 2, &Budgets::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Vulnerable);
    let last = &v.rounds[1].last;
    let has = |ch: &str| last.messages.iter().any(|m| &*m.channel.base == ch && last.self_names.iter().any(|n| m.args[0] == Atom::Name(n.clone())));
    assert!(has("content1") && has("content2"));
}

#[test]
fn viral_set_single_target_runs_dry() {
    let v = viral_set_member(&refined2(), &class3(&["sw1"]), 2, &Budgets::default()).unwrap();
    assert_eq!(v.outcome, Outcome::NotVulnerable);
    assert_eq!(v.rounds.len(), 1);
}

#[test]
fn viral_set_argument_checks() {
    let ctx = refined2();
    assert!(matches!(
        viral_set_member(&ctx, &Process::Null, 1, &Budgets::default()),
        Err(DetectError::TooFewIterations { min: 2, got: 1 })
    ));
    let v = viral_set_member(&ctx, &Process::Null, 2, &Budgets::default()).unwrap();
    assert_eq!(v.outcome, Outcome::NotVulnerable);
    assert!(v.rounds.is_empty());
    let bad = viral_set_member_via(&ctx, &class3(&["sw1"]), 2, &Budgets::default(), Some(&Name::new("sw1")));
    assert!(matches!(bad, Err(DetectError::InvalidActivation(_))));
}

#[test]
fn ground_counts_instances() {
    let g = ground(&parse("def x<u, w> |> 0 in x<a, b> | x<b, c> | x<c, a>").unwrap()).unwrap();
    assert_eq!(g.rules.len(), 9);
    assert!(matches!(
        ground(&parse("def x<u> |> (def y<v> |> 0 in y<u>) in x<a>").unwrap()),
        Err(DetectError::FragmentViolation(_))
    ));
}

#[test]
fn ground_guard_trips() {
    let p = parse("def x<a1, a2, a3, a4> |> 0 in x<1, 2, 3, 4> | x<5, 6, 7, 8> | x<9, 10, 11, 12>").unwrap();
    let s = crate::engine::inject(&p).unwrap();
    assert!(matches!(ground_soup(&s, 10), Err(DetectError::ExplosionGuard { .. })));
    assert_eq!(ground_soup(&s, 100).unwrap().rules.len(), 81);
}

#[test]
fn toy_replicator_via_coverability() {
    let p = parse("def t<> |> sw1<p> | t<> in t<>").unwrap();
    let v = detect_via_coverability(&toy_ctx(), &p, &toy_budgets()).unwrap();
    assert_eq!(v.outcome, Outcome::Vulnerable);
    assert!(v.witness.unwrap().replay().unwrap());
    assert_eq!(explore(&toy_ctx(), &p, &toy_budgets()).unwrap().outcome, Outcome::Vulnerable);
}

#[test]
fn toy_without_producer_is_safe() {
    let p = parse("def t<> |> t<> and u<y> |> sw1<y> in t<> | u<q>").unwrap();
    let v = detect_via_coverability(&toy_ctx(), &p, &toy_budgets()).unwrap();
    assert_eq!(v.outcome, Outcome::NotVulnerable);
    assert_eq!(explore(&toy_ctx(), &p, &toy_budgets()).unwrap().outcome, Outcome::NotVulnerable);
}
