use super::*;
use crate::context::{file_system, refined_context, rootkit_kernel, worm_topology};
use crate::engine::{enabled_redexes, run, Soup};

fn a(s: &str) -> Atom {
    Atom::name(s)
}

fn settle(s: &Soup, seed: u64) -> Soup {
    let t = run(s, seed, 5000).unwrap();
    assert!(enabled_redexes(&t.last).is_empty(), "did not settle");
    t.last
}

/// `(channel base, argument text)` with fresh indices dropped from the channel.
fn cells(s: &Soup) -> Vec<(String, Vec<String>)> {
    let mut v: Vec<_> = s
        .messages
        .iter()
        .map(|m| (m.channel.base.to_string(), m.args.iter().map(|x| x.to_string()).collect()))
        .collect();
    v.sort();
    v
}

fn has(s: &Soup, ch: &str, arg_prefix: &str) -> bool {
    cells(s).iter().any(|(c, args)| c == ch && args.first().is_some_and(|x| x.starts_with(arg_prefix)))
}

fn class3() -> MalwareSpec {
    MalwareSpec::virus(Class::III, ReplicationMech::Overwrite, TargetRoutine::Hardcoded(vec![a("sw1"), a("sw2")]))
}

fn refined2() -> crate::context::Context {
    refined_context(2, &[a("f1"), a("f2")]).unwrap()
}

#[test]
fn class_structure() {
    for class in Class::ALL {
        let mut spec = class3();
        spec.class = class;
        let p = build_virus(&spec).unwrap();
        assert!(is_abstraction(&p));
        let text = p.to_string();
        assert_eq!(text.contains("loc_rep(i, o)"), class.own_replication(), "{class}");
        assert_eq!(text.contains("loc_ref()"), class.own_reference(), "{class}");
        assert_eq!(text.contains("sys_rep("), !class.own_replication(), "{class}");
    }
}

#[test]
fn wrong_family_rejected() {
    assert!(build_worm(&class3()).is_err());
    assert!(build_virus(&MalwareSpec::worm(Class::I, ReplicationMech::Overwrite)).is_err());
}

#[test]
fn class3_infects_first_target() {
    let s = refined2().plug(&build_virus(&class3()).unwrap()).unwrap();
    let end = settle(&s, 7);
    assert!(has(&end, "content1", "v#"));
    assert!(has(&end, "content2", "f2"));
    assert!(has(&end, "current", "v#"));
}

#[test]
fn every_virus_class_writes_itself() {
    for class in Class::ALL {
        let mut spec = class3();
        spec.class = class;
        let s = refined2().plug(&build_virus(&spec).unwrap()).unwrap();
        let end = settle(&s, 1);
        assert!(has(&end, "content1", "v#"), "{class}");
    }
}

#[test]
fn prepend_wraps_old_content() {
    let targets = vec![Atom::pair(a("sw1"), a("sr1")), Atom::pair(a("sw2"), a("sr2"))];
    let spec = MalwareSpec::virus(Class::I, ReplicationMech::Prepend, TargetRoutine::Hardcoded(targets));
    let ctx = refined2();
    let mut s = settle(&ctx.plug(&build_virus(&spec).unwrap()).unwrap(), 0);
    assert!(has(&s, "content1", "p1#"));
    // Running the infected resource calls the virus before the old content.
    s.plug_more(&crate::syntax::parse("se1(a1)").unwrap(), crate::engine::Origin::Process).unwrap();
    let t = run(&s, 0, 200).unwrap();
    let fired: Vec<String> = t.steps.iter().map(|st| st.label.clone()).collect();
    let v = fired.iter().position(|l| l.starts_with("v#")).expect("virus runs");
    assert!(t.last.messages.iter().any(|m| &*m.channel.base == "f1"));
    let f1 = t.steps.iter().position(|st| st.emitted.iter().any(|m| &*m.channel.base == "f1")).unwrap();
    assert!(v < f1);
}

#[test]
fn dynamic_target_creates_resource() {
    let spec = MalwareSpec::virus(Class::III, ReplicationMech::Overwrite, TargetRoutine::DynamicCreate);
    let end = settle(&refined2().plug(&build_virus(&spec).unwrap()).unwrap(), 0);
    assert!(has(&end, "res_content", "v#"));
}

#[test]
fn worms_reach_remote_handler() {
    for class in Class::ALL {
        let ctx = worm_topology(&parse("received<d>").unwrap()).unwrap();
        let s = ctx.plug(&build_worm(&MalwareSpec::worm(class, ReplicationMech::Overwrite)).unwrap()).unwrap();
        let end = settle(&s, 2);
        assert!(has(&end, "received", "w#"), "{class}");
    }
}

#[test]
fn email_worm_decodes() {
    let ctx = worm_topology(&email_decoder()).unwrap();
    let s = ctx.plug(&build_worm(&MalwareSpec::worm(Class::I, ReplicationMech::Email)).unwrap()).unwrap();
    let end = settle(&s, 0);
    assert!(has(&end, "received", "w#"));
}

#[test]
fn companion_rename_keeps_original() {
    let ctx = file_system(&[(a("n1"), a("f1"))], &[]).unwrap();
    let spec = MalwareSpec::virus(Class::III, ReplicationMech::CompanionRename, TargetRoutine::Hardcoded(vec![a("n1")]));
    let mut s = settle(&ctx.plug(&build_virus(&spec).unwrap()).unwrap(), 0);
    s.plug_more(&parse("read(pair(n1, \"copy\"), k) | execute(n1, a1)").unwrap(), crate::engine::Origin::Process)
        .unwrap();
    let t = run(&s, 0, 2000).unwrap();
    assert!(has(&t.last, "k", "f1"));
    assert!(t.steps.iter().any(|st| st.redex.consumed.iter().any(|m| t.last.self_names.contains(&m.channel))));
}

#[test]
fn rootkit_hooks_table_and_serves_commands() {
    let ctx = rootkit_kernel(&[a("sc1"), a("sc2")], &a("scbase")).unwrap();
    let kit = build_rootkit(
        &[(Name::new("hide"), parse("hidden<g>").unwrap()), (Name::new("spy"), parse("spied<g>").unwrap())],
        &[(Name::new("fsc1"), Process::Null), (Name::new("fsc2"), Process::Null)],
    )
    .unwrap();
    let end = settle(&ctx.plug(&kit).unwrap(), 0);
    let table = cells(&end).into_iter().find(|(c, _)| c == "table").unwrap();
    assert!(table.1[0].starts_with("fsc1#") && table.1[1].starts_with("fsc2#"));
    assert!(has(&end, "hidden", "attack_arg"));
    // The proxy is waiting for the next command.
    assert!(end.messages.iter().any(|m| &*m.channel.base == "rcv"));
}

#[test]
fn replication_process_parses_each_kind() {
    for m in [
        ReplicationMech::Overwrite,
        ReplicationMech::Append,
        ReplicationMech::Prepend,
        ReplicationMech::CompanionRename,
        ReplicationMech::CompanionPreempt { ext: Atom::string(".com") },
        ReplicationMech::Email,
    ] {
        let d = replication_process(&m).unwrap();
        assert_eq!(d.rules()[0].0.channels()[0].base.as_ref(), "r", "{}", m.name());
    }
}
