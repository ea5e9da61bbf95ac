//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any fails.

mod props;

use std::collections::{HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use joinvir::context::{file_system, refined_context, rootkit_kernel, worm_topology, Context};
use joinvir::detector::{detect_via_coverability, explore, viral_set_member, Budgets, Outcome};
use joinvir::engine::{canonicalize, enabled_redexes, reduce, run, Origin, Soup};
use joinvir::malware::{
    build_rootkit, build_virus, build_worm, Class, MalwareSpec, ReplicationMech, TargetRoutine, TokenSource,
};
use joinvir::petri::{coverable, forward_enumerate, Marking, PetriNet, Transition};
use joinvir::policy::{classify_context, non_infection_test, tokenize_context, NonInfection, TokenMode, TokenPolicy};
use joinvir::scenario::Scenario;
use joinvir::syntax::{check_core_fragment, parse, Atom, Name, Process};

type Check = Result<String, String>;

/// Name, check and time limit.
type Criterion = (&'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

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

/// Does the soup hold a message on a channel with this base whose first
/// argument satisfies `arg`?
fn holds(s: &Soup, base: &str, arg: impl Fn(&Atom) -> bool) -> bool {
    s.messages.iter().any(|m| &*m.channel.base == base && m.args.first().is_some_and(&arg))
}

fn is_self(s: &Soup) -> impl Fn(&Atom) -> bool + '_ {
    |x| matches!(x, Atom::Name(n) if s.self_names.contains(n))
}

/// Breadth-first search over reachable soups, deduplicated by digest.
/// Returns the first soup meeting `goal` and the number of states seen.
fn find(s0: &Soup, max: usize, goal: impl Fn(&Soup) -> bool) -> (Option<Soup>, usize) {
    let mut seen = HashSet::from([canonicalize(s0).digest]);
    let mut queue = VecDeque::from([s0.clone()]);
    while let Some(s) = queue.pop_front() {
        if goal(&s) {
            return (Some(s), seen.len());
        }
        for r in enabled_redexes(&s) {
            let n = reduce(&s, &r).unwrap();
            if seen.len() < max && seen.insert(canonicalize(&n).digest) {
                queue.push_back(n);
            }
        }
    }
    (None, seen.len())
}

/// The state at the end of the initial infection.
fn infected_state() -> Result<(Soup, usize), String> {
    let s0 = refined2().plug(&class3(&["sw1", "sw2"])).unwrap();
    let goal = |s: &Soup| {
        let v = is_self(s);
        holds(s, "content1", &v) && holds(s, "content2", |x| *x == a("f2")) && holds(s, "current", &v)
    };
    match find(&s0, 500, goal) {
        (Some(s), n) => Ok((s, n)),
        (None, n) => Err(format!("no state with content1<v> | content2<f2> | current<v> among {n} states")),
    }
}

fn c1_initial_infection() -> Check {
    let (_, states) = infected_state()?;
    let v = explore(&refined2(), &class3(&["sw1", "sw2"]), &Budgets::default()).map_err(|e| e.to_string())?;
    ensure!(v.outcome == Outcome::Vulnerable, "explore says {}", v.outcome);
    ensure!(v.stats.explored < 500, "explore used {} states", v.stats.explored);
    let w = v.witness.ok_or("no witness")?;
    ensure!(w.replay().unwrap(), "witness does not replay");
    Ok(format!("target state after {states} states, detector {} states", v.stats.explored))
}

fn c2_second_infection() -> Check {
    let (mut s, _) = infected_state()?;
    s.plug_more(&parse("se1(a1); 0").unwrap(), Origin::Context).map_err(|e| e.to_string())?;
    let goal = |s: &Soup| {
        let v = is_self(s);
        holds(s, "content1", &v) && holds(s, "content2", &v)
    };
    match find(&s, 2000, goal) {
        (Some(_), n) => Ok(format!("content1<v> | content2<v> after {n} states")),
        (None, n) => Err(format!("second copy not found among {n} states")),
    }
}

fn c3_class_coverage() -> Check {
    let budgets = Budgets { max_states: 10_000, ..Budgets::default() };
    let mut worst = 0;
    for class in Class::ALL {
        let t = TargetRoutine::Hardcoded(vec![a("sw1"), a("sw2")]);
        let p = build_virus(&MalwareSpec::virus(class, ReplicationMech::Overwrite, t)).unwrap();
        let v = explore(&refined2(), &p, &budgets).map_err(|e| e.to_string())?;
        ensure!(v.outcome == Outcome::Vulnerable, "virus class {class}: {}", v.outcome);
        worst = worst.max(v.stats.explored);
    }
    let worms = worm_topology(&parse("received<d>").unwrap()).unwrap();
    for class in Class::ALL {
        let p = build_worm(&MalwareSpec::worm(class, ReplicationMech::Overwrite)).unwrap();
        let v = explore(&worms, &p, &budgets).map_err(|e| e.to_string())?;
        ensure!(v.outcome == Outcome::Vulnerable, "worm class {class}: {}", v.outcome);
        worst = worst.max(v.stats.explored);
    }
    Ok(format!("8 of 8 vulnerable, at most {worst} states"))
}

fn settle(s: &Soup) -> Soup {
    run(s, 0, 5000).unwrap().last
}

fn ran_self(t: &joinvir::engine::Trace) -> bool {
    t.steps.iter().any(|st| st.redex.consumed.iter().any(|m| t.last.self_names.contains(&m.channel)))
}

fn c4_companions() -> Check {
    let ctx = file_system(&[(a("n1"), a("f1"))], &[]).unwrap();
    let spec = MalwareSpec::virus(Class::III, ReplicationMech::CompanionRename, TargetRoutine::Hardcoded(vec![a("n1")]));
    let s = settle(&ctx.plug(&build_virus(&spec).unwrap()).unwrap());

    let mut exec = s.clone();
    exec.plug_more(&parse("execute(n1, a1)").unwrap(), Origin::Process).unwrap();
    let t = run(&exec, 0, 2000).unwrap();
    ensure!(ran_self(&t), "execute(n1) did not run the virus");

    let mut read = s;
    read.plug_more(&parse("read(pair(n1, \"copy\"), k)").unwrap(), Origin::Process).unwrap();
    let end = settle(&read);
    ensure!(holds(&end, "k", |x| *x == a("f1")), "read of the renamed copy lost the original");

    let exe = Atom::pair(a("n1"), Atom::string(".exe"));
    let ctx = file_system(&[(exe, a("fexe"))], &[Atom::string(".exe"), Atom::string(".com")]).unwrap();
    let before = settle(&ctx.plug(&parse("let m = complete(n1) in obs<m>").unwrap()).unwrap());
    ensure!(holds(&before, "obs", |x| x.to_string().contains(".exe")), "clean system should resolve to .exe");

    let spec = MalwareSpec::virus(
        Class::III,
        ReplicationMech::CompanionPreempt { ext: Atom::string(".com") },
        TargetRoutine::Hardcoded(vec![a("n1")]),
    );
    let s = settle(&ctx.plug(&build_virus(&spec).unwrap()).unwrap());
    let mut q = s.clone();
    q.plug_more(&parse("let m = complete(n1) in obs<m>").unwrap(), Origin::Process).unwrap();
    let end = settle(&q);
    ensure!(
        holds(&end, "obs", |x| *x == Atom::pair(a("n1"), Atom::string(".com"))),
        "complete(n1) did not resolve to the viral .com file"
    );
    let mut q = s;
    q.plug_more(&parse("let m = complete(n1) in execute(m, a1)").unwrap(), Origin::Process).unwrap();
    ensure!(ran_self(&run(&q, 0, 2000).unwrap()), "executing the completed name did not run the virus");
    Ok("rename keeps original, preempt wins completion".into())
}

fn c5_rootkit() -> Check {
    let ctx = rootkit_kernel(&[a("sc1"), a("sc2")], &a("scbase")).unwrap();
    let kit = build_rootkit(
        &[(Name::new("hide"), parse("hidden<g>").unwrap())],
        &[(Name::new("fsc1"), Process::Null), (Name::new("fsc2"), Process::Null)],
    )
    .unwrap();
    let end = settle(&ctx.plug(&kit).unwrap());
    let table = end.messages.iter().find(|m| &*m.channel.base == "table").ok_or("no table message")?;
    let hooked = table.args.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    ensure!(
        hooked.len() == 2 && hooked[0].starts_with("fsc1#") && hooked[1].starts_with("fsc2#"),
        "table holds {hooked:?}"
    );
    let obs = |p: &str| settle(&ctx.plug(&parse(p).unwrap()).unwrap());
    let at_base = obs("let h = alloc(scbase, sz) in obs<h>");
    ensure!(holds(&at_base, "obs", |x| x.to_string().starts_with("hook#")), "alloc(scbase) did not leak hook");
    let elsewhere = obs("let h = alloc(other, sz) in obs<h>");
    ensure!(holds(&elsewhere, "obs", |x| x.to_string().starts_with("access#")), "alloc(other) did not yield access");
    Ok(format!("table<{}>", hooked.join(",")))
}

const TOY_CONTEXT: &str = "#! resources: sw1\ndef sw1<x> | content1<y> |> content1<x> in content1<f1> | HOLE";

/// A program without name generation whose rules never emit more messages
/// than they consume, so exploration always terminates.
fn generated_program(rng: &mut ChaCha8Rng) -> String {
    let chans = ["t0", "t1", "t2"];
    let binders = ["u", "w"];
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let width = rng.gen_range(1..=2);
        let mut pat_chans = chans.to_vec();
        let mut pat = Vec::new();
        for b in &binders[..width] {
            let c = pat_chans.remove(rng.gen_range(0..pat_chans.len()));
            pat.push(format!("{c}<{b}>"));
        }
        let values: Vec<&str> = ["p", "a", "b"].into_iter().chain(binders[..width].iter().copied()).collect();
        let mut body = Vec::new();
        for _ in 0..rng.gen_range(0..=width) {
            let c = ["t0", "t1", "t2", "sw1", "out"][rng.gen_range(0..5)];
            body.push(format!("{c}<{}>", values[rng.gen_range(0..values.len())]));
        }
        let body = if body.is_empty() { "0".to_string() } else { body.join(" | ") };
        rules.push((pat, body));
    }
    // Channels may appear in one rule only.
    let mut used = HashSet::new();
    rules.retain(|(pat, _)| pat.iter().all(|p| used.insert(p[..2].to_string())));
    let defs: Vec<String> = rules.iter().map(|(p, b)| format!("{} |> {}", p.join(" | "), b)).collect();
    let init: Vec<String> = (0..rng.gen_range(1..=2))
        .map(|_| format!("{}<{}>", chans[rng.gen_range(0..3)], ["p", "a", "b"][rng.gen_range(0..3)]))
        .collect();
    format!("def {} in {}", defs.join(" and "), init.join(" | "))
}

fn random_net(rng: &mut ChaCha8Rng) -> (PetriNet, Marking) {
    let mut net = PetriNet::default();
    let places = rng.gen_range(2..=4);
    for i in 0..places {
        net.add_place(format!("p{i}"));
    }
    let marking = |rng: &mut ChaCha8Rng, max: u64| {
        let mut m = Marking::new();
        for p in 0..places {
            let k = rng.gen_range(0..=max);
            if k > 0 {
                m.add(p, k);
            }
        }
        m
    };
    for i in 0..rng.gen_range(1..=4) {
        let pre = marking(rng, 2);
        let post = marking(rng, 2);
        net.transitions.push(Transition { label: format!("t{i}"), pre, post });
    }
    let init = marking(rng, 2);
    (net, init)
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/scenarios")
}

fn c6_decidable_fragment() -> Check {
    let ctx = Context::from_jc(TOY_CONTEXT).unwrap();
    let budgets = Budgets { payload_names: vec![Name::new("p")], ..Budgets::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut seen = HashSet::new();
    let (mut vulnerable, mut safe) = (0, 0);
    while seen.len() < 30 {
        let src = generated_program(&mut rng);
        if !seen.insert(src.clone()) {
            continue;
        }
        let p = parse(&src).unwrap();
        ensure!(check_core_fragment(&p).in_fragment, "generated program left the fragment: {src}");
        let oracle = explore(&ctx, &p, &budgets).map_err(|e| format!("{src}: {e}"))?;
        ensure!(oracle.outcome != Outcome::BudgetExhausted, "oracle ran out on {src}");
        let petri = detect_via_coverability(&ctx, &p, &budgets).map_err(|e| format!("{src}: {e}"))?;
        ensure!(petri.outcome == oracle.outcome, "{src}: petri {} vs explore {}", petri.outcome, oracle.outcome);
        if let Some(w) = &petri.witness {
            ensure!(w.replay().unwrap(), "petri witness for {src} does not replay");
        }
        match oracle.outcome {
            Outcome::Vulnerable => vulnerable += 1,
            _ => safe += 1,
        }
    }
    ensure!(vulnerable > 0 && safe > 0, "generated programs are one-sided: {vulnerable} vulnerable, {safe} safe");

    let mut scenarios = 0;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    for path in paths {
        let s = Scenario::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let (ctx, p) = s.compile().map_err(|e| e.to_string())?;
        if !check_core_fragment(&ctx.template.plug(&p)).in_fragment {
            continue;
        }
        let oracle = explore(&ctx, &p, &s.budgets).map_err(|e| e.to_string())?;
        let petri = detect_via_coverability(&ctx, &p, &s.budgets).map_err(|e| e.to_string())?;
        ensure!(petri.outcome == oracle.outcome, "{}: petri {} vs explore {}", path.display(), petri.outcome, oracle.outcome);
        scenarios += 1;
    }
    ensure!(scenarios > 0, "no corpus scenario is in the fragment");

    let mut nets = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    while nets < 200 {
        let (net, init) = random_net(&mut rng);
        let (reach, complete) = forward_enumerate(&net, &init, 2000);
        if !complete {
            continue;
        }
        nets += 1;
        for _ in 0..5 {
            let mut target = Marking::new();
            for p in 0..net.places.len() {
                let k = rng.gen_range(0..=3);
                if k > 0 {
                    target.add(p, k);
                }
            }
            let c = coverable(&net, &init, &target);
            let expect = reach.iter().any(|m| target.le(m));
            ensure!(c.covered == expect, "net {:?} from {init} to {target}: coverable {} vs enumeration {expect}", net.transitions, c.covered);
        }
    }
    Ok(format!(
        "30 generated ({vulnerable} vulnerable, {safe} safe), {scenarios} corpus scenarios, {nets} saturated nets agree"
    ))
}

fn c7_divergence() -> Check {
    let p = parse("def v<x> |> 0 and grow<n> |> grow<pair(n, z)> in grow<z>").unwrap();
    for max in [10, 100, 1000, 5000] {
        for steps in [200, usize::MAX] {
            let b = Budgets { max_states: max, max_steps_per_branch: steps, ..Budgets::default() };
            let v = explore(&refined2(), &p, &b).map_err(|e| e.to_string())?;
            ensure!(v.outcome == Outcome::BudgetExhausted, "max_states {max}: {}", v.outcome);
        }
    }
    Ok("budget_exhausted at 10, 100, 1000, 5000 states".into())
}

fn c8_non_infection() -> Check {
    let ctx = refined_context(1, &[a("f1")]).unwrap();
    let probe = parse("let x = sr1() in obs<x>").unwrap();
    let write = parse("sw1(v); 0").unwrap();
    let v = non_infection_test(&ctx, &write, std::slice::from_ref(&probe), 6).map_err(|e| e.to_string())?;
    ensure!(v.outcome == NonInfection::Violated, "write probe: {}", v);
    let d = v.distinguishing.ok_or("no distinguishing test")?;
    ensure!(d.original != d.infected, "distinguishing test does not distinguish");
    let v = non_infection_test(&ctx, &probe, std::slice::from_ref(&probe), 6).map_err(|e| e.to_string())?;
    ensure!(v.outcome == NonInfection::SatisfiedToDepth(6), "read probe: {}", v);
    ensure!(!classify_context(&refined2()).isolation_holds, "refined context classified as isolating");
    let ro = Context::from_jc("#! resources: sr1\ndef sr1() | content1<f> |> content1<f> | return f to sr1 in content1<f1> | HOLE")
        .unwrap();
    ensure!(classify_context(&ro).isolation_holds, "read-only context classified as non-isolating");
    Ok(format!("test {} tells {:?} from {:?}", d.test, d.original, d.infected))
}

fn token_virus(n: usize) -> Process {
    token_virus_with(n, TokenSource::Request)
}

fn token_virus_with(n: usize, token: TokenSource) -> Process {
    let targets = (1..=n).map(|k| a(&format!("sw{k}"))).collect();
    let mut spec = MalwareSpec::virus(Class::III, ReplicationMech::Overwrite, TargetRoutine::Hardcoded(targets));
    spec.token = token;
    build_virus(&spec).unwrap()
}

fn c9_token_containment() -> Check {
    let b = Budgets::default();
    let guard = |n: usize| (1..=n).map(|k| Name::new(&format!("sw{k}"))).collect::<Vec<_>>();
    let plain = explore(&refined2(), &class3(&["sw1", "sw2"]), &b).map_err(|e| e.to_string())?;
    ensure!(plain.outcome == Outcome::Vulnerable, "unguarded: {}", plain.outcome);
    let mut policy = TokenPolicy::spatial(guard(2));
    let closed = tokenize_context(&refined2(), &policy).map_err(|e| e.to_string())?;
    let v = explore(&closed, &token_virus(2), &b).map_err(|e| e.to_string())?;
    ensure!(v.outcome == Outcome::NotVulnerable, "no distributor: {}", v.outcome);
    let v = explore(&closed, &token_virus_with(2, TokenSource::Forged(a("sec_token"))), &b).map_err(|e| e.to_string())?;
    ensure!(v.outcome == Outcome::NotVulnerable, "no distributor, forged token: {}", v.outcome);
    policy.distributor = true;
    let open = tokenize_context(&refined2(), &policy).map_err(|e| e.to_string())?;
    let v = explore(&open, &token_virus(2), &b).map_err(|e| e.to_string())?;
    ensure!(v.outcome == Outcome::Vulnerable, "with distributor: {}", v.outcome);

    let init: Vec<Atom> = (1..=3).map(|k| a(&format!("f{k}"))).collect();
    let mut policy = TokenPolicy::spatial(guard(3));
    policy.distributor = true;
    policy.mode = TokenMode::Counted(2);
    let counted = tokenize_context(&refined_context(3, &init).unwrap(), &policy).map_err(|e| e.to_string())?;
    let two = viral_set_member(&counted, &token_virus(3), 2, &b).map_err(|e| e.to_string())?;
    ensure!(two.outcome == Outcome::Vulnerable, "counted(2), two rounds: {}", two.outcome);
    let three = viral_set_member(&counted, &token_virus(3), 3, &b).map_err(|e| e.to_string())?;
    ensure!(three.outcome == Outcome::NotVulnerable, "counted(2), three rounds: {}", three.outcome);
    ensure!(three.rounds.len() == 2, "counted(2) allowed {} rounds", three.rounds.len());
    Ok("closed flips to not_vulnerable, distributor flips back, counted(2) stops round 3".into())
}

fn c10_engine_properties() -> Check {
    let n = props::run_all(props::CASES)?;
    Ok(format!("{n} generated cases"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("golden trace, initial infection", c1_initial_infection, Duration::from_secs(1)),
        ("golden trace, second infection", c2_second_infection, Duration::from_secs(1)),
        ("class coverage", c3_class_coverage, Duration::from_secs(30)),
        ("companion behaviour", c4_companions, Duration::from_secs(2)),
        ("rootkit derivation", c5_rootkit, Duration::from_secs(1)),
        ("decidable fragment", c6_decidable_fragment, Duration::from_secs(60)),
        ("divergence is never safe", c7_divergence, Duration::from_secs(60)),
        ("non-infection", c8_non_infection, Duration::from_secs(5)),
        ("token containment", c9_token_containment, Duration::from_secs(10)),
        ("engine properties", c10_engine_properties, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        // Time limits hold for optimized builds only.
        let slow = !cfg!(debug_assertions) && took > *limit;
        match result {
            Ok(detail) if !slow => println!("PASS {:>2} {name} ({:.2}s): {detail}", i + 1, took.as_secs_f64()),
            Ok(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({:.2}s, limit {}s): {detail}", i + 1, took.as_secs_f64(), limit.as_secs());
            }
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({:.2}s): {why}", i + 1, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
