#![allow(dead_code)]

//! Generators and checks for the engine properties, shared by the
//! property tests and the acceptance runner.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use joinvir::engine::{canonicalize, cool, enabled_redexes, inject, reduce_tracked, Message, Soup};
use joinvir::syntax::names::free_names;
use joinvir::syntax::{parse, substitute, Atom, Name, Process};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 1000;

pub const CHANNELS: [&str; 4] = ["a", "b", "c", "d"];
const BINDERS: [&str; 3] = ["x", "y", "z"];

/// Program text over a tiny alphabet. Every channel carries one value, so
/// generated programs never break an arity.
pub fn program(depth: u32) -> BoxedStrategy<String> {
    let atom = prop::sample::select(vec!["a", "b", "c", "d", "x", "y", "z", "1"]);
    let msg = (prop::sample::select(CHANNELS.to_vec()), atom.clone()).prop_map(|(c, v)| format!("{c}<{v}>"));
    let leaf = prop_oneof![4 => msg, 1 => Just("0".to_string())];
    leaf.prop_recursive(depth, 24, 3, move |inner| {
        let rule = (prop::sample::subsequence(CHANNELS.to_vec(), 1..=2), inner.clone()).prop_map(|(chans, body)| {
            let pat: Vec<String> = chans.iter().zip(BINDERS).map(|(c, b)| format!("{c}<{b}>")).collect();
            format!("{} |> {}", pat.join(" | "), body)
        });
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(p, q)| format!("{p} | {q}")),
            2 => (prop::collection::vec(rule, 1..=2), inner.clone()).prop_filter_map("distinct channels", |(rs, p)| {
                let mut seen = BTreeSet::new();
                for r in &rs {
                    for c in CHANNELS {
                        if r.split("|>").next().unwrap().contains(&format!("{c}<")) && !seen.insert(c) {
                            return None;
                        }
                    }
                }
                Some(format!("def {} in {}", rs.join(" and "), p))
            }),
            1 => (prop::sample::select(BINDERS.to_vec()), atom_text(), inner.clone(), inner)
                .prop_map(|(a, b, p, q)| format!("if [{a} = {b}] then ({p}) else ({q})")),
        ]
    })
    .boxed()
}

fn atom_text() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["a", "b", "x", "1"])
}

fn closed(src: &str) -> Process {
    parse(&format!("def a<x> |> 0 and b<x> |> 0 and c<x> |> 0 and d<x> |> 0 in {src}")).unwrap()
}

pub fn bag(ms: &[Message]) -> BTreeMap<Message, usize> {
    let mut m = BTreeMap::new();
    for x in ms {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}

pub fn msg_soup(ms: Vec<Message>) -> Soup {
    let mut s = Soup::default();
    s.messages = ms;
    s.fresh_counter = 100;
    s
}

pub fn fresh_names(ms: &[Message]) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    for m in ms {
        if m.channel.is_fresh() {
            out.insert(m.channel.clone());
        }
        for a in &m.args {
            if let Atom::Name(n) = a {
                if n.is_fresh() {
                    out.insert(n.clone());
                }
            }
        }
    }
    out
}

pub fn rename(ms: &[Message], f: &HashMap<Name, Name>) -> Vec<Message> {
    let r = |n: &Name| f.get(n).cloned().unwrap_or_else(|| n.clone());
    ms.iter()
        .map(|m| {
            Message::new(
                r(&m.channel),
                m.args.iter().map(|a| if let Atom::Name(n) = a { Atom::Name(r(n)) } else { a.clone() }).collect(),
            )
        })
        .collect()
}

fn permutations(v: &[Name]) -> Vec<Vec<Name>> {
    if v.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

/// Congruence of two message soups by trying every base-preserving
/// bijection of their fresh names.
pub fn brute_congruent(a: &[Message], b: &[Message]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let group = |s: BTreeSet<Name>| {
        let mut g: BTreeMap<String, Vec<Name>> = BTreeMap::new();
        for n in s {
            g.entry(n.base.to_string()).or_default().push(n);
        }
        g
    };
    let ga = group(fresh_names(a));
    let gb = group(fresh_names(b));
    if ga.keys().ne(gb.keys()) || ga.values().zip(gb.values()).any(|(x, y)| x.len() != y.len()) {
        return false;
    }
    let target = bag(b);
    let groups: Vec<(&Vec<Name>, &Vec<Name>)> = ga.values().zip(gb.values()).collect();
    fn go(groups: &[(&Vec<Name>, &Vec<Name>)], f: &mut HashMap<Name, Name>, a: &[Message], target: &BTreeMap<Message, usize>) -> bool {
        let Some(((from, to), rest)) = groups.split_first() else {
            return bag(&rename(a, f)) == *target;
        };
        for p in permutations(to) {
            for (x, y) in from.iter().zip(&p) {
                f.insert(x.clone(), y.clone());
            }
            if go(rest, f, a, target) {
                return true;
            }
        }
        false
    }
    go(&groups, &mut HashMap::new(), a, &target)
}

fn name_pool() -> Vec<Name> {
    vec![
        Name::new("a"),
        Name::new("b"),
        Name::fresh("x", 1),
        Name::fresh("x", 2),
        Name::fresh("y", 3),
        Name::fresh("y", 4),
    ]
}

pub fn message() -> impl Strategy<Value = Message> {
    let n = prop::sample::select(name_pool());
    let arg = prop_oneof![n.clone().prop_map(Atom::Name), Just(Atom::int(1))];
    (n, prop::collection::vec(arg, 0..=2)).prop_map(|(c, args)| Message::new(c, args))
}

pub fn heating(src: &str) -> Result<(), TestCaseError> {
    let s = inject(&closed(src)).unwrap();
    let back = inject(&cool(&s)).unwrap();
    prop_assert_eq!(canonicalize(&s).digest, canonicalize(&back).digest, "{}", src);
    prop_assert_eq!(s.rules.len(), back.rules.len());
    prop_assert_eq!(s.messages.len(), back.messages.len());
    Ok(())
}

pub fn conservation(src: &str) -> Result<(), TestCaseError> {
    let s = inject(&closed(src)).unwrap();
    for r in enabled_redexes(&s) {
        let pattern = &s.rules[r.rule].pattern;
        let binders: BTreeSet<&Name> = pattern.binders().into_iter().collect();
        let bound: BTreeSet<&Name> = r.binding.iter().map(|(n, _)| n).collect();
        prop_assert_eq!(binders, bound);
        let (next, emitted) = reduce_tracked(&s, &r).unwrap();
        let mut expect = bag(&s.messages);
        for m in &r.consumed {
            let k = expect.get_mut(m).expect("consumed message was present");
            *k -= 1;
            if *k == 0 {
                expect.remove(m);
            }
        }
        for m in &emitted {
            *expect.entry(m.clone()).or_insert(0) += 1;
        }
        prop_assert_eq!(bag(&next.messages), expect);
        prop_assert!(next.rules.len() >= s.rules.len());
        prop_assert!(next.fresh_counter >= s.fresh_counter);
    }
    Ok(())
}

/// A second soup: either unrelated, or `a` reversed with x and y indices
/// renamed, sometimes merging two names.
pub fn partner() -> impl Strategy<Value = (Vec<Message>, Vec<Message>)> {
    (
        prop::collection::vec(message(), 0..=8),
        prop::collection::vec(message(), 0..=8),
        any::<bool>(),
        prop::sample::select(vec![(1, 2), (2, 1), (1, 1), (2, 2), (1, 5)]),
        prop::sample::select(vec![(3, 4), (4, 3), (3, 3), (4, 4)]),
    )
        .prop_map(|(a, other, derived, xs, ys)| {
            if !derived {
                return (a, other);
            }
            let f = HashMap::from([
                (Name::fresh("x", 1), Name::fresh("x", xs.0)),
                (Name::fresh("x", 2), Name::fresh("x", xs.1)),
                (Name::fresh("y", 3), Name::fresh("y", ys.0)),
                (Name::fresh("y", 4), Name::fresh("y", ys.1)),
            ]);
            let mut b = rename(&a, &f);
            b.reverse();
            (a, b)
        })
}

pub fn canonical_brute(a: &[Message], b: &[Message]) -> Result<(), TestCaseError> {
    let da = canonicalize(&msg_soup(a.to_vec())).digest;
    let db = canonicalize(&msg_soup(b.to_vec())).digest;
    prop_assert_eq!(da == db, brute_congruent(a, b));
    Ok(())
}

pub fn canonical_shuffle(a: &[Message], seed: u64) -> Result<(), TestCaseError> {
    let mut rng = seed;
    let mut next = || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        rng >> 33
    };
    let mut perm = a.to_vec();
    for i in (1..perm.len()).rev() {
        perm.swap(i, (next() as usize) % (i + 1));
    }
    // Odd and even offsets keep the renaming injective.
    let f: HashMap<Name, Name> = fresh_names(a)
        .into_iter()
        .map(|n| {
            let to = n.refresh(50 + next() % 1000 * 2 + n.fresh.unwrap());
            (n, to)
        })
        .collect();
    let b = rename(&perm, &f);
    prop_assert_eq!(canonicalize(&msg_soup(a.to_vec())).digest, canonicalize(&msg_soup(b)).digest);
    Ok(())
}

pub fn substitution() -> impl Strategy<Value = (String, &'static str, &'static str)> {
    (
        program(3),
        prop::sample::select(vec!["a", "b", "x", "y", "z"]),
        prop::sample::select(vec!["x", "y", "z", "a", "1"]),
    )
}

pub fn capture(src: &str, key: &str, val: &str) -> Result<(), TestCaseError> {
    let p = parse(src).unwrap();
    let key = Name::new(key);
    let val_atom = if val == "1" { Atom::int(1) } else { Atom::name(val) };
    let q = substitute(&p, &HashMap::from([(key.clone(), val_atom.clone())]));
    let mut expect = free_names(&p);
    if expect.remove(&key) {
        if let Atom::Name(n) = &val_atom {
            expect.insert(n.clone());
        }
    }
    prop_assert_eq!(free_names(&q), expect, "{} [{}]", src, q);
    Ok(())
}

/// Run every property for `cases` cases each. Returns the total count.
pub fn run_all(cases: u32) -> Result<u32, String> {
    let cfg = || TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    cfg().run(&program(3), |s| heating(&s)).map_err(|e| format!("heating: {e}"))?;
    cfg().run(&program(3), |s| conservation(&s)).map_err(|e| format!("conservation: {e}"))?;
    cfg().run(&partner(), |(a, b)| canonical_brute(&a, &b)).map_err(|e| format!("canonical: {e}"))?;
    cfg()
        .run(&(prop::collection::vec(message(), 0..=8), any::<u64>()), |(a, s)| canonical_shuffle(&a, s))
        .map_err(|e| format!("canonical shuffle: {e}"))?;
    cfg().run(&substitution(), |(s, k, v)| capture(&s, k, v)).map_err(|e| format!("capture: {e}"))?;
    Ok(cases * 5)
}
