use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{escapes_initially, qualifying, DetectError, DetectionVerdict, Outcome, Payload, Stats};
use crate::context::Context;
use crate::engine::{canonicalize, enabled_redexes, inject, reduce_tracked, Message, Origin, Soup, Trace, TraceStep};
use crate::petri::{coverable, Marking, PetriNet, Transition};
use crate::syntax::{check_core_fragment, Atom, Expression, Name, Process};

pub const DEFAULT_EXPLOSION_CAP: u128 = 1_000_000;

/// One rule instance with every received name fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundRule {
    /// Index of the rule in the soup it was taken from.
    pub rule: usize,
    pub label: String,
    pub binding: Vec<(Name, Atom)>,
    pub pre: Vec<Message>,
    pub post: Vec<Message>,
    pub origin: Origin,
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |ms: &[Message]| {
            if ms.is_empty() {
                "0".to_string()
            } else {
                ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" | ")
            }
        };
        write!(f, "{} |> {}", show(&self.pre), show(&self.post))
    }
}

/// A program without name generation, as finitely many ground rules.
#[derive(Clone, Debug)]
pub struct GroundSystem {
    pub atoms: BTreeSet<Atom>,
    pub rules: Vec<GroundRule>,
    pub initial: Vec<Message>,
    /// The heated program the rules were taken from.
    pub soup: Soup,
}

/// Ground a closed program.
///
/// ```
/// use joinvir::detector::ground;
/// use joinvir::syntax::parse;
/// let g = ground(&parse("def x<u> |> y<u> in x<a> | x<b>").unwrap()).unwrap();
/// assert_eq!(g.rules.len(), 2);
/// assert_eq!(g.atoms.len(), 2);
/// ```
pub fn ground(p: &Process) -> Result<GroundSystem, DetectError> {
    let report = check_core_fragment(p);
    if !report.in_fragment {
        return Err(DetectError::FragmentViolation(report));
    }
    ground_soup(&inject(p)?, DEFAULT_EXPLOSION_CAP)
}

fn body_atoms(p: &Process, binders: &BTreeSet<&Name>, out: &mut BTreeSet<Atom>) {
    match p {
        Process::Message(_, args) => {
            for a in args {
                if let Expression::Atom(a) = a {
                    if a.as_name().is_none_or(|n| !binders.contains(n)) {
                        out.insert(a.clone());
                    }
                }
            }
        }
        Process::Parallel(a, b) | Process::Conditional(_, _, a, b) => {
            body_atoms(a, binders, out);
            body_atoms(b, binders, out);
        }
        _ => {}
    }
}

fn bind(a: &Atom, env: &HashMap<&Name, &Atom>) -> Atom {
    match a.as_name().and_then(|n| env.get(n)) {
        Some(v) => (*v).clone(),
        None => a.clone(),
    }
}

/// Emitted messages of a body under `env`, or `None` if the instance would
/// send on a literal or break a known arity.
fn instantiate(p: &Process, env: &HashMap<&Name, &Atom>, arity: &BTreeMap<Name, usize>, out: &mut Vec<Message>) -> Option<()> {
    match p {
        Process::Null => Some(()),
        Process::Message(ch, args) => {
            let ch = bind(ch, env).as_name()?.clone();
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                match a {
                    Expression::Atom(a) => vals.push(bind(a, env)),
                    _ => return None,
                }
            }
            if arity.get(&ch).is_some_and(|&k| k != vals.len()) {
                return None;
            }
            out.push(Message::new(ch, vals));
            Some(())
        }
        Process::Parallel(a, b) => {
            instantiate(a, env, arity, out)?;
            instantiate(b, env, arity, out)
        }
        Process::Conditional(a, b, t, e) => {
            let branch = if bind(a, env) == bind(b, env) { t } else { e };
            instantiate(branch, env, arity, out)
        }
        _ => None,
    }
}

/// Ground every rule of a heated soup over the values that can actually
/// reach each channel position, computed as a fixpoint.
pub fn ground_soup(s: &Soup, cap: u128) -> Result<GroundSystem, DetectError> {
    let mut atoms = BTreeSet::new();
    for m in &s.messages {
        atoms.extend(m.args.iter().cloned());
    }
    let mut arity: BTreeMap<Name, usize> = BTreeMap::new();
    for m in &s.messages {
        arity.entry(m.channel.clone()).or_insert(m.args.len());
    }
    for r in &s.rules {
        let binders: BTreeSet<&Name> = r.pattern.binders().into_iter().collect();
        body_atoms(&r.body, &binders, &mut atoms);
        for (c, bs, _) in r.pattern.parts() {
            arity.entry(c.clone()).or_insert(bs.len());
        }
    }

    let mut vals: BTreeMap<(Name, usize), BTreeSet<Atom>> = BTreeMap::new();
    let add = |vals: &mut BTreeMap<(Name, usize), BTreeSet<Atom>>, m: &Message| {
        let mut grew = false;
        for (i, a) in m.args.iter().enumerate() {
            grew |= vals.entry((m.channel.clone(), i)).or_default().insert(a.clone());
        }
        grew
    };
    for m in &s.messages {
        add(&mut vals, m);
    }

    let mut rules: Vec<GroundRule>;
    loop {
        rules = Vec::new();
        let mut count: u128 = 0;
        for (ri, r) in s.rules.iter().enumerate() {
            let parts = r.pattern.parts();
            let mut slots: Vec<(&Name, usize, &Name)> = Vec::new();
            for (c, bs, _) in &parts {
                for (i, b) in bs.iter().enumerate() {
                    slots.push((c, i, b));
                }
            }
            let domains: Vec<Vec<&Atom>> = slots
                .iter()
                .map(|(c, i, _)| vals.get(&((*c).clone(), *i)).map(|v| v.iter().collect()).unwrap_or_default())
                .collect();
            let n: u128 = domains.iter().map(|d| d.len() as u128).product();
            count = count.saturating_add(n);
            if count > cap {
                return Err(DetectError::ExplosionGuard { instances: count, cap });
            }
            if n == 0 {
                continue;
            }
            let mut idx = vec![0usize; slots.len()];
            loop {
                let env: HashMap<&Name, &Atom> =
                    slots.iter().zip(&idx).enumerate().map(|(j, ((_, _, b), &k))| (*b, domains[j][k])).collect();
                let binding: Vec<(Name, Atom)> = slots.iter().map(|(_, _, b)| ((*b).clone(), env[b].clone())).collect();
                let pre: Vec<Message> = parts
                    .iter()
                    .map(|(c, bs, _)| Message::new((*c).clone(), bs.iter().map(|b| env[b].clone()).collect()))
                    .collect();
                let mut post = Vec::new();
                if instantiate(&r.body, &env, &arity, &mut post).is_some() {
                    rules.push(GroundRule { rule: ri, label: r.label(), binding, pre, post, origin: r.origin });
                }
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < domains[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
        }
        let mut grew = false;
        for g in &rules {
            for m in &g.post {
                grew |= add(&mut vals, m);
            }
        }
        if !grew {
            break;
        }
    }
    Ok(GroundSystem { atoms, rules, initial: s.messages.clone(), soup: s.clone() })
}

/// Exact replication check for programs without name generation, by
/// coverability of a goal place that every qualifying instance marks.
///
/// ```
/// use joinvir::context::Context;
/// use joinvir::detector::{detect_via_coverability, Budgets, Outcome};
/// use joinvir::syntax::{parse, Name};
/// let ctx = Context::from_jc("#! resources: sw1\ndef sw1<x> | content1<y> |> content1<x> in content1<f1> | HOLE").unwrap();
/// let p = parse("def t<> |> sw1<p> | t<> in t<>").unwrap();
/// let b = Budgets { payload_names: vec![Name::new("p")], ..Budgets::default() };
/// let v = detect_via_coverability(&ctx, &p, &b).unwrap();
/// assert_eq!(v.outcome, Outcome::Vulnerable);
/// // The call, then the resource rule taking the payload in.
/// assert_eq!(v.witness.unwrap().steps.len(), 2);
/// ```
pub fn detect_via_coverability(ctx: &Context, p: &Process, budgets: &super::Budgets) -> Result<DetectionVerdict, DetectError> {
    let report = check_core_fragment(&ctx.template.plug(p));
    if !report.in_fragment {
        return Err(DetectError::FragmentViolation(report));
    }
    let s0 = ctx.plug(p)?;
    let g = ground_soup(&s0, DEFAULT_EXPLOSION_CAP)?;
    let payload = Payload::of(&s0, &budgets.payload_names);

    let mut net = PetriNet::default();
    let mut place: HashMap<Message, usize> = HashMap::new();
    let mut place_of = |net: &mut PetriNet, m: &Message| *place.entry(m.clone()).or_insert_with(|| net.add_place(m.to_string()))
    ;
    let goal = net.add_place("goal");
    let mut init = Marking::new();
    for m in &g.initial {
        let i = place_of(&mut net, m);
        init.add(i, 1);
    }
    if escapes_initially(ctx, &payload, &s0) {
        init.add(goal, 1);
    }
    for r in &g.rules {
        let mut pre = Marking::new();
        for m in &r.pre {
            pre.add(place_of(&mut net, m), 1);
        }
        let mut post = Marking::new();
        for m in &r.post {
            post.add(place_of(&mut net, m), 1);
        }
        if qualifying(ctx, &payload, r.origin, &r.pre, &r.post, &s0) {
            post.add(goal, 1);
        }
        net.transitions.push(Transition { label: r.to_string(), pre, post });
    }

    let c = coverable(&net, &init, &Marking::from_pairs([(goal, 1)]));
    let stats = Stats { explored: c.basis_size, dedup_hits: 0, frontier_peak: net.places.len() };
    let mut v = DetectionVerdict::new(if c.covered { Outcome::Vulnerable } else { Outcome::NotVulnerable }, stats);
    if let Some(seq) = c.witness {
        v.witness = Some(replay_ground(&s0, &g, &seq)?);
    }
    Ok(v)
}

/// Run a sequence of ground instances through the engine.
fn replay_ground(s0: &Soup, g: &GroundSystem, seq: &[usize]) -> Result<Trace, DetectError> {
    let mut s = s0.clone();
    let mut steps = Vec::with_capacity(seq.len());
    for &t in seq {
        let gr = &g.rules[t];
        let redex = enabled_redexes(&s)
            .into_iter()
            .find(|r| r.rule == gr.rule && r.consumed == gr.pre)
            .expect("ground witness step is enabled in the engine");
        let (next, emitted) = reduce_tracked(&s, &redex)?;
        let digest = canonicalize(&next).digest;
        steps.push(TraceStep { label: gr.label.clone(), redex, emitted, digest });
        s = next;
    }
    Ok(Trace { initial: s0.clone(), seed: 0, steps, last: s })
}
