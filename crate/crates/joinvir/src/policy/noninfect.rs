use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use super::{classify_context, Case, PolicyError, DEFAULT_TOKEN};
use crate::context::Context;
use crate::engine::{canonicalize, enabled_redexes, reduce_tracked, run, Digest, Message, Origin, Soup};
use crate::syntax::{desugar, Atom, Definition, Expression, JoinPattern, Literal, Name, Process};

/// Steps allowed for the infected system to settle.
pub const QUIESCENCE_BUDGET: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonInfection {
    SatisfiedToDepth(usize),
    Violated,
}

/// A test and two observation sequences, one per system, that tell them apart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distinguishing {
    pub test: Process,
    pub original: Vec<String>,
    pub infected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonInfectionVerdict {
    pub outcome: NonInfection,
    pub distinguishing: Option<Distinguishing>,
    pub depth: usize,
    /// The infected system reached an inert state within the budget.
    pub quiescent: bool,
}

impl fmt::Display for NonInfectionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.outcome {
            NonInfection::SatisfiedToDepth(k) => write!(f, "satisfied_to_depth({k})")?,
            NonInfection::Violated => f.write_str("violated")?,
        }
        if let Some(d) = &self.distinguishing {
            write!(f, "\ntest: {}\noriginal: {}\ninfected: {}", d.test, show(&d.original), show(&d.infected))?;
        }
        if !self.quiescent {
            f.write_str("\nnote: infected system still active at the step budget")?;
        }
        Ok(())
    }
}

fn show(t: &[String]) -> String {
    if t.is_empty() {
        "(nothing)".to_string()
    } else {
        t.join(" ; ")
    }
}

fn render_name(n: &Name, out: &mut String) {
    out.push_str(&n.base);
    if n.is_fresh() {
        out.push('#');
    }
}

fn render_atom(a: &Atom, out: &mut String) {
    match a {
        Atom::Name(n) => render_name(n, out),
        Atom::Lit(Literal::Pair(x, y)) => {
            out.push_str("pair(");
            render_atom(x, out);
            out.push_str(", ");
            render_atom(y, out);
            out.push(')');
        }
        lit => out.push_str(&lit.to_string()),
    }
}

/// Message text with runtime indices dropped, so runs that differ only in
/// fresh-name numbering look the same.
fn render(m: &Message) -> String {
    let mut out = String::new();
    render_name(&m.channel, &mut out);
    out.push('<');
    for (i, a) in m.args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        render_atom(a, &mut out);
    }
    out.push('>');
    out
}

type TraceSet = Arc<BTreeSet<Vec<String>>>;

struct Observer<'a> {
    ctx: &'a Context,
    memo: HashMap<(Digest, usize), TraceSet>,
}

impl Observer<'_> {
    fn observable(&self, m: &Message, s: &Soup) -> bool {
        !s.defines(&m.channel) || self.ctx.is_service(&m.channel) || self.ctx.is_resource(&m.channel)
    }

    /// Observation sequences of every run of at most `depth` steps.
    fn traces(&mut self, s: &Soup, depth: usize) -> Result<TraceSet, PolicyError> {
        let key = (canonicalize(s).digest, depth);
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        let mut out: BTreeSet<Vec<String>> = BTreeSet::from([Vec::new()]);
        if depth > 0 {
            for r in enabled_redexes(s) {
                let (next, emitted) = reduce_tracked(s, &r)?;
                let mut seen: Vec<String> = emitted.iter().filter(|m| self.observable(m, &next)).map(render).collect();
                seen.sort();
                let sub = self.traces(&next, depth - 1)?;
                for t in sub.iter() {
                    if seen.is_empty() {
                        out.insert(t.clone());
                    } else {
                        let mut v = Vec::with_capacity(t.len() + 1);
                        v.push(seen.join(" | "));
                        v.extend(t.iter().cloned());
                        out.insert(v);
                    }
                }
            }
        }
        let out = Arc::new(out);
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

/// Channels a process sends on, after compiling calls to messages.
fn sent_channels(p: &Process) -> Result<Vec<Name>, PolicyError> {
    fn go(p: &Process, out: &mut Vec<Name>) {
        match p {
            Process::Message(Atom::Name(c), _) => out.push(c.clone()),
            Process::LocalDef(d, body) => {
                for (_, b) in d.rules() {
                    go(b, out);
                }
                go(body, out);
            }
            Process::Parallel(a, b) | Process::Conditional(_, _, a, b) => {
                go(a, out);
                go(b, out);
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(&desugar(p)?, &mut out);
    Ok(out)
}

fn closest(t: &[String], set: &BTreeSet<Vec<String>>) -> Vec<String> {
    let common = |u: &Vec<String>| t.iter().zip(u).take_while(|(a, b)| a == b).count();
    set.iter()
        .max_by_key(|u| (common(u), u.len() == t.len(), std::cmp::Reverse(u.len())))
        .cloned()
        .unwrap_or_default()
}

/// Compare the original system with the one `p` left behind, under each
/// test, up to `depth` steps.
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::policy::{non_infection_test, NonInfection};
/// use joinvir::syntax::{parse, Atom};
/// let ctx = refined_context(1, &[Atom::name("f1")]).unwrap();
/// let probe = parse("let x = sr1() in obs<x>").unwrap();
/// let write = parse("sw1(v); 0").unwrap();
/// let v = non_infection_test(&ctx, &write, &[probe.clone()], 6).unwrap();
/// assert_eq!(v.outcome, NonInfection::Violated);
/// let d = v.distinguishing.unwrap();
/// assert_eq!(d.original, vec!["obs<f1>".to_string()]);
/// assert_eq!(d.infected, vec!["obs<v>".to_string()]);
/// let v = non_infection_test(&ctx, &probe, &[probe.clone()], 6).unwrap();
/// assert_eq!(v.outcome, NonInfection::SatisfiedToDepth(6));
/// ```
pub fn non_infection_test(
    ctx: &Context,
    p: &Process,
    tests: &[Process],
    depth: usize,
) -> Result<NonInfectionVerdict, PolicyError> {
    let original = ctx.plug(&Process::Null)?;
    if !enabled_redexes(&original).is_empty() {
        return Err(PolicyError::UnstableContext);
    }
    let report = classify_context(ctx);
    for t in tests {
        for c in sent_channels(t)? {
            if let Some(case) = report.case_of(&c).filter(|case| !case.is_harmless()) {
                return Err(PolicyError::InfectingTest { test: t.to_string(), channel: c, case });
            }
        }
    }

    let after = run(&ctx.plug(p)?, 0, QUIESCENCE_BUDGET)?.last;
    let quiescent = enabled_redexes(&after).is_empty();
    let mut infected = after;
    let own: BTreeSet<Name> = infected
        .rules
        .iter()
        .filter(|r| r.origin == Origin::Process)
        .flat_map(|r| r.pattern.channels().into_iter().cloned())
        .collect();
    infected.rules.retain(|r| r.origin != Origin::Process);
    infected.messages.retain(|m| !own.contains(&m.channel));

    let mut obs = Observer { ctx, memo: HashMap::new() };
    for t in tests {
        let a = ctx.plug(t)?;
        let mut b = infected.clone();
        b.plug_more(t, Origin::Process)?;
        let ta = obs.traces(&a, depth)?;
        let tb = obs.traces(&b, depth)?;
        if ta == tb {
            continue;
        }
        let (original, infected) = match ta.difference(&tb).next() {
            Some(x) => (x.clone(), closest(x, &tb)),
            None => {
                let y = tb.difference(&ta).next().expect("sets differ");
                (closest(y, &ta), y.clone())
            }
        };
        return Ok(NonInfectionVerdict {
            outcome: NonInfection::Violated,
            distinguishing: Some(Distinguishing { test: t.clone(), original, infected }),
            depth,
            quiescent,
        });
    }
    Ok(NonInfectionVerdict { outcome: NonInfection::SatisfiedToDepth(depth), distinguishing: None, depth, quiescent })
}

/// Binder count and call flag of the first rule reading `c`.
fn shape(ctx: &Context, c: &Name) -> Option<(usize, bool)> {
    fn find(p: &Process, c: &Name) -> Option<(usize, bool)> {
        match p {
            Process::LocalDef(d, body) => find_def(d, c).or_else(|| find(body, c)),
            Process::Parallel(a, b) | Process::Conditional(_, _, a, b) => find(a, c).or_else(|| find(b, c)),
            Process::Sequence(_, b) | Process::Let(_, _, b) => find(b, c),
            _ => None,
        }
    }
    fn find_def(d: &Definition, c: &Name) -> Option<(usize, bool)> {
        d.rules().into_iter().find_map(|(j, body): (&JoinPattern, &Process)| {
            j.parts().into_iter().find(|(pc, _, _)| pc.base == c.base).map(|(_, bs, call)| (bs.len(), call)).or_else(|| find(body, c))
        })
    }
    find(&ctx.template, c)
}

fn access(ctx: &Context, c: &Name, bind: Option<&str>) -> Option<Process> {
    let (n, call) = shape(ctx, c)?;
    let guarded = ctx.guarded.iter().any(|g| g.base == c.base);
    let args: Vec<Expression> = (0..n)
        .map(|i| Atom::name(if guarded && i == 0 { DEFAULT_TOKEN } else { "probe" }).into())
        .collect();
    if !call {
        return Some(Process::Message(Atom::Name(c.clone()), args));
    }
    let e = Expression::SyncCall(Atom::Name(c.clone()), args);
    Some(match bind {
        Some(x) => Process::Let(vec![Name::new(x)], e, Box::new(Process::message("obs", vec![Atom::name(x)]))),
        None => Process::Sequence(e, Box::new(Process::Null)),
    })
}

/// One read test per read-only resource: call it and report the result on
/// the free channel `obs`.
pub fn read_tests(ctx: &Context) -> Vec<Process> {
    classify_context(ctx)
        .entries
        .iter()
        .filter(|e| e.case == Case::ReadOnly && ctx.resources.contains(&e.channel))
        .filter_map(|e| access(ctx, &e.channel, Some("x")))
        .collect()
}

/// Token-less calls on every guarded channel, or on every resource that is
/// not read-only when nothing is guarded.
pub fn probe_battery(ctx: &Context) -> Vec<Process> {
    let channels: Vec<Name> = if ctx.guarded.is_empty() {
        let report = classify_context(ctx);
        ctx.resources.iter().filter(|c| report.case_of(c) != Some(Case::ReadOnly)).cloned().collect()
    } else {
        ctx.guarded.iter().cloned().collect()
    };
    channels.iter().filter_map(|c| access(ctx, c, None)).collect()
}

/// Does the guard hold up: no token-less probe changes what the read tests
/// observe, up to `depth` steps?
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::policy::{enforcement_sound, tokenize_context, TokenPolicy};
/// use joinvir::syntax::{Atom, Name};
/// let ctx = refined_context(1, &[Atom::name("f1")]).unwrap();
/// assert!(!enforcement_sound(&ctx, 6).unwrap());
/// let g = tokenize_context(&ctx, &TokenPolicy::spatial([Name::new("sw1")])).unwrap();
/// assert!(enforcement_sound(&g, 6).unwrap());
/// ```
pub fn enforcement_sound(ctx: &Context, depth: usize) -> Result<bool, PolicyError> {
    let tests = read_tests(ctx);
    for probe in probe_battery(ctx) {
        if let NonInfection::Violated = non_infection_test(ctx, &probe, &tests, depth)?.outcome {
            return Ok(false);
        }
    }
    Ok(true)
}
