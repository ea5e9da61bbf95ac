use std::collections::HashSet;

use rayon::prelude::*;

use super::{escapes_initially, qualifying, Budgets, DetectError, DetectionVerdict, Outcome, Payload, Stats, Strategy};
use crate::context::Context;
use crate::engine::{canonicalize, enabled_redexes, reduce_tracked, Digest, Origin, Soup, Trace, TraceStep};
use crate::syntax::Process;

/// Search for a replicating step from the program `p` plugged into `ctx`.
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::detector::{explore, Budgets, Outcome};
/// use joinvir::syntax::{Atom, Process};
/// let ctx = refined_context(1, &[Atom::name("f1")]).unwrap();
/// let v = explore(&ctx, &Process::Null, &Budgets::default()).unwrap();
/// assert_eq!(v.outcome, Outcome::NotVulnerable);
/// assert_eq!(v.stats.explored, 1);
/// ```
pub fn explore(ctx: &Context, p: &Process, budgets: &Budgets) -> Result<DetectionVerdict, DetectError> {
    let s0 = ctx.plug(p)?;
    let found = search(ctx, &s0, budgets, false)?;
    let mut v = DetectionVerdict::new(found.outcome, found.stats);
    v.witness = found.witness;
    Ok(v)
}

pub(crate) struct Found {
    pub outcome: Outcome,
    pub stats: Stats,
    pub witness: Option<Trace>,
}

struct Node {
    parent: Option<usize>,
    step: Option<TraceStep>,
    depth: usize,
}

struct Succ {
    step: TraceStep,
    soup: Soup,
    fired: bool,
    hit: bool,
}

/// Did this step run one of the program's own rules?
fn fires_self(s: &Soup, rule: usize) -> bool {
    s.rules[rule].pattern.channels().iter().any(|c| s.self_names.contains(*c))
}

fn expand(ctx: &Context, budgets: &Budgets, s: &Soup, fired: bool, need_fire: bool) -> Result<Vec<Succ>, DetectError> {
    let mut out = Vec::new();
    for r in enabled_redexes(s) {
        let rule = &s.rules[r.rule];
        let origin = rule.origin;
        let label = rule.label();
        let now_fired = fired || fires_self(s, r.rule);
        let (next, emitted) = reduce_tracked(s, &r)?;
        let payload = Payload::of(&next, &budgets.payload_names);
        let hit = (!need_fire || now_fired) && qualifying(ctx, &payload, origin, &r.consumed, &emitted, &next);
        let digest = canonicalize(&next).digest;
        out.push(Succ { step: TraceStep { label, redex: r, emitted, digest }, soup: next, fired: now_fired, hit });
    }
    Ok(out)
}

fn witness(nodes: &[Node], from: usize, last: TraceStep, s0: &Soup, end: Soup) -> Trace {
    let mut steps = vec![last];
    let mut cur = Some(from);
    while let Some(i) = cur {
        if let Some(st) = &nodes[i].step {
            steps.push(st.clone());
        }
        cur = nodes[i].parent;
    }
    steps.reverse();
    Trace { initial: s0.clone(), seed: 0, steps, last: end }
}

/// Exhaustive search from `s0` for a qualifying step. With `need_fire`, the
/// step only counts after one of the program's own rules has fired on the
/// same path.
pub(crate) fn search(ctx: &Context, s0: &Soup, budgets: &Budgets, need_fire: bool) -> Result<Found, DetectError> {
    let mut stats = Stats { explored: 0, dedup_hits: 0, frontier_peak: 1 };
    if !need_fire && escapes_initially(ctx, &Payload::of(s0, &budgets.payload_names), s0) {
        let t = Trace { initial: s0.clone(), seed: 0, steps: Vec::new(), last: s0.clone() };
        return Ok(Found { outcome: Outcome::Vulnerable, stats, witness: Some(t) });
    }
    let mut nodes = vec![Node { parent: None, step: None, depth: 0 }];
    let mut seen: HashSet<(Digest, bool)> = HashSet::from([(canonicalize(s0).digest, false)]);
    let mut exhausted = false;
    let pool = if budgets.workers > 1 {
        Some(rayon::ThreadPoolBuilder::new().num_threads(budgets.workers).build().expect("thread pool"))
    } else {
        None
    };

    // Frontier entries: node index, soup, fired flag.
    let mut frontier: Vec<(usize, Soup, bool)> = vec![(0, s0.clone(), false)];
    while !frontier.is_empty() {
        stats.frontier_peak = stats.frontier_peak.max(frontier.len());
        let batch: Vec<(usize, Soup, bool)> = match budgets.strategy {
            Strategy::BreadthFirst => std::mem::take(&mut frontier),
            Strategy::DepthFirst => vec![frontier.pop().expect("nonempty")],
        };
        let (open, deep): (Vec<_>, Vec<_>) =
            batch.into_iter().partition(|(i, _, _)| nodes[*i].depth < budgets.max_steps_per_branch);
        if deep.iter().any(|(_, s, _)| !enabled_redexes(s).is_empty()) {
            exhausted = true;
        }
        let expanded: Vec<Result<Vec<Succ>, DetectError>> = match &pool {
            Some(pool) => pool.install(|| {
                open.par_iter().map(|(_, s, f)| expand(ctx, budgets, s, *f, need_fire)).collect()
            }),
            None => open.iter().map(|(_, s, f)| expand(ctx, budgets, s, *f, need_fire)).collect(),
        };
        let mut next_layer = Vec::new();
        for ((idx, _, _), succs) in open.into_iter().zip(expanded) {
            stats.explored += 1;
            for succ in succs? {
                if succ.hit {
                    let t = witness(&nodes, idx, succ.step, s0, succ.soup);
                    return Ok(Found { outcome: Outcome::Vulnerable, stats, witness: Some(t) });
                }
                if !seen.insert((succ.step.digest, succ.fired)) {
                    stats.dedup_hits += 1;
                    continue;
                }
                if seen.len() > budgets.max_states {
                    return Ok(Found { outcome: Outcome::BudgetExhausted, stats, witness: None });
                }
                let depth = nodes[idx].depth + 1;
                nodes.push(Node { parent: Some(idx), step: Some(succ.step), depth });
                next_layer.push((nodes.len() - 1, succ.soup, succ.fired));
            }
        }
        match budgets.strategy {
            Strategy::BreadthFirst => frontier = next_layer,
            Strategy::DepthFirst => {
                next_layer.reverse();
                frontier.extend(next_layer);
            }
        }
    }
    let outcome = if exhausted { Outcome::BudgetExhausted } else { Outcome::NotVulnerable };
    Ok(Found { outcome, stats, witness: None })
}

/// Rule origin of a witness step, looked up in the soup it fired in.
pub(crate) fn step_origin(before: &Soup, st: &TraceStep) -> Origin {
    before.rules[st.redex.rule].origin
}
