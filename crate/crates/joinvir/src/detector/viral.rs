use std::collections::BTreeSet;

use super::explore::{search, step_origin};
use super::{Budgets, DetectError, DetectionVerdict, Outcome, Stats};
use crate::context::Context;
use crate::engine::{Origin, Soup, Trace};
use crate::syntax::{Atom, Expression, Name, Process};

/// Check that `p` replicates, and that running an infected resource
/// replicates it again, `iterations` times in a row.
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::detector::{viral_set_member, Budgets, Outcome};
/// use joinvir::malware::{build_virus, Class, MalwareSpec, ReplicationMech, TargetRoutine};
/// use joinvir::syntax::Atom;
/// let ctx = refined_context(2, &[Atom::name("f1"), Atom::name("f2")]).unwrap();
/// let targets = TargetRoutine::Hardcoded(vec![Atom::name("sw1"), Atom::name("sw2")]);
/// let v = build_virus(&MalwareSpec::virus(Class::III, ReplicationMech::Overwrite, targets)).unwrap();
/// let verdict = viral_set_member(&ctx, &v, 2, &Budgets::default()).unwrap();
/// assert_eq!(verdict.outcome, Outcome::Vulnerable);
/// assert_eq!(verdict.rounds.len(), 2);
/// ```
pub fn viral_set_member(ctx: &Context, p: &Process, iterations: usize, budgets: &Budgets) -> Result<DetectionVerdict, DetectError> {
    viral_set_member_via(ctx, p, iterations, budgets, None)
}

/// As [`viral_set_member`], activating only resources on `activation`.
pub fn viral_set_member_via(
    ctx: &Context,
    p: &Process,
    iterations: usize,
    budgets: &Budgets,
    activation: Option<&Name>,
) -> Result<DetectionVerdict, DetectError> {
    if iterations < 2 {
        return Err(DetectError::TooFewIterations { min: 2, got: iterations });
    }
    if let Some(a) = activation {
        if !ctx.is_executable(a) {
            return Err(DetectError::InvalidActivation(a.clone()));
        }
    }
    let mut stats = Stats::default();
    let mut rounds: Vec<Trace> = Vec::new();
    let mut s = ctx.plug(p)?;
    for round in 0..iterations {
        let found = search(ctx, &s, budgets, true)?;
        stats.explored += found.stats.explored;
        stats.dedup_hits += found.stats.dedup_hits;
        stats.frontier_peak = stats.frontier_peak.max(found.stats.frontier_peak);
        let Some(t) = found.witness else {
            let mut v = DetectionVerdict::new(found.outcome, stats);
            v.rounds = rounds;
            return Ok(v);
        };
        let next = if round + 1 < iterations { activate(ctx, &t, activation)? } else { None };
        rounds.push(t);
        match next {
            Some(n) => s = n,
            None if round + 1 < iterations => {
                let mut v = DetectionVerdict::new(Outcome::NotVulnerable, stats);
                v.rounds = rounds;
                return Ok(v);
            }
            None => {}
        }
    }
    let mut v = DetectionVerdict::new(Outcome::Vulnerable, stats);
    v.witness = rounds.last().cloned();
    v.rounds = rounds;
    Ok(v)
}

/// Soup before the last step of `t`.
fn before_last(t: &Trace) -> Soup {
    let mut s = t.initial.clone();
    for st in &t.steps[..t.steps.len().saturating_sub(1)] {
        s = crate::engine::reduce(&s, &st.redex).expect("witness replays");
    }
    s
}

/// Send an activation message to an executable resource sharing state with
/// the rule that took the copy in. `None` when there is no such resource.
fn activate(ctx: &Context, t: &Trace, want: Option<&Name>) -> Result<Option<Soup>, DetectError> {
    let Some(last) = t.steps.last() else { return Ok(None) };
    let before = before_last(t);
    if step_origin(&before, last) != Origin::Context {
        return Ok(None);
    }
    let written = &before.rules[last.redex.rule];
    let state: BTreeSet<&Name> = written.pattern.channels().into_iter().filter(|c| !ctx.is_resource(c)).collect();
    let mut s = t.last.clone();
    let target = s.rules.iter().find_map(|r| {
        let parts = r.pattern.parts();
        if !parts.iter().any(|(c, _, _)| state.contains(*c)) {
            return None;
        }
        parts
            .into_iter()
            .find(|(c, _, _)| ctx.is_executable(c) && want.is_none_or(|w| w.base == c.base))
            .map(|(c, bs, _)| (c.clone(), bs.to_vec()))
    });
    let Some((exec, binders)) = target else { return Ok(None) };
    let mut args = Vec::with_capacity(binders.len());
    for b in &binders {
        let base = if b.base.starts_with('%') { b.base.to_string() } else { "act".to_string() };
        args.push(Expression::Atom(Atom::Name(Name::fresh(&base, s.fresh_counter))));
        s.fresh_counter += 1;
    }
    s.plug_more(&Process::Message(Atom::Name(exec), args), Origin::Context)?;
    Ok(Some(s))
}
