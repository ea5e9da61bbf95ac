//! Replication detection: exhaustive exploration with digest deduplication,
//! viral-set membership over repeated infections, and the exact pipeline for
//! programs without name generation.

mod explore;
mod ground;
mod viral;

use std::collections::BTreeSet;
use std::fmt;

use crate::context::Context;
use crate::engine::{EngineError, Message, Origin, Soup, Trace};
use crate::syntax::names::walk_names;
use crate::syntax::{Atom, FragmentReport, Literal, Name};

pub use explore::explore;
pub use ground::{detect_via_coverability, ground, ground_soup, GroundRule, GroundSystem, DEFAULT_EXPLOSION_CAP};
pub use viral::{viral_set_member, viral_set_member_via};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Vulnerable,
    NotVulnerable,
    BudgetExhausted,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Vulnerable => "vulnerable",
            Outcome::NotVulnerable => "not_vulnerable",
            Outcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub explored: usize,
    pub dedup_hits: usize,
    pub frontier_peak: usize,
}

#[derive(Clone, Debug)]
pub struct DetectionVerdict {
    pub outcome: Outcome,
    /// Run ending with the step that replicated.
    pub witness: Option<Trace>,
    /// One trace per infection round, for viral-set membership.
    pub rounds: Vec<Trace>,
    pub stats: Stats,
}

impl DetectionVerdict {
    fn new(outcome: Outcome, stats: Stats) -> DetectionVerdict {
        DetectionVerdict { outcome, witness: None, rounds: Vec::new(), stats }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    BreadthFirst,
    DepthFirst,
}

#[derive(Clone, Debug)]
pub struct Budgets {
    pub max_states: usize,
    pub max_steps_per_branch: usize,
    pub strategy: Strategy,
    /// Threads used to expand a breadth-first layer. 1 runs inline.
    pub workers: usize,
    /// Source names treated as the program itself, besides the channels of
    /// its first rule.
    pub payload_names: Vec<Name>,
}

impl Default for Budgets {
    fn default() -> Budgets {
        Budgets {
            max_states: 10_000,
            max_steps_per_branch: 200,
            strategy: Strategy::BreadthFirst,
            workers: 1,
            payload_names: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0} is not an executable resource channel")]
    InvalidActivation(Name),
    #[error("program leaves the fragment without name generation: {0}")]
    FragmentViolation(FragmentReport),
    #[error("{instances} ground instances exceed the cap of {cap}")]
    ExplosionGuard { instances: u128, cap: u128 },
    #[error("at least {min} iterations required, got {got}")]
    TooFewIterations { min: usize, got: usize },
}

/// Names that stand for the program: its self names, extra source names, and
/// every named channel of the program whose rules mention one of them.
pub(crate) struct Payload {
    names: BTreeSet<Name>,
    sources: Vec<Name>,
}

impl Payload {
    pub(crate) fn of(s: &Soup, sources: &[Name]) -> Payload {
        let mut names: BTreeSet<Name> = s.self_names.clone();
        let sources = sources.to_vec();
        loop {
            let mut grew = false;
            for r in s.rules.iter().filter(|r| r.origin == Origin::Process) {
                let chans: Vec<&Name> = r.pattern.channels();
                if chans.iter().all(|c| names.contains(*c) || c.base.starts_with('%')) {
                    continue;
                }
                let mut hit = false;
                walk_names(&r.body, &mut |n| {
                    hit |= names.contains(n) || sources.iter().any(|s| s.matches(n));
                });
                if hit {
                    for c in chans.into_iter().filter(|c| !c.base.starts_with('%')) {
                        grew |= names.insert(c.clone());
                    }
                }
            }
            if !grew {
                break;
            }
        }
        Payload { names, sources }
    }

    pub(crate) fn hits(&self, a: &Atom) -> bool {
        match a {
            Atom::Name(n) => self.names.contains(n) || self.sources.iter().any(|s| s.matches(n)),
            Atom::Lit(Literal::Pair(x, y)) => self.hits(x) || self.hits(y),
            Atom::Lit(_) => false,
        }
    }

    fn carried(&self, m: &Message) -> bool {
        m.args.iter().any(|a| self.hits(a))
    }
}

/// Does firing rule `rule` of `before`, consuming `consumed` and emitting
/// `emitted` into `after`, copy the program somewhere it can live on?
///
/// Either a context resource rule takes the program in and passes it on, or
/// the program reaches a channel nobody defines that is not a service.
pub(crate) fn qualifying(
    ctx: &Context,
    payload: &Payload,
    origin: Origin,
    consumed: &[Message],
    emitted: &[Message],
    after: &Soup,
) -> bool {
    let into_resource = origin == Origin::Context
        && consumed.iter().any(|m| ctx.is_resource(&m.channel) && payload.carried(m))
        && emitted.iter().any(|m| payload.carried(m));
    into_resource || emitted.iter().any(|m| escapes(ctx, payload, m, after))
}

fn escapes(ctx: &Context, payload: &Payload, m: &Message, s: &Soup) -> bool {
    !s.defines(&m.channel) && !ctx.is_service(&m.channel) && payload.carried(m)
}

/// Messages of the initial soup that already put the program on a free channel.
pub(crate) fn escapes_initially(ctx: &Context, payload: &Payload, s: &Soup) -> bool {
    s.messages.iter().any(|m| escapes(ctx, payload, m, s))
}

#[cfg(test)]
mod tests;
