//! The reflexive chemical abstract machine: heating, reduction, predicates
//! over reachable soups and canonical forms for deduplication.

mod canon;
mod heat;
mod reduce;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::syntax::{Atom, DesugarError, JoinPattern, Name, Process};

pub use canon::{canonicalize, CanonicalForm, Digest};
pub use heat::{cool, inject, inject_plugged, inject_scoped, HOLE_CHANNEL};
pub use reduce::{
    barb, barb_within, enabled_redexes, reduce, reduce_tracked, run, valued_reaction, Redex, Trace, TraceStep,
    DEFAULT_BARB_DEPTH,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("message sent on literal {0}")]
    LiteralChannel(Atom),
    #[error("term is not in the core calculus: {0}")]
    NotCore(String),
    #[error("{0}")]
    Primitive(String),
    #[error("channel {channel} used with {found} arguments, {expected} expected")]
    Arity { channel: Name, expected: usize, found: usize },
    #[error("redex refers to messages no longer in the soup")]
    StaleRedex,
    #[error("template hole left unplugged")]
    UnpluggedHole,
    #[error(transparent)]
    Desugar(#[from] DesugarError),
}

/// Who introduced a rule: the system context or the plugged process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Context,
    Process,
}

impl Origin {
    fn tag(self) -> char {
        match self {
            Origin::Context => 'C',
            Origin::Process => 'P',
        }
    }
}

/// An activated definition rule. Rules are shared between soups.
#[derive(Debug)]
pub struct ActiveRule {
    pub pattern: JoinPattern,
    pub body: Process,
    pub origin: Origin,
    rendered: OnceLock<Vec<canon::Seg>>,
}

impl ActiveRule {
    pub fn new(pattern: JoinPattern, body: Process, origin: Origin) -> ActiveRule {
        ActiveRule { pattern, body, origin, rendered: OnceLock::new() }
    }

    pub fn label(&self) -> String {
        self.pattern.channels().iter().map(|c| c.to_string()).collect::<Vec<_>>().join("|")
    }
}

impl fmt::Display for ActiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |> {}", self.pattern, self.body)
    }
}

/// A heated message: channel name and atom arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    pub channel: Name,
    pub args: Vec<Atom>,
}

impl Message {
    pub fn new(channel: Name, args: Vec<Atom>) -> Message {
        Message { channel, args }
    }

    pub fn to_process(&self) -> Process {
        Process::Message(Atom::Name(self.channel.clone()), self.args.iter().cloned().map(Into::into).collect())
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}<", self.channel)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", a)?;
        }
        f.write_str(">")
    }
}

/// A fully heated configuration.
#[derive(Clone, Debug, Default)]
pub struct Soup {
    pub rules: Vec<Arc<ActiveRule>>,
    pub messages: Vec<Message>,
    pub fresh_counter: u64,
    /// Renamed channels of the plugged process's own definition.
    pub self_names: BTreeSet<Name>,
    /// Source names visible at the hole, mapped to their runtime names.
    pub hole_env: HashMap<Name, Atom>,
    arities: BTreeMap<Name, usize>,
    filler: Option<Arc<(Process, Vec<Name>)>>,
}

impl Soup {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.messages.is_empty()
    }

    /// Rules whose pattern reads channel `c`.
    pub fn rules_on<'a>(&'a self, c: &'a Name) -> impl Iterator<Item = (usize, &'a Arc<ActiveRule>)> + 'a {
        self.rules.iter().enumerate().filter(move |(_, r)| r.pattern.channels().contains(&c))
    }

    pub fn defines(&self, c: &Name) -> bool {
        self.rules_on(c).next().is_some()
    }

    pub fn origin_of(&self, c: &Name) -> Option<Origin> {
        self.rules_on(c).next().map(|(_, r)| r.origin)
    }

    /// Runtime name of a source name visible at the hole.
    pub fn resolve(&self, n: &Name) -> Atom {
        self.hole_env.get(n).cloned().unwrap_or_else(|| Atom::Name(n.clone()))
    }

    /// Soup dump in the concrete grammar, one item per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&format!("{} |> {}\n", r.pattern, r.body));
        }
        for m in &self.messages {
            out.push_str(&format!("{}\n", m));
        }
        out
    }
}
