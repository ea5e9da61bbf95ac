//! System contexts: a template with one hole plus the sets of names it
//! publishes to whatever is plugged in.

mod builders;

use std::collections::BTreeSet;
use std::fmt;

use crate::engine::{inject_scoped, EngineError, Soup};
use crate::syntax::{name_sets, parse, pretty, Name, Process, SyntaxError};

pub use builders::{
    base_context, exec_hierarchy, file_system, refined_context, rootkit_kernel, worm_topology, ResourceKind,
    ResourceSpec, DEFAULT_COMPLEMENTS,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("template has {0} holes, exactly one expected")]
    HoleCount(usize),
    #[error("{0} is both a service and a resource")]
    Overlap(Name),
    #[error("privileged channel {0} is published")]
    PrivilegedPublished(Name),
    #[error("published channel {0} is not defined by the template")]
    Undefined(Name),
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("expected {expected} initial contents, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("bad context header: {0}")]
    Header(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// A system context `C[.]` with its published services `S` and resources `R`.
///
/// `executables` lists the resource channels that run their content (used to
/// re-activate infected resources), `dynamic` the channels of resources the
/// context creates at runtime, and `guarded` the channels whose first
/// argument must be the access token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    pub template: Process,
    pub services: BTreeSet<Name>,
    pub resources: BTreeSet<Name>,
    pub privileged: BTreeSet<Name>,
    pub executables: BTreeSet<Name>,
    pub dynamic: BTreeSet<Name>,
    pub guarded: BTreeSet<Name>,
}

fn names(xs: &[&str]) -> BTreeSet<Name> {
    xs.iter().map(|s| Name::new(s)).collect()
}

impl Context {
    pub fn new(
        template: Process,
        services: BTreeSet<Name>,
        resources: BTreeSet<Name>,
        privileged: BTreeSet<Name>,
    ) -> Result<Context, ContextError> {
        let c = Context {
            template,
            services,
            resources,
            privileged,
            executables: BTreeSet::new(),
            dynamic: BTreeSet::new(),
            guarded: BTreeSet::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        let holes = self.template.count_holes();
        if holes != 1 {
            return Err(ContextError::HoleCount(holes));
        }
        if let Some(n) = self.services.intersection(&self.resources).next() {
            return Err(ContextError::Overlap(n.clone()));
        }
        let published = self.published();
        if let Some(n) = self.privileged.intersection(&published).next() {
            return Err(ContextError::PrivilegedPublished(n.clone()));
        }
        let dv = name_sets(&self.template).dv;
        if let Some(n) = published.iter().find(|n| !dv.contains(*n)) {
            return Err(ContextError::Undefined(n.clone()));
        }
        Ok(())
    }

    /// `S ∪ R`.
    pub fn published(&self) -> BTreeSet<Name> {
        self.services.union(&self.resources).cloned().collect()
    }

    /// Names a plugged process can refer to.
    pub fn visible(&self) -> BTreeSet<Name> {
        let mut v = self.published();
        v.extend(self.dynamic.iter().cloned());
        v.extend(self.executables.iter().cloned());
        v
    }

    /// Is `c` (a source or runtime name) one of the published services?
    pub fn is_service(&self, c: &Name) -> bool {
        self.services.iter().any(|s| *s.base == *c.base)
    }

    /// Is `c` a resource channel, static or created at runtime?
    pub fn is_resource(&self, c: &Name) -> bool {
        self.resources.iter().chain(&self.dynamic).any(|s| *s.base == *c.base)
    }

    pub fn is_executable(&self, c: &Name) -> bool {
        self.executables.iter().any(|s| *s.base == *c.base)
    }

    /// Fill the hole with `p` and heat.
    pub fn plug(&self, p: &Process) -> Result<Soup, EngineError> {
        inject_scoped(&self.template, p, &self.visible())
    }

    pub fn header(&self) -> String {
        let join = |s: &BTreeSet<Name>| s.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let mut h = format!(
            "#! services: {}  resources: {}  privileged: {}",
            join(&self.services),
            join(&self.resources),
            join(&self.privileged)
        );
        for (key, set) in [("executables", &self.executables), ("dynamic", &self.dynamic), ("guarded", &self.guarded)] {
            if !set.is_empty() {
                h.push_str(&format!("  {}: {}", key, join(set)));
            }
        }
        h
    }

    /// `.jc` text: the header line followed by the template.
    pub fn to_jc(&self) -> String {
        format!("{}\n{}\n", self.header(), pretty(&self.template))
    }

    pub fn from_jc(text: &str) -> Result<Context, ContextError> {
        let mut c = Context {
            template: parse(text)?,
            services: BTreeSet::new(),
            resources: BTreeSet::new(),
            privileged: BTreeSet::new(),
            executables: BTreeSet::new(),
            dynamic: BTreeSet::new(),
            guarded: BTreeSet::new(),
        };
        for line in text.lines().filter_map(|l| l.trim_start().strip_prefix("#!")) {
            c.read_header(line)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn read_header(&mut self, line: &str) -> Result<(), ContextError> {
        let mut key: Option<&str> = None;
        for tok in line.split_whitespace() {
            if let Some(k) = tok.strip_suffix(':') {
                key = Some(k);
                continue;
            }
            let set = match key {
                Some("services") => &mut self.services,
                Some("resources") => &mut self.resources,
                Some("privileged") => &mut self.privileged,
                Some("executables") => &mut self.executables,
                Some("dynamic") => &mut self.dynamic,
                Some("guarded") => &mut self.guarded,
                Some(k) => return Err(ContextError::Header(format!("unknown key {k}"))),
                None => return Err(ContextError::Header(format!("value {tok} before any key"))),
            };
            for n in tok.split(',').filter(|s| !s.is_empty()) {
                set.insert(Name::new(n));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_jc())
    }
}
