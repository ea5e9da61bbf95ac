use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::context::Context;
use crate::syntax::names::dv_of;
use crate::syntax::{desugar, Atom, Definition, Expression, JoinPattern, Name, Process};

/// Intrusion case of one published channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    /// I.1: resource access that only reads.
    ReadOnly,
    /// I.2: resource access that changes stored state.
    ResourceWrite,
    /// I.3: resource access that runs code; resolved when every executed
    /// value is fixed by the context.
    ResourceExec { resolved: bool },
    /// II.1
    ServiceNoWrite,
    /// II.2
    ServiceWrite,
    /// II.3
    ServiceExec { resolved: bool },
}

impl Case {
    pub fn code(self) -> &'static str {
        match self {
            Case::ReadOnly => "I.1",
            Case::ResourceWrite => "I.2",
            Case::ResourceExec { .. } => "I.3",
            Case::ServiceNoWrite => "II.1",
            Case::ServiceWrite => "II.2",
            Case::ServiceExec { .. } => "II.3",
        }
    }

    /// I.1 and II.1: cases a test may use without infecting anything.
    pub fn is_harmless(self) -> bool {
        matches!(self, Case::ReadOnly | Case::ServiceNoWrite)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())?;
        match self {
            Case::ResourceExec { resolved: false } | Case::ServiceExec { resolved: false } => f.write_str(" (unresolved)"),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub channel: Name,
    pub case: Case,
    /// Some path from this channel changes state, possibly through calls.
    pub writes: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsolationReport {
    pub entries: Vec<Classification>,
    pub isolation_holds: bool,
}

impl IsolationReport {
    pub fn case_of(&self, c: &Name) -> Option<Case> {
        self.entries.iter().find(|e| e.channel.base == c.base).map(|e| e.case)
    }
}

impl fmt::Display for IsolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{:<12} {}", e.channel, e.case)?;
        }
        write!(f, "isolation: {}", if self.isolation_holds { "holds" } else { "fails" })
    }
}

fn is_cont(n: &Name) -> bool {
    n.base.starts_with('%')
}

struct Rule {
    pattern: JoinPattern,
    body: Process,
}

fn collect(p: &Process, rules: &mut Vec<Rule>, top: &mut Vec<(Name, Vec<Atom>)>, in_rule: bool) {
    match p {
        Process::LocalDef(d, body) => {
            collect_def(d, rules, top);
            collect(body, rules, top, in_rule);
        }
        Process::Parallel(a, b) | Process::Conditional(_, _, a, b) => {
            collect(a, rules, top, in_rule);
            collect(b, rules, top, in_rule);
        }
        Process::Message(Atom::Name(c), args) if !in_rule => {
            let args = args.iter().filter_map(|e| if let Expression::Atom(a) = e { Some(a.clone()) } else { None }).collect();
            top.push((c.clone(), args));
        }
        _ => {}
    }
}

fn collect_def(d: &Definition, rules: &mut Vec<Rule>, top: &mut Vec<(Name, Vec<Atom>)>) {
    for (j, body) in d.rules() {
        rules.push(Rule { pattern: j.clone(), body: body.clone() });
        collect(body, rules, top, true);
    }
}

/// What one rule body does, before following calls.
#[derive(Default)]
struct Effect {
    writes: bool,
    /// Sends on a name received from the caller.
    exec_unresolved: bool,
    /// State channels whose stored value the rule sends on.
    exec_state: BTreeSet<Name>,
    calls: BTreeSet<Name>,
}

fn sends(p: &Process, out: &mut Vec<(Name, Vec<Atom>)>, defs: &mut Vec<BTreeSet<Name>>) {
    match p {
        Process::Message(Atom::Name(c), args) => {
            let args = args.iter().filter_map(|e| if let Expression::Atom(a) = e { Some(a.clone()) } else { None }).collect();
            out.push((c.clone(), args));
        }
        Process::LocalDef(d, body) => {
            defs.push(dv_of(d));
            for (_, b) in d.rules() {
                sends(b, out, defs);
            }
            sends(body, out, defs);
        }
        Process::Parallel(a, b) | Process::Conditional(_, _, a, b) => {
            sends(a, out, defs);
            sends(b, out, defs);
        }
        _ => {}
    }
}

/// Classify every published channel of `ctx` by what its rules can do.
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::policy::{classify_context, Case};
/// use joinvir::syntax::{Atom, Name};
/// let r = classify_context(&refined_context(1, &[Atom::name("f1")]).unwrap());
/// assert_eq!(r.case_of(&Name::new("sr1")), Some(Case::ReadOnly));
/// assert_eq!(r.case_of(&Name::new("sw1")), Some(Case::ResourceWrite));
/// assert!(!r.isolation_holds);
/// ```
pub fn classify_context(ctx: &Context) -> IsolationReport {
    let template = desugar(&ctx.template).unwrap_or_else(|_| ctx.template.clone());
    let mut rules = Vec::new();
    let mut top = Vec::new();
    collect(&template, &mut rules, &mut top, false);

    let published = |c: &Name| ctx.is_service(c) || ctx.is_resource(c);
    let is_state_part = |c: &Name, bs: &[Name]| !published(c) && !bs.last().is_some_and(is_cont);
    let state_channels: BTreeSet<Name> = rules
        .iter()
        .flat_map(|r| r.pattern.parts())
        .filter(|(c, bs, _)| is_state_part(c, bs))
        .map(|(c, _, _)| c.clone())
        .collect();
    let defined: BTreeSet<Name> = rules.iter().flat_map(|r| r.pattern.channels()).cloned().collect();

    let effects: Vec<Effect> = rules
        .iter()
        .map(|r| {
            let mut e = Effect::default();
            let mut out = Vec::new();
            let mut defs = Vec::new();
            sends(&r.body, &mut out, &mut defs);
            e.writes = defs.iter().any(|d| d.iter().any(|c| !is_cont(c)));
            let parts = r.pattern.parts();
            let mut state_binder: BTreeMap<&Name, &Name> = BTreeMap::new();
            let mut arg_binders: BTreeSet<&Name> = BTreeSet::new();
            for (c, bs, _) in &parts {
                if is_state_part(c, bs) {
                    let unchanged = out.iter().any(|(oc, args)| {
                        oc == *c && args.len() == bs.len() && args.iter().zip(bs.iter()).all(|(a, b)| a.as_name() == Some(b))
                    });
                    e.writes |= !unchanged;
                    for b in bs.iter() {
                        state_binder.insert(b, c);
                    }
                } else {
                    arg_binders.extend(bs.iter().filter(|b| !is_cont(b)));
                }
            }
            // Binders of continuation rules hold values returned to us.
            let nested: BTreeSet<Name> = nested_binders(&r.body);
            for (c, _) in &out {
                if let Some(s) = state_binder.get(c) {
                    e.exec_state.insert((*s).clone());
                } else if arg_binders.contains(c) || nested.contains(c) {
                    e.exec_unresolved = true;
                } else if state_channels.contains(c) {
                    // Writing a cell directly.
                    if !parts.iter().any(|(pc, _, _)| *pc == c) {
                        e.writes = true;
                    }
                } else if defined.contains(c) && !is_cont(c) {
                    e.calls.insert(c.clone());
                }
            }
            e
        })
        .collect();

    // Cells nobody writes keep their initial values.
    let written: BTreeSet<Name> = rules
        .iter()
        .zip(&effects)
        .filter(|(_, e)| e.writes)
        .flat_map(|(r, _)| r.pattern.parts().into_iter().filter(|(c, bs, _)| is_state_part(c, bs)).map(|(c, _, _)| c.clone()))
        .collect();

    // Least fixpoint of (writes, execs, unresolved) over the call graph.
    let n = rules.len();
    let mut w: Vec<bool> = effects.iter().map(|e| e.writes).collect();
    let mut x: Vec<bool> = effects.iter().map(|e| e.exec_unresolved || !e.exec_state.is_empty()).collect();
    let mut u: Vec<bool> = effects
        .iter()
        .map(|e| e.exec_unresolved || e.exec_state.iter().any(|s| written.contains(s)))
        .collect();
    let mut callees: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, e) in effects.iter().enumerate() {
        let mut targets: BTreeSet<Name> = e.calls.clone();
        for s in &e.exec_state {
            for (_, args) in top.iter().filter(|(c, _)| c == s) {
                for a in args {
                    if let Some(v) = a.as_name().filter(|v| defined.contains(*v)) {
                        targets.insert(v.clone());
                    }
                }
            }
        }
        for (j, r) in rules.iter().enumerate() {
            if r.pattern.channels().iter().any(|c| targets.contains(*c)) {
                callees[i].insert(j);
            }
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for &j in &callees[i] {
                for v in [&mut w, &mut x, &mut u] {
                    if v[j] && !v[i] {
                        v[i] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut entries = Vec::new();
    let mut channels: Vec<(Name, bool)> = ctx.resources.iter().chain(&ctx.dynamic).map(|c| (c.clone(), true)).collect();
    channels.extend(ctx.services.iter().map(|c| (c.clone(), false)));
    for (c, resource) in channels {
        let idx: Vec<usize> =
            (0..n).filter(|&i| rules[i].pattern.channels().iter().any(|rc| rc.base == c.base)).collect();
        let writes = idx.iter().any(|&i| w[i]);
        let execs = idx.iter().any(|&i| x[i]);
        let resolved = !idx.iter().any(|&i| u[i]);
        let case = match (resource, execs, writes) {
            (true, true, _) => Case::ResourceExec { resolved },
            (true, false, true) => Case::ResourceWrite,
            (true, false, false) => Case::ReadOnly,
            (false, true, _) => Case::ServiceExec { resolved },
            (false, false, true) => Case::ServiceWrite,
            (false, false, false) => Case::ServiceNoWrite,
        };
        entries.push(Classification { channel: c, case, writes });
    }
    let isolation_holds = entries.iter().all(|e| {
        !e.writes && !matches!(e.case, Case::ResourceExec { resolved: false } | Case::ServiceExec { resolved: false })
    });
    IsolationReport { entries, isolation_holds }
}

/// Binders of continuation rules nested in a body.
fn nested_binders(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fn go(p: &Process, out: &mut BTreeSet<Name>) {
        match p {
            Process::LocalDef(d, body) => {
                for (j, b) in d.rules() {
                    out.extend(j.binders().into_iter().filter(|b| !is_cont(b)).cloned());
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
    go(p, &mut out);
    out
}
