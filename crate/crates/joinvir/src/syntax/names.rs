use std::collections::BTreeSet;

use super::ast::*;

/// Defined channels, received names and free names of a term.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NameSets {
    pub dv: BTreeSet<Name>,
    pub rv: BTreeSet<Name>,
    pub fv: BTreeSet<Name>,
}

/// Anything [`name_sets`] accepts.
pub enum Term<'a> {
    Process(&'a Process),
    Definition(&'a Definition),
    Pattern(&'a JoinPattern),
}

impl<'a> From<&'a Process> for Term<'a> {
    fn from(p: &'a Process) -> Self {
        Term::Process(p)
    }
}

impl<'a> From<&'a Definition> for Term<'a> {
    fn from(d: &'a Definition) -> Self {
        Term::Definition(d)
    }
}

impl<'a> From<&'a JoinPattern> for Term<'a> {
    fn from(j: &'a JoinPattern) -> Self {
        Term::Pattern(j)
    }
}

/// `dv` and `rv` collect every definition and pattern in the term, at any
/// depth; `fv` holds the names that are neither defined nor bound.
///
/// ```
/// use joinvir::syntax::{parse, name_sets, Name};
/// let p = parse("def x<u>|z<v> |> x<v> in x<a>|z<b>").unwrap();
/// let ns = name_sets(&p);
/// assert_eq!(ns.fv.into_iter().collect::<Vec<_>>(), vec![Name::new("a"), Name::new("b")]);
/// ```
pub fn name_sets<'a, T: Into<Term<'a>>>(term: T) -> NameSets {
    let mut ns = NameSets::default();
    match term.into() {
        Term::Process(p) => {
            collect_process(p, &mut ns);
            ns.fv = free_names(p);
        }
        Term::Definition(d) => {
            collect_def(d, &mut ns);
            let mut fv = def_uses(d);
            for c in dv_of(d) {
                fv.remove(&c);
            }
            ns.fv = fv;
        }
        Term::Pattern(j) => {
            ns.dv = j.channels().into_iter().cloned().collect();
            ns.rv = j.binders().into_iter().cloned().collect();
        }
    }
    ns
}

fn collect_process(p: &Process, ns: &mut NameSets) {
    match p {
        Process::Message(_, args) => args.iter().for_each(|e| collect_expr(e, ns)),
        Process::LocalDef(d, body) => {
            collect_def(d, ns);
            collect_process(body, ns);
        }
        Process::Parallel(a, b) => {
            collect_process(a, ns);
            collect_process(b, ns);
        }
        Process::Sequence(e, rest) => {
            collect_expr(e, ns);
            collect_process(rest, ns);
        }
        Process::Let(_, e, body) => {
            collect_expr(e, ns);
            collect_process(body, ns);
        }
        Process::Return(vals, _) => vals.iter().for_each(|e| collect_expr(e, ns)),
        Process::Conditional(_, _, a, b) => {
            collect_process(a, ns);
            collect_process(b, ns);
        }
        Process::Null | Process::Hole => {}
    }
}

fn collect_def(d: &Definition, ns: &mut NameSets) {
    for (j, body) in d.rules() {
        ns.dv.extend(j.channels().into_iter().cloned());
        ns.rv.extend(j.binders().into_iter().cloned());
        collect_process(body, ns);
    }
}

fn collect_expr(e: &Expression, ns: &mut NameSets) {
    match e {
        Expression::Atom(_) => {}
        Expression::SyncCall(_, args) | Expression::Prim(_, args) => args.iter().for_each(|a| collect_expr(a, ns)),
        Expression::LocalDef(d, body) => {
            collect_def(d, ns);
            collect_expr(body, ns);
        }
        Expression::Sequence(a, b) | Expression::Let(_, a, b) => {
            collect_expr(a, ns);
            collect_expr(b, ns);
        }
    }
}

/// Channels defined at the top of a definition.
pub fn dv_of(d: &Definition) -> BTreeSet<Name> {
    d.rules().into_iter().flat_map(|(j, _)| j.channels().into_iter().cloned()).collect()
}

fn atom_names(a: &Atom, out: &mut BTreeSet<Name>) {
    match a {
        Atom::Name(n) => {
            out.insert(n.clone());
        }
        Atom::Lit(Literal::Pair(x, y)) => {
            atom_names(x, out);
            atom_names(y, out);
        }
        Atom::Lit(_) => {}
    }
}

/// Free names of a process.
pub fn free_names(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    match p {
        Process::Message(ch, args) => {
            atom_names(ch, &mut out);
            for e in args {
                out.extend(free_names_expr(e));
            }
        }
        Process::LocalDef(d, body) => {
            out = def_uses(d);
            out.extend(free_names(body));
            for c in dv_of(d) {
                out.remove(&c);
            }
        }
        Process::Parallel(a, b) => {
            out = free_names(a);
            out.extend(free_names(b));
        }
        Process::Sequence(e, rest) => {
            out = free_names_expr(e);
            out.extend(free_names(rest));
        }
        Process::Let(xs, e, body) => {
            out = free_names(body);
            for x in xs {
                out.remove(x);
            }
            out.extend(free_names_expr(e));
        }
        Process::Return(vals, to) => {
            for e in vals {
                out.extend(free_names_expr(e));
            }
            out.insert(to.clone());
        }
        Process::Conditional(a, b, p, q) => {
            atom_names(a, &mut out);
            atom_names(b, &mut out);
            out.extend(free_names(p));
            out.extend(free_names(q));
        }
        Process::Null | Process::Hole => {}
    }
    out
}

/// Free names of the rule bodies, binders removed but defined channels kept.
fn def_uses(d: &Definition) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    for (j, body) in d.rules() {
        let mut fv = free_names(body);
        for b in j.binders() {
            fv.remove(b);
        }
        out.extend(fv);
    }
    out
}

pub fn free_names_expr(e: &Expression) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    match e {
        Expression::Atom(a) => atom_names(a, &mut out),
        Expression::SyncCall(ch, args) => {
            atom_names(ch, &mut out);
            for a in args {
                out.extend(free_names_expr(a));
            }
        }
        Expression::Prim(_, args) => {
            for a in args {
                out.extend(free_names_expr(a));
            }
        }
        Expression::LocalDef(d, body) => {
            out = def_uses(d);
            out.extend(free_names_expr(body));
            for c in dv_of(d) {
                out.remove(&c);
            }
        }
        Expression::Sequence(a, b) => {
            out = free_names_expr(a);
            out.extend(free_names_expr(b));
        }
        Expression::Let(xs, a, body) => {
            out = free_names_expr(body);
            for x in xs {
                out.remove(x);
            }
            out.extend(free_names_expr(a));
        }
    }
    out
}

/// Every name occurring anywhere in the process, bound or free.
pub fn all_names(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    walk_names(p, &mut |n| {
        out.insert(n.clone());
    });
    out
}

/// Visit every name occurrence, binders included.
pub fn walk_names(p: &Process, f: &mut dyn FnMut(&Name)) {
    fn atom(a: &Atom, f: &mut dyn FnMut(&Name)) {
        match a {
            Atom::Name(n) => f(n),
            Atom::Lit(Literal::Pair(x, y)) => {
                atom(x, f);
                atom(y, f);
            }
            Atom::Lit(_) => {}
        }
    }
    fn def(d: &Definition, f: &mut dyn FnMut(&Name)) {
        for (j, body) in d.rules() {
            for (c, bs, _) in j.parts() {
                f(c);
                bs.iter().for_each(&mut *f);
            }
            walk_names(body, f);
        }
    }
    fn expr(e: &Expression, f: &mut dyn FnMut(&Name)) {
        match e {
            Expression::Atom(a) => atom(a, f),
            Expression::SyncCall(ch, args) => {
                atom(ch, f);
                args.iter().for_each(|a| expr(a, f));
            }
            Expression::Prim(_, args) => args.iter().for_each(|a| expr(a, f)),
            Expression::LocalDef(d, body) => {
                def(d, f);
                expr(body, f);
            }
            Expression::Sequence(a, b) => {
                expr(a, f);
                expr(b, f);
            }
            Expression::Let(xs, a, b) => {
                xs.iter().for_each(&mut *f);
                expr(a, f);
                expr(b, f);
            }
        }
    }
    match p {
        Process::Message(ch, args) => {
            atom(ch, f);
            args.iter().for_each(|e| expr(e, f));
        }
        Process::LocalDef(d, body) => {
            def(d, f);
            walk_names(body, f);
        }
        Process::Parallel(a, b) => {
            walk_names(a, f);
            walk_names(b, f);
        }
        Process::Sequence(e, rest) => {
            expr(e, f);
            walk_names(rest, f);
        }
        Process::Let(xs, e, body) => {
            xs.iter().for_each(&mut *f);
            expr(e, f);
            walk_names(body, f);
        }
        Process::Return(vals, to) => {
            vals.iter().for_each(|e| expr(e, f));
            f(to);
        }
        Process::Conditional(a, b, p, q) => {
            atom(a, f);
            atom(b, f);
            walk_names(p, f);
            walk_names(q, f);
        }
        Process::Null | Process::Hole => {}
    }
}

/// Largest fresh index used anywhere in the process.
pub fn max_fresh(p: &Process) -> Option<u64> {
    let mut m = None;
    walk_names(p, &mut |n| {
        if let Some(i) = n.fresh {
            m = Some(m.map_or(i, |x: u64| x.max(i)));
        }
    });
    m
}
