use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::names::{dv_of, free_names, free_names_expr, max_fresh};

pub type Mapping = HashMap<Name, Atom>;

/// Replace the free occurrences of the mapping's keys. Binders that would
/// capture a name of some value are renamed first, using fresh indices above
/// everything already present.
///
/// ```
/// use std::collections::HashMap;
/// use joinvir::syntax::{parse, substitute, Atom, Name};
/// let p = parse("out<z>").unwrap();
/// let m = HashMap::from([(Name::new("z"), Atom::int(7))]);
/// assert_eq!(substitute(&p, &m).to_string(), "out<7>");
/// ```
pub fn substitute(p: &Process, map: &Mapping) -> Process {
    let mut counter = max_fresh(p).map_or(0, |m| m + 1);
    for a in map.values() {
        counter = counter.max(atom_max_fresh(a).map_or(0, |m| m + 1));
    }
    substitute_with(p, map, &mut counter)
}

/// As [`substitute`], drawing fresh indices from `counter`.
pub fn substitute_with(p: &Process, map: &Mapping, counter: &mut u64) -> Process {
    if map.is_empty() {
        return p.clone();
    }
    Subst { counter }.process(p, map)
}

/// Substitution inside an expression.
pub fn substitute_expr(e: &Expression, map: &Mapping, counter: &mut u64) -> Expression {
    if map.is_empty() {
        return e.clone();
    }
    Subst { counter }.expr(e, map)
}

fn atom_max_fresh(a: &Atom) -> Option<u64> {
    match a {
        Atom::Name(n) => n.fresh,
        Atom::Lit(Literal::Pair(x, y)) => match (atom_max_fresh(x), atom_max_fresh(y)) {
            (Some(i), Some(j)) => Some(i.max(j)),
            (i, j) => i.or(j),
        },
        Atom::Lit(_) => None,
    }
}

pub fn subst_atom(a: &Atom, map: &Mapping) -> Atom {
    match a {
        Atom::Name(n) => map.get(n).cloned().unwrap_or_else(|| a.clone()),
        Atom::Lit(Literal::Pair(x, y)) => Atom::pair(subst_atom(x, map), subst_atom(y, map)),
        Atom::Lit(_) => a.clone(),
    }
}

struct Subst<'c> {
    counter: &'c mut u64,
}

impl<'c> Subst<'c> {
    fn fresh(&mut self, n: &Name) -> Name {
        let i = *self.counter;
        *self.counter += 1;
        n.refresh(i)
    }

    /// Restrict the mapping to keys free in the scope, then decide which
    /// binders must be renamed. Returns None when nothing needs to change.
    fn enter(&mut self, map: &Mapping, binders: &[&Name], free: &BTreeSet<Name>) -> Option<(Mapping, HashMap<Name, Name>)> {
        let mut inner: Mapping =
            map.iter().filter(|(k, _)| free.contains(*k) && !binders.contains(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
        if inner.is_empty() {
            return None;
        }
        let mut value_names = BTreeSet::new();
        for v in inner.values() {
            collect(v, &mut value_names);
        }
        let mut renames = HashMap::new();
        for b in binders {
            if value_names.contains(*b) && !renames.contains_key(*b) {
                let nb = self.fresh(b);
                renames.insert((*b).clone(), nb.clone());
                inner.insert((*b).clone(), Atom::Name(nb));
            }
        }
        Some((inner, renames))
    }

    fn process(&mut self, p: &Process, map: &Mapping) -> Process {
        match p {
            Process::Null | Process::Hole => p.clone(),
            Process::Message(ch, args) => {
                Process::Message(subst_atom(ch, map), args.iter().map(|e| self.expr(e, map)).collect())
            }
            Process::Parallel(a, b) => Process::Parallel(Box::new(self.process(a, map)), Box::new(self.process(b, map))),
            Process::Sequence(e, rest) => Process::Sequence(self.expr(e, map), Box::new(self.process(rest, map))),
            Process::Return(vals, to) => {
                let to = match map.get(to) {
                    Some(Atom::Name(n)) => n.clone(),
                    _ => to.clone(),
                };
                Process::Return(vals.iter().map(|e| self.expr(e, map)).collect(), to)
            }
            Process::Conditional(a, b, x, y) => Process::Conditional(
                subst_atom(a, map),
                subst_atom(b, map),
                Box::new(self.process(x, map)),
                Box::new(self.process(y, map)),
            ),
            Process::Let(xs, e, body) => {
                let e2 = self.expr(e, map);
                let binders: Vec<&Name> = xs.iter().collect();
                match self.enter(map, &binders, &free_names(body)) {
                    None => Process::Let(xs.clone(), e2, body.clone()),
                    Some((inner, renames)) => {
                        let xs2 = xs.iter().map(|x| renames.get(x).cloned().unwrap_or_else(|| x.clone())).collect();
                        Process::Let(xs2, e2, Box::new(self.process(body, &inner)))
                    }
                }
            }
            Process::LocalDef(d, body) => {
                let dv = dv_of(d);
                let mut free = free_names(body);
                for (j, b) in d.rules() {
                    let mut fb = free_names(b);
                    for x in j.binders() {
                        fb.remove(x);
                    }
                    free.extend(fb);
                }
                let binders: Vec<&Name> = dv.iter().collect();
                match self.enter(map, &binders, &free) {
                    None => p.clone(),
                    Some((inner, renames)) => {
                        let d2 = self.def(d, &inner, &renames);
                        Process::LocalDef(Box::new(d2), Box::new(self.process(body, &inner)))
                    }
                }
            }
        }
    }

    fn def(&mut self, d: &Definition, map: &Mapping, chan_renames: &HashMap<Name, Name>) -> Definition {
        match d {
            Definition::Top => Definition::Top,
            Definition::Conjunction(a, b) => {
                Definition::Conjunction(Box::new(self.def(a, map, chan_renames)), Box::new(self.def(b, map, chan_renames)))
            }
            Definition::Rule(j, body) => {
                let j2 = rename_channels(j, chan_renames);
                let binders = j.binders();
                match self.enter(map, &binders, &free_names(body)) {
                    None => Definition::Rule(j2, body.clone()),
                    Some((inner, renames)) => {
                        let j3 = rename_binders(&j2, &renames);
                        Definition::Rule(j3, self.process(body, &inner))
                    }
                }
            }
        }
    }

    fn expr(&mut self, e: &Expression, map: &Mapping) -> Expression {
        match e {
            Expression::Atom(a) => Expression::Atom(subst_atom(a, map)),
            Expression::SyncCall(ch, args) => {
                Expression::SyncCall(subst_atom(ch, map), args.iter().map(|a| self.expr(a, map)).collect())
            }
            Expression::Prim(p, args) => Expression::Prim(*p, args.iter().map(|a| self.expr(a, map)).collect()),
            Expression::Sequence(a, b) => Expression::Sequence(Box::new(self.expr(a, map)), Box::new(self.expr(b, map))),
            Expression::Let(xs, a, body) => {
                let a2 = self.expr(a, map);
                let binders: Vec<&Name> = xs.iter().collect();
                match self.enter(map, &binders, &free_names_expr(body)) {
                    None => Expression::Let(xs.clone(), Box::new(a2), body.clone()),
                    Some((inner, renames)) => {
                        let xs2 = xs.iter().map(|x| renames.get(x).cloned().unwrap_or_else(|| x.clone())).collect();
                        Expression::Let(xs2, Box::new(a2), Box::new(self.expr(body, &inner)))
                    }
                }
            }
            Expression::LocalDef(d, body) => {
                let dv = dv_of(d);
                let mut free = free_names_expr(body);
                for (j, b) in d.rules() {
                    let mut fb = free_names(b);
                    for x in j.binders() {
                        fb.remove(x);
                    }
                    free.extend(fb);
                }
                let binders: Vec<&Name> = dv.iter().collect();
                match self.enter(map, &binders, &free) {
                    None => e.clone(),
                    Some((inner, renames)) => {
                        let d2 = self.def(d, &inner, &renames);
                        Expression::LocalDef(Box::new(d2), Box::new(self.expr(body, &inner)))
                    }
                }
            }
        }
    }
}

fn collect(a: &Atom, out: &mut BTreeSet<Name>) {
    match a {
        Atom::Name(n) => {
            out.insert(n.clone());
        }
        Atom::Lit(Literal::Pair(x, y)) => {
            collect(x, out);
            collect(y, out);
        }
        Atom::Lit(_) => {}
    }
}

fn rename_channels(j: &JoinPattern, r: &HashMap<Name, Name>) -> JoinPattern {
    if r.is_empty() {
        return j.clone();
    }
    let get = |n: &Name| r.get(n).cloned().unwrap_or_else(|| n.clone());
    match j {
        JoinPattern::MessagePattern(c, b) => JoinPattern::MessagePattern(get(c), b.clone()),
        JoinPattern::CallPattern(c, b) => JoinPattern::CallPattern(get(c), b.clone()),
        JoinPattern::Join(a, b) => JoinPattern::Join(Box::new(rename_channels(a, r)), Box::new(rename_channels(b, r))),
    }
}

fn rename_binders(j: &JoinPattern, r: &HashMap<Name, Name>) -> JoinPattern {
    if r.is_empty() {
        return j.clone();
    }
    let get = |n: &Name| r.get(n).cloned().unwrap_or_else(|| n.clone());
    match j {
        JoinPattern::MessagePattern(c, b) => JoinPattern::MessagePattern(c.clone(), b.iter().map(get).collect()),
        JoinPattern::CallPattern(c, b) => JoinPattern::CallPattern(c.clone(), b.iter().map(get).collect()),
        JoinPattern::Join(a, b) => JoinPattern::Join(Box::new(rename_binders(a, r)), Box::new(rename_binders(b, r))),
    }
}

/// Rename every channel defined by `d` (and its uses in `d` and `body`) to a
/// fresh name with the same base. Used by the engine's STR-DEF step.
pub fn refresh_def(d: &Definition, body: &Process, counter: &mut u64) -> (Definition, Process, Vec<(Name, Name)>) {
    let dv = dv_of(d);
    let mut map = Mapping::new();
    let mut renames = HashMap::new();
    let mut pairs = Vec::new();
    for c in dv {
        let i = *counter;
        *counter += 1;
        let nc = c.refresh(i);
        map.insert(c.clone(), Atom::Name(nc.clone()));
        renames.insert(c.clone(), nc.clone());
        pairs.push((c, nc));
    }
    let mut s = Subst { counter };
    let d2 = s.def(d, &map, &renames);
    let body2 = s.process(body, &map);
    (d2, body2, pairs)
}

/// [`refresh_def`] for a definition scoping over an expression.
pub fn refresh_def_expr(d: &Definition, body: &Expression, counter: &mut u64) -> (Definition, Expression) {
    let mut map = Mapping::new();
    let mut renames = HashMap::new();
    for c in dv_of(d) {
        let i = *counter;
        *counter += 1;
        let nc = c.refresh(i);
        map.insert(c.clone(), Atom::Name(nc.clone()));
        renames.insert(c, nc);
    }
    let mut s = Subst { counter };
    let d2 = s.def(d, &map, &renames);
    let body2 = s.expr(body, &map);
    (d2, body2)
}
