use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use super::{ActiveRule, EngineError, Message, Origin, Soup};
use crate::syntax::names::{free_names, max_fresh};
use crate::syntax::subst::{refresh_def, substitute_with, Mapping};
use crate::syntax::{desugar_with, name_sets, Atom, Definition, Expression, Literal, Name, Prim, Process};

/// Reserved channel standing for the hole of a plugged template. Its
/// arguments carry the runtime names of everything the filler may refer to.
pub const HOLE_CHANNEL: &str = "%hole";

/// Desugar and heat a closed program. Every rule gets [`Origin::Process`].
///
/// ```
/// use joinvir::engine::inject;
/// use joinvir::syntax::parse;
/// let s = inject(&parse("def x<u> |> y<u> in x<a> | x<b>").unwrap()).unwrap();
/// assert_eq!(s.rules.len(), 1);
/// assert_eq!(s.messages.len(), 2);
/// assert!(s.messages[0].channel.is_fresh());
/// ```
pub fn inject(p: &Process) -> Result<Soup, EngineError> {
    let mut counter = max_fresh(p).map_or(0, |m| m + 1);
    let core = desugar_with(p, &mut counter)?;
    let mut soup = Soup { fresh_counter: counter, ..Soup::default() };
    soup.heat(vec![(core, Origin::Process, false)])?;
    Ok(soup)
}

/// Heat `template` with its hole filled by `filler`. Template rules are
/// [`Origin::Context`], the filler's are [`Origin::Process`]. When the filler
/// is a local definition, the channels of its first rule become the soup's
/// self names.
pub fn inject_plugged(template: &Process, filler: &Process) -> Result<Soup, EngineError> {
    let mut visible: BTreeSet<Name> = name_sets(template).dv;
    visible.extend(free_names(filler));
    inject_scoped(template, filler, &visible)
}

/// As [`inject_plugged`], but only the names in `visible` reach the filler.
/// Any other name the filler mentions stays free, so channels a template
/// keeps private cannot be named from inside the hole.
pub fn inject_scoped(template: &Process, filler: &Process, visible: &BTreeSet<Name>) -> Result<Soup, EngineError> {
    let mut counter = max_fresh(template).max(max_fresh(filler)).map_or(0, |m| m + 1);
    let t = desugar_with(template, &mut counter)?;
    let f = desugar_with(filler, &mut counter)?;
    let visible: Vec<Name> = visible.iter().filter(|n| !n.base.starts_with('%')).cloned().collect();
    let sentinel = Process::Message(
        Atom::Name(Name::new(HOLE_CHANNEL)),
        visible.iter().map(|n| Expression::Atom(Atom::Name(n.clone()))).collect(),
    );
    let plugged = t.plug(&sentinel);
    let mut soup = Soup { fresh_counter: counter, ..Soup::default() };
    soup.filler = Some(Arc::new((f, visible)));
    soup.heat(vec![(plugged, Origin::Context, false)])?;
    Ok(soup)
}

/// Fold a soup back into one process: all rules under a single definition,
/// messages in parallel. Origins and self names are not kept.
pub fn cool(s: &Soup) -> Process {
    let msgs = Process::par_all(s.messages.iter().map(Message::to_process));
    if s.rules.is_empty() {
        return msgs;
    }
    let d = Definition::and_all(s.rules.iter().map(|r| Definition::Rule(r.pattern.clone(), r.body.clone())));
    Process::def(d, msgs)
}

fn eval(e: &Expression) -> Result<Atom, EngineError> {
    match e {
        Expression::Atom(a) => Ok(a.clone()),
        Expression::Prim(p, args) => {
            let vals = args.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
            match (p, vals.as_slice()) {
                (Prim::Pair, [a, b]) => Ok(Atom::pair(a.clone(), b.clone())),
                (Prim::Fst, [Atom::Lit(Literal::Pair(a, _))]) => Ok((**a).clone()),
                (Prim::Snd, [Atom::Lit(Literal::Pair(_, b))]) => Ok((**b).clone()),
                (p, vals) => Err(EngineError::Primitive(format!(
                    "{} applied to {}",
                    p.keyword(),
                    vals.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
                ))),
            }
        }
        other => Err(EngineError::NotCore(other.to_string())),
    }
}

impl Soup {
    fn check_arity(&mut self, c: &Name, n: usize) -> Result<(), EngineError> {
        match self.arities.get(c) {
            Some(&k) if k != n => Err(EngineError::Arity { channel: c.clone(), expected: k, found: n }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(c.clone(), n);
                Ok(())
            }
        }
    }

    fn bump_counter(&mut self, p: &Process) {
        if let Some(m) = max_fresh(p) {
            self.fresh_counter = self.fresh_counter.max(m + 1);
        }
    }

    /// Desugar `p`, resolve the source names it shares with the hole and add
    /// it to the soup.
    pub fn plug_more(&mut self, p: &Process, origin: Origin) -> Result<(), EngineError> {
        self.bump_counter(p);
        let core = desugar_with(p, &mut self.fresh_counter)?;
        let core = substitute_with(&core, &self.hole_env, &mut self.fresh_counter);
        self.heat(vec![(core, origin, false)])
    }

    /// Heat to fixpoint. The bool marks the filler root, whose first rule
    /// names the self set.
    pub(super) fn heat(&mut self, init: Vec<(Process, Origin, bool)>) -> Result<(), EngineError> {
        let mut work: VecDeque<(Process, Origin, bool)> = init.into();
        while let Some((p, origin, capture)) = work.pop_front() {
            match p {
                Process::Null => {}
                Process::Hole => return Err(EngineError::UnpluggedHole),
                Process::Parallel(a, b) => {
                    work.push_back((*a, origin, capture));
                    work.push_back((*b, origin, capture));
                }
                Process::Message(ch, args) => {
                    let ch = match ch {
                        Atom::Name(n) => n,
                        lit => return Err(EngineError::LiteralChannel(lit)),
                    };
                    let args = args.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
                    if &*ch.base == HOLE_CHANNEL && ch.fresh.is_none() {
                        work.push_back(self.open_hole(args)?);
                        continue;
                    }
                    self.check_arity(&ch, args.len())?;
                    self.messages.push(Message { channel: ch, args });
                }
                Process::LocalDef(d, body) => {
                    let (d, body, _) = refresh_def(&d, &body, &mut self.fresh_counter);
                    for (i, (j, b)) in d.rules().into_iter().enumerate() {
                        for (c, bs, _) in j.parts() {
                            self.check_arity(c, bs.len())?;
                        }
                        if capture && i == 0 {
                            self.self_names.extend(j.channels().into_iter().cloned());
                        }
                        self.rules.push(Arc::new(ActiveRule::new(j.clone(), b.clone(), origin)));
                    }
                    work.push_back((body, origin, false));
                }
                Process::Conditional(a, b, then, els) => {
                    let branch = if a == b { then } else { els };
                    work.push_back((*branch, origin, capture));
                }
                Process::Sequence(..) | Process::Let(..) | Process::Return(..) => {
                    return Err(EngineError::NotCore(p.to_string()))
                }
            }
        }
        Ok(())
    }

    fn open_hole(&mut self, args: Vec<Atom>) -> Result<(Process, Origin, bool), EngineError> {
        let filler = match &self.filler {
            Some(f) => f.clone(),
            None => return Err(EngineError::UnpluggedHole),
        };
        let (f, visible) = &*filler;
        let env: Mapping = visible.iter().cloned().zip(args).collect();
        let body = substitute_with(f, &env, &mut self.fresh_counter);
        self.hole_env = env;
        Ok((body, Origin::Process, true))
    }
}
