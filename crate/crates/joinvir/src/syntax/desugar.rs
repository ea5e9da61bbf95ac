use super::ast::*;
use super::names::max_fresh;
use super::subst::{refresh_def_expr, substitute_expr, Mapping};

/// Base of the reply channels introduced by the translation. It cannot be
/// written in source text.
pub const REPLY_BASE: &str = "%k";
/// Base of the value binders introduced for nested calls.
pub const RESULT_BASE: &str = "%r";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DesugarError {
    #[error("`return ... to {0}` outside a rule whose pattern calls `{0}`")]
    ReturnWithoutCaller(Name),
    #[error("expression yields one value, {0} expected")]
    ValueCount(usize),
}

/// Compile synchronous calls, `let`, `return` and sequencing into plain
/// messages by continuation passing.
///
/// ```
/// use joinvir::syntax::{parse, desugar};
/// let core = desugar(&parse("let r = f(a) in out<r>").unwrap()).unwrap();
/// assert_eq!(core.to_string(), "def %k#0<r> |> out<r> in f<a, %k#0>");
/// ```
pub fn desugar(p: &Process) -> Result<Process, DesugarError> {
    let mut counter = max_fresh(p).map_or(0, |m| m + 1);
    desugar_with(p, &mut counter)
}

/// As [`desugar`], drawing fresh indices from a shared counter.
pub fn desugar_with(p: &Process, counter: &mut u64) -> Result<Process, DesugarError> {
    Desugar { counter, env: Vec::new() }.process(p)
}

enum Step {
    Call { ch: Atom, args: Vec<Expression>, binders: Vec<Name> },
    Def(Definition),
    Bind { binders: Vec<Name>, values: Vec<Expression> },
}

struct Desugar<'c> {
    counter: &'c mut u64,
    env: Vec<(Name, Name)>,
}

impl<'c> Desugar<'c> {
    fn fresh(&mut self, base: &str) -> Name {
        let i = *self.counter;
        *self.counter += 1;
        Name::fresh(base, i)
    }

    fn wrap(&mut self, steps: Vec<Step>, body: Process) -> Process {
        let mut p = body;
        for step in steps.into_iter().rev() {
            p = match step {
                Step::Def(d) => Process::def(d, p),
                Step::Call { ch, mut args, binders } => {
                    let k = self.fresh(REPLY_BASE);
                    args.push(Expression::Atom(Atom::Name(k.clone())));
                    Process::def(Definition::Rule(JoinPattern::MessagePattern(k, binders), p), Process::Message(ch, args))
                }
                Step::Bind { binders, values } => {
                    let k = self.fresh(REPLY_BASE);
                    Process::def(
                        Definition::Rule(JoinPattern::MessagePattern(k.clone(), binders), p),
                        Process::Message(Atom::Name(k), values),
                    )
                }
            };
        }
        p
    }

    fn process(&mut self, p: &Process) -> Result<Process, DesugarError> {
        Ok(match p {
            Process::Null | Process::Hole => p.clone(),
            Process::Message(ch, args) => {
                let mut steps = Vec::new();
                let vals = self.args(args, &mut steps)?;
                self.wrap(steps, Process::Message(ch.clone(), vals))
            }
            Process::LocalDef(d, body) => {
                let d2 = self.def(d)?;
                Process::def(d2, self.process(body)?)
            }
            Process::Parallel(a, b) => Process::Parallel(Box::new(self.process(a)?), Box::new(self.process(b)?)),
            Process::Sequence(e, rest) => {
                let mut steps = Vec::new();
                self.anf(e, 0, &mut steps)?;
                let rest = self.process(rest)?;
                self.wrap(steps, rest)
            }
            Process::Let(xs, e, body) => {
                let mut steps = Vec::new();
                if let Expression::SyncCall(ch, args) = e {
                    let args = self.args(args, &mut steps)?;
                    steps.push(Step::Call { ch: ch.clone(), args, binders: xs.clone() });
                } else {
                    let values = self.anf(e, xs.len(), &mut steps)?;
                    steps.push(Step::Bind { binders: xs.clone(), values });
                }
                let body = self.process(body)?;
                self.wrap(steps, body)
            }
            Process::Return(vals, to) => {
                let k = match self.env.iter().rev().find(|(x, _)| x == to) {
                    Some((_, k)) => k.clone(),
                    None => return Err(DesugarError::ReturnWithoutCaller(to.clone())),
                };
                let mut steps = Vec::new();
                // A returned call forwards our continuation instead of waiting.
                if let [Expression::SyncCall(ch, args)] = vals.as_slice() {
                    let mut args = self.args(args, &mut steps)?;
                    args.push(Expression::Atom(Atom::Name(k)));
                    return Ok(self.wrap(steps, Process::Message(ch.clone(), args)));
                }
                let vals = self.args(vals, &mut steps)?;
                self.wrap(steps, Process::Message(Atom::Name(k), vals))
            }
            Process::Conditional(a, b, x, y) => {
                Process::Conditional(a.clone(), b.clone(), Box::new(self.process(x)?), Box::new(self.process(y)?))
            }
        })
    }

    fn def(&mut self, d: &Definition) -> Result<Definition, DesugarError> {
        Ok(match d {
            Definition::Top => Definition::Top,
            Definition::Conjunction(a, b) => Definition::Conjunction(Box::new(self.def(a)?), Box::new(self.def(b)?)),
            Definition::Rule(j, body) => {
                let mark = self.env.len();
                let j2 = self.pattern(j);
                let body = self.process(body);
                self.env.truncate(mark);
                Definition::Rule(j2, body?)
            }
        })
    }

    fn pattern(&mut self, j: &JoinPattern) -> JoinPattern {
        match j {
            JoinPattern::MessagePattern(..) => j.clone(),
            JoinPattern::CallPattern(c, bs) => {
                let k = self.fresh(REPLY_BASE);
                self.env.push((c.clone(), k.clone()));
                let mut bs = bs.clone();
                bs.push(k);
                JoinPattern::MessagePattern(c.clone(), bs)
            }
            JoinPattern::Join(a, b) => {
                let a = self.pattern(a);
                let b = self.pattern(b);
                JoinPattern::Join(Box::new(a), Box::new(b))
            }
        }
    }

    fn args(&mut self, args: &[Expression], steps: &mut Vec<Step>) -> Result<Vec<Expression>, DesugarError> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            out.extend(self.anf(a, 1, steps)?);
        }
        Ok(out)
    }

    /// Flatten `e` into steps; returns `m` simple expressions holding its values.
    fn anf(&mut self, e: &Expression, m: usize, steps: &mut Vec<Step>) -> Result<Vec<Expression>, DesugarError> {
        match e {
            Expression::Atom(_) => simple(e.clone(), m),
            Expression::Prim(p, args) => {
                let args = self.args(args, steps)?;
                simple(Expression::Prim(*p, args), m)
            }
            Expression::SyncCall(ch, args) => {
                let args = self.args(args, steps)?;
                let binders: Vec<Name> = (0..m).map(|_| self.fresh(RESULT_BASE)).collect();
                let out = binders.iter().map(|b| Expression::Atom(Atom::Name(b.clone()))).collect();
                steps.push(Step::Call { ch: ch.clone(), args, binders });
                Ok(out)
            }
            Expression::LocalDef(d, body) => {
                // The definition's scope must not reach the continuation.
                let (d, body) = refresh_def_expr(d, body, self.counter);
                let d2 = self.def(&d)?;
                steps.push(Step::Def(d2));
                self.anf(&body, m, steps)
            }
            Expression::Sequence(a, b) => {
                self.anf(a, 0, steps)?;
                self.anf(b, m, steps)
            }
            Expression::Let(xs, a, body) => {
                let mut map = Mapping::new();
                let mut fresh_xs = Vec::new();
                for x in xs {
                    let nx = self.fresh(&x.base);
                    map.insert(x.clone(), Atom::Name(nx.clone()));
                    fresh_xs.push(nx);
                }
                if let Expression::SyncCall(ch, args) = &**a {
                    let args = self.args(args, steps)?;
                    steps.push(Step::Call { ch: ch.clone(), args, binders: fresh_xs });
                } else {
                    let values = self.anf(a, xs.len(), steps)?;
                    steps.push(Step::Bind { binders: fresh_xs, values });
                }
                let body = substitute_expr(body, &map, self.counter);
                self.anf(&body, m, steps)
            }
        }
    }
}

fn simple(e: Expression, m: usize) -> Result<Vec<Expression>, DesugarError> {
    match m {
        0 => Ok(Vec::new()),
        1 => Ok(vec![e]),
        n => Err(DesugarError::ValueCount(n)),
    }
}
