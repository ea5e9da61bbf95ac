use std::fmt;

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    NestedDefinition,
    SynchronousCall,
    LetBinding,
    Return,
    FreshRequiringDesugar,
    /// `pair`/`fst`/`snd` build atoms that were not in the program text.
    ValueConstructor,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::NestedDefinition => "nested-definition",
            ViolationKind::SynchronousCall => "synchronous-call",
            ViolationKind::LetBinding => "let-binding",
            ViolationKind::Return => "return",
            ViolationKind::FreshRequiringDesugar => "fresh-requiring-desugar",
            ViolationKind::ValueConstructor => "value-constructor",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Path from the root, e.g. `def/rule[1]/body/par.0`.
    pub location: String,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentReport {
    pub in_fragment: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for FragmentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.in_fragment {
            return f.write_str("in fragment");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} at {}", v.kind, v.location)?;
        }
        Ok(())
    }
}

/// Decide membership in the fragment without name generation: no definition
/// inside a rule body and nothing that needs fresh reply channels.
///
/// ```
/// use joinvir::syntax::{parse, check_core_fragment};
/// assert!(check_core_fragment(&parse("def x<u> |> out<u> in x<a>").unwrap()).in_fragment);
/// assert!(!check_core_fragment(&parse("def x<u> |> (def y<v> |> 0 in y<u>) in x<a>").unwrap()).in_fragment);
/// ```
pub fn check_core_fragment(p: &Process) -> FragmentReport {
    let mut c = Checker { out: Vec::new() };
    c.process(p, "root", false);
    FragmentReport { in_fragment: c.out.is_empty(), violations: c.out }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn flag(&mut self, loc: &str, kind: ViolationKind) {
        self.out.push(Violation { location: loc.to_string(), kind });
    }

    fn process(&mut self, p: &Process, loc: &str, in_rule: bool) {
        match p {
            Process::Null | Process::Hole => {}
            Process::Message(_, args) => {
                for (i, e) in args.iter().enumerate() {
                    self.expr(e, &format!("{loc}/arg{i}"));
                }
            }
            Process::LocalDef(d, body) => {
                if in_rule {
                    self.flag(loc, ViolationKind::NestedDefinition);
                }
                self.def(d, &format!("{loc}/def"));
                self.process(body, &format!("{loc}/in"), in_rule);
            }
            Process::Parallel(a, b) => {
                self.process(a, &format!("{loc}/par.0"), in_rule);
                self.process(b, &format!("{loc}/par.1"), in_rule);
            }
            Process::Sequence(e, rest) => {
                self.flag(loc, ViolationKind::FreshRequiringDesugar);
                self.expr(e, &format!("{loc}/seq"));
                self.process(rest, &format!("{loc}/then"), in_rule);
            }
            Process::Let(_, e, body) => {
                self.flag(loc, ViolationKind::LetBinding);
                self.expr(e, &format!("{loc}/let"));
                self.process(body, &format!("{loc}/in"), in_rule);
            }
            Process::Return(vals, _) => {
                self.flag(loc, ViolationKind::Return);
                for (i, e) in vals.iter().enumerate() {
                    self.expr(e, &format!("{loc}/ret{i}"));
                }
            }
            Process::Conditional(_, _, a, b) => {
                self.process(a, &format!("{loc}/then"), in_rule);
                self.process(b, &format!("{loc}/else"), in_rule);
            }
        }
    }

    fn def(&mut self, d: &Definition, loc: &str) {
        for (i, (j, body)) in d.rules().into_iter().enumerate() {
            let rl = format!("{loc}/rule[{i}]");
            if j.parts().iter().any(|(_, _, call)| *call) {
                self.flag(&rl, ViolationKind::FreshRequiringDesugar);
            }
            self.process(body, &format!("{rl}/body"), true);
        }
    }

    fn expr(&mut self, e: &Expression, loc: &str) {
        match e {
            Expression::Atom(_) => {}
            Expression::SyncCall(_, args) => {
                self.flag(loc, ViolationKind::SynchronousCall);
                for (i, a) in args.iter().enumerate() {
                    self.expr(a, &format!("{loc}/arg{i}"));
                }
            }
            Expression::Prim(_, args) => {
                self.flag(loc, ViolationKind::ValueConstructor);
                for (i, a) in args.iter().enumerate() {
                    self.expr(a, &format!("{loc}/arg{i}"));
                }
            }
            Expression::LocalDef(d, body) => {
                self.flag(loc, ViolationKind::NestedDefinition);
                self.def(d, &format!("{loc}/def"));
                self.expr(body, &format!("{loc}/in"));
            }
            Expression::Sequence(a, b) => {
                self.flag(loc, ViolationKind::FreshRequiringDesugar);
                self.expr(a, &format!("{loc}/seq.0"));
                self.expr(b, &format!("{loc}/seq.1"));
            }
            Expression::Let(_, a, b) => {
                self.flag(loc, ViolationKind::LetBinding);
                self.expr(a, &format!("{loc}/let"));
                self.expr(b, &format!("{loc}/in"));
            }
        }
    }
}
