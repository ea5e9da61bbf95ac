use std::fmt::{self, Write};

use super::ast::*;

/// Custom rendering for names, used by the canonical form.
type NameWriter<'a> = &'a dyn Fn(&Name, &mut String);

struct Out<'a> {
    s: String,
    names: Option<NameWriter<'a>>,
}

impl<'a> Out<'a> {
    fn plain() -> Out<'static> {
        Out { s: String::new(), names: None }
    }

    fn name(&mut self, n: &Name) {
        match self.names {
            Some(f) => f(n, &mut self.s),
            None => {
                let _ = write!(self.s, "{}", n);
            }
        }
    }

    fn push(&mut self, c: char) {
        self.s.push(c);
    }

    fn push_str(&mut self, t: &str) {
        self.s.push_str(t);
    }
}

fn write_str_lit(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut o = Out::plain();
        atom(&mut o, self);
        f.write_str(&o.s)
    }
}

fn atom(out: &mut Out, a: &Atom) {
    match a {
        Atom::Name(n) => out.name(n),
        Atom::Lit(Literal::Int(i)) => {
            let _ = write!(out.s, "{}", i);
        }
        Atom::Lit(Literal::Str(s)) => write_str_lit(&mut out.s, s),
        Atom::Lit(Literal::Pair(a, b)) => {
            out.push_str("pair(");
            atom(out, a);
            out.push(',');
            atom(out, b);
            out.push(')');
        }
    }
}

fn list<T>(out: &mut Out, items: &[T], sep: &str, f: impl Fn(&mut Out, &T)) {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        f(out, x);
    }
}

fn expr(out: &mut Out, e: &Expression) {
    match e {
        Expression::Atom(a) => atom(out, a),
        Expression::SyncCall(ch, args) => {
            atom(out, ch);
            out.push('(');
            list(out, args, ", ", expr);
            out.push(')');
        }
        Expression::Prim(p, args) => {
            out.push_str(p.keyword());
            out.push('(');
            list(out, args, ", ", expr);
            out.push(')');
        }
        Expression::LocalDef(d, body) => {
            out.push_str("(def ");
            defn(out, d);
            out.push_str(" in ");
            expr(out, body);
            out.push(')');
        }
        Expression::Sequence(a, b) => {
            out.push('(');
            expr(out, a);
            out.push_str("; ");
            expr(out, b);
            out.push(')');
        }
        Expression::Let(xs, a, body) => {
            out.push_str("(let ");
            list(out, xs, ", ", |o, n| o.name(n));
            out.push_str(" = ");
            expr(out, a);
            out.push_str(" in ");
            expr(out, body);
            out.push(')');
        }
    }
}

fn open_ended(p: &Process) -> bool {
    matches!(
        p,
        Process::LocalDef(..) | Process::Let(..) | Process::Conditional(..) | Process::Sequence(..) | Process::Return(..)
    )
}

fn process(out: &mut Out, p: &Process) {
    match p {
        Process::Null => out.push('0'),
        Process::Hole => out.push_str("HOLE"),
        Process::Message(ch, args) => {
            atom(out, ch);
            out.push('<');
            list(out, args, ", ", expr);
            out.push('>');
        }
        Process::LocalDef(d, body) => {
            out.push_str("def ");
            defn(out, d);
            out.push_str(" in ");
            process(out, body);
        }
        Process::Parallel(a, b) => {
            if open_ended(a) {
                out.push('(');
                process(out, a);
                out.push(')');
            } else {
                process(out, a);
            }
            out.push_str(" | ");
            if open_ended(b) || matches!(**b, Process::Parallel(..)) {
                out.push('(');
                process(out, b);
                out.push(')');
            } else {
                process(out, b);
            }
        }
        Process::Sequence(e, rest) => {
            expr(out, e);
            out.push_str("; ");
            process(out, rest);
        }
        Process::Let(xs, e, body) => {
            out.push_str("let ");
            list(out, xs, ", ", |o, n| o.name(n));
            out.push_str(" = ");
            expr(out, e);
            out.push_str(" in ");
            process(out, body);
        }
        Process::Return(vals, to) => {
            out.push_str("return ");
            if !vals.is_empty() {
                list(out, vals, ", ", expr);
                out.push(' ');
            }
            out.push_str("to ");
            out.name(to);
        }
        Process::Conditional(a, b, p, q) => {
            out.push_str("if [");
            atom(out, a);
            out.push_str(" = ");
            atom(out, b);
            out.push_str("] then ");
            // A nested open-ended then-branch would swallow our `else`.
            if matches!(**p, Process::Conditional(..)) {
                process(out, p);
            } else if open_ended(p) {
                out.push('(');
                process(out, p);
                out.push(')');
            } else {
                process(out, p);
            }
            out.push_str(" else ");
            process(out, q);
        }
    }
}

fn pattern(out: &mut Out, j: &JoinPattern) {
    match j {
        JoinPattern::MessagePattern(c, b) => {
            out.name(c);
            out.push('<');
            list(out, b, ", ", |o, n| o.name(n));
            out.push('>');
        }
        JoinPattern::CallPattern(c, b) => {
            out.name(c);
            out.push('(');
            list(out, b, ", ", |o, n| o.name(n));
            out.push(')');
        }
        JoinPattern::Join(a, b) => {
            pattern(out, a);
            out.push_str(" | ");
            pattern(out, b);
        }
    }
}

fn defn(out: &mut Out, d: &Definition) {
    match d {
        Definition::Top => out.push('T'),
        Definition::Rule(j, body) => {
            pattern(out, j);
            out.push_str(" |> ");
            // Rule bodies end at `and` / `in`; a nested def body must not
            // capture the rest of our conjunction, so wrap it.
            if open_ended(body) || matches!(body, Process::Parallel(..)) {
                out.push('(');
                process(out, body);
                out.push(')');
            } else {
                process(out, body);
            }
        }
        Definition::Conjunction(a, b) => {
            defn(out, a);
            out.push_str(" and ");
            defn(out, b);
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut o = Out::plain();
        expr(&mut o, self);
        f.write_str(&o.s)
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut o = Out::plain();
        process(&mut o, self);
        f.write_str(&o.s)
    }
}

impl fmt::Display for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut o = Out::plain();
        defn(&mut o, self);
        f.write_str(&o.s)
    }
}

impl fmt::Display for JoinPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut o = Out::plain();
        pattern(&mut o, self);
        f.write_str(&o.s)
    }
}

/// Multi-line rendering for context files and soup dumps.
pub fn pretty(p: &Process) -> String {
    let mut out = Out::plain();
    pretty_proc(&mut out, p, 0);
    out.s
}

/// Render a process in the concrete grammar, letting the caller choose how
/// each name is spelled.
pub fn render_process(p: &Process, names: &dyn Fn(&Name, &mut String)) -> String {
    let mut out = Out { s: String::new(), names: Some(names) };
    process(&mut out, p);
    out.s
}

/// Same as [`render_process`] for a join pattern.
pub fn render_pattern(j: &JoinPattern, names: &dyn Fn(&Name, &mut String)) -> String {
    let mut out = Out { s: String::new(), names: Some(names) };
    pattern(&mut out, j);
    out.s
}

fn indent(out: &mut Out, n: usize) {
    for _ in 0..n {
        out.push_str("  ");
    }
}

fn pretty_proc(out: &mut Out, p: &Process, depth: usize) {
    match p {
        Process::LocalDef(d, body) => {
            indent(out, depth);
            out.push_str("def ");
            let rules = d.rules();
            if rules.is_empty() {
                out.push('T');
            }
            for (i, (j, b)) in rules.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    indent(out, depth);
                    out.push_str("and ");
                }
                defn(out, &Definition::Rule((*j).clone(), (*b).clone()));
            }
            out.push('\n');
            indent(out, depth);
            out.push_str("in\n");
            pretty_proc(out, body, depth + 1);
        }
        Process::Parallel(..) => {
            let mut items = Vec::new();
            flatten_par(p, &mut items);
            for (i, q) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(" |\n");
                }
                if open_ended(q) && i + 1 < items.len() {
                    indent(out, depth);
                    out.push_str("(\n");
                    pretty_proc(out, q, depth + 1);
                    out.push('\n');
                    indent(out, depth);
                    out.push(')');
                } else {
                    pretty_proc(out, q, depth);
                }
            }
        }
        _ => {
            indent(out, depth);
            process(out, p);
        }
    }
}

fn flatten_par<'a>(p: &'a Process, out: &mut Vec<&'a Process>) {
    match p {
        Process::Parallel(a, b) => {
            flatten_par(a, out);
            flatten_par(b, out);
        }
        q => out.push(q),
    }
}
