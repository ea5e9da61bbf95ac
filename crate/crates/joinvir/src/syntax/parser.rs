use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

/// Parse a process in the concrete grammar.
///
/// ```
/// use joinvir::syntax::{parse, Process};
/// assert_eq!(parse("0").unwrap(), Process::Null);
/// ```
pub fn parse(text: &str) -> Result<Process, SyntaxError> {
    let mut p = Parser::new(text)?;
    let proc = p.process()?;
    p.expect_eof()?;
    check_arity(&proc, &p.first_pos)?;
    Ok(proc)
}

/// Parse a bare definition (`rule and rule ...`).
pub fn parse_definition(text: &str) -> Result<Definition, SyntaxError> {
    let mut p = Parser::new(text)?;
    let d = p.defs()?;
    p.expect_eof()?;
    check_arity(&Process::def(d.clone(), Process::Null), &p.first_pos)?;
    Ok(d)
}

/// Parse a single expression.
pub fn parse_expression(text: &str) -> Result<Expression, SyntaxError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    first_pos: HashMap<String, (usize, usize)>,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, SyntaxError> {
        let toks = tokenize(text)?;
        let mut first_pos = HashMap::new();
        for t in &toks {
            if let Tok::Ident(s) = &t.tok {
                first_pos.entry(s.clone()).or_insert((t.line, t.column));
            }
        }
        Ok(Parser { toks, pos: 0, first_pos })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let t = &self.toks[self.pos];
        SyntaxError::new(t.line, t.column, expected.iter().map(|s| s.to_string()).collect(), t.tok.describe())
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    fn expect_sym(&mut self, s: &'static str) -> Result<(), SyntaxError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[s]))
        }
    }

    fn expect_kw(&mut self, k: &'static str) -> Result<(), SyntaxError> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[k]))
        }
    }

    fn expect_eof(&self) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => Err(self.error(&["end of input", "`|`"])),
        }
    }

    fn ident(&mut self) -> Result<Name, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if Prim::from_keyword(&s).is_none() => {
                self.bump();
                Ok(Name::new(&s))
            }
            Tok::Fresh(s, i) => {
                self.bump();
                Ok(Name::fresh(&s, i))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn idlist(&mut self) -> Result<Vec<Name>, SyntaxError> {
        let mut out = vec![self.ident()?];
        while self.is_sym(",") {
            self.bump();
            out.push(self.ident()?);
        }
        Ok(out)
    }

    /// process := prefix ("|" prefix)*
    fn process(&mut self) -> Result<Process, SyntaxError> {
        let mut p = self.prefix()?;
        while self.is_sym("|") {
            self.bump();
            let q = self.prefix()?;
            p = Process::Parallel(Box::new(p), Box::new(q));
        }
        Ok(p)
    }

    fn prefix(&mut self) -> Result<Process, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(0) => {
                self.bump();
                Ok(Process::Null)
            }
            Tok::Kw("HOLE") => {
                self.bump();
                Ok(Process::Hole)
            }
            Tok::Kw("def") => {
                self.bump();
                let d = self.defs()?;
                self.expect_kw("in")?;
                let body = self.process()?;
                Ok(Process::LocalDef(Box::new(d), Box::new(body)))
            }
            Tok::Kw("let") => {
                self.bump();
                let xs = self.idlist()?;
                self.expect_sym("=")?;
                let e = self.expr()?;
                self.expect_kw("in")?;
                let body = self.process()?;
                Ok(Process::Let(xs, e, Box::new(body)))
            }
            Tok::Kw("return") => {
                self.bump();
                let vals = if self.is_kw("to") { Vec::new() } else { self.exprlist()? };
                self.expect_kw("to")?;
                let to = self.ident()?;
                Ok(Process::Return(vals, to))
            }
            Tok::Kw("if") => {
                self.bump();
                self.expect_sym("[")?;
                let a = self.atom()?;
                self.expect_sym("=")?;
                let b = self.atom()?;
                self.expect_sym("]")?;
                self.expect_kw("then")?;
                let p = self.process()?;
                self.expect_kw("else")?;
                let q = self.process()?;
                Ok(Process::Conditional(a, b, Box::new(p), Box::new(q)))
            }
            Tok::Sym("(") => {
                self.bump();
                let p = self.process()?;
                self.expect_sym(")")?;
                Ok(p)
            }
            Tok::Ident(_) | Tok::Fresh(..) => {
                if let Tok::Ident(s) = self.peek() {
                    if Prim::from_keyword(s).is_some() {
                        return Err(self.error(&["process"]));
                    }
                }
                match self.peek_at(1) {
                    Tok::Sym("<") => {
                        let ch = self.ident()?;
                        self.bump();
                        let args = if self.is_sym(">") { Vec::new() } else { self.exprlist()? };
                        self.expect_sym(">")?;
                        Ok(Process::Message(Atom::Name(ch), args))
                    }
                    Tok::Sym("(") => {
                        let call = self.expr()?;
                        if self.is_sym(";") {
                            self.bump();
                            let rest = self.prefix_seq_rest()?;
                            Ok(Process::Sequence(call, Box::new(rest)))
                        } else {
                            Ok(Process::Sequence(call, Box::new(Process::Null)))
                        }
                    }
                    _ => {
                        self.bump();
                        Err(self.error(&["`<`", "`(`"]))
                    }
                }
            }
            _ => Err(self.error(&["process"])),
        }
    }

    // The continuation of `e; P` extends as far right as possible.
    fn prefix_seq_rest(&mut self) -> Result<Process, SyntaxError> {
        self.process()
    }

    fn defs(&mut self) -> Result<Definition, SyntaxError> {
        let mut d = self.rule()?;
        while self.is_kw("and") {
            self.bump();
            let r = self.rule()?;
            d = Definition::Conjunction(Box::new(d), Box::new(r));
        }
        Ok(d)
    }

    fn rule(&mut self) -> Result<Definition, SyntaxError> {
        if self.is_kw("T") {
            self.bump();
            return Ok(Definition::Top);
        }
        let j = if self.is_sym("(") {
            self.bump();
            let j = self.join()?;
            self.expect_sym(")")?;
            j
        } else {
            self.join()?
        };
        if !self.is_sym("|>") {
            return Err(self.error(&["`|>`", "`|`"]));
        }
        self.bump();
        let body = self.process()?;
        Ok(Definition::Rule(j, body))
    }

    fn join(&mut self) -> Result<JoinPattern, SyntaxError> {
        let mut j = self.pattern()?;
        while self.is_sym("|") {
            self.bump();
            let k = self.pattern()?;
            j = JoinPattern::Join(Box::new(j), Box::new(k));
        }
        Ok(j)
    }

    fn pattern(&mut self) -> Result<JoinPattern, SyntaxError> {
        let ch = match self.peek() {
            Tok::Ident(_) | Tok::Fresh(..) => self.ident()?,
            _ => return Err(self.error(&["join pattern", "`T`"])),
        };
        if self.is_sym("<") {
            self.bump();
            let b = if self.is_sym(">") { Vec::new() } else { self.idlist()? };
            self.expect_sym(">")?;
            Ok(JoinPattern::MessagePattern(ch, b))
        } else if self.is_sym("(") {
            self.bump();
            let b = if self.is_sym(")") { Vec::new() } else { self.idlist()? };
            self.expect_sym(")")?;
            Ok(JoinPattern::CallPattern(ch, b))
        } else {
            Err(self.error(&["`<`", "`(`"]))
        }
    }

    fn exprlist(&mut self) -> Result<Vec<Expression>, SyntaxError> {
        let mut out = vec![self.expr()?];
        while self.is_sym(",") {
            self.bump();
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Atom::int(i))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Atom::string(&s))
            }
            Tok::Ident(_) | Tok::Fresh(..) => Ok(Atom::Name(self.ident()?)),
            _ => Err(self.error(&["name", "literal"])),
        }
    }

    fn expr(&mut self) -> Result<Expression, SyntaxError> {
        match self.peek().clone() {
            Tok::Kw("def") => {
                self.bump();
                let d = self.defs()?;
                self.expect_kw("in")?;
                let e = self.expr()?;
                Ok(Expression::LocalDef(Box::new(d), Box::new(e)))
            }
            Tok::Kw("let") => {
                self.bump();
                let xs = self.idlist()?;
                self.expect_sym("=")?;
                let e = self.expr()?;
                self.expect_kw("in")?;
                let body = self.expr()?;
                Ok(Expression::Let(xs, Box::new(e), Box::new(body)))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                if self.is_sym(";") {
                    self.bump();
                    let f = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(Expression::Sequence(Box::new(e), Box::new(f)))
                } else {
                    self.expect_sym(")")?;
                    Ok(e)
                }
            }
            Tok::Ident(s) if Prim::from_keyword(&s).is_some() => {
                let prim = Prim::from_keyword(&s).unwrap();
                self.bump();
                self.expect_sym("(")?;
                let args = if self.is_sym(")") { Vec::new() } else { self.exprlist()? };
                self.expect_sym(")")?;
                if args.len() != prim.arity() {
                    return Err(self.error(&[&format!("{} argument(s) to `{}`", prim.arity(), s)]));
                }
                Ok(Expression::Prim(prim, args))
            }
            Tok::Ident(_) | Tok::Fresh(..) => {
                let n = self.ident()?;
                if self.is_sym("(") {
                    self.bump();
                    let args = if self.is_sym(")") { Vec::new() } else { self.exprlist()? };
                    self.expect_sym(")")?;
                    Ok(Expression::SyncCall(Atom::Name(n), args))
                } else {
                    Ok(Expression::Atom(Atom::Name(n)))
                }
            }
            Tok::Int(_) | Tok::Str(_) => Ok(Expression::Atom(self.atom()?)),
            _ => Err(self.error(&["expression"])),
        }
    }
}

/// Channel usage shape: number of arguments and whether it is synchronous.
type Shape = (usize, bool);

struct ArityCheck<'a> {
    scopes: Vec<(Name, usize)>,
    next_id: usize,
    free: HashMap<Name, usize>,
    shapes: HashMap<usize, (Shape, Name)>,
    positions: &'a HashMap<String, (usize, usize)>,
}

fn check_arity(p: &Process, positions: &HashMap<String, (usize, usize)>) -> Result<(), SyntaxError> {
    let mut c = ArityCheck { scopes: Vec::new(), next_id: 0, free: HashMap::new(), shapes: HashMap::new(), positions };
    c.process(p)
}

impl<'a> ArityCheck<'a> {
    fn resolve(&mut self, n: &Name) -> usize {
        if let Some((_, id)) = self.scopes.iter().rev().find(|(m, _)| m == n) {
            return *id;
        }
        let next = &mut self.next_id;
        *self.free.entry(n.clone()).or_insert_with(|| {
            *next += 1;
            *next
        })
    }

    fn bind(&mut self, n: &Name) {
        self.next_id += 1;
        self.scopes.push((n.clone(), self.next_id));
    }

    fn use_channel(&mut self, ch: &Atom, shape: Shape) -> Result<(), SyntaxError> {
        let n = match ch {
            Atom::Name(n) => n,
            Atom::Lit(_) => return Ok(()),
        };
        let id = self.resolve(n);
        match self.shapes.get(&id) {
            None => {
                self.shapes.insert(id, (shape, n.clone()));
                Ok(())
            }
            Some((s, _)) if *s == shape => Ok(()),
            Some((s, _)) => {
                let (line, column) = self.positions.get(&*n.base).copied().unwrap_or((1, 1));
                let kind = |s: &Shape| if s.1 { "synchronous" } else { "asynchronous" };
                Err(SyntaxError::new(
                    line,
                    column,
                    vec![format!("{} use of `{}` with {} argument(s)", kind(s), n, s.0)],
                    format!("{} use with {} argument(s)", kind(&shape), shape.0),
                ))
            }
        }
    }

    fn process(&mut self, p: &Process) -> Result<(), SyntaxError> {
        match p {
            Process::Null | Process::Hole => Ok(()),
            Process::Message(ch, args) => {
                self.use_channel(ch, (args.len(), false))?;
                args.iter().try_for_each(|e| self.expr(e))
            }
            Process::LocalDef(d, body) => {
                let mark = self.scopes.len();
                self.def(d)?;
                self.process(body)?;
                self.scopes.truncate(mark);
                Ok(())
            }
            Process::Parallel(a, b) => {
                self.process(a)?;
                self.process(b)
            }
            Process::Sequence(e, rest) => {
                self.expr(e)?;
                self.process(rest)
            }
            Process::Let(xs, e, body) => {
                self.expr(e)?;
                let mark = self.scopes.len();
                xs.iter().for_each(|x| self.bind(x));
                self.process(body)?;
                self.scopes.truncate(mark);
                Ok(())
            }
            Process::Return(vals, _) => vals.iter().try_for_each(|e| self.expr(e)),
            Process::Conditional(_, _, a, b) => {
                self.process(a)?;
                self.process(b)
            }
        }
    }

    fn def(&mut self, d: &Definition) -> Result<(), SyntaxError> {
        let rules = d.rules();
        let mut defined: Vec<&Name> = Vec::new();
        for (j, _) in &rules {
            let chans = j.channels();
            let binders = j.binders();
            let dup = chans.iter().enumerate().find(|(i, c)| chans[..*i].contains(c)).map(|(_, c)| *c).or_else(|| {
                binders.iter().enumerate().find(|(i, b)| binders[..*i].contains(b) || chans.contains(b)).map(|(_, b)| *b)
            });
            if let Some(n) = dup {
                let (line, column) = self.positions.get(&*n.base).copied().unwrap_or((1, 1));
                return Err(SyntaxError::new(line, column, vec!["distinct names in a join pattern".into()], format!("repeated `{}`", n)));
            }
            for c in chans {
                if !defined.contains(&c) {
                    defined.push(c);
                    self.bind(c);
                }
            }
        }
        for (j, _) in &rules {
            for (c, b, call) in j.parts() {
                self.use_channel(&Atom::Name(c.clone()), (b.len(), call))?;
            }
        }
        for (j, body) in &rules {
            let mark = self.scopes.len();
            for b in j.binders() {
                self.bind(b);
            }
            self.process(body)?;
            self.scopes.truncate(mark);
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expression) -> Result<(), SyntaxError> {
        match e {
            Expression::Atom(_) => Ok(()),
            Expression::SyncCall(ch, args) => {
                self.use_channel(ch, (args.len(), true))?;
                args.iter().try_for_each(|a| self.expr(a))
            }
            Expression::Prim(_, args) => args.iter().try_for_each(|a| self.expr(a)),
            Expression::LocalDef(d, body) => {
                let mark = self.scopes.len();
                self.def(d)?;
                self.expr(body)?;
                self.scopes.truncate(mark);
                Ok(())
            }
            Expression::Sequence(a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            Expression::Let(xs, a, body) => {
                self.expr(a)?;
                let mark = self.scopes.len();
                xs.iter().for_each(|x| self.bind(x));
                self.expr(body)?;
                self.scopes.truncate(mark);
                Ok(())
            }
        }
    }
}
