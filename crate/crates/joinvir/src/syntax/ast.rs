use std::fmt;
use std::sync::Arc;

/// A channel or value name. Source names never carry a fresh index; the
/// engine issues `base#n` names when it activates a definition.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Name {
    pub base: Arc<str>,
    pub fresh: Option<u64>,
}

impl Name {
    pub fn new(base: &str) -> Name {
        Name { base: Arc::from(base), fresh: None }
    }

    pub fn fresh(base: &str, index: u64) -> Name {
        Name { base: Arc::from(base), fresh: Some(index) }
    }

    /// Same base, new index.
    pub fn refresh(&self, index: u64) -> Name {
        Name { base: self.base.clone(), fresh: Some(index) }
    }

    pub fn is_fresh(&self) -> bool {
        self.fresh.is_some()
    }

    /// A source name matches itself and every runtime renaming of itself.
    pub fn matches(&self, other: &Name) -> bool {
        match self.fresh {
            Some(_) => self == other,
            None => self.base == other.base,
        }
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.fresh {
            Some(i) => write!(f, "{}#{}", self.base, i),
            None => write!(f, "{}", self.base),
        }
    }
}

/// Inert constants. Pairs implement name concatenation and the tagged
/// constructors used by the email-worm model.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Literal {
    Int(i64),
    Str(Arc<str>),
    Pair(Arc<Atom>, Arc<Atom>),
}

/// Anything that can be transmitted: a name or a literal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Atom {
    Name(Name),
    Lit(Literal),
}

impl Atom {
    pub fn name(s: &str) -> Atom {
        Atom::Name(Name::new(s))
    }

    pub fn int(i: i64) -> Atom {
        Atom::Lit(Literal::Int(i))
    }

    pub fn string(s: &str) -> Atom {
        Atom::Lit(Literal::Str(Arc::from(s)))
    }

    pub fn pair(a: Atom, b: Atom) -> Atom {
        Atom::Lit(Literal::Pair(Arc::new(a), Arc::new(b)))
    }

    pub fn as_name(&self) -> Option<&Name> {
        match self {
            Atom::Name(n) => Some(n),
            Atom::Lit(_) => None,
        }
    }

    /// True if `n` occurs anywhere inside this atom, including pair components.
    pub fn mentions(&self, n: &Name) -> bool {
        match self {
            Atom::Name(m) => m == n,
            Atom::Lit(Literal::Pair(a, b)) => a.mentions(n) || b.mentions(n),
            Atom::Lit(_) => false,
        }
    }
}

impl From<Name> for Atom {
    fn from(n: Name) -> Atom {
        Atom::Name(n)
    }
}

/// Built-in value operators. They compute on atoms and never touch channels.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Prim {
    Pair,
    Fst,
    Snd,
}

impl Prim {
    pub fn keyword(self) -> &'static str {
        match self {
            Prim::Pair => "pair",
            Prim::Fst => "fst",
            Prim::Snd => "snd",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Prim> {
        match s {
            "pair" => Some(Prim::Pair),
            "fst" => Some(Prim::Fst),
            "snd" => Some(Prim::Snd),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Prim::Pair => 2,
            Prim::Fst | Prim::Snd => 1,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Expression {
    Atom(Atom),
    SyncCall(Atom, Vec<Expression>),
    Prim(Prim, Vec<Expression>),
    LocalDef(Box<Definition>, Box<Expression>),
    Sequence(Box<Expression>, Box<Expression>),
    Let(Vec<Name>, Box<Expression>, Box<Expression>),
}

impl Expression {
    pub fn name(s: &str) -> Expression {
        Expression::Atom(Atom::name(s))
    }

    pub fn call(ch: &str, args: Vec<Expression>) -> Expression {
        Expression::SyncCall(Atom::name(ch), args)
    }

    /// Atoms and primitive applications over atoms: the expressions that
    /// need no continuation to evaluate.
    pub fn is_simple(&self) -> bool {
        match self {
            Expression::Atom(_) => true,
            Expression::Prim(_, args) => args.iter().all(Expression::is_simple),
            _ => false,
        }
    }
}

impl From<Atom> for Expression {
    fn from(a: Atom) -> Expression {
        Expression::Atom(a)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Process {
    Message(Atom, Vec<Expression>),
    LocalDef(Box<Definition>, Box<Process>),
    Parallel(Box<Process>, Box<Process>),
    Null,
    Sequence(Expression, Box<Process>),
    Let(Vec<Name>, Expression, Box<Process>),
    Return(Vec<Expression>, Name),
    Conditional(Atom, Atom, Box<Process>, Box<Process>),
    /// The plug point of a context template.
    Hole,
}

impl Process {
    pub fn message(ch: &str, args: Vec<Atom>) -> Process {
        Process::Message(Atom::name(ch), args.into_iter().map(Expression::Atom).collect())
    }

    pub fn par(a: Process, b: Process) -> Process {
        match (a, b) {
            (Process::Null, q) => q,
            (p, Process::Null) => p,
            (p, q) => Process::Parallel(Box::new(p), Box::new(q)),
        }
    }

    pub fn par_all<I: IntoIterator<Item = Process>>(items: I) -> Process {
        items.into_iter().fold(Process::Null, Process::par)
    }

    pub fn def(d: Definition, body: Process) -> Process {
        Process::LocalDef(Box::new(d), Box::new(body))
    }

    /// Replace every hole by `filler`.
    pub fn plug(&self, filler: &Process) -> Process {
        match self {
            Process::Hole => filler.clone(),
            Process::Message(..) | Process::Null | Process::Return(..) => self.clone(),
            Process::LocalDef(d, p) => Process::LocalDef(Box::new(d.plug(filler)), Box::new(p.plug(filler))),
            Process::Parallel(a, b) => Process::Parallel(Box::new(a.plug(filler)), Box::new(b.plug(filler))),
            Process::Sequence(e, p) => Process::Sequence(e.clone(), Box::new(p.plug(filler))),
            Process::Let(xs, e, p) => Process::Let(xs.clone(), e.clone(), Box::new(p.plug(filler))),
            Process::Conditional(a, b, p, q) => Process::Conditional(
                a.clone(),
                b.clone(),
                Box::new(p.plug(filler)),
                Box::new(q.plug(filler)),
            ),
        }
    }

    pub fn count_holes(&self) -> usize {
        match self {
            Process::Hole => 1,
            Process::Message(..) | Process::Null | Process::Return(..) => 0,
            Process::LocalDef(d, p) => d.count_holes() + p.count_holes(),
            Process::Parallel(a, b) => a.count_holes() + b.count_holes(),
            Process::Sequence(_, p) | Process::Let(_, _, p) => p.count_holes(),
            Process::Conditional(_, _, p, q) => p.count_holes() + q.count_holes(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Definition {
    Rule(JoinPattern, Process),
    Conjunction(Box<Definition>, Box<Definition>),
    Top,
}

impl Definition {
    pub fn rule(j: JoinPattern, body: Process) -> Definition {
        Definition::Rule(j, body)
    }

    pub fn and(a: Definition, b: Definition) -> Definition {
        match (a, b) {
            (Definition::Top, d) | (d, Definition::Top) => d,
            (a, b) => Definition::Conjunction(Box::new(a), Box::new(b)),
        }
    }

    pub fn and_all<I: IntoIterator<Item = Definition>>(items: I) -> Definition {
        items.into_iter().fold(Definition::Top, Definition::and)
    }

    /// The rules of a conjunction, left to right.
    pub fn rules(&self) -> Vec<(&JoinPattern, &Process)> {
        let mut out = Vec::new();
        self.collect_rules(&mut out);
        out
    }

    fn collect_rules<'a>(&'a self, out: &mut Vec<(&'a JoinPattern, &'a Process)>) {
        match self {
            Definition::Rule(j, p) => out.push((j, p)),
            Definition::Conjunction(a, b) => {
                a.collect_rules(out);
                b.collect_rules(out);
            }
            Definition::Top => {}
        }
    }

    fn plug(&self, filler: &Process) -> Definition {
        match self {
            Definition::Rule(j, p) => Definition::Rule(j.clone(), p.plug(filler)),
            Definition::Conjunction(a, b) => Definition::Conjunction(Box::new(a.plug(filler)), Box::new(b.plug(filler))),
            Definition::Top => Definition::Top,
        }
    }

    fn count_holes(&self) -> usize {
        self.rules().iter().map(|(_, p)| p.count_holes()).sum()
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum JoinPattern {
    MessagePattern(Name, Vec<Name>),
    CallPattern(Name, Vec<Name>),
    Join(Box<JoinPattern>, Box<JoinPattern>),
}

impl JoinPattern {
    pub fn msg(ch: &str, binders: &[&str]) -> JoinPattern {
        JoinPattern::MessagePattern(Name::new(ch), binders.iter().map(|b| Name::new(b)).collect())
    }

    pub fn call(ch: &str, binders: &[&str]) -> JoinPattern {
        JoinPattern::CallPattern(Name::new(ch), binders.iter().map(|b| Name::new(b)).collect())
    }

    pub fn join(a: JoinPattern, b: JoinPattern) -> JoinPattern {
        JoinPattern::Join(Box::new(a), Box::new(b))
    }

    /// Leaves of the pattern as (channel, binders, is_call), left to right.
    pub fn parts(&self) -> Vec<(&Name, &[Name], bool)> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<(&'a Name, &'a [Name], bool)>) {
        match self {
            JoinPattern::MessagePattern(c, b) => out.push((c, b.as_slice(), false)),
            JoinPattern::CallPattern(c, b) => out.push((c, b.as_slice(), true)),
            JoinPattern::Join(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn channels(&self) -> Vec<&Name> {
        self.parts().into_iter().map(|(c, _, _)| c).collect()
    }

    pub fn binders(&self) -> Vec<&Name> {
        self.parts().into_iter().flat_map(|(_, b, _)| b.iter()).collect()
    }
}
