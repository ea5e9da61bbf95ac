use std::collections::BTreeSet;

use super::PolicyError;
use crate::context::Context;
use crate::syntax::{parse_definition, Atom, Definition, Expression, JoinPattern, Name, Process};

pub const DEFAULT_TOKEN: &str = "sec_token";
const CREDIT: &str = "tok_credit";
const DISTRIBUTOR: &str = "get_token";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenMode {
    /// The token opens the guarded channels any number of times.
    Spatial,
    /// At most `n` guarded accesses succeed in total.
    Counted(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenPolicy {
    pub token: Name,
    pub mode: TokenMode,
    pub guarded_channels: BTreeSet<Name>,
    /// Publish a `get_token` service handing out the token.
    pub distributor: bool,
}

impl TokenPolicy {
    pub fn spatial<I: IntoIterator<Item = Name>>(guarded: I) -> TokenPolicy {
        TokenPolicy {
            token: Name::new(DEFAULT_TOKEN),
            mode: TokenMode::Spatial,
            guarded_channels: guarded.into_iter().collect(),
            distributor: false,
        }
    }
}

struct Rewrite<'a> {
    policy: &'a TokenPolicy,
    credits_placed: bool,
}

impl Rewrite<'_> {
    fn guarded(&self, c: &Name) -> bool {
        self.policy.guarded_channels.iter().any(|g| g.base == c.base)
    }

    fn process(&mut self, p: &Process) -> Process {
        match p {
            Process::LocalDef(d, body) => {
                let (d2, touched) = self.def(d);
                let mut body2 = self.process(body);
                if touched && !self.credits_placed {
                    if let TokenMode::Counted(n) = self.policy.mode {
                        let credits = (0..n).map(|_| Process::message(CREDIT, vec![]));
                        body2 = Process::par(body2, Process::par_all(credits));
                    }
                    self.credits_placed = true;
                }
                Process::def(d2, body2)
            }
            Process::Parallel(a, b) => Process::par(self.process(a), self.process(b)),
            Process::Conditional(x, y, a, b) => {
                Process::Conditional(x.clone(), y.clone(), Box::new(self.process(a)), Box::new(self.process(b)))
            }
            Process::Sequence(e, rest) => Process::Sequence(e.clone(), Box::new(self.process(rest))),
            Process::Let(xs, e, body) => Process::Let(xs.clone(), e.clone(), Box::new(self.process(body))),
            _ => p.clone(),
        }
    }

    fn def(&mut self, d: &Definition) -> (Definition, bool) {
        match d {
            Definition::Top => (Definition::Top, false),
            Definition::Conjunction(a, b) => {
                let (a, ta) = self.def(a);
                let (b, tb) = self.def(b);
                (Definition::and(a, b), ta || tb)
            }
            Definition::Rule(j, body) => {
                let inner = self.process(body);
                if !j.channels().iter().any(|c| self.guarded(c)) {
                    return (Definition::Rule(j.clone(), inner), false);
                }
                let used: BTreeSet<&Name> = j.binders().into_iter().collect();
                let mut t = Name::new("tok_in");
                let mut k = 0;
                while used.contains(&t) {
                    k += 1;
                    t = Name::new(&format!("tok_in{k}"));
                }
                let mut pattern = self.add_binder(j, &t);
                let mut keep: Vec<Process> = j
                    .parts()
                    .into_iter()
                    .filter(|(c, _, call)| !call && !self.guarded(c))
                    .map(|(c, bs, _)| {
                        Process::Message(Atom::Name(c.clone()), bs.iter().map(|b| Expression::Atom(Atom::Name(b.clone()))).collect())
                    })
                    .collect();
                let then = inner;
                if let TokenMode::Counted(_) = self.policy.mode {
                    pattern = JoinPattern::join(pattern, JoinPattern::msg(CREDIT, &[]));
                    keep.push(Process::message(CREDIT, vec![]));
                }
                let body = Process::Conditional(
                    Atom::Name(t),
                    Atom::Name(self.policy.token.clone()),
                    Box::new(then),
                    Box::new(Process::par_all(keep)),
                );
                (Definition::Rule(pattern, body), true)
            }
        }
    }

    fn add_binder(&self, j: &JoinPattern, t: &Name) -> JoinPattern {
        let with = |c: &Name, bs: &[Name]| -> Vec<Name> {
            if self.guarded(c) {
                std::iter::once(t.clone()).chain(bs.iter().cloned()).collect()
            } else {
                bs.to_vec()
            }
        };
        match j {
            JoinPattern::MessagePattern(c, bs) => JoinPattern::MessagePattern(c.clone(), with(c, bs)),
            JoinPattern::CallPattern(c, bs) => JoinPattern::CallPattern(c.clone(), with(c, bs)),
            JoinPattern::Join(a, b) => JoinPattern::join(self.add_binder(a, t), self.add_binder(b, t)),
        }
    }
}

/// Guard channels of `ctx` behind a privileged token: each guarded access
/// takes the token as an extra first argument and only behaves as before when
/// it matches.
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::policy::{tokenize_context, TokenPolicy};
/// use joinvir::syntax::{Atom, Name};
/// let ctx = refined_context(1, &[Atom::name("f1")]).unwrap();
/// let g = tokenize_context(&ctx, &TokenPolicy::spatial([Name::new("sw1")])).unwrap();
/// assert!(g.privileged.contains(&Name::new("sec_token")));
/// assert!(g.template.to_string().contains("sw1(tok_in, fn)"));
/// ```
pub fn tokenize_context(ctx: &Context, policy: &TokenPolicy) -> Result<Context, PolicyError> {
    let published = ctx.published();
    if let Some(c) = policy.guarded_channels.iter().find(|c| !published.iter().any(|p| p.base == c.base)) {
        return Err(PolicyError::UnknownChannel(c.clone()));
    }
    if published.contains(&policy.token) {
        return Err(PolicyError::TokenPublished(policy.token.clone()));
    }
    let mut rw = Rewrite { policy, credits_placed: false };
    let inner = rw.process(&ctx.template);
    let tok = &policy.token;
    let mut text = format!("{tok}<> |> 0");
    if policy.distributor {
        text.push_str(&format!(" and {DISTRIBUTOR}() |> return {tok} to {DISTRIBUTOR}"));
    }
    let d = parse_definition(&text).map_err(|e| PolicyError::Context(e.into()))?;
    let mut out = ctx.clone();
    out.template = Process::def(d, inner);
    out.privileged.insert(tok.clone());
    if let TokenMode::Counted(_) = policy.mode {
        out.privileged.insert(Name::new(CREDIT));
    }
    if policy.distributor {
        out.services.insert(Name::new(DISTRIBUTOR));
    }
    out.guarded = policy.guarded_channels.clone();
    out.validate()?;
    Ok(out)
}
