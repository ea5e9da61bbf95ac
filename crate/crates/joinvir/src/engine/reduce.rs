use std::collections::{HashSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonicalize, Digest, EngineError, Message, Soup};
use crate::syntax::subst::{substitute_with, Mapping};
use crate::syntax::{Atom, Literal, Name};

pub const DEFAULT_BARB_DEPTH: usize = 8;

/// One way a rule can fire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Redex {
    pub rule: usize,
    pub consumed: Vec<Message>,
    pub binding: Vec<(Name, Atom)>,
}

/// All redexes of a soup, one per rule and distinct choice of message values.
///
/// ```
/// use joinvir::engine::{enabled_redexes, inject};
/// use joinvir::syntax::parse;
/// let s = inject(&parse("def a<u>|b<v> |> c<u, v> in a<1> | a<2> | b<3>").unwrap()).unwrap();
/// assert_eq!(enabled_redexes(&s).len(), 2);
/// ```
pub fn enabled_redexes(s: &Soup) -> Vec<Redex> {
    let mut out = Vec::new();
    for (i, rule) in s.rules.iter().enumerate() {
        let parts = rule.pattern.parts();
        let mut choices: Vec<Vec<&Message>> = Vec::with_capacity(parts.len());
        for (c, bs, _) in &parts {
            let mut seen: Vec<&Message> = Vec::new();
            for m in s.messages.iter().filter(|m| &m.channel == *c && m.args.len() == bs.len()) {
                if !seen.contains(&m) {
                    seen.push(m);
                }
            }
            if seen.is_empty() {
                break;
            }
            choices.push(seen);
        }
        if choices.len() < parts.len() {
            continue;
        }
        let mut idx = vec![0usize; parts.len()];
        loop {
            let consumed: Vec<Message> = idx.iter().zip(&choices).map(|(&k, ms)| ms[k].clone()).collect();
            let binding = parts
                .iter()
                .zip(&consumed)
                .flat_map(|((_, bs, _), m)| bs.iter().cloned().zip(m.args.iter().cloned()))
                .collect();
            out.push(Redex { rule: i, consumed, binding });
            // Odometer over the per-part choices.
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

pub fn reduce(s: &Soup, r: &Redex) -> Result<Soup, EngineError> {
    reduce_tracked(s, r).map(|(s, _)| s)
}

/// Fire `r` and also return the messages the instantiated body emitted.
pub fn reduce_tracked(s: &Soup, r: &Redex) -> Result<(Soup, Vec<Message>), EngineError> {
    let rule = s.rules.get(r.rule).ok_or(EngineError::StaleRedex)?.clone();
    let mut next = s.clone();
    for m in &r.consumed {
        let pos = next.messages.iter().position(|x| x == m).ok_or(EngineError::StaleRedex)?;
        next.messages.remove(pos);
    }
    let map: Mapping = r.binding.iter().cloned().collect();
    let body = substitute_with(&rule.body, &map, &mut next.fresh_counter);
    let before = next.messages.len();
    next.heat(vec![(body, rule.origin, false)])?;
    let emitted = next.messages[before..].to_vec();
    Ok((next, emitted))
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub label: String,
    pub redex: Redex,
    pub emitted: Vec<Message>,
    pub digest: Digest,
}

/// A seeded execution and the soups it went through.
#[derive(Clone, Debug)]
pub struct Trace {
    pub initial: Soup,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    pub last: Soup,
}

fn msg_list(ms: &[Message]) -> String {
    if ms.is_empty() {
        return "-".to_string();
    }
    ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
}

impl TraceStep {
    pub fn line(&self, n: usize) -> String {
        format!(
            "STEP {} RULE {} CONSUME {} EMIT {} DIGEST {}",
            n,
            self.label,
            msg_list(&self.redex.consumed),
            msg_list(&self.emitted),
            self.digest.hex16()
        )
    }
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Re-run the recorded redexes from the initial soup and compare digests.
    pub fn replay(&self) -> Result<bool, EngineError> {
        let mut s = self.initial.clone();
        for st in &self.steps {
            s = reduce(&s, &st.redex)?;
            if canonicalize(&s).digest != st.digest {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, st) in self.steps.iter().enumerate() {
            writeln!(f, "{}", st.line(i + 1))?;
        }
        Ok(())
    }
}

/// Reduce with seeded random redex choice until inert or `max_steps`.
///
/// ```
/// use joinvir::engine::{inject, run};
/// use joinvir::syntax::parse;
/// let s = inject(&parse("def a<> |> b<> and b<> |> a<> in a<>").unwrap()).unwrap();
/// assert_eq!(run(&s, 1, 10).unwrap().len(), 10);
/// ```
pub fn run(s: &Soup, seed: u64, max_steps: usize) -> Result<Trace, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = s.clone();
    let mut steps = Vec::new();
    while steps.len() < max_steps {
        let rs = enabled_redexes(&cur);
        if rs.is_empty() {
            break;
        }
        let r = rs[rng.gen_range(0..rs.len())].clone();
        let label = cur.rules[r.rule].label();
        let (next, emitted) = reduce_tracked(&cur, &r)?;
        let digest = canonicalize(&next).digest;
        steps.push(TraceStep { label, redex: r, emitted, digest });
        cur = next;
    }
    Ok(Trace { initial: s.clone(), seed, steps, last: cur })
}

/// Source names match all their runtime renamings.
pub(crate) fn atom_matches(pat: &Atom, a: &Atom) -> bool {
    match (pat, a) {
        (Atom::Name(p), Atom::Name(n)) => p.matches(n),
        (Atom::Lit(Literal::Pair(p1, p2)), Atom::Lit(Literal::Pair(a1, a2))) => {
            atom_matches(p1, a1) && atom_matches(p2, a2)
        }
        (p, a) => p == a,
    }
}

fn shows(s: &Soup, c: &Name, v: Option<&Atom>) -> bool {
    s.messages.iter().any(|m| c.matches(&m.channel) && v.is_none_or(|v| m.args.iter().any(|a| atom_matches(v, a))))
}

pub fn barb(s: &Soup, c: &Name, v: Option<&Atom>) -> Result<bool, EngineError> {
    barb_within(s, c, v, DEFAULT_BARB_DEPTH)
}

/// Breadth-first search, at most `depth` reductions from `s`, for a soup
/// holding a message on `c` (carrying `v` when given).
pub fn barb_within(s: &Soup, c: &Name, v: Option<&Atom>, depth: usize) -> Result<bool, EngineError> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(canonicalize(s).digest);
    queue.push_back((s.clone(), 0usize));
    while let Some((cur, d)) = queue.pop_front() {
        if shows(&cur, c, v) {
            return Ok(true);
        }
        if d == depth {
            continue;
        }
        for r in enabled_redexes(&cur) {
            let next = reduce(&cur, &r)?;
            if seen.insert(canonicalize(&next).digest) {
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(false)
}

/// Fire a rule consuming a message `x<..a..>`, if the soup has one.
pub fn valued_reaction(s: &Soup, x: &Name, a: &Atom) -> Result<Option<Soup>, EngineError> {
    let hit = enabled_redexes(s).into_iter().find(|r| {
        r.consumed.iter().any(|m| x.matches(&m.channel) && m.args.iter().any(|b| atom_matches(a, b)))
    });
    match hit {
        Some(r) => reduce(s, &r).map(Some),
        None => Ok(None),
    }
}
