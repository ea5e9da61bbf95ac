//! Place/transition nets and backward coverability.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

/// Sparse token counts; absent places hold zero tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(BTreeMap<usize, u64>);

impl Marking {
    pub fn new() -> Marking {
        Marking::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, u64)>>(pairs: I) -> Marking {
        let mut m = Marking::new();
        for (p, k) in pairs {
            m.add(p, k);
        }
        m
    }

    pub fn get(&self, p: usize) -> u64 {
        self.0.get(&p).copied().unwrap_or(0)
    }

    pub fn add(&mut self, p: usize, k: u64) {
        if k > 0 {
            *self.0.entry(p).or_insert(0) += k;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.0.iter().map(|(&p, &k)| (p, k))
    }

    /// Component-wise `self ≤ other`.
    pub fn le(&self, other: &Marking) -> bool {
        self.0.iter().all(|(&p, &k)| other.get(p) >= k)
    }

    pub fn enables(&self, t: &Transition) -> bool {
        t.pre.le(self)
    }

    /// Fire `t`, assuming it is enabled.
    pub fn fire(&self, t: &Transition) -> Marking {
        let mut out = self.clone();
        for (p, k) in t.pre.iter() {
            let left = out.get(p) - k;
            if left == 0 {
                out.0.remove(&p);
            } else {
                out.0.insert(p, left);
            }
        }
        for (p, k) in t.post.iter() {
            out.add(p, k);
        }
        out
    }

    /// Smallest marking from which firing `t` covers `self`:
    /// `max(m - post, 0) + pre`.
    pub fn pre_image(&self, t: &Transition) -> Marking {
        let mut out = Marking::new();
        for (p, k) in self.iter() {
            out.add(p, k.saturating_sub(t.post.get(p)));
        }
        for (p, k) in t.pre.iter() {
            out.add(p, k);
        }
        out
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        let parts: Vec<String> = self.iter().map(|(p, k)| format!("{p}:{k}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub label: String,
    pub pre: Marking,
    pub post: Marking,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PetriNet {
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
}

impl PetriNet {
    pub fn add_place(&mut self, label: impl Into<String>) -> usize {
        self.places.push(label.into());
        self.places.len() - 1
    }

    pub fn place(&self, label: &str) -> Option<usize> {
        self.places.iter().position(|l| l == label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coverage {
    pub covered: bool,
    /// Transition indices, firing legally from the initial marking to one
    /// that dominates the target.
    pub witness: Option<Vec<usize>>,
    /// Size of the final minimal basis.
    pub basis_size: usize,
}

/// Minimal elements of an upward-closed set of markings.
#[derive(Clone, Debug, Default)]
pub struct UpwardBasis {
    pub minimal: Vec<Marking>,
}

impl UpwardBasis {
    pub fn contains(&self, m: &Marking) -> bool {
        self.minimal.iter().any(|b| b.le(m))
    }

    /// Add `m` unless it is already covered; drop elements it dominates.
    pub fn insert(&mut self, m: Marking) -> bool {
        if self.contains(&m) {
            return false;
        }
        self.minimal.retain(|b| !m.le(b));
        self.minimal.push(m);
        true
    }

    pub fn is_antichain(&self) -> bool {
        self.minimal
            .iter()
            .enumerate()
            .all(|(i, a)| self.minimal.iter().enumerate().all(|(j, b)| i == j || !a.le(b)))
    }
}

/// Is some marking reachable from `init` at least `target`?
///
/// ```
/// use joinvir::petri::{coverable, Marking, PetriNet, Transition};
/// let mut net = PetriNet::default();
/// let a = net.add_place("a");
/// let goal = net.add_place("goal");
/// net.transitions.push(Transition {
///     label: "t".into(),
///     pre: Marking::from_pairs([(a, 1)]),
///     post: Marking::from_pairs([(goal, 1)]),
/// });
/// let c = coverable(&net, &Marking::from_pairs([(a, 1)]), &Marking::from_pairs([(goal, 1)]));
/// assert!(c.covered);
/// assert_eq!(c.witness, Some(vec![0]));
/// ```
pub fn coverable(net: &PetriNet, init: &Marking, target: &Marking) -> Coverage {
    if target.le(init) {
        return Coverage { covered: true, witness: Some(Vec::new()), basis_size: 1 };
    }
    let mut basis = UpwardBasis::default();
    basis.insert(target.clone());
    // For each basis element: the transition that leads toward the target
    // and the marking it covers afterwards.
    let mut next: HashMap<Marking, (usize, Marking)> = HashMap::new();
    let mut work: VecDeque<Marking> = VecDeque::from([target.clone()]);
    while let Some(m) = work.pop_front() {
        if !basis.minimal.contains(&m) {
            continue;
        }
        for (ti, t) in net.transitions.iter().enumerate() {
            if !t.post.iter().any(|(p, _)| m.get(p) > 0) {
                continue;
            }
            let pre = m.pre_image(t);
            if !basis.insert(pre.clone()) {
                continue;
            }
            debug_assert!(basis.is_antichain());
            next.insert(pre.clone(), (ti, m.clone()));
            if pre.le(init) {
                let witness = walk(net, init, target, &pre, &next);
                return Coverage { covered: true, witness: Some(witness), basis_size: basis.minimal.len() };
            }
            work.push_back(pre);
        }
    }
    Coverage { covered: false, witness: None, basis_size: basis.minimal.len() }
}

fn walk(net: &PetriNet, init: &Marking, target: &Marking, start: &Marking, next: &HashMap<Marking, (usize, Marking)>) -> Vec<usize> {
    let mut seq = Vec::new();
    let mut cur = start;
    while let Some((t, m)) = next.get(cur) {
        seq.push(*t);
        cur = m;
    }
    let mut m = init.clone();
    for &t in &seq {
        let t = &net.transitions[t];
        assert!(m.enables(t), "coverability witness fires a disabled transition");
        m = m.fire(t);
    }
    assert!(target.le(&m), "coverability witness misses the target");
    seq
}

/// Breadth-first reachable markings, stopping after `cap` distinct ones.
/// The flag is true when the whole reachability set was enumerated.
pub fn forward_enumerate(net: &PetriNet, init: &Marking, cap: usize) -> (BTreeSet<Marking>, bool) {
    let mut seen: HashSet<Marking> = HashSet::from([init.clone()]);
    let mut order = vec![init.clone()];
    let mut queue = VecDeque::from([init.clone()]);
    while let Some(m) = queue.pop_front() {
        for t in net.transitions.iter().filter(|t| m.enables(t)) {
            let n = m.fire(t);
            if seen.contains(&n) {
                continue;
            }
            if seen.len() >= cap {
                return (order.into_iter().collect(), false);
            }
            seen.insert(n.clone());
            order.push(n.clone());
            queue.push_back(n);
        }
    }
    (order.into_iter().collect(), true)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct NetParseError {
    pub line: usize,
    pub message: String,
}

/// A net with the query to ask of it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NetFile {
    pub net: PetriNet,
    pub init: Marking,
    pub target: Marking,
}

impl NetFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, l) in self.net.places.iter().enumerate() {
            out.push_str(&format!("place {i} {l}\n"));
        }
        for (i, t) in self.net.transitions.iter().enumerate() {
            out.push_str(&format!("trans {i} pre {} post {}\n", t.pre, t.post));
        }
        out.push_str(&format!("init {}\n", self.init));
        out.push_str(&format!("target {}\n", self.target));
        out
    }

    pub fn parse(text: &str) -> Result<NetFile, NetParseError> {
        let mut f = NetFile::default();
        let mut places: BTreeMap<usize, String> = BTreeMap::new();
        let mut trans: BTreeMap<usize, Transition> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: String| NetParseError { line, message };
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut it = l.split_whitespace();
            let kw = it.next().unwrap_or_default();
            let id = |s: Option<&str>| -> Result<usize, NetParseError> {
                s.and_then(|s| s.parse().ok()).ok_or_else(|| err("expected a numeric id".into()))
            };
            match kw {
                "place" => {
                    let i = id(it.next())?;
                    let label = it.collect::<Vec<_>>().join(" ");
                    places.insert(i, label);
                }
                "trans" => {
                    let i = id(it.next())?;
                    let rest: Vec<&str> = it.collect();
                    let (pre, post) = match rest.as_slice() {
                        ["pre", a, "post", b] => (*a, *b),
                        ["pre", "post", b] => ("-", *b),
                        ["pre", a, "post"] => (*a, "-"),
                        ["pre", "post"] => ("-", "-"),
                        _ => return Err(err("expected `pre <list> post <list>`".into())),
                    };
                    let t = Transition { label: format!("t{i}"), pre: marking(pre).map_err(err)?, post: marking(post).map_err(err)? };
                    trans.insert(i, t);
                }
                "init" => f.init = marking(it.next().unwrap_or("-")).map_err(err)?,
                "target" => f.target = marking(it.next().unwrap_or("-")).map_err(err)?,
                other => return Err(err(format!("unknown item `{other}`"))),
            }
        }
        for (k, (i, l)) in places.into_iter().enumerate() {
            if i != k {
                return Err(NetParseError { line: 0, message: format!("place ids must be 0..n, missing {k}") });
            }
            f.net.places.push(l);
        }
        for (k, (i, t)) in trans.into_iter().enumerate() {
            if i != k {
                return Err(NetParseError { line: 0, message: format!("transition ids must be 0..n, missing {k}") });
            }
            f.net.transitions.push(t);
        }
        let n = f.net.places.len();
        let bad = f
            .net
            .transitions
            .iter()
            .flat_map(|t| t.pre.iter().chain(t.post.iter()))
            .chain(f.init.iter())
            .chain(f.target.iter())
            .find(|(p, _)| *p >= n);
        if let Some((p, _)) = bad {
            return Err(NetParseError { line: 0, message: format!("unknown place {p}") });
        }
        Ok(f)
    }
}

fn marking(s: &str) -> Result<Marking, String> {
    let mut m = Marking::new();
    if s == "-" {
        return Ok(m);
    }
    for item in s.split(',').filter(|x| !x.is_empty()) {
        let (p, k) = item.split_once(':').ok_or_else(|| format!("expected place:count, got `{item}`"))?;
        let p: usize = p.parse().map_err(|_| format!("bad place `{p}`"))?;
        let k: u64 = k.parse().map_err(|_| format!("bad count `{k}`"))?;
        m.add(p, k);
    }
    Ok(m)
}
