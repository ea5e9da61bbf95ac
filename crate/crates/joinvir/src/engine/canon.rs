use std::cell::RefCell;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use sha2::{Digest as _, Sha256};

use super::{ActiveRule, Message, Soup};
use crate::syntax::{render_pattern, render_process, Name};

/// Leaves explored by the individualization search before it stops branching.
const LEAF_BUDGET: usize = 720;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{:02x}", b)).collect()
    }

    /// First eight bytes, as printed in traces.
    pub fn hex16(&self) -> String {
        self.0[..8].iter().map(|b| format!("{:02x}", b)).collect()
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    pub digest: Digest,
    /// Sorted soup items with fresh names renumbered; `*` marks self names.
    pub normalized: String,
}

/// Rendered text with the fresh names cut out.
#[derive(Clone, Debug)]
pub(crate) enum Seg {
    Text(String),
    Fresh(Name),
}

fn segments(render: impl FnOnce(&dyn Fn(&Name, &mut String)) -> String) -> Vec<Seg> {
    let found = RefCell::new(Vec::new());
    let text = render(&|n: &Name, out: &mut String| {
        if n.is_fresh() {
            out.push('\u{1}');
            found.borrow_mut().push(n.clone());
        } else {
            out.push_str(&n.to_string());
        }
    });
    let mut names = found.into_inner().into_iter();
    let mut out = Vec::new();
    for (i, part) in text.split('\u{1}').enumerate() {
        if i > 0 {
            out.push(Seg::Fresh(names.next().expect("one name per marker")));
        }
        if !part.is_empty() {
            out.push(Seg::Text(part.to_string()));
        }
    }
    out
}

fn rule_segments(r: &ActiveRule) -> &[Seg] {
    r.rendered.get_or_init(|| {
        segments(|f| format!("R{}:{} |> {}", r.origin.tag(), render_pattern(&r.pattern, f), render_process(&r.body, f)))
    })
}

fn message_segments(m: &Message) -> Vec<Seg> {
    segments(|f| format!("M:{}", render_process(&m.to_process(), f)))
}

enum Tok<'a> {
    Text(&'a str, u64),
    Slot(usize),
}

struct Graph<'a> {
    items: Vec<Vec<Tok<'a>>>,
    names: Vec<&'a Name>,
    is_self: Vec<bool>,
}

fn hash_of<T: Hash>(x: &T) -> u64 {
    let mut h = DefaultHasher::new();
    x.hash(&mut h);
    h.finish()
}

/// Renumber colors to ranks of their keys.
fn rank<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(k).expect("key present") as u32).collect()
}

fn classes(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

impl<'a> Graph<'a> {
    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        let mut k = classes(&colors);
        loop {
            let sigs: Vec<u64> = self
                .items
                .iter()
                .map(|it| {
                    let mut h = DefaultHasher::new();
                    for t in it {
                        match t {
                            Tok::Text(_, th) => (0u8, *th).hash(&mut h),
                            Tok::Slot(n) => (1u8, colors[*n] as u64).hash(&mut h),
                        }
                    }
                    h.finish()
                })
                .collect();
            let mut occ: Vec<Vec<(u64, u32)>> = vec![Vec::new(); self.names.len()];
            for (i, it) in self.items.iter().enumerate() {
                let mut pos = 0u32;
                for t in it {
                    if let Tok::Slot(n) = t {
                        occ[*n].push((sigs[i], pos));
                        pos += 1;
                    }
                }
            }
            let keys: Vec<(u32, u64)> = occ
                .iter_mut()
                .enumerate()
                .map(|(n, o)| {
                    o.sort_unstable();
                    (colors[n], hash_of(o))
                })
                .collect();
            let next = rank(&keys);
            let k2 = classes(&next);
            colors = next;
            if k2 == k {
                return colors;
            }
            k = k2;
        }
    }

    fn leaf(&self, colors: &[u32]) -> String {
        let mut lines: Vec<String> = self
            .items
            .iter()
            .map(|it| {
                let mut s = String::new();
                for t in it {
                    match t {
                        Tok::Text(x, _) => s.push_str(x),
                        Tok::Slot(n) => {
                            s.push_str(&self.names[*n].base);
                            s.push('#');
                            s.push_str(&colors[*n].to_string());
                            if self.is_self[*n] {
                                s.push('*');
                            }
                        }
                    }
                }
                s
            })
            .collect();
        lines.sort();
        lines.join("\n")
    }

    fn search(&self, colors: Vec<u32>, leaves: &mut usize, best: &mut Option<String>) {
        let colors = self.refine(colors);
        let ncol = classes(&colors);
        if ncol == colors.len() {
            *leaves += 1;
            let l = self.leaf(&colors);
            if best.as_ref().is_none_or(|b| l < *b) {
                *best = Some(l);
            }
            return;
        }
        let mut size = vec![0usize; ncol];
        for &c in &colors {
            size[c as usize] += 1;
        }
        let target = size.iter().position(|&n| n > 1).expect("non-discrete coloring") as u32;
        let members: Vec<usize> = (0..colors.len()).filter(|&n| colors[n] == target).collect();
        for (i, m) in members.into_iter().enumerate() {
            if i > 0 && *leaves >= LEAF_BUDGET {
                break;
            }
            let mut c2 = colors.clone();
            c2[m] = ncol as u32;
            self.search(c2, leaves, best);
        }
    }
}

/// Digest invariant under reordering of rules and messages and under any
/// renaming of fresh names that keeps their base.
///
/// ```
/// use joinvir::engine::{canonicalize, inject};
/// use joinvir::syntax::parse;
/// let a = inject(&parse("a<> | b<>").unwrap()).unwrap();
/// let b = inject(&parse("b<> | a<>").unwrap()).unwrap();
/// assert_eq!(canonicalize(&a).digest, canonicalize(&b).digest);
/// ```
pub fn canonicalize(s: &Soup) -> CanonicalForm {
    let msg_segs: Vec<Vec<Seg>> = s.messages.iter().map(message_segments).collect();
    let mut all: Vec<&[Seg]> = s.rules.iter().map(|r| rule_segments(r)).collect();
    all.extend(msg_segs.iter().map(|v| v.as_slice()));

    let mut index: HashMap<&Name, usize> = HashMap::new();
    let mut names: Vec<&Name> = Vec::new();
    let mut items = Vec::with_capacity(all.len());
    for segs in &all {
        let mut toks = Vec::with_capacity(segs.len());
        for seg in segs.iter() {
            match seg {
                Seg::Text(t) => toks.push(Tok::Text(t, hash_of(t))),
                Seg::Fresh(n) => {
                    let k = *index.entry(n).or_insert_with(|| {
                        names.push(n);
                        names.len() - 1
                    });
                    toks.push(Tok::Slot(k));
                }
            }
        }
        items.push(toks);
    }
    let is_self: Vec<bool> = names.iter().map(|n| s.self_names.contains(*n)).collect();
    let init: Vec<(&str, bool)> = names.iter().zip(&is_self).map(|(n, &b)| (&*n.base, b)).collect();
    let g = Graph { items, names, is_self };
    let mut best = None;
    let mut leaves = 0;
    g.search(rank(&init), &mut leaves, &mut best);
    let normalized = best.unwrap_or_default();
    let digest: [u8; 32] = Sha256::digest(normalized.as_bytes()).into();
    CanonicalForm { digest: Digest(digest), normalized }
}
