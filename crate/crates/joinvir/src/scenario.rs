//! Scenario files: one analysis as `key=value` pairs.
//!
//! ```text
//! # Class III virus against two executable resources
//! family=virus class=III mech=overwrite targets=sw1,sw2 payload=null
//! context=refined(n=2) mode=explore expect=vulnerable
//! ```
//!
//! Values containing spaces go in double quotes; parentheses group too, and
//! arguments inside them are separated by `;`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::context::{file_system, refined_context, worm_topology, Context, ContextError};
use crate::detector::{
    detect_via_coverability, explore, viral_set_member, Budgets, DetectError, DetectionVerdict, Outcome, Strategy,
};
use crate::malware::{
    build_virus, build_worm, email_decoder, Class, Family, MalwareError, MalwareSpec, ReplicationMech, TargetRoutine,
    TokenSource,
};
use crate::policy::{tokenize_context, PolicyError, TokenMode, TokenPolicy};
use crate::syntax::{parse, Atom, Name, Process, SyntaxError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("missing key {0}")]
    Missing(&'static str),
    #[error("bad value for {key}: {message}")]
    Value { key: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Malware(#[from] MalwareError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

fn bad(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Value { key: key.to_string(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContextSpec {
    Refined { initial: Vec<Atom> },
    Worm { email: bool },
    FileSystem { files: Vec<(Atom, Atom)>, complements: Vec<Atom> },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProgramSpec {
    Null,
    Malware(MalwareSpec),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Explore,
    Petri,
    Viral,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub context: ContextSpec,
    pub program: ProgramSpec,
    pub guard: Option<TokenPolicy>,
    pub mode: Mode,
    pub budgets: Budgets,
    pub iterations: usize,
    pub expect: Option<Outcome>,
}

/// Split on whitespace outside quotes and parentheses.
fn tokens(line: &str, n: usize) -> Result<Vec<String>, ScenarioError> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let (mut depth, mut quoted) = (0usize, false);
    for ch in line.chars() {
        match ch {
            '"' => {
                quoted = !quoted;
                continue;
            }
            '(' if !quoted => depth += 1,
            ')' if !quoted => {
                depth = depth.checked_sub(1).ok_or(ScenarioError::Format { line: n, message: "unbalanced `)`".into() })?
            }
            c if c.is_whitespace() && !quoted && depth == 0 => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if quoted || depth > 0 {
        return Err(ScenarioError::Format { line: n, message: "unterminated quote or parenthesis".into() });
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn atom(s: &str) -> Atom {
    if let Ok(i) = s.parse::<i64>() {
        Atom::int(i)
    } else if s.starts_with('.') {
        Atom::string(s)
    } else {
        Atom::name(s)
    }
}

fn list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect()
}

/// `name(k=v; k=v)` into the name and its arguments.
fn call(s: &str) -> (&str, BTreeMap<&str, &str>) {
    let Some((head, rest)) = s.split_once('(') else { return (s, BTreeMap::new()) };
    let args = rest.strip_suffix(')').unwrap_or(rest);
    let map = args.split(';').filter_map(|kv| kv.split_once('=')).map(|(k, v)| (k.trim(), v.trim())).collect();
    (head, map)
}

fn context_spec(v: &str, base: &Path) -> Result<ContextSpec, ScenarioError> {
    if let Some(path) = v.strip_prefix("file:") {
        return Ok(ContextSpec::File(base.join(path)));
    }
    let (kind, args) = call(v);
    match kind {
        "refined" => {
            let initial: Vec<Atom> = match (args.get("init"), args.get("n")) {
                (Some(init), _) => list(init).into_iter().map(atom).collect(),
                (None, Some(n)) => {
                    let n: usize = n.parse().map_err(|_| bad("context", format!("bad n `{n}`")))?;
                    (1..=n).map(|k| Atom::name(&format!("f{k}"))).collect()
                }
                (None, None) => return Err(bad("context", "refined needs n or init")),
            };
            Ok(ContextSpec::Refined { initial })
        }
        "worm" => Ok(ContextSpec::Worm { email: args.get("decoder") == Some(&"email") }),
        "fs" => {
            let mut files = Vec::new();
            for f in list(args.get("files").copied().unwrap_or("")) {
                let (n, c) = f.split_once(':').ok_or_else(|| bad("context", format!("file `{f}` is not name:content")))?;
                files.push((atom(n), atom(c)));
            }
            let complements = match args.get("complements") {
                Some(c) => list(c).into_iter().map(Atom::string).collect(),
                None => crate::context::DEFAULT_COMPLEMENTS.iter().map(|c| Atom::string(c)).collect(),
            };
            Ok(ContextSpec::FileSystem { files, complements })
        }
        other => Err(bad("context", format!("unknown context kind `{other}`"))),
    }
}

fn mech(v: &str) -> Result<ReplicationMech, ScenarioError> {
    let (kind, args) = call(v);
    Ok(match kind {
        "overwrite" => ReplicationMech::Overwrite,
        "append" => ReplicationMech::Append,
        "prepend" => ReplicationMech::Prepend,
        "companion_rename" => ReplicationMech::CompanionRename,
        "companion_preempt" => ReplicationMech::CompanionPreempt { ext: Atom::string(args.get("ext").copied().unwrap_or(".com")) },
        "email" => ReplicationMech::Email,
        other => return Err(bad("mech", format!("unknown mechanism `{other}`"))),
    })
}

fn targets(v: &str) -> TargetRoutine {
    match v {
        "dynamic" => TargetRoutine::DynamicCreate,
        "discover" => TargetRoutine::Discover,
        _ => TargetRoutine::Hardcoded(
            list(v)
                .into_iter()
                .map(|t| match t.split_once(':') {
                    Some((w, r)) => Atom::pair(atom(w), atom(r)),
                    None => atom(t),
                })
                .collect(),
        ),
    }
}

fn outcome(v: &str) -> Result<Outcome, ScenarioError> {
    match v {
        "vulnerable" => Ok(Outcome::Vulnerable),
        "not_vulnerable" => Ok(Outcome::NotVulnerable),
        "budget_exhausted" => Ok(Outcome::BudgetExhausted),
        other => Err(bad("expect", format!("unknown outcome `{other}`"))),
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| bad(key, format!("`{v}` is not a number")))
}

impl Scenario {
    /// Parse scenario text; relative paths resolve against `base`.
    ///
    /// ```
    /// use joinvir::scenario::{Scenario, Mode};
    /// let s = Scenario::parse("family=virus class=III mech=overwrite targets=sw1,sw2 payload=null context=refined(n=2)", ".".as_ref()).unwrap();
    /// assert_eq!(s.mode, Mode::Explore);
    /// assert_eq!(s.run().unwrap().outcome.as_str(), "vulnerable");
    /// ```
    pub fn parse(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(a, _)| a);
            for tok in tokens(line, i + 1)? {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or(ScenarioError::Format { line: i + 1, message: format!("`{tok}` is not key=value") })?;
                if kv.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(ScenarioError::Format { line: i + 1, message: format!("duplicate key {k}") });
                }
            }
        }
        let mut take = |k: &str| kv.remove(k);

        let context = context_spec(&take("context").ok_or(ScenarioError::Missing("context"))?, base)?;
        let program = match (take("family"), take("process"), take("program")) {
            (Some(fam), None, None) => {
                let class: Class = take("class").as_deref().unwrap_or("I").parse().map_err(|e: String| bad("class", e))?;
                let m = mech(take("mech").as_deref().unwrap_or("overwrite"))?;
                let mut spec = match fam.as_str() {
                    "virus" => {
                        let t = targets(&take("targets").ok_or(ScenarioError::Missing("targets"))?);
                        MalwareSpec::virus(class, m, t)
                    }
                    "worm" => MalwareSpec::worm(class, m),
                    other => return Err(bad("family", format!("unknown family `{other}`"))),
                };
                if let Some(p) = take("payload").filter(|p| p != "null") {
                    spec.payload = parse(&p)?;
                }
                if let Some(a) = take("arg") {
                    spec.arg = atom(&a);
                }
                spec.token = match take("token").as_deref() {
                    None | Some("none") => TokenSource::None,
                    Some("request") => TokenSource::Request,
                    Some(t) => match t.strip_prefix("forged:") {
                        Some(a) => TokenSource::Forged(atom(a)),
                        None => return Err(bad("token", format!("unknown token source `{t}`"))),
                    },
                };
                ProgramSpec::Malware(spec)
            }
            (None, Some(path), None) => ProgramSpec::File(base.join(path)),
            (None, None, Some(p)) if p == "null" => ProgramSpec::Null,
            (None, None, None) => return Err(ScenarioError::Missing("family, process or program")),
            _ => return Err(bad("family", "give exactly one of family, process, program")),
        };

        let guard = match take("guard") {
            None => None,
            Some(g) => {
                let mut policy = TokenPolicy::spatial(list(&g).into_iter().map(Name::new));
                policy.mode = match take("policy").as_deref() {
                    None | Some("spatial") => TokenMode::Spatial,
                    Some(p) => match p.strip_prefix("counted:") {
                        Some(n) => TokenMode::Counted(number("policy", n)?),
                        None => return Err(bad("policy", format!("unknown policy `{p}`"))),
                    },
                };
                policy.distributor = match take("distributor").as_deref() {
                    None | Some("no") => false,
                    Some("yes") => true,
                    Some(d) => return Err(bad("distributor", format!("expected yes or no, got `{d}`"))),
                };
                Some(policy)
            }
        };

        let mode = match take("mode").as_deref() {
            None | Some("explore") => Mode::Explore,
            Some("petri") => Mode::Petri,
            Some("viral") => Mode::Viral,
            Some(m) => return Err(bad("mode", format!("unknown mode `{m}`"))),
        };
        let mut budgets = Budgets::default();
        if let Some(v) = take("max_states") {
            budgets.max_states = number("max_states", &v)?;
        }
        if let Some(v) = take("max_steps") {
            budgets.max_steps_per_branch = number("max_steps", &v)?;
        }
        if let Some(v) = take("workers") {
            budgets.workers = number("workers", &v)?;
        }
        if let Some(v) = take("payload_names") {
            budgets.payload_names = list(&v).into_iter().map(Name::new).collect();
        }
        budgets.strategy = match take("strategy").as_deref() {
            None | Some("bfs") => Strategy::BreadthFirst,
            Some("dfs") => Strategy::DepthFirst,
            Some(s) => return Err(bad("strategy", format!("unknown strategy `{s}`"))),
        };
        let iterations = match take("iterations") {
            Some(v) => number("iterations", &v)?,
            None => 2,
        };
        let expect = take("expect").map(|v| outcome(&v)).transpose()?;
        if let Some(k) = kv.keys().next() {
            return Err(bad(k, "unknown key"));
        }
        Ok(Scenario { context, program, guard, mode, budgets, iterations, expect })
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = read(path)?;
        Scenario::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// The context and the program to plug into it.
    pub fn compile(&self) -> Result<(Context, Process), ScenarioError> {
        let mut ctx = match &self.context {
            ContextSpec::Refined { initial } => refined_context(initial.len(), initial)?,
            ContextSpec::Worm { email: true } => worm_topology(&email_decoder())?,
            ContextSpec::Worm { email: false } => worm_topology(&parse("received<d>")?)?,
            ContextSpec::FileSystem { files, complements } => file_system(files, complements)?,
            ContextSpec::File(p) => Context::from_jc(&read(p)?)?,
        };
        if let Some(policy) = &self.guard {
            ctx = tokenize_context(&ctx, policy)?;
        }
        let p = match &self.program {
            ProgramSpec::Null => Process::Null,
            ProgramSpec::Malware(spec) => match spec.family {
                Family::Virus => build_virus(spec)?,
                Family::Worm => build_worm(spec)?,
            },
            ProgramSpec::File(path) => parse(&read(path)?)?,
        };
        Ok((ctx, p))
    }

    pub fn run(&self) -> Result<DetectionVerdict, ScenarioError> {
        let (ctx, p) = self.compile()?;
        Ok(match self.mode {
            Mode::Explore => explore(&ctx, &p, &self.budgets)?,
            Mode::Petri => detect_via_coverability(&ctx, &p, &self.budgets)?,
            Mode::Viral => viral_set_member(&ctx, &p, self.iterations, &self.budgets)?,
        })
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<Scenario, ScenarioError> {
        Scenario::parse(s, Path::new("."))
    }

    #[test]
    fn format_errors_name_the_line() {
        assert!(matches!(parse_str("program=null\ncontext"), Err(ScenarioError::Format { line: 2, .. })));
        assert!(matches!(parse_str("context=refined(n=1"), Err(ScenarioError::Format { line: 1, .. })));
        assert!(matches!(
            parse_str("program=null context=refined(n=1)\nprogram=null"),
            Err(ScenarioError::Format { line: 2, .. })
        ));
    }

    #[test]
    fn missing_and_unknown_keys() {
        assert!(matches!(parse_str("program=null"), Err(ScenarioError::Missing("context"))));
        assert!(matches!(parse_str("context=worm"), Err(ScenarioError::Missing(_))));
        assert!(matches!(parse_str("program=null context=worm colour=red"), Err(ScenarioError::Value { .. })));
        assert!(matches!(parse_str("program=null context=refined(n=x)"), Err(ScenarioError::Value { .. })));
        assert!(matches!(parse_str("program=null context=worm mode=fast"), Err(ScenarioError::Value { .. })));
    }

    #[test]
    fn comments_quotes_and_defaults() {
        let s = parse_str("# header\nfamily=virus targets=sw1 payload=\"obs<x> | 0\" # trailing\ncontext=refined(n=1)").unwrap();
        assert_eq!(s.iterations, 2);
        assert_eq!(s.mode, Mode::Explore);
        assert!(s.expect.is_none());
        let ProgramSpec::Malware(m) = &s.program else { panic!("not malware") };
        assert_eq!(m.class, Class::I);
        assert!(m.payload.to_string().contains("obs"));
    }

    #[test]
    fn null_program_is_safe() {
        let s = parse_str("program=null context=refined(n=2) expect=not_vulnerable").unwrap();
        assert_eq!(s.run().unwrap().outcome, Outcome::NotVulnerable);
    }

    #[test]
    fn companion_rename_in_file_system() {
        let s = parse_str("family=virus class=III mech=companion_rename targets=n1 context=fs(files=n1:f1)").unwrap();
        assert!(matches!(s.context, ContextSpec::FileSystem { ref files, .. } if files.len() == 1));
        assert_eq!(s.run().unwrap().outcome, Outcome::Vulnerable);
    }

    #[test]
    fn counted_guard() {
        let s = parse_str("program=null context=refined(n=1) guard=sw1 policy=counted:2 distributor=yes").unwrap();
        let g = s.guard.unwrap();
        assert_eq!(g.mode, TokenMode::Counted(2));
        assert!(g.distributor);
        assert!(parse_str("program=null context=refined(n=1) guard=sw1 policy=counted:x").is_err());
    }
}
