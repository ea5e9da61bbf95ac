//! Parametric malware: virus and worm classes I to IV, their replication and
//! targeting routines, and a kernel rootkit.
//!
//! Everything here is generated as program text and parsed, so the output of
//! a builder is exactly what `parse` would give for its printed form.

use std::fmt;
use std::str::FromStr;

use crate::syntax::{parse, pretty, Atom, Definition, JoinPattern, Name, Process, SyntaxError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Virus,
    Worm,
}

/// Which of self-reference and replication are carried by the program
/// itself and which are borrowed from the system.
///
/// | class | self-reference | replication |
/// |-------|----------------|-------------|
/// | I     | own            | own         |
/// | II    | own            | system      |
/// | III   | system         | own         |
/// | IV    | system         | system      |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    I,
    II,
    III,
    IV,
}

impl Class {
    pub const ALL: [Class; 4] = [Class::I, Class::II, Class::III, Class::IV];

    pub fn own_reference(self) -> bool {
        matches!(self, Class::I | Class::II)
    }

    pub fn own_replication(self) -> bool {
        matches!(self, Class::I | Class::III)
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::I => "I",
            Class::II => "II",
            Class::III => "III",
            Class::IV => "IV",
        })
    }
}

impl FromStr for Class {
    type Err = String;

    fn from_str(s: &str) -> Result<Class, String> {
        match s {
            "I" | "1" => Ok(Class::I),
            "II" | "2" => Ok(Class::II),
            "III" | "3" => Ok(Class::III),
            "IV" | "4" => Ok(Class::IV),
            _ => Err(format!("unknown class {s}")),
        }
    }
}

/// How the copy is made. For worms, `Overwrite` is the plain forwarding
/// `out<in>` and `Email` wraps the copy in tagged pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum ReplicationMech {
    Overwrite,
    /// Targets are `pair(sw, sr)`; the new content runs the old one, then
    /// the virus.
    Append,
    /// Targets are `pair(sw, sr)`; the new content runs the virus, then the
    /// old one.
    Prepend,
    /// Targets are file names: the original moves to `pair(n, "copy")`.
    CompanionRename,
    /// Targets are short names: the virus lands at `pair(n, ext)` after
    /// `ext` is made the preferred completion.
    CompanionPreempt { ext: Atom },
    Email,
    /// A definition of `r(x, t)`.
    Custom(Definition),
}

impl ReplicationMech {
    pub fn name(&self) -> &'static str {
        match self {
            ReplicationMech::Overwrite => "overwrite",
            ReplicationMech::Append => "append",
            ReplicationMech::Prepend => "prepend",
            ReplicationMech::CompanionRename => "companion_rename",
            ReplicationMech::CompanionPreempt { .. } => "companion_preempt",
            ReplicationMech::Email => "email",
            ReplicationMech::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetRoutine {
    /// The i-th call returns the i-th atom; once the list runs out the
    /// caller blocks.
    Hardcoded(Vec<Atom>),
    /// A write channel of a resource created for the occasion.
    DynamicCreate,
    /// Walk the file-system registry, one write channel per call.
    Discover,
}

/// Where the program gets the access token from, for contexts whose
/// channels are guarded.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum TokenSource {
    #[default]
    None,
    Forged(Atom),
    /// Ask the system's distributor `get_token`.
    Request,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MalwareSpec {
    pub family: Family,
    pub class: Class,
    pub mech: ReplicationMech,
    pub target: TargetRoutine,
    pub payload: Process,
    pub token: TokenSource,
    /// Argument of the initial `proc_exec` call.
    pub arg: Atom,
}

impl MalwareSpec {
    pub fn virus(class: Class, mech: ReplicationMech, target: TargetRoutine) -> MalwareSpec {
        MalwareSpec {
            family: Family::Virus,
            class,
            mech,
            target,
            payload: Process::Null,
            token: TokenSource::None,
            arg: Atom::name("a0"),
        }
    }

    /// A worm sending itself to the network channel `sd`.
    pub fn worm(class: Class, mech: ReplicationMech) -> MalwareSpec {
        MalwareSpec {
            family: Family::Worm,
            class,
            mech,
            target: TargetRoutine::Hardcoded(vec![Atom::name("sd")]),
            payload: Process::Null,
            token: TokenSource::None,
            arg: Atom::name("a0"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MalwareError {
    #[error("expected a {expected} spec")]
    WrongFamily { expected: &'static str },
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Name of the viral abstraction.
pub const VIRUS_NAME: &str = "v";
pub const WORM_NAME: &str = "w";

fn guarded_call(ch: &str, args: &str, token: &TokenSource) -> String {
    match token {
        TokenSource::None => format!("{ch}({args})"),
        _ => format!("{ch}(tok, {args})"),
    }
}

/// The definition of the local copy routine `r(x, t)`: copy `x` to target `t`.
pub fn replication_process(m: &ReplicationMech) -> Result<Definition, MalwareError> {
    replication_text(m, &TokenSource::None).and_then(|t| Ok(crate::syntax::parse_definition(&t)?))
}

fn replication_text(m: &ReplicationMech, token: &TokenSource) -> Result<String, MalwareError> {
    let write = |w: &str, x: &str| guarded_call(w, x, token);
    Ok(match m {
        ReplicationMech::Overwrite => format!("r(x, t) |> return {} to r", write("t", "x")),
        ReplicationMech::Prepend | ReplicationMech::Append => {
            let chain = if *m == ReplicationMech::Prepend {
                "x(y); return old(y) to p1"
            } else {
                "old(y); return x(y) to p1"
            };
            format!(
                "r(x, t) |> let sw = fst(t) in let sr = snd(t) in let old = sr() in
    (def p1(y) |> {chain} in {}; return to r)",
                write("sw", "p1")
            )
        }
        ReplicationMech::CompanionRename => {
            "r(x, t) |> move(t, pair(t, \"copy\")); new(t); write(t, x); return to r".to_string()
        }
        ReplicationMech::CompanionPreempt { ext } => {
            format!("r(x, t) |> preempt({ext}); new(pair(t, {ext})); write(pair(t, {ext}), x); return to r")
        }
        ReplicationMech::Email => "r(x, t) |> t<pair(\"SMTP\", pair(\"b64\", x))> | return to r".to_string(),
        ReplicationMech::Custom(d) => d.to_string(),
    })
}

fn target_rules(t: &TargetRoutine) -> (String, String) {
    match t {
        TargetRoutine::Hardcoded(list) => {
            let mut chain = "tpos<i>".to_string();
            for (i, a) in list.iter().enumerate().rev() {
                chain = format!("if [i = {i}] then (tpos<{}> | return {a} to tsel) else {chain}", i + 1);
            }
            (format!("tsel() | tpos<i> |> {chain}"), "tpos<0>".to_string())
        }
        TargetRoutine::DynamicCreate => {
            ("tsel() |> let sr, sw, se = res_targ(null) in return sw to tsel".to_string(), String::new())
        }
        TargetRoutine::Discover => (
            "tsel() | tlist<l> |> if [l = nil] then tlist<l>
    else (let e = fst(l) in let h = snd(e) in let sw = fst(snd(h)) in (tlist<snd(l)> | return sw to tsel))"
                .to_string(),
            "(let l = fs_list() in tlist<l>)".to_string(),
        ),
    }
}

fn build(spec: &MalwareSpec) -> Result<Process, MalwareError> {
    let (me, rep, sys_rep) = match spec.family {
        Family::Virus => (VIRUS_NAME, "loc_rep", "sys_rep"),
        Family::Worm => (WORM_NAME, "loc_prop", "sys_prop"),
    };
    let mut local = vec![format!("loc_targ() |> return tsel() to loc_targ")];
    if spec.class.own_replication() {
        local.push(format!("{rep}(i, o) |> return r(i, o) to {rep}"));
        let mech = match (spec.family, &spec.mech) {
            (Family::Worm, ReplicationMech::Overwrite) => "r(x, t) |> t<x> | return to r".to_string(),
            (_, m) => replication_text(m, &spec.token)?,
        };
        local.push(mech);
    }
    if spec.class.own_reference() {
        local.push(format!("loc_ref() |> return {me} to loc_ref"));
    }
    let refer = if spec.class.own_reference() { "loc_ref()" } else { "sys_ref()" };
    let copy = if spec.class.own_replication() { rep } else { sys_rep };
    let mut body = format!(
        "(def {} in {copy}({refer}, loc_targ()); ({} | return to {me}))",
        local.join("\n    and "),
        pretty(&spec.payload)
    );
    body = match &spec.token {
        TokenSource::None => body,
        TokenSource::Forged(a) => format!("(let tok = {a} in {body})"),
        TokenSource::Request => format!("(let tok = get_token() in {body})"),
    };
    let (tsel, tinit) = target_rules(&spec.target);
    let mut init = vec![format!("proc_exec({me}, {})", spec.arg)];
    if !tinit.is_empty() {
        init.insert(0, tinit);
    }
    let text = format!("def {me}(x) |> {body}\nand {tsel}\nin {}", init.join(" | "));
    Ok(parse(&text)?)
}

/// A virus `def v(x) |> ... in proc_exec(v, a0)`. The replication call
/// runs first; the payload and the return to the caller follow it.
///
/// ```
/// use joinvir::malware::{build_virus, Class, MalwareSpec, ReplicationMech, TargetRoutine};
/// use joinvir::syntax::Atom;
/// let spec = MalwareSpec::virus(
///     Class::III,
///     ReplicationMech::Overwrite,
///     TargetRoutine::Hardcoded(vec![Atom::name("sw1"), Atom::name("sw2")]),
/// );
/// let p = build_virus(&spec).unwrap();
/// assert!(p.to_string().contains("loc_rep(sys_ref(), loc_targ())"));
/// ```
pub fn build_virus(spec: &MalwareSpec) -> Result<Process, MalwareError> {
    if spec.family != Family::Virus {
        return Err(MalwareError::WrongFamily { expected: "virus" });
    }
    build(spec)
}

/// A worm `def w(x) |> ... in proc_exec(w, a0)` that propagates through
/// `loc_prop` or the system's `sys_prop`.
pub fn build_worm(spec: &MalwareSpec) -> Result<Process, MalwareError> {
    if spec.family != Family::Worm {
        return Err(MalwareError::WrongFamily { expected: "worm" });
    }
    build(spec)
}

/// Remote handler undoing the email wrapping before delivery on `received`.
pub fn email_decoder() -> Process {
    parse("received<snd(snd(d))>").expect("fixed text parses")
}

/// A kernel rootkit loaded as a driver. It publishes its command names on
/// `asd`, serves commands arriving on `rcv` and overwrites the syscall table
/// with its fake syscalls through the channel `alloc(scbase, scsize)` hands
/// out.
///
/// Each command body may use its argument `g`; each fake syscall body its
/// argument `a`.
pub fn build_rootkit(commands: &[(Name, Process)], fake_syscalls: &[(Name, Process)]) -> Result<Process, MalwareError> {
    if commands.is_empty() {
        return Err(MalwareError::Empty("command list"));
    }
    const PROXY: &str = "(let m = rcv() in let c = fst(m) in let g = snd(m) in c(g))";
    let mut rules: Vec<String> =
        commands.iter().map(|(c, body)| format!("{c}(g) |> ({} | {PROXY})", pretty(body))).collect();
    rules.extend(fake_syscalls.iter().map(|(f, body)| format!("{f}(a) |> {}", pretty(body))));
    let mut list = "nil".to_string();
    for (c, _) in commands.iter().rev() {
        list = format!("pair({c}, {list})");
    }
    let hooking = if fake_syscalls.is_empty() {
        String::new()
    } else {
        let fs: Vec<String> = fake_syscalls.iter().map(|(f, _)| f.to_string()).collect();
        format!(" | (let scspace = alloc(scbase, scsize) in scspace({}))", fs.join(", "))
    };
    let text = format!("def r<> |> (def {}\n    in asd<{list}> | {PROXY}{hooking})\nin load<r>", rules.join("\n    and "));
    Ok(parse(&text)?)
}

/// A process abstraction: a definition whose first rule has a single channel.
pub fn is_abstraction(p: &Process) -> bool {
    match p {
        Process::LocalDef(d, _) => d
            .rules()
            .first()
            .is_some_and(|(j, _)| matches!(j, JoinPattern::CallPattern(..) | JoinPattern::MessagePattern(..))),
        _ => false,
    }
}

#[cfg(test)]
mod tests;
