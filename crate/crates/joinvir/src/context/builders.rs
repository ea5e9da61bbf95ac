use std::collections::BTreeSet;

use super::{names, Context, ContextError};
use crate::syntax::{parse, parse_definition, pretty, Atom, Definition, Name, Process};

/// Completion order used by [`file_system`] callers that have no preference.
pub const DEFAULT_COMPLEMENTS: [&str; 2] = [".com", ".exe"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResourceKind {
    Static,
    Executable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceSpec {
    pub kind: ResourceKind,
    pub initial: Atom,
    pub label: String,
}

fn build(text: &str, s: &[&str], r: &[String], privileged: &[String]) -> Result<Context, ContextError> {
    let template = parse(text)?;
    let as_names = |xs: &[String]| xs.iter().map(|x| Name::new(x)).collect::<BTreeSet<_>>();
    Context::new(template, names(s), as_names(r), as_names(privileged))
}

/// Service and resource bricks. Each service `sv` forwards to its function;
/// each resource `L` gets `read_L`, `write_L` and, when executable, `exec_L`
/// over a private `content_L` cell.
///
/// ```
/// use joinvir::context::{base_context, ResourceKind, ResourceSpec};
/// use joinvir::syntax::Atom;
/// let spec = ResourceSpec { kind: ResourceKind::Static, initial: Atom::name("c0"), label: "doc".into() };
/// let ctx = base_context(&[], &[spec]).unwrap();
/// assert_eq!(ctx.resources.len(), 2);
/// ```
pub fn base_context(services: &[(Name, Atom)], resources: &[ResourceSpec]) -> Result<Context, ContextError> {
    let mut seen = BTreeSet::new();
    for l in services.iter().map(|(n, _)| n.to_string()).chain(resources.iter().map(|r| r.label.clone())) {
        if !seen.insert(l.clone()) {
            return Err(ContextError::DuplicateLabel(l));
        }
    }
    let mut rules = Vec::new();
    let mut init = Vec::new();
    let (mut s, mut r, mut privileged) = (Vec::new(), Vec::new(), Vec::new());
    for (sv, f) in services {
        rules.push(format!("{sv}(a) |> return {f}(a) to {sv}"));
        s.push(sv.to_string());
    }
    let mut executables = BTreeSet::new();
    for spec in resources {
        let l = &spec.label;
        rules.push(format!("read_{l}() | content_{l}<c> |> content_{l}<c> | return c to read_{l}"));
        rules.push(format!("write_{l}(cn) | content_{l}<c> |> content_{l}<cn> | return to write_{l}"));
        r.push(format!("read_{l}"));
        r.push(format!("write_{l}"));
        if spec.kind == ResourceKind::Executable {
            rules.push(format!("exec_{l}(a) | content_{l}<f> |> content_{l}<f> | return f(a) to exec_{l}"));
            r.push(format!("exec_{l}"));
            executables.insert(Name::new(&format!("exec_{l}")));
        }
        init.push(format!("content_{l}<{}>", spec.initial));
        privileged.push(format!("content_{l}"));
    }
    init.push("HOLE".into());
    let body = init.join(" | ");
    let text = if rules.is_empty() { body } else { format!("def {}\nin {}", rules.join("\nand "), body) };
    let s: Vec<&str> = s.iter().map(String::as_str).collect();
    let mut ctx = build(&text, &s, &r, &privileged)?;
    ctx.executables = executables;
    Ok(ctx)
}

/// Rules shared by every context that runs programs: the execution service,
/// the active-process pointer, the parametric copy service and the factory
/// for runtime resources.
const CORE_RULES: &str = "\
proc_exec(p, a) |> sys_updt(p); return p(a) to proc_exec
and sys_updt(rn) | current<rc> |> current<rn> | return to sys_updt
and sys_ref() | current<rc> |> current<rc> | return rc to sys_ref
and sys_rep(i, o) |> return r(i, o) to sys_rep
and r(x, w) |> return w(x) to r
and res_targ(f0) |> (def res_write(fn) | res_content<f> |> res_content<fn> | return to res_write
    and res_read() | res_content<f> |> res_content<f> | return f to res_read
    and res_exec(a) | res_content<f> |> res_content<f> | return proc_exec(f, a) to res_exec
    in res_content<f0> | return res_read, res_write, res_exec to res_targ)";

const CORE_SERVICES: [&str; 3] = ["proc_exec", "sys_ref", "sys_rep"];
const CORE_PRIVATE: [&str; 3] = ["current", "sys_updt", "r"];
const DYNAMIC: [&str; 4] = ["res_targ", "res_read", "res_write", "res_exec"];

/// Numbered resources `sr_k`/`sw_k`/`se_k` over `content_k`, executing
/// through `proc_exec`.
fn numbered_resources(initial: &[Atom]) -> (Vec<String>, Vec<String>, Vec<String>, Vec<String>) {
    let (mut rules, mut init, mut r, mut private) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, f) in initial.iter().enumerate() {
        let k = i + 1;
        rules.push(format!("sw{k}(fn) | content{k}<f> |> content{k}<fn> | return to sw{k}"));
        rules.push(format!("sr{k}() | content{k}<f> |> content{k}<f> | return f to sr{k}"));
        rules.push(format!("se{k}(a) | content{k}<f> |> content{k}<f> | return proc_exec(f, a) to se{k}"));
        init.push(format!("content{k}<{f}>"));
        r.extend([format!("sr{k}"), format!("sw{k}"), format!("se{k}")]);
        private.push(format!("content{k}"));
    }
    (rules, init, r, private)
}

/// The replication context: process execution with an active-process
/// pointer, the copy service and `n` executable resources.
///
/// ```
/// use joinvir::context::refined_context;
/// use joinvir::syntax::{Atom, Process};
/// let ctx = refined_context(2, &[Atom::name("f1"), Atom::name("f2")]).unwrap();
/// let soup = ctx.plug(&Process::Null).unwrap();
/// let mut cells: Vec<(String, String)> =
///     soup.messages.iter().map(|m| (m.channel.base.to_string(), m.args[0].to_string())).collect();
/// cells.sort();
/// assert_eq!(cells[0], ("content1".to_string(), "f1".to_string()));
/// assert_eq!(cells[2], ("current".to_string(), "null".to_string()));
/// ```
pub fn refined_context(n: usize, initial: &[Atom]) -> Result<Context, ContextError> {
    if n == 0 {
        return Err(ContextError::Empty("resource count"));
    }
    if initial.len() != n {
        return Err(ContextError::ArityMismatch { expected: n, found: initial.len() });
    }
    let (rules, init, r, mut private) = numbered_resources(initial);
    private.extend(CORE_PRIVATE.iter().map(|s| s.to_string()));
    let text = format!("def {CORE_RULES}\nand {}\nin current<null> | {} | HOLE", rules.join("\nand "), init.join(" | "));
    let mut ctx = build(&text, &CORE_SERVICES, &r, &private)?;
    ctx.dynamic = names(&DYNAMIC);
    ctx.executables = ctx.resources.iter().filter(|c| c.base.starts_with("se")).cloned().collect();
    ctx.executables.insert(Name::new("res_exec"));
    Ok(ctx)
}

/// Two-level network: a global send/receive pair `sd`/`rcv` whose remote end
/// runs `let d = rcv() in handler`, around a local system with execution,
/// self-reference and a propagation service. `sd` is the only resource.
///
/// ```
/// use joinvir::context::worm_topology;
/// use joinvir::syntax::parse;
/// let ctx = worm_topology(&parse("received<d>").unwrap()).unwrap();
/// assert!(ctx.resources.iter().any(|r| &*r.base == "sd"));
/// ```
pub fn worm_topology(remote_handler: &Process) -> Result<Context, ContextError> {
    let text = format!(
        "def sd<m> | rcv() |> return m to rcv
in (let d = rcv() in ({handler}))
 | (def proc_exec(p, a) |> sys_updt(p); return p(a) to proc_exec
    and sys_updt(rn) | current<rc> |> current<rn> | return to sys_updt
    and sys_ref() | current<rc> |> current<rc> | return rc to sys_ref
    and sys_prop(i, o) |> return prop(i, o) to sys_prop
    and prop(i, o) |> o<i> | return to prop
    in current<null> | HOLE)",
        handler = pretty(remote_handler)
    );
    let private: Vec<String> = ["current", "sys_updt", "prop", "rcv"].iter().map(|s| s.to_string()).collect();
    build(&text, &["proc_exec", "sys_ref", "sys_prop"], &["sd".to_string()], &private)
}

fn hierarchy_text(complements: &[Atom]) -> (String, String) {
    let k = complements.len();
    let vars: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
    let cl = format!("complist<{}>", vars.join(", "));
    // Try sn·c0, sn·c1, ... in order; the innermost miss is the dead letter.
    let mut chain = "no_completion<sn>".to_string();
    for i in (0..k).rev() {
        chain = format!(
            "(let h{i} = fs_lookup(pair(sn, c{i}), reg) in if [h{i} = nil] then {chain} else return pair(sn, c{i}) to complete)"
        );
    }
    let pushed = if k == 0 {
        cl.clone()
    } else {
        let mut v = vec!["c".to_string()];
        v.extend(vars[..k - 1].iter().cloned());
        format!("complist<{}>", v.join(", "))
    };
    let rules = format!(
        "complete(sn) | {cl} | fs<reg> |> fs<reg> | {cl} | {chain}
and preempt(c) | {cl} |> {pushed} | return to preempt"
    );
    let init = format!("complist<{}>", complements.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "));
    (rules, init)
}

/// The execution hierarchy on its own: `complete`/`preempt` over a
/// `complist` cell, meant to sit inside a definition that also provides
/// `fs`, `fs_lookup` and `nil`-terminated registries.
pub fn exec_hierarchy(complements: &[Atom]) -> Result<(Definition, Process), ContextError> {
    if complements.is_empty() {
        return Err(ContextError::Empty("complement list"));
    }
    let (rules, init) = hierarchy_text(complements);
    Ok((parse_definition(&rules)?, parse(&init)?))
}

const FS_RULES: &str = "\
fs_lookup(n, l) |> if [l = nil] then return nil to fs_lookup
    else (let e = fst(l) in let k = fst(e) in
          if [k = n] then return snd(e) to fs_lookup else return fs_lookup(n, snd(l)) to fs_lookup)
and fs_remove(n, l) |> if [l = nil] then return nil to fs_remove
    else (let e = fst(l) in let k = fst(e) in
          if [k = n] then return snd(l) to fs_remove
          else (let rest = fs_remove(n, snd(l)) in return pair(e, rest) to fs_remove))
and new(n) | fs<reg> |> let sr, sw, se = res_targ(null) in (fs<pair(pair(n, pair(sr, pair(sw, se))), reg)> | return to new)
and write(n, d) | fs<reg> |> let h = fs_lookup(n, reg) in
    if [h = nil] then (fs<reg> | fs_err<n> | return to write)
    else (let sw = fst(snd(h)) in sw(d); (fs<reg> | return to write))
and read(n, k) | fs<reg> |> let h = fs_lookup(n, reg) in
    if [h = nil] then (fs<reg> | fs_err<n> | return to read)
    else (let sr = fst(h) in let c = sr() in (fs<reg> | k<c> | return to read))
and delete(n) | fs<reg> |> let h = fs_lookup(n, reg) in
    if [h = nil] then (fs<reg> | fs_err<n> | return to delete)
    else (let rest = fs_remove(n, reg) in (fs<rest> | return to delete))
and move(n, m) | fs<reg> |> let h = fs_lookup(n, reg) in
    if [h = nil] then (fs<reg> | fs_err<n> | return to move)
    else (let rest = fs_remove(n, reg) in (fs<pair(pair(m, h), rest)> | return to move))
and execute(n, a) | fs<reg> |> let h = fs_lookup(n, reg) in
    if [h = nil] then (fs<reg> | (let m = complete(n) in (execute(m, a); return to execute)))
    else (let se = snd(snd(h)) in (fs<reg> | (se(a); return to execute)))
and fs_list() | fs<reg> |> fs<reg> | return reg to fs_list";

/// A file system over a name registry. Files are resources created through
/// the runtime factory; `execute` on an unknown name falls back to the
/// completion hierarchy. Failures surface as `fs_err<n>` or
/// `no_completion<n>` messages.
///
/// ```
/// use joinvir::context::file_system;
/// use joinvir::syntax::Atom;
/// let ctx = file_system(&[(Atom::name("n1"), Atom::name("f"))], &[Atom::string(".exe")]).unwrap();
/// assert!(ctx.services.iter().any(|s| &*s.base == "execute"));
/// ```
pub fn file_system(entries: &[(Atom, Atom)], complements: &[Atom]) -> Result<Context, ContextError> {
    let mut seen = BTreeSet::new();
    for (n, _) in entries {
        if !seen.insert(n.to_string()) {
            return Err(ContextError::DuplicateLabel(n.to_string()));
        }
    }
    let contents: Vec<Atom> = entries.iter().map(|(_, f)| f.clone()).collect();
    let (rules, init, r, mut private) = numbered_resources(&contents);
    let mut reg = "nil".to_string();
    for (i, (n, _)) in entries.iter().enumerate().rev() {
        let k = i + 1;
        reg = format!("pair(pair({n}, pair(sr{k}, pair(sw{k}, se{k}))), {reg})");
    }
    let (hier, hier_init) = hierarchy_text(complements);
    let mut all = vec![CORE_RULES.to_string(), FS_RULES.to_string(), hier];
    all.extend(rules);
    let mut cells = vec!["current<null>".to_string(), format!("fs<{reg}>"), hier_init];
    cells.extend(init);
    cells.push("HOLE".into());
    let text = format!("def {}\nin {}", all.join("\nand "), cells.join(" | "));
    private.extend(CORE_PRIVATE.iter().map(|s| s.to_string()));
    private.extend(["fs", "complist", "fs_lookup", "fs_remove"].iter().map(|s| s.to_string()));
    let mut services: Vec<&str> = CORE_SERVICES.to_vec();
    services.extend(["new", "delete", "move", "execute", "read", "write", "fs_list", "complete", "preempt"]);
    let mut ctx = build(&text, &services, &r, &private)?;
    ctx.dynamic = names(&DYNAMIC);
    ctx.executables = ctx.resources.iter().filter(|c| c.base.starts_with("se")).cloned().collect();
    ctx.executables.insert(Name::new("res_exec"));
    Ok(ctx)
}

/// A kernel with a syscall table. `alloc` hands out the privileged `hook`
/// only for the base address `scbase`. An attacker outside the hole waits
/// on `arcv` for a command list and sends the first command back on `sd`
/// with argument `attack_arg`. The hole talks back through `asd`/`rcv`.
///
/// ```
/// use joinvir::context::rootkit_kernel;
/// use joinvir::syntax::Atom;
/// let ctx = rootkit_kernel(&[Atom::name("sc1")], &Atom::name("scbase")).unwrap();
/// assert!(ctx.privileged.iter().any(|p| &*p.base == "hook"));
/// ```
pub fn rootkit_kernel(syscalls: &[Atom], scbase: &Atom) -> Result<Context, ContextError> {
    if syscalls.is_empty() {
        return Err(ContextError::Empty("syscall list"));
    }
    let ts: Vec<String> = (1..=syscalls.len()).map(|i| format!("t{i}")).collect();
    let us: Vec<String> = (1..=syscalls.len()).map(|i| format!("u{i}")).collect();
    let t = ts.join(", ");
    let u = us.join(", ");
    let sc = syscalls.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    let text = format!(
        "def sd<m> | rcv() |> return m to rcv
and asd<m> | arcv() |> return m to arcv
and load<d> |> d<>
and publish() | table<{t}> |> table<{t}> | return {t} to publish
and hook({t}) | table<{u}> |> table<{t}> | return to hook
and access({t}) |> return to access
and alloc(b, s) |> if [b = {scbase}] then return hook to alloc else return access to alloc
in table<{sc}> | (let cs = arcv() in sd<pair(fst(cs), attack_arg)>) | HOLE"
    );
    let private: Vec<String> = ["hook", "table"].iter().map(|s| s.to_string()).collect();
    build(&text, &["publish", "alloc", "load", "asd", "rcv"], &[], &private)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{barb, enabled_redexes, run};

    fn atoms(xs: &[&str]) -> Vec<Atom> {
        xs.iter().map(|s| Atom::name(s)).collect()
    }

    /// Drop fresh indices: `current#15<g>` becomes `current<g>`.
    fn plain(s: &str) -> String {
        let mut out = String::new();
        let mut skip = false;
        for c in s.chars() {
            if c == '#' {
                skip = true;
                continue;
            }
            if skip && c.is_ascii_digit() {
                continue;
            }
            skip = false;
            out.push(c);
        }
        out
    }

    fn msgs(s: &crate::engine::Soup) -> Vec<String> {
        let mut v: Vec<String> = s.messages.iter().map(|m| plain(&m.to_string())).collect();
        v.sort();
        v
    }

    #[test]
    fn every_builder_is_stable() {
        let ctxs = vec![
            base_context(&[], &[]).unwrap(),
            refined_context(3, &atoms(&["f1", "f2", "f3"])).unwrap(),
            worm_topology(&parse("received<d>").unwrap()).unwrap(),
            file_system(&[(Atom::name("n1"), Atom::name("f"))], &[Atom::string(".com")]).unwrap(),
            rootkit_kernel(&atoms(&["sc1", "sc2"]), &Atom::name("scbase")).unwrap(),
        ];
        for c in ctxs {
            let s = c.plug(&Process::Null).unwrap();
            assert!(enabled_redexes(&s).is_empty(), "{}", c.header());
        }
    }

    #[test]
    fn static_resource_read_write() {
        let spec = ResourceSpec { kind: ResourceKind::Static, initial: Atom::name("c0"), label: "x".into() };
        let ctx = base_context(&[], &[spec]).unwrap();
        let p = parse("let v = read_x() in obs<v>").unwrap();
        let s = ctx.plug(&p).unwrap();
        assert!(barb(&s, &Name::new("obs"), Some(&Atom::name("c0"))).unwrap());
        let p = parse("write_x(c1); let v = read_x() in obs<v>").unwrap();
        let s = ctx.plug(&p).unwrap();
        assert!(barb(&s, &Name::new("obs"), Some(&Atom::name("c1"))).unwrap());
    }

    #[test]
    fn executable_resource_applies_content() {
        let spec = ResourceSpec { kind: ResourceKind::Executable, initial: Atom::name("f0"), label: "x".into() };
        let ctx = base_context(&[], &[spec]).unwrap();
        let s = ctx.plug(&parse("exec_x(a1)").unwrap()).unwrap();
        let t = run(&s, 0, 10).unwrap();
        assert!(t.last.messages.iter().any(|m| &*m.channel.base == "f0" && m.args[0] == Atom::name("a1")));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let spec = ResourceSpec { kind: ResourceKind::Static, initial: Atom::name("c0"), label: "x".into() };
        assert_eq!(base_context(&[], &[spec.clone(), spec]), Err(ContextError::DuplicateLabel("x".into())));
    }

    #[test]
    fn empty_base_context_is_just_the_hole() {
        let c = base_context(&[], &[]).unwrap();
        assert_eq!(c.template, Process::Hole);
        assert!(c.services.is_empty() && c.resources.is_empty());
    }

    #[test]
    fn sys_ref_starts_null_and_proc_exec_updates_it() {
        let ctx = refined_context(1, &atoms(&["f1"])).unwrap();
        let s = ctx.plug(&parse("let c = sys_ref() in obs<c>").unwrap()).unwrap();
        assert!(barb(&s, &Name::new("obs"), Some(&Atom::name("null"))).unwrap());
        let s = ctx.plug(&parse("proc_exec(g, a1)").unwrap()).unwrap();
        let t = run(&s, 3, 50).unwrap();
        let labels: Vec<String> = t.steps.iter().flat_map(|st| st.emitted.iter().map(|m| plain(&m.to_string()))).collect();
        let cur = labels.iter().position(|l| l == "current<g>").unwrap();
        let call = labels.iter().position(|l| l.starts_with("g<a1,")).unwrap();
        assert!(cur < call);
    }

    #[test]
    fn privileged_names_are_out_of_reach() {
        let ctx = refined_context(1, &atoms(&["f1"])).unwrap();
        let s = ctx.plug(&parse("current<evil>").unwrap()).unwrap();
        assert!(enabled_redexes(&s).is_empty());
    }

    #[test]
    fn worm_remote_receives() {
        let ctx = worm_topology(&parse("received<d>").unwrap()).unwrap();
        let s = ctx.plug(&parse("sd<m>").unwrap()).unwrap();
        assert!(barb(&s, &Name::new("received"), Some(&Atom::name("m"))).unwrap());
    }

    fn fs1() -> Context {
        file_system(&[(Atom::name("n1"), Atom::name("f"))], &[Atom::string(".com"), Atom::string(".exe")]).unwrap()
    }

    fn settle(ctx: &Context, p: &str) -> crate::engine::Soup {
        let s = ctx.plug(&parse(p).unwrap()).unwrap();
        let t = run(&s, 0, 2000).unwrap();
        assert!(enabled_redexes(&t.last).is_empty(), "did not settle");
        t.last
    }

    #[test]
    fn fs_write_then_read() {
        let s = settle(&fs1(), "write(n1, g); read(n1, k)");
        assert!(msgs(&s).contains(&"k<g>".to_string()));
    }

    #[test]
    fn fs_delete_dead_letters() {
        let s = settle(&fs1(), "delete(n1); read(n1, k)");
        assert!(msgs(&s).contains(&"fs_err<n1>".to_string()));
    }

    #[test]
    fn fs_move_then_execute() {
        let s = settle(&fs1(), "move(n1, n2); execute(n2, a)");
        assert!(s.messages.iter().any(|m| &*m.channel.base == "f" && m.args[0] == Atom::name("a")));
        assert!(msgs(&s).iter().any(|m| m == "current<f>"));
    }

    #[test]
    fn completion_order_and_preempt() {
        let exe = Atom::pair(Atom::name("p"), Atom::string(".exe"));
        let ctx = file_system(&[(exe, Atom::name("fexe"))], &[Atom::string(".com"), Atom::string(".exe")]).unwrap();
        let s = settle(&ctx, "let m = complete(p) in obs<m>");
        assert!(msgs(&s).contains(&"obs<pair(p,\".exe\")>".to_string()));
        let s = settle(&ctx, "preempt(\".com\"); new(pair(p, \".com\")); let m = complete(p) in obs<m>");
        assert!(msgs(&s).contains(&"obs<pair(p,\".com\")>".to_string()));
        let s = settle(&ctx, "let m = complete(q) in obs<m>");
        assert!(msgs(&s).contains(&"no_completion<q>".to_string()));
    }

    #[test]
    fn alloc_leaks_hook_only_at_base() {
        let ctx = rootkit_kernel(&atoms(&["sc1"]), &Atom::name("scbase")).unwrap();
        let s = settle(&ctx, "let h = alloc(scbase, sz) in obs<h>");
        assert!(s.messages.iter().any(|m| &*m.channel.base == "obs" && m.args[0].to_string().starts_with("hook#")));
        let s = settle(&ctx, "let h = alloc(other, sz) in obs<h>");
        assert!(s.messages.iter().any(|m| &*m.channel.base == "obs" && m.args[0].to_string().starts_with("access#")));
    }

    #[test]
    fn hierarchy_fragment_parses() {
        let (d, init) = exec_hierarchy(&[Atom::string(".com")]).unwrap();
        assert_eq!(d.rules().len(), 2);
        assert!(matches!(init, Process::Message(..)));
        assert!(exec_hierarchy(&[]).is_err());
    }
}
