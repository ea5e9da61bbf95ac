mod props;

use joinvir::syntax::{check_core_fragment, desugar, name_sets, parse, pretty, Name, ViolationKind};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(props::CASES))]

    #[test]
    fn pretty_output_parses_back((src, _, _) in props::substitution()) {
        let p = parse(&src).unwrap();
        let flat = parse(&p.to_string()).unwrap();
        prop_assert_eq!(&flat, &p);
        prop_assert_eq!(parse(&pretty(&p)).unwrap(), p);
    }

    #[test]
    fn desugared_programs_stay_in_the_core(src in props::program(3)) {
        let p = parse(&format!("def k(x) |> return x to k in let y = k(a) in {src}")).unwrap();
        let core = desugar(&p).unwrap();
        prop_assert!(!core.to_string().contains("return"));
        prop_assert!(!core.to_string().contains("let"));
    }
}

#[test]
fn syntax_errors_carry_position() {
    let e = parse("def x<u> |> 0\nin x<").unwrap_err();
    assert_eq!(e.line, 2);
    assert!(e.column > 1);
}

#[test]
fn name_sets_of_a_definition() {
    let ns = name_sets(&parse("def x<u> | y<w> |> z<u, w, q> in x<a>").unwrap());
    let names = |v: &[&str]| v.iter().map(|s| Name::new(s)).collect();
    assert_eq!(ns.dv, names(&["x", "y"]));
    assert_eq!(ns.fv, names(&["a", "q", "z"]));
}

#[test]
fn fragment_violations() {
    let cases = [
        ("def x<u> |> (def y<v> |> 0 in y<u>) in x<a>", ViolationKind::NestedDefinition),
        ("def x(u) |> return u to x in let v = x(a) in out<v>", ViolationKind::SynchronousCall),
        ("def g<n> |> g<pair(n, n)> in g<z>", ViolationKind::ValueConstructor),
    ];
    for (src, kind) in cases {
        let r = check_core_fragment(&parse(src).unwrap());
        assert!(!r.in_fragment, "{src}");
        assert!(r.violations.iter().any(|v| v.kind == kind), "{src}: {r}");
    }
    let ok = check_core_fragment(&parse("def ping<> |> pong<> and pong<> |> ping<> in ping<>").unwrap());
    assert!(ok.in_fragment && ok.violations.is_empty());
}
