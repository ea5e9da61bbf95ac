mod props;

use joinvir::engine::canonicalize;
use joinvir::engine::Message;
use joinvir::syntax::{Atom, Name};
use proptest::prelude::*;

use props::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn heating_is_reversible(src in program(3)) {
        heating(&src)?;
    }

    #[test]
    fn reduction_conserves_messages(src in program(3)) {
        conservation(&src)?;
    }

    #[test]
    fn canonical_form_matches_brute_force((a, b) in partner()) {
        canonical_brute(&a, &b)?;
    }

    #[test]
    fn canonical_form_ignores_order_and_renaming(a in prop::collection::vec(message(), 0..=8), seed in any::<u64>()) {
        canonical_shuffle(&a, seed)?;
    }

    #[test]
    fn substitution_avoids_capture((src, key, val) in substitution()) {
        capture(&src, key, val)?;
    }
}

#[test]
fn distinct_soups_get_distinct_digests() {
    let a = vec![Message::new(Name::fresh("x", 1), vec![Atom::Name(Name::fresh("x", 1))])];
    let b = vec![Message::new(Name::fresh("x", 1), vec![Atom::Name(Name::fresh("x", 2))])];
    assert!(!brute_congruent(&a, &b));
    assert_ne!(canonicalize(&msg_soup(a)).digest, canonicalize(&msg_soup(b)).digest);
}
