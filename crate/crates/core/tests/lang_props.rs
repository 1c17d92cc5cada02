//! Round-trip and totality properties of the textual formats.

mod common;

use common::SpecGen;
use proptest::prelude::*;
use rand::Rng as _;
use relbn_core::lang::{parse_query, parse_spec, render_spec};
use relbn_core::model::{parse_rational, rat, render_rational, validate_spec};

/// Rendering a generated spec and parsing it back reproduces the exact AST:
/// nothing in the language is ambiguous under the renderer's parenthesization.
#[test]
fn specs_round_trip_through_text() {
    for seed in 0..300u64 {
        let mut g = SpecGen::new(seed);
        let roots = g.rng.gen_range(1..=4);
        let defined = g.rng.gen_range(0..=4);
        let spec = g.spec(roots, defined);
        let text = render_spec(&spec);
        let back = parse_spec(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
        assert_eq!(back, spec, "seed {seed}:\n{text}");
    }
}

/// Generated specs pass validation (the generator promises well-formedness,
/// and validation must not flag valid input).
#[test]
fn generated_specs_validate() {
    for seed in 300..500u64 {
        let mut g = SpecGen::new(seed);
        let spec = g.spec(3, 3);
        let report = validate_spec(&spec);
        assert!(report.is_valid(), "seed {seed}: {report:?}");
    }
}

proptest! {
    /// The parser is total: arbitrary input yields a positioned diagnostic
    /// or a spec, never a panic.
    #[test]
    fn parser_never_panics(text in ".{0,200}") {
        let _ = parse_spec(&text);
        let _ = parse_query(&text);
    }

    /// Rational literals round-trip exactly through their textual form.
    #[test]
    fn rationals_round_trip(n in 0i64..10_000, d in 1i64..10_000) {
        let r = rat(n, d);
        prop_assert_eq!(parse_rational(&render_rational(&r)).unwrap(), r);
    }

    /// Decimal literals parse to the exact scaled rational.
    #[test]
    fn decimals_are_exact(whole in 0u32..100, frac in 0u32..1000) {
        let text = format!("{whole}.{frac:03}");
        let expected = rat(i64::from(whole) * 1000 + i64::from(frac), 1000);
        prop_assert_eq!(parse_rational(&text).unwrap(), expected);
    }
}
