use std::sync::OnceLock;

use leadopt::data::synthetic_library;
use leadopt::features::{build_fragment_vocabulary, FragmentVocabulary};
use leadopt::molgraph::{parse_smiles, MolGraph};
use leadopt::properties::*;
use proptest::prelude::*;

fn mol(s: &str) -> MolGraph {
    parse_smiles(s).unwrap()
}

fn corpus_vocab() -> &'static FragmentVocabulary {
    static VOCAB: OnceLock<FragmentVocabulary> = OnceLock::new();
    VOCAB.get_or_init(|| {
        let ms: Vec<MolGraph> = synthetic_library(200, 7).iter().map(|s| mol(s)).collect();
        build_fragment_vocabulary(&ms, 2, 8, 0).unwrap()
    })
}

#[test]
fn molecular_weight_oracles() {
    assert!((molecular_weight(&mol("O")) - 18.015).abs() < 0.01);
    assert!((molecular_weight(&mol("C")) - 16.043).abs() < 0.01);
    assert!((molecular_weight(&mol("c1ccccc1")) - 78.11).abs() < 0.02);
}

#[test]
fn tpsa_oracles() {
    assert_eq!(ertl_tpsa(&mol("CCCCCC")), 0.0);
    assert!((ertl_tpsa(&mol("CCO")) - 20.23).abs() < 0.01);
    assert!((ertl_tpsa(&mol("c1ccncc1")) - 12.89).abs() < 0.01);
}

#[test]
fn crippen_benzene_is_six_aromatic_ch() {
    let t = PropertyTables::embedded();
    let (c, h) = (t.crippen_contribution("C18").unwrap(), t.crippen_contribution("H1").unwrap());
    let logp = crippen_logp(&mol("c1ccccc1")).unwrap();
    // contributions are summed per atom type
    assert_eq!(logp, 6.0 * c + 6.0 * h);
    assert!((logp - 6.0 * (c + h)).abs() < 1e-12);
    let counts = t.crippen_type_counts(&mol("c1ccccc1")).unwrap();
    let mut counts: Vec<(&str, u32)> = counts.iter().map(|(n, c)| (n.as_str(), *c)).collect();
    counts.sort_unstable();
    assert_eq!(counts, [("C18", 6), ("H1", 6)]);
}

#[test]
fn sa_score_macrocycle_is_harder() {
    let v = corpus_vocab();
    for (small, large) in [
        ("C1CCCCC1", "C1CCCCCCCCCCC1"),
        ("CC(=O)Nc1ccc(OC2CCCCC2)cc1", "CC(=O)Nc1ccc(OC2CCCCCCCCCCC2)cc1"),
    ] {
        let a = sa_score(&mol(small), v).unwrap();
        let b = sa_score(&mol(large), v).unwrap();
        assert!(b > a, "{small} {a} vs {large} {b}");
        assert!(sa_components(&mol(large), v).unwrap().macrocycle_penalty > 0.0);
        assert_eq!(sa_components(&mol(small), v).unwrap().macrocycle_penalty, 0.0);
    }
}

#[test]
fn sa_score_of_the_corpus_staple_is_easy() {
    let ethanol: Vec<MolGraph> = (0..25).map(|_| mol("CCO")).collect();
    let v = build_fragment_vocabulary(&ethanol, 2, 8, 0).unwrap();
    let s = sa_score(&ethanol[0], &v).unwrap();
    assert!(s <= 2.0, "{s}");
    assert_eq!(s, sa_score(&ethanol[0], &v).unwrap());
}

#[test]
fn condition_examples() {
    let v = corpus_vocab();
    let mut p = property_profile(&mol("CCO"), v).unwrap();
    p.molecular_weight = 350.0;
    p.sa_score = 3.4;
    let mw = ConditionSpec::range(Property::MolecularWeight, 320.0, 420.0);
    let sa = ConditionSpec::below(Property::SaScore, 3.0);
    let r = check_conditions(&p, 7.0, &[mw, sa]);
    assert!(r.outcomes[0].passed);
    assert!(!r.outcomes[1].passed);
    assert!(!r.passed);
    assert!(check_conditions(&p, 7.0, &[]).passed);
    // range bounds are inclusive, above/below strict
    p.molecular_weight = 420.0;
    assert!(check_conditions(&p, 7.0, &[mw]).passed);
    p.sa_score = 3.0;
    assert!(!check_conditions(&p, 7.0, &[sa]).passed);
    assert!(check_conditions(&p, 7.5, &[ConditionSpec::above(Property::Activity, 7.0)]).passed);
}

#[test]
fn profile_matches_individual_calculators() {
    let v = corpus_vocab();
    let m = mol("CC(=O)Nc1ccc(O)cc1");
    let p = property_profile(&m, v).unwrap();
    assert_eq!(p.molecular_weight, molecular_weight(&m));
    assert_eq!(p.logp, crippen_logp(&m).unwrap());
    assert_eq!(p.tpsa, ertl_tpsa(&m));
    assert_eq!(p.sa_score, sa_score(&m, v).unwrap());
    assert!(matches!(crippen_logp(&mol("[SiH4]")), Err(PropertyError::UnclassifiableAtom { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sa_is_in_range_and_deterministic(idx in 0usize..200) {
        let v = corpus_vocab();
        let lib = synthetic_library(200, 13);
        let m = mol(&lib[idx]);
        let s = sa_score(&m, v).unwrap();
        prop_assert!((1.0..=10.0).contains(&s));
        prop_assert_eq!(s, sa_score(&m, v).unwrap());
        prop_assert!(ertl_tpsa(&m) >= 0.0);
    }

    #[test]
    fn rescale_is_monotone(a in -20.0f64..10.0, b in -20.0f64..10.0) {
        let (lo, hi) = (-4.0, 2.5);
        let (x, y) = (rescale_sa(a, lo, hi), rescale_sa(b, lo, hi));
        prop_assert!((1.0..=10.0).contains(&x));
        if a < b {
            prop_assert!(x >= y);
        }
    }
}
