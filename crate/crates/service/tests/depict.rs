use leadopt::data::synthetic_library;
use leadopt::molgraph::{parse_smiles, MolGraph};
use leadopt_service::depict::{depict, layout, BOND_LENGTH};

fn mol(s: &str) -> MolGraph {
    parse_smiles(s).unwrap()
}

fn d(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

#[test]
fn benzene_is_a_regular_hexagon() {
    let m = mol("c1ccccc1");
    let p = layout(&m);
    for b in m.bonds() {
        assert!((d(p[b.begin], p[b.end]) - BOND_LENGTH).abs() < 1e-9);
    }
    for q in &p {
        assert!((d(*q, (0.0, 0.0)) - BOND_LENGTH).abs() < 1e-9);
    }
}

#[test]
fn fused_rings_share_an_edge() {
    let m = mol("c1ccc2ccccc2c1");
    let p = layout(&m);
    for b in m.bonds() {
        assert!((d(p[b.begin], p[b.end]) - BOND_LENGTH).abs() < 1e-6);
    }
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            assert!(d(p[i], p[j]) > 0.99 * BOND_LENGTH, "{i} {j}");
        }
    }
}

#[test]
fn payload_lists_atoms_and_bonds() {
    let m = mol("Oc1ccccc1");
    let dep = depict(&m, "Oc1ccccc1");
    assert_eq!(dep.atoms.len(), 7);
    assert_eq!(dep.bonds.len(), 7);
    assert_eq!(dep.atoms.iter().filter(|a| a.symbol == "O").count(), 1);
    assert_eq!(dep.bonds.iter().filter(|b| b.order == 4).count(), 6);
    assert_eq!(dep.atoms.iter().find(|a| a.symbol == "O").unwrap().hydrogens, 1);
}

#[test]
fn corpus_layouts_are_sane_and_repeatable() {
    let mut corpus: Vec<String> = synthetic_library(200, 5);
    corpus.extend(["CCCCCCCCCC", "CC(C)(C)C", "C1CC2CCC1CC2", "C1CCCCCCCCCCC1", "CCO.CC"].map(String::from));
    for s in &corpus {
        let m = mol(s);
        let p = layout(&m);
        assert_eq!(p, layout(&m), "{s}");
        assert!(p.iter().all(|q| q.0.is_finite() && q.1.is_finite()));
        for b in m.bonds() {
            let len = d(p[b.begin], p[b.end]);
            assert!(len > 0.5 * BOND_LENGTH && len < 1.8 * BOND_LENGTH, "{s}: bond {}-{} is {len}", b.begin, b.end);
        }
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                assert!(d(p[i], p[j]) > 0.25 * BOND_LENGTH, "{s}: atoms {i} and {j} overlap");
            }
        }
    }
}
