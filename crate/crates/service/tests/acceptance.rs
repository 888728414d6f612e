//! One line per primary acceptance criterion. Every check runs even when an
//! earlier one fails; the test fails at the end if any line did.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use leadopt::campaign::*;
use leadopt::data::*;
use leadopt::features::*;
use leadopt::generation::{parse_generation_response, GeneratedBatch, GeneratorBackendConfig};
use leadopt::molgraph::*;
use leadopt::properties::*;
use leadopt::qsar::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn entry(smiles: &str, activity: f64) -> ContextEntry {
    ContextEntry { smiles: smiles.into(), activity, origin: Origin::Experimental, iteration_added: 0, per_view: None }
}

fn mol(s: &str) -> MolGraph {
    parse_smiles(s).unwrap()
}

const DRUGS: &[&str] = &[
    "CC(=O)Oc1ccccc1C(=O)O",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CN1CCC[C@H]1c1cccnc1",
    "O=C(O)c1ccccc1O",
    "c1ccc2c(c1)ccc1ccccc12",
    "C1CCC2(CC1)CCCC2",
    "c1ccc2[nH]ccc2c1",
    "O=S(=O)(N)c1ccc(N)cc1",
    "FC(F)(F)c1ccc(Cl)cc1",
    "[NH4+].[Cl-]",
];

fn parser_suite() -> Check {
    let mut corpus: Vec<String> = DRUGS.iter().map(|s| s.to_string()).collect();
    corpus.extend(synthetic_library(1000 - DRUGS.len(), 42));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for s in &corpus {
        let m = parse_smiles(s).map_err(|e| format!("{s}: {e}"))?;
        let c = to_canonical(&m).into_string();
        ensure(canonicalize(&c).map(|x| x.into_string()).as_deref() == Ok(c.as_str()), || format!("not idempotent: {s}"))?;
        for _ in 0..3 {
            let r = random_smiles(&m, &mut rng);
            ensure(canonicalize(&r).map(|x| x.into_string()).as_deref() == Ok(c.as_str()), || format!("{s} as {r}"))?;
            checked += 1;
        }
    }
    let mut crashes = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(0..64);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        if catch_unwind(|| {
            if let Ok(m) = parse_smiles_bytes(&bytes) {
                let _ = to_canonical(&m);
            }
        })
        .is_err()
        {
            crashes += 1;
        }
    }
    ensure(crashes == 0, || format!("{crashes} fuzz inputs panicked"))?;
    Ok(format!("{} molecules, {checked} reorderings, 10000 fuzz inputs, 0 crashes", corpus.len()))
}

fn property_oracles() -> Check {
    let water = molecular_weight(&mol("O"));
    let eth = ertl_tpsa(&mol("CCO"));
    let pyr = ertl_tpsa(&mol("c1ccncc1"));
    let hex = ertl_tpsa(&mol("CCCCCC"));
    ensure((water - 18.015).abs() < 0.01, || format!("water MW {water}"))?;
    ensure((eth - 20.23).abs() < 0.01, || format!("ethanol tPSA {eth}"))?;
    ensure((pyr - 12.89).abs() < 0.01, || format!("pyridine tPSA {pyr}"))?;
    ensure(hex == 0.0, || format!("hexane tPSA {hex}"))?;
    let t = PropertyTables::embedded();
    let (c, h) = (t.crippen_contribution("C18").unwrap(), t.crippen_contribution("H1").unwrap());
    let benzene = crippen_logp(&mol("c1ccccc1")).map_err(|e| e.to_string())?;
    ensure(benzene == 6.0 * c + 6.0 * h, || format!("benzene logP {benzene} vs 6*{c} + 6*{h}"))?;
    Ok(format!("water {water:.3}, ethanol {eth:.2}, pyridine {pyr:.2}, hexane 0, benzene logP {benzene:.4} = 6 aromatic CH"))
}

fn fingerprint_vectors() -> Check {
    let methane = circular_fingerprint(&mol("C"), 3, 2048).map_err(|e| e.to_string())?.count_ones();
    let ethane = circular_fingerprint(&mol("CC"), 1, 2048).map_err(|e| e.to_string())?.count_ones();
    ensure(methane == 1 && ethane == 2, || format!("methane {methane} bits, ethane {ethane} bits"))?;
    let mut n = 0;
    for line in include_str!("../../core/tests/data/fingerprint_vectors.tsv").lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split('\t').collect();
        let fp = circular_fingerprint(&mol(f[0]), f[1].parse().unwrap(), f[2].parse().unwrap()).map_err(|e| e.to_string())?;
        ensure(fp.to_hex() == f[3], || format!("{} r{} {} differs", f[0], f[1], f[2]))?;
        n += 1;
    }
    Ok(format!("methane 1 bit, ethane 2 bits, {n} stored vectors identical on {}-{}", std::env::consts::ARCH, std::env::consts::OS))
}

fn embedding_identity() -> Check {
    let corpus: Vec<MolGraph> = ["C", "CO", "CCO", "c1ccccc1"].iter().map(|s| mol(s)).collect();
    let v = build_fragment_vocabulary(&corpus, 0, 12, 4).map_err(|e| e.to_string())?;
    let one = fragment_tokens(&corpus[0], 0);
    let e = mol2vec_embed(&corpus[0], &v).map_err(|e| e.to_string())?;
    ensure(one.len() == 1 && e.values.as_slice() == v.vector(one[0]).unwrap(), || "single token differs".into())?;
    let two = fragment_tokens(&corpus[1], 0);
    let e = mol2vec_embed(&corpus[1], &v).map_err(|e| e.to_string())?;
    let (a, b) = (v.vector(two[0]).unwrap(), v.vector(two[1]).unwrap());
    let err = (0..v.dim()).map(|k| (e.values[k] - (a[k] + b[k]) / 2.0).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-12, || format!("two-token mean off by {err:e}"))?;
    Ok(format!("single token exact, two-token mean max error {err:e}"))
}

fn qsar() -> Check {
    let mols: Vec<MolGraph> = synthetic_library(300, 0).iter().map(|s| mol(s)).collect();
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<f64> = mols.iter().map(|m| 0.02 * molecular_weight(m) + noise.sample(&mut rng)).collect();
    let vocab = Arc::new(build_fragment_vocabulary_with(&mols, &SkipGramParams::default()).map_err(|e| e.to_string())?);
    let params = GbtParams::default();
    let ens = train_ensemble(&mols, &y, vocab, &params).map_err(|e| e.to_string())?;
    for v in FeatureView::ALL {
        let loss = &ens.model(v).train_loss;
        ensure(loss.len() == params.n_trees + 1, || format!("{} has {} loss entries", v.name(), loss.len()))?;
        if let Some(k) = loss.windows(2).position(|w| w[1] > w[0]) {
            return Err(format!("{} training loss rose at round {}", v.name(), k + 1));
        }
    }
    let cv = cross_validate(&mols, &y, &SkipGramParams::default(), &params, 10, 0).map_err(|e| e.to_string())?;
    let again = cross_validate(&mols, &y, &SkipGramParams::default(), &params, 10, 0).map_err(|e| e.to_string())?;
    let identical = serde_json::to_string(&cv).unwrap() == serde_json::to_string(&again).unwrap();
    let r2: Vec<String> = cv.reports.iter().map(|r| format!("{} {:.3}", r.view.name(), r.mean_r2)).collect();
    let weak: Vec<&str> = cv.reports.iter().filter(|r| r.mean_r2 < 0.7).map(|r| r.view.name()).collect();
    let detail = format!("loss non-increasing, 10-fold R2 [{}], bit-identical {identical}", r2.join(", "));
    ensure(identical, || detail.clone())?;
    ensure(weak.is_empty(), || format!("{detail}; below 0.7: {}", weak.join(", ")))?;
    Ok(detail)
}

fn constant_ensemble(vocab: &Arc<FragmentVocabulary>, views: [f64; 3]) -> EnsemblePredictor {
    let dims = [DEFAULT_FP_BITS, DESCRIPTOR_NAMES.len(), vocab.dim()];
    let models = std::array::from_fn(|k| {
        let mut m = GbtModel::constant(views[k], dims[k], GbtParams::default());
        m.feature_view = Some(FeatureView::ALL[k]);
        m
    });
    EnsemblePredictor::from_parts(models, vocab.clone()).unwrap()
}

fn consensus_filter() -> Check {
    let ms: Vec<MolGraph> = synthetic_library(60, 1).iter().map(|s| mol(s)).collect();
    let vocab = Arc::new(build_fragment_vocabulary(&ms, 2, 16, 0).map_err(|e| e.to_string())?);
    let ctx: Context = vec![entry("C", 5.0)].into();
    let batch = parse_generation_response(r#"[{"smiles": "CCOc1ccccc1"}]"#, "fp").map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cutoff = 7.0;
    let mut accepted = 0;
    for _ in 0..100 {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(5.0..9.0));
        let out = filter_and_label(&batch, &constant_ensemble(&vocab, v), cutoff, &ctx, &FilterOptions::default());
        let expect = v.iter().all(|&x| x > cutoff);
        ensure((out.accepted.len() == 1) == expect, || format!("{v:?}"))?;
        if expect {
            accepted += 1;
            let mean = (v[0] + v[1] + v[2]) / 3.0;
            ensure((out.accepted[0].label - mean).abs() < 1e-12, || format!("label {} vs {mean}", out.accepted[0].label))?;
        }
    }
    Ok(format!("100 random triples, {accepted} accepted, labels are view means"))
}

struct CampaignRuns {
    states: Vec<CampaignState>,
    elapsed: Duration,
}

fn run_mock_campaigns() -> Result<CampaignRuns, String> {
    let ds = TargetDataset::from_records("syn", synthetic_records(600, 0.3, 0), DEFAULT_MIN_ACTIVITY).0;
    let t = Instant::now();
    let mut states = Vec::new();
    for seed in 0..10 {
        let config = CampaignConfig {
            max_iterations: 5,
            seed,
            backend: GeneratorBackendConfig::mock(seed),
            ..Default::default()
        };
        states.push(run_campaign(&ds, config).map_err(|e| format!("seed {seed}: {e}"))?);
    }
    Ok(CampaignRuns { states, elapsed: t.elapsed() })
}

fn campaign_dynamics(runs: &Result<CampaignRuns, String>) -> Check {
    let runs = runs.as_ref().map_err(Clone::clone)?;
    let mut grown = Vec::new();
    for (seed, s) in runs.states.iter().enumerate() {
        let initial = s.config.initial_shots;
        let mut size = initial;
        let mut cutoff = f64::NEG_INFINITY;
        let mut median = f64::NEG_INFINITY;
        ensure(s.reports.len() == 5, || format!("seed {seed} ran {} iterations", s.reports.len()))?;
        for r in &s.reports {
            ensure(r.context_size == size + r.accepted, || format!("seed {seed} it {}: size {}", r.iteration, r.context_size))?;
            ensure(r.cutoff >= cutoff, || format!("seed {seed} it {}: cutoff fell to {}", r.iteration, r.cutoff))?;
            ensure(r.median_activity >= median, || format!("seed {seed} it {}: median fell", r.iteration))?;
            size = r.context_size;
            cutoff = r.cutoff;
            median = r.median_activity;
        }
        ensure(size > initial, || format!("seed {seed} never accepted a molecule"))?;
        grown.push(size - initial);
    }
    ensure(runs.elapsed < Duration::from_secs(120), || format!("took {:.1}s", runs.elapsed.as_secs_f64()))?;
    Ok(format!(
        "10 seeds x 5 iterations, accepted per run {grown:?}, cutoff and median non-decreasing, {:.1}s",
        runs.elapsed.as_secs_f64()
    ))
}

fn percentile() -> Check {
    let ctx: Context = (1..=10).map(|k| entry(&"C".repeat(k), k as f64)).collect::<Vec<_>>().into();
    let got = percentile_cutoff(&ctx, 80.0, PercentileMethod::Linear);
    // oracle: rank h = (n - 1) p / 100, interpolate between neighbours
    let xs: Vec<f64> = (1..=10).map(f64::from).collect();
    let h = (xs.len() - 1) as f64 * 0.8;
    let lo = h.floor() as usize;
    let want = xs[lo] + (h - lo as f64) * (xs[lo + 1] - xs[lo]);
    ensure((got - 8.2).abs() <= 1e-12 && (got - want).abs() <= 1e-12, || format!("{got} vs 8.2 / oracle {want}"))?;
    Ok(format!("p80 of 1..10 = {got}"))
}

fn covariance(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mu: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).sum() / n).collect();
    let c = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mu[j]);
    let mut s = c.transpose() * c / (n - 1.0);
    for k in 0..x.ncols() {
        s[(k, k)] += FRECHET_EPSILON;
    }
    (mu, s)
}

/// tr((ΣaΣb)^½) as the sum of square roots of the eigenvalues of ΣaΣb.
fn oracle_frechet(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (ma, sa) = covariance(a);
    let (mb, sb) = covariance(b);
    let dmu: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).powi(2)).sum();
    let tr_root: f64 = (&sa * &sb).complex_eigenvalues().iter().map(|l| l.re.max(0.0).sqrt()).sum();
    dmu + sa.trace() + sb.trace() - 2.0 * tr_root
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn frechet() -> Check {
    let ms: Vec<MolGraph> = synthetic_library(40, 9).iter().map(|s| mol(s)).collect();
    let vocab = build_fragment_vocabulary(&ms, 2, 16, 0).map_err(|e| e.to_string())?;
    let same = frechet_distance(&ms, &ms, &vocab).map_err(|e| e.to_string())?;
    ensure(same.abs() <= 1e-9, || format!("identical sets give {same:e}"))?;
    let one = frechet_distance_features(&[vec![0.0], vec![2.0]], &[vec![1.0], vec![3.0]]).map_err(|e| e.to_string())?;
    ensure((one - 1.0).abs() <= 1e-9, || format!("1-D case gives {one}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a = DMatrix::from_fn(20, 3, |_, j| rng.gen_range(-1.0..1.0) * (j + 1) as f64);
        let b = DMatrix::from_fn(25, 3, |_, _| rng.gen_range(-0.5..2.0));
        let got = frechet_distance_features(&rows(&a), &rows(&b)).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle_frechet(&a, &b)).abs());
    }
    ensure(worst <= 1e-6, || format!("3-D oracle mismatch {worst:e}"))?;
    Ok(format!("identical {same:.1e}, 1-D d2 {one}, 3-D max deviation {worst:.1e}"))
}

fn batch_of(smiles: &[&str]) -> GeneratedBatch {
    parse_generation_response(&serde_json::to_string(smiles).unwrap(), "fp").unwrap()
}

fn metrics(runs: &Result<CampaignRuns, String>) -> Check {
    let ms: Vec<MolGraph> = synthetic_library(60, 1).iter().map(|s| mol(s)).collect();
    let vocab = build_fragment_vocabulary(&ms, 2, 16, 0).map_err(|e| e.to_string())?;
    let train: Vec<MolGraph> = ["CCO", "c1ccccc1", "CCN", "CC(=O)O"].iter().map(|s| mol(s)).collect();
    let m = eval_batch(&batch_of(&["OCC", "c1ccccc1", "CCN"]), &train, &train, &vocab).map_err(|e| e.to_string())?;
    ensure(m.novelty == 0.0, || format!("novelty {}", m.novelty))?;
    let m = eval_batch(&batch_of(&["CCOC", "CCOC", "CCOC"]), &train, &train, &vocab).map_err(|e| e.to_string())?;
    ensure(m.internal_diversity == 0.0, || format!("identical batch diversity {}", m.internal_diversity))?;
    let m = eval_batch(&batch_of(&["C", "O"]), &train, &train, &vocab).map_err(|e| e.to_string())?;
    ensure(m.internal_diversity == 1.0, || format!("disjoint batch diversity {}", m.internal_diversity))?;
    let runs = runs.as_ref().map_err(Clone::clone)?;
    let mut n = 0;
    for s in &runs.states {
        for r in &s.reports {
            ensure(r.accepted <= r.unique && r.unique <= r.valid && r.valid <= r.generated, || {
                format!("iteration {}: {} / {} / {} / {}", r.iteration, r.accepted, r.unique, r.valid, r.generated)
            })?;
            n += 1;
        }
    }
    Ok(format!("novelty 0, diversity 0 and 1, count ordering holds on {n} mock iteration reports"))
}

fn pools() -> Check {
    let ds = TargetDataset::from_records("syn", synthetic_records(200, 0.3, 0), DEFAULT_MIN_ACTIVITY).0;
    ensure(ds.len() == 200, || format!("{} records", ds.len()))?;
    let a = prepare_pools(&ds, DEFAULT_BUTINA_THRESHOLD).map_err(|e| e.to_string())?;
    let b = prepare_pools(&ds, DEFAULT_BUTINA_THRESHOLD).map_err(|e| e.to_string())?;
    let p = a.pools.as_ref().unwrap();
    ensure(p.best20.len() == 20 && p.pool50.len() == 50, || format!("{} / {}", p.best20.len(), p.pool50.len()))?;
    ensure(p.best20.iter().all(|i| !p.pool50.contains(i) && !p.allminus20.contains(i)), || "pools overlap".into())?;
    ensure(a == b, || "pools differ between runs".into())?;
    Ok("best20 20, pool50 50, disjoint, repeatable".into())
}

fn cli_end_to_end() -> Check {
    let t = Instant::now();
    common::end_to_end(&common::Workspace::new())?;
    let e2e = t.elapsed();
    common::crash_resume(&common::Workspace::new())?;
    ensure(e2e < Duration::from_secs(300), || format!("end-to-end took {:.1}s", e2e.as_secs_f64()))?;
    Ok(format!("prep, train, run, report in {:.1}s; killed run resumed to an identical transcript", e2e.as_secs_f64()))
}

#[test]
fn primary_criteria() {
    let mut lines = Vec::new();
    let mut record = |name: &str, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        let line = match &out {
            Ok(d) => format!("PASS  {name:<22} {d} ({secs:.1}s)"),
            Err(d) => format!("FAIL  {name:<22} {d} ({secs:.1}s)"),
        };
        println!("{line}");
        lines.push((out.is_ok(), line));
    };
    let parse = Instant::now();
    record("parser", &mut || {
        let d = parser_suite()?;
        ensure(parse.elapsed() < Duration::from_secs(30), || format!("took {:.1}s", parse.elapsed().as_secs_f64()))?;
        Ok(d)
    });
    record("property oracles", &mut property_oracles);
    record("fingerprint vectors", &mut fingerprint_vectors);
    record("embedding identity", &mut embedding_identity);
    record("qsar", &mut || {
        let t = Instant::now();
        let d = qsar()?;
        ensure(t.elapsed() < Duration::from_secs(60), || format!("{d}; took {:.1}s", t.elapsed().as_secs_f64()))?;
        Ok(d)
    });
    record("consensus filter", &mut consensus_filter);
    let runs = run_mock_campaigns();
    record("campaign dynamics", &mut || campaign_dynamics(&runs));
    record("percentile", &mut percentile);
    record("frechet", &mut frechet);
    record("metrics", &mut || metrics(&runs));
    record("pools", &mut pools);
    record("cli end-to-end", &mut cli_end_to_end);
    let failed: Vec<&String> = lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    println!("{} of {} criteria pass", lines.len() - failed.len(), lines.len());
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("\n"));
}
