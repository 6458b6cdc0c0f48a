//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;

use kbpop::annotate::{annotate_dataset, RuleSet};
use kbpop::config::RawConfig;
use kbpop::evalkbp::{self, evaluate_hop, protected_recall, retrieve, score_query, SlotQuery};
use kbpop::fairness::{
    self, lime::perturbations, permutation_importance, report_from_confusion, shap_values, train_forest,
    FeatureMatrix, ForestParams, LimeParams, Model, ShapMode,
};
use kbpop::graph::{build_graph, PropertyGraph};
use kbpop::ingest::parse_tacred;
use kbpop::inventory::AttributeKind;
use kbpop::linkpred::{self, Hyperparams, LinkGraph, ModelKind, NodeFeatures};
use kbpop::numcore::{cosine, rng, Matrix};
use kbpop::pipeline::{self, features, run_pipeline};
use kbpop::sketch::{frequent_directions, representative_sample, SampleResult, SketchConfig};
use kbpop::table::{Column, Table};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn corpus_graphs() -> (PropertyGraph, PropertyGraph) {
    let ds = parse_tacred(data_dir().join("corpus.json")).expect("committed corpus parses");
    let base = build_graph(&annotate_dataset(&ds.records, &RuleSet::empty()));
    let aug = build_graph(&annotate_dataset(&ds.records, &RuleSet::default_pack()));
    (base, aug)
}

fn metric_arithmetic() -> Check {
    let cases = [(0.696, 0.821), (0.521, 0.685), (0.737, 0.849), (0.576, 0.731), (0.095, 0.174)];
    for (r, want) in cases {
        let got = evalkbp::f1(1.0, r);
        ensure((got - want).abs() <= 0.001, || format!("f1(1.00, {r}) = {got:.4}, expected {want}"))?;
    }
    Ok(format!("{} f1 values within 0.001", cases.len()))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn fd_guarantee() -> Check {
    let mut r = rng::seeded(2024);
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let n = r.random_range(10..=200);
        let d = r.random_range(2..=50);
        let ell = [4, 8, 16][t % 3];
        let a = Matrix::from_vec(n, d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let b = frequent_directions(&a, ell).map_err(|e| e.to_string())?;
        let da = DMatrix::from_row_slice(n, d, a.data());
        let db = DMatrix::from_row_slice(b.rows(), d, b.data());
        let err = spectral_norm(&(da.transpose() * &da - db.transpose() * &db));
        let bound = 2.0 * a.frobenius_norm().powi(2) / ell as f64;
        ensure(err <= bound * (1.0 + 1e-9), || {
            format!("matrix {t} ({n}x{d}, l={ell}): error {err:.4} > bound {bound:.4}")
        })?;
        worst = worst.max(err / bound);
    }
    Ok(format!("50 matrices, worst error/bound ratio {worst:.3}"))
}

fn sample(table: &Table) -> Result<SampleResult, String> {
    let cfg = SketchConfig {
        seed: 42,
        ..SketchConfig::default()
    };
    representative_sample(table, &cfg).map_err(|e| e.to_string())
}

/// Checks coverage of every removed row and counts identical-row clusters,
/// asserting each has one representative.
fn check_selection(res: &SampleResult) -> Result<usize, String> {
    let m = &res.encoded.matrix;
    let row_of = |id: usize| m.row(res.encoded.row_ids.iter().position(|&r| r == id).unwrap());
    let mut identical = 0;
    for sel in &res.selections {
        for &(id, rep) in &sel.removed {
            let c = cosine(row_of(id), row_of(rep)).map_err(|e| e.to_string())?;
            ensure(c >= 0.85 - 1e-12, || format!("row {id} has cosine {c:.3} to representative {rep}"))?;
        }
        let members: Vec<usize> = sel.removed.iter().map(|&(id, _)| id).chain(sel.dropped.iter().copied()).collect();
        if members.len() > 1 && members.iter().all(|&i| row_of(i) == row_of(members[0])) {
            identical += 1;
            ensure(sel.picks.len() == 1, || format!("identical cluster got {} representatives", sel.picks.len()))?;
        }
    }
    Ok(identical)
}

fn duplicated_table() -> Table {
    let mut t = Table::new(
        ["religion", "residence"]
            .iter()
            .map(|c| Column {
                name: c.to_string(),
                kind: AttributeKind::Categorical,
            })
            .collect(),
    );
    let groups = [("Quaker", "Boston"), ("Hindu", "Mumbai"), ("Catholic", "Madrid")];
    for i in 0..24 {
        let (a, b) = groups[i % 3];
        t.push_row(i, vec![Some(a.into()), Some(b.into())], 0);
    }
    t
}

fn sampling() -> Check {
    let (base, aug) = corpus_graphs();
    let rb = sample(&features(&base))?;
    let ra = sample(&features(&aug))?;
    let rd = sample(&duplicated_table())?;
    let identical = check_selection(&rb)? + check_selection(&ra)? + check_selection(&rd)?;
    ensure(identical > 0, || "no identical-row cluster was exercised".into())?;
    let (nb, na) = (rb.selected.len(), ra.selected.len());
    ensure(na > nb, || format!("augmented {na} representatives, baseline {nb}"))?;
    Ok(format!("coverage holds, {identical} identical clusters with one pick, representatives {nb} -> {na}"))
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                credit += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    credit / pairs
}

fn link_prediction() -> Check {
    let g = LinkGraph::barbell(10, 2);
    let feats = NodeFeatures::constant(g.node_count());
    let m = linkpred::benchmark(
        &g,
        &feats,
        &[ModelKind::Gcn, ModelKind::Pgnn],
        &[1, 2, 3, 4, 5],
        0.2,
        &Hyperparams::default(),
    )
    .map_err(|e| e.to_string())?;
    let (gcn, pgnn) = (&m[0], &m[1]);
    ensure(pgnn.roc_auc > gcn.roc_auc, || {
        format!("mean AUC PGNN {:.4} <= GCN {:.4}", pgnn.roc_auc, gcn.roc_auc)
    })?;
    ensure(pgnn.std_dev < gcn.std_dev, || {
        format!("std PGNN {:.4} >= GCN {:.4}", pgnn.std_dev, gcn.std_dev)
    })?;
    let mut r = rng::seeded(99);
    for f in 0..100 {
        let n = r.random_range(2..60);
        // coarse scores so ties occur
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8u8)) / 8.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let got = linkpred::roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = brute_auc(&scores, &labels);
        ensure((got - want).abs() <= 1e-12, || format!("fixture {f}: auc {got} vs oracle {want}"))?;
    }
    Ok(format!(
        "AUC GCN {:.4}±{:.4}, PGNN {:.4}±{:.4}; 100 AUC fixtures match",
        gcn.roc_auc, gcn.std_dev, pgnn.roc_auc, pgnn.std_dev
    ))
}

/// Cutting one hop-0 link moves exactly the dependent hop-1 true positives to
/// false negatives and removes their false positives.
fn propagation_identity(g: &PropertyGraph, queries: &[SlotQuery]) -> Result<usize, String> {
    let hop1: Vec<SlotQuery> = queries.iter().filter(|q| q.hop == 1).cloned().collect();
    let before = evaluate_hop(g, &hop1).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for q0 in queries.iter().filter(|q| q.hop == 0) {
        let Some(s) = g.lookup(&q0.subject) else { continue };
        for answer in retrieve(g, q0) {
            let Some(a) = g.lookup(&answer) else { continue };
            let mut cut = g.clone();
            cut.remove_edges_between(s, a);
            let dependent: Vec<&SlotQuery> = hop1
                .iter()
                .filter(|q| {
                    let via = q.via.as_ref().expect("hop-1 queries carry their hop-0 parent");
                    let parent = SlotQuery {
                        hop: 0,
                        subject: via.subject.clone(),
                        slot: via.slot.clone(),
                        gold: BTreeSet::new(),
                        via: None,
                    };
                    let who = kbpop::text::normalize_person(&q.subject);
                    retrieve(g, &parent).contains(&who) && !retrieve(&cut, &parent).contains(&who)
                })
                .collect();
            let dep_tp: usize = dependent.iter().map(|q| score_query(g, q).0).sum();
            let dep_fp: usize = dependent.iter().map(|q| score_query(g, q).1).sum();
            let after = evaluate_hop(&cut, &hop1).map_err(|e| e.to_string())?;
            ensure(
                after.tp + dep_tp == before.tp && after.fn_ == before.fn_ + dep_tp && after.fp + dep_fp == before.fp,
                || format!("identity fails cutting {} / {answer}", q0.subject),
            )?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn recall_movement() -> Check {
    let (base, aug) = corpus_graphs();
    let queries = evalkbp::load_queries(data_dir().join("queries.tsv")).map_err(|e| e.to_string())?;
    let gold = evalkbp::load_protected_gold(data_dir().join("protected_gold.tsv")).map_err(|e| e.to_string())?;
    let mb = evalkbp::evaluate(&base, &queries, Some(&gold)).map_err(|e| e.to_string())?;
    let ma = evalkbp::evaluate(&aug, &queries, Some(&gold)).map_err(|e| e.to_string())?;
    let pb = protected_recall(&base, &gold).map_err(|e| e.to_string())?.aggregate;
    let pa = ma.protected.as_ref().expect("gold given").aggregate;
    for (name, b, a) in [("hop0", &mb.hop0, &ma.hop0), ("hop1", &mb.hop1, &ma.hop1), ("protected", &pb, &pa)] {
        ensure(a.recall > b.recall, || format!("{name} recall {:.3} -> {:.3}", b.recall, a.recall))?;
        ensure(a.precision == 1.0 && b.precision == 1.0, || {
            format!("{name} precision {:.3} / {:.3}", b.precision, a.precision)
        })?;
    }
    let checked = propagation_identity(&aug, &queries)?;
    ensure(checked > 0, || "no hop-0 link to cut".into())?;
    Ok(format!(
        "recall hop0 {:.3}->{:.3}, hop1 {:.3}->{:.3}, protected {:.3}->{:.3}; identity over {checked} cuts",
        mb.hop0.recall, ma.hop0.recall, mb.hop1.recall, ma.hop1.recall, pb.recall, pa.recall
    ))
}

fn random_forest(d: usize, seed: u64) -> (fairness::ForestModel, Matrix) {
    let mut r = rng::seeded(seed);
    let n = 150;
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| f64::from(u8::from(r.random_bool(0.5)))).collect()).unwrap();
    let y: Vec<usize> = x.row_iter().map(|row| usize::from(row[0] + row[1] * row[d - 1] >= 1.0)).collect();
    let params = ForestParams {
        n_trees: 20,
        ..ForestParams::default()
    };
    (train_forest(&x, &y, &params, seed).unwrap(), x)
}

fn fairness_suite() -> Check {
    // efficiency of exact Shapley values
    let mut worst: f64 = 0.0;
    for (d, seed) in [(3, 1), (4, 2), (5, 3), (6, 4), (8, 5)] {
        let (m, x) = random_forest(d, seed);
        let bg = x.select_rows(&(0..20).collect::<Vec<_>>());
        for i in 0..5 {
            let e = shap_values(&m, x.row(i), &bg, ShapMode::Exact, 0).map_err(|e| e.to_string())?;
            let res = e.efficiency_residual.unwrap_or(f64::INFINITY);
            ensure(res.abs() < 1e-6, || format!("efficiency residual {res:e} (d={d}, row {i})"))?;
            worst = worst.max(res.abs());
        }
    }

    // Monte Carlo against exact
    let (m, x) = random_forest(5, 11);
    let bg = x.select_rows(&(0..20).collect::<Vec<_>>());
    let exact = shap_values(&m, x.row(30), &bg, ShapMode::Exact, 0).map_err(|e| e.to_string())?;
    let mc = shap_values(&m, x.row(30), &bg, ShapMode::MonteCarlo { permutations: 10_000 }, 7)
        .map_err(|e| e.to_string())?;
    let dev = exact.weights.iter().zip(&mc.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(dev < 0.02, || format!("Monte Carlo deviation {dev:.4}"))?;

    // LIME against the normal equations
    let (m, x) = random_forest(12, 13);
    let row = x.row(0);
    let n = 400;
    let e = fairness::lime_explain(&m, row, &LimeParams { n_samples: n, kernel_width: None }, 17)
        .map_err(|e| e.to_string())?;
    let (p, flips) = perturbations(row, n, 17);
    let d = row.len();
    let width = 0.75 * (d as f64).sqrt();
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { p[(i, j - 1)] });
    let w = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        flips.iter().map(|&h| (-(h as f64) / (width * width)).exp()),
    ));
    let y = DVector::from_iterator(n, p.row_iter().map(|r| m.output(r)));
    let xtw = design.transpose() * &w;
    let beta = (&xtw * &design).lu().solve(&(&xtw * y)).ok_or("singular normal equations")?;
    let lime_dev = std::iter::once((beta[0] - e.intercept).abs())
        .chain((0..d).map(|j| (beta[j + 1] - e.weights[j]).abs()))
        .fold(0.0, f64::max);
    ensure(lime_dev < 1e-8, || format!("LIME deviates from oracle by {lime_dev:e}"))?;

    // permutation importance of an independent protected attribute
    let mut t = Table::new(
        ["gender", "family_relation", "religion"]
            .iter()
            .map(|c| Column {
                name: c.to_string(),
                kind: AttributeKind::Categorical,
            })
            .collect(),
    );
    let mut r = rng::seeded(77);
    for i in 0..300 {
        let g = ["female", "male"][r.random_range(0..2)];
        let f = ["none", "spouse", "sibling", "parent"][r.random_range(0..4)];
        let rel = ["a", "b", "c"][r.random_range(0..3)];
        t.push_row(i, vec![Some(g.into()), Some(f.into()), Some(rel.into())], u8::from(f == "none"));
    }
    let fm = FeatureMatrix::from_table(&t).map_err(|e| e.to_string())?;
    let params = ForestParams {
        n_trees: 40,
        ..ForestParams::default()
    };
    let forest = train_forest(&fm.matrix, &fm.labels, &params, 3).map_err(|e| e.to_string())?;
    let (_, imp) = permutation_importance(&forest, &fm.matrix, &fm.labels, &fm.groups, 10, 9).map_err(|e| e.to_string())?;
    let gi = fm.groups.iter().position(|(n, _)| n == "gender").unwrap();
    ensure(imp[gi].abs() <= 0.01, || format!("gender importance {:.4}", imp[gi]))?;

    // the related-class row from the same confusion counts
    let rep = report_from_confusion(&[vec![19, 1], vec![0, 40]], &fairness::CLASS_LABELS).map_err(|e| e.to_string())?;
    let c = &rep.classes[0];
    for (name, got, want) in [("precision", c.precision, 1.00), ("recall", c.recall, 0.95), ("f1", c.f1, 0.98)] {
        ensure((got - want).abs() <= 0.01, || format!("report {name} {got:.3}, expected {want}"))?;
    }
    Ok(format!(
        "residual max {worst:.1e}, MC dev {dev:.4}, LIME dev {lime_dev:.1e}, gender importance {:.4}, row {:.2}/{:.2}/{:.2}",
        imp[gi], c.precision, c.recall, c.f1
    ))
}

fn determinism() -> Check {
    let mut manifests = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut raw = RawConfig::load(data_dir().join("pipeline.conf")).map_err(|e| e.to_string())?;
        raw.set("paths.output", dir.path().to_str().unwrap()).map_err(|e| e.to_string())?;
        let cfg = raw.pipeline().map_err(|e| e.to_string())?;
        manifests.push(run_pipeline(&cfg).map_err(|e| e.to_string())?);
    }
    ensure(manifests[0] == manifests[1], || "manifests differ between runs".into())?;
    let n = manifests[0].artifacts.len();
    ensure(n == pipeline::ARTIFACTS.len(), || format!("{n} artifacts written"))?;
    Ok(format!("{n} artifact hashes identical across two runs"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 7] = [
        ("metric arithmetic", metric_arithmetic),
        ("frequent-directions bound", fd_guarantee),
        ("representative sampling", sampling),
        ("link prediction ordering", link_prediction),
        ("augmentation recall movement", recall_movement),
        ("fairness suite", fairness_suite),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
