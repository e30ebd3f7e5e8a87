//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines print in a fixed
//! order. Any failure makes the process exit non-zero.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oodknn_core::eval::{acceptance_rate, auroc, calibrate, fpr_at_tpr};
use oodknn_core::scorers::{score_msp, softmax};
use oodknn_core::store::{read_matrix, write_matrix, AnyMatrix, LogitMatrix, StoredMatrix};
use oodknn_core::{EmbeddingMatrix, Error, EvalSummary, FittedScorer, KnnIndex, ScoreInput, ScorerConfig};
use oodknn_oracles::{brute_knn, pairwise_auroc, random_unit_rows, unit_cluster, TextbookLof};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normalized(rows: &[Vec<f32>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(rows).unwrap().l2_normalize().unwrap()
}

fn stored_rows(m: &EmbeddingMatrix) -> Vec<Vec<f32>> {
    m.as_slice().chunks(m.cols()).map(<[f32]>::to_vec).collect()
}

fn knn_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6e6e);
    let mut queries = 0;
    for inst in 0..100 {
        let n = rng.random_range(1..=500);
        let dim = rng.random_range(1..=16);
        let k = rng.random_range(1..=n.min(10));
        let reference = normalized(&random_unit_rows(n, dim, rng.random()));
        let rows = stored_rows(&reference);
        let index = KnnIndex::build(reference, k).map_err(|e| e.to_string())?;
        for q in random_unit_rows(10, dim, rng.random()) {
            let got = index.query(&q, k).map_err(|e| e.to_string())?;
            let want = brute_knn(&rows, &q, k);
            for (j, &(d, _)) in want.iter().enumerate() {
                check((got.distances[j] - d).abs() <= 1e-5, || {
                    format!("instance {inst}: rank {j} distance {} vs {d}", got.distances[j])
                })?;
            }
            let mut a = got.indices.clone();
            let mut b: Vec<usize> = want.iter().map(|&(_, i)| i).collect();
            a.sort_unstable();
            b.sort_unstable();
            check(a == b, || format!("instance {inst}: neighbor sets differ"))?;
            queries += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("100 instances, {queries} queries, {:.2}s", elapsed.as_secs_f64()))
}

fn auroc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa0c);
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let levels = rng.random_range(2..=12);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let n = rng.random_range(1..=200);
            (0..n).map(|_| f64::from(rng.random_range(0..levels)) * 0.5).collect()
        };
        let id = draw(&mut rng);
        let ood = draw(&mut rng);
        let diff = (auroc(&id, &ood).map_err(|e| e.to_string())? - pairwise_auroc(&id, &ood)).abs();
        worst = worst.max(diff);
        check(diff <= 1e-12, || format!("instance {inst}: off by {diff:e}"))?;
    }
    Ok(format!("100 tied instances, max error {worst:e}"))
}

fn fpr95_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x95);
    for inst in 0..200 {
        let n = rng.random_range(1..=500);
        let tied = rng.random_bool(0.5);
        let id: Vec<f64> = (0..n)
            .map(|_| if tied { f64::from(rng.random_range(0..8)) } else { rng.random::<f64>() * 10.0 - 5.0 })
            .collect();
        let t = calibrate(&id, 0.95).map_err(|e| e.to_string())?;
        let rate = acceptance_rate(&id, &t);
        check(rate >= 0.95, || format!("instance {inst} (n={n}): accepts {rate}"))?;
    }
    let ids: Vec<f64> = (1..=100).map(f64::from).collect();
    let fpr = fpr_at_tpr(&ids, &[6.0, 5.0, 0.0, 0.0], 0.95).map_err(|e| e.to_string())?;
    check(fpr == 0.25, || format!("fixture FPR {fpr}"))?;
    Ok("200 fuzzed ID sets accept >= 95%; fixture FPR = 0.25".into())
}

fn write_rows(path: &Path, rows: &[Vec<f32>]) {
    write_matrix(&EmbeddingMatrix::from_rows(rows).unwrap(), path).unwrap();
}

fn write_manifest(dir: &Path) {
    std::fs::write(
        dir.join("manifest.tsv"),
        "id-train\tid\ttrain.oode\nid-test\tid\ttest.oode\nood-test\tood\tood.oode\n",
    )
    .unwrap();
}

/// Runs `oodknn eval` and returns the parsed summary.
fn cli_eval(dir: &Path, extra: &[&str], out: &str) -> Result<EvalSummary, String> {
    let out_dir = dir.join(out);
    let o = Command::new(env!("CARGO_BIN_EXE_oodknn"))
        .arg("eval")
        .arg("--manifest")
        .arg(dir.join("manifest.tsv"))
        .arg("--out")
        .arg(&out_dir)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    let json = std::fs::read_to_string(out_dir.join("report.json")).map_err(|e| e.to_string())?;
    EvalSummary::from_json(&json).map_err(|e| e.to_string())
}

fn synthetic_separation() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (dim, spread) = (64, 0.05);
    write_rows(&dir.path().join("train.oode"), &unit_cluster(2000, dim, 0, spread, 1));
    write_rows(&dir.path().join("test.oode"), &unit_cluster(2000, dim, 0, spread, 2));
    write_rows(&dir.path().join("ood.oode"), &unit_cluster(500, dim, 1, spread, 3));
    write_manifest(dir.path());
    let summary = cli_eval(dir.path(), &["--method", "knn", "--k", "5"], "run")?;
    let r = &summary.reports[0];
    let elapsed = start.elapsed();
    check(r.auroc >= 0.99, || format!("AUROC {}", r.auroc))?;
    check(r.fpr_at_tpr95 <= 0.05, || format!("FPR@TPR95 {}", r.fpr_at_tpr95))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "AUROC {:.4}, FPR@TPR95 {:.4}, {:.2}s",
        r.auroc,
        r.fpr_at_tpr95,
        elapsed.as_secs_f64()
    ))
}

fn identical_distribution_null() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path());
    let (dim, spread) = (64, 0.05);
    let mut aurocs = Vec::new();
    let mut fprs = Vec::new();
    for seed in 0..10u64 {
        let base = 1000 * (seed + 1);
        write_rows(&dir.path().join("train.oode"), &unit_cluster(2000, dim, 0, spread, base));
        write_rows(&dir.path().join("test.oode"), &unit_cluster(2000, dim, 0, spread, base + 1));
        write_rows(&dir.path().join("ood.oode"), &unit_cluster(2000, dim, 0, spread, base + 2));
        let r = cli_eval(dir.path(), &["--k", "5"], &format!("null{seed}"))?.reports[0].clone();
        check((r.auroc - 0.5).abs() <= 0.03, || format!("seed {seed}: AUROC {}", r.auroc))?;
        check((r.fpr_at_tpr95 - 0.95).abs() <= 0.03, || format!("seed {seed}: FPR {}", r.fpr_at_tpr95))?;
        aurocs.push(r.auroc);
        fprs.push(r.fpr_at_tpr95);
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("[{lo:.4}, {hi:.4}]")
    };
    Ok(format!("10 seeds, AUROC in {}, FPR in {}", range(&aurocs), range(&fprs)))
}

fn lof_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10f);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let n = rng.random_range(2..=100);
        let dim = rng.random_range(1..=8);
        let k = rng.random_range(1..=10.min(n - 1));
        let train = normalized(&random_unit_rows(n, dim, rng.random()));
        let oracle = TextbookLof::new(stored_rows(&train), k);
        let scorer = FittedScorer::fit(ScorerConfig::Lof { k }, &train).map_err(|e| e.to_string())?;
        for q in random_unit_rows(10, dim, rng.random()) {
            let got = -scorer.score_embedding(&q).map_err(|e| e.to_string())?;
            let want = oracle.lof(&q);
            let diff = (got - want).abs();
            worst = worst.max(diff);
            check(diff <= 1e-8, || format!("instance {inst} (n={n}, d={dim}, k={k}): {got} vs {want}"))?;
        }
    }
    Ok(format!("50 instances, max error {worst:e}"))
}

fn pca_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ca);
    let mut worst_score = 0.0f64;
    let mut worst_orth = 0.0f64;
    for _ in 0..20 {
        let dim = rng.random_range(1..=32);
        let n = rng.random_range(dim + 1..=200);
        let train = normalized(&random_unit_rows(n, dim, rng.random()));
        let scorer = FittedScorer::fit(ScorerConfig::Pca { n_components: dim }, &train).map_err(|e| e.to_string())?;
        let p = scorer.pca().ok_or("not a pca scorer")?.components();
        for i in 0..dim {
            for j in 0..dim {
                let dot: f64 = p[i].iter().zip(&p[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((dot - want).abs());
            }
        }
        for q in random_unit_rows(20, dim, rng.random()) {
            worst_score = worst_score.max(scorer.score_embedding(&q).map_err(|e| e.to_string())?.abs());
        }
    }
    check(worst_orth <= 1e-8, || format!("P^T P off identity by {worst_orth:e}"))?;
    check(worst_score <= 1e-8, || format!("full-rank score {worst_score:e}"))?;
    Ok(format!("20 fits, max |score| {worst_score:e}, max |P^T P - I| {worst_orth:e}"))
}

fn msp_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x359);
    for inst in 0..1000 {
        let c = rng.random_range(2..=100);
        let scale = [1.0f32, 10.0, 1000.0][inst % 3];
        let logits: Vec<f32> = (0..c).map(|_| (rng.random::<f32>() - 0.5) * 2.0 * scale).collect();
        let sum: f64 = softmax(&logits).iter().sum();
        check((sum - 1.0).abs() <= 1e-12, || format!("instance {inst}: softmax sums to {sum}"))?;
    }
    let half = score_msp(&[0.0, 0.0]).map_err(|e| e.to_string())?;
    check(half == 0.5, || format!("(0,0) -> {half}"))?;
    let one = score_msp(&[1000.0, 0.0]).map_err(|e| e.to_string())?;
    check(one == 1.0, || format!("(1000,0) -> {one}"))?;
    let scorer = FittedScorer::fit(ScorerConfig::Msp, &normalized(&[vec![1.0]])).map_err(|e| e.to_string())?;
    let batch = LogitMatrix::from_rows(&[vec![0.0, 0.0], vec![1000.0, 0.0]]).unwrap();
    let v = scorer.score_batch(ScoreInput::Logits(&batch), "msp").map_err(|e| e.to_string())?;
    check(v.scores == [0.5, 1.0], || format!("batch {:?}", v.scores))?;
    Ok("1000 softmax sums within 1e-12; (0,0) -> 0.5; (1000,0) -> 1.0".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_rows(&dir.path().join("train.oode"), &unit_cluster(800, 32, 0, 0.1, 7));
    write_rows(&dir.path().join("test.oode"), &unit_cluster(400, 32, 0, 0.1, 8));
    write_rows(&dir.path().join("ood.oode"), &unit_cluster(300, 32, 2, 0.1, 9));
    write_manifest(dir.path());
    for (name, args) in [
        ("knn", vec!["--method", "knn", "--k", "5"]),
        ("iforest", vec!["--method", "iforest", "--seed", "42"]),
        ("loda", vec!["--method", "loda", "--seed", "42"]),
    ] {
        cli_eval(dir.path(), &args, &format!("{name}-a"))?;
        cli_eval(dir.path(), &args, &format!("{name}-b"))?;
        for file in ["report.txt", "report.json", "scores/ood-test.ood.scores"] {
            let a = std::fs::read(dir.path().join(format!("{name}-a")).join(file)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dir.path().join(format!("{name}-b")).join(file)).map_err(|e| e.to_string())?;
            check(a == b, || format!("{name}: {file} differs between runs"))?;
        }
    }

    let index = KnnIndex::build(normalized(&random_unit_rows(1000, 24, 1)), 10).map_err(|e| e.to_string())?;
    let queries = normalized(&random_unit_rows(777, 24, 2));
    let with_threads = |t: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .unwrap()
            .install(|| index.batch_query(&queries, 10))
    };
    let one = with_threads(1).map_err(|e| e.to_string())?;
    for t in [2, 5, 16] {
        check(with_threads(t).map_err(|e| e.to_string())? == one, || format!("{t} workers differ from 1"))?;
    }
    Ok("byte-identical reports for knn/iforest/loda; batch query equal under 1, 2, 5, 16 workers".into())
}

fn random_finite(rng: &mut ChaCha8Rng) -> f32 {
    loop {
        let v = f32::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

fn format_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf0);
    for inst in 0..1000 {
        let rows = rng.random_range(1..=40);
        let cols = rng.random_range(1..=40);
        let data: Vec<f32> = (0..rows * cols).map(|_| random_finite(&mut rng)).collect();
        let path = dir.path().join(format!("m{}.oode", inst % 8));
        let logits = inst % 2 == 1;
        if logits {
            write_matrix(&LogitMatrix::new(rows, cols, data.clone()).unwrap(), &path)
        } else {
            write_matrix(&EmbeddingMatrix::new(rows, cols, data.clone()).unwrap(), &path)
        }
        .map_err(|e| e.to_string())?;
        let back = read_matrix(&path).map_err(|e| e.to_string())?;
        let (r, c, slice) = match (&back, logits) {
            (AnyMatrix::Embeddings(m), false) => (m.rows(), m.cols(), m.as_slice()),
            (AnyMatrix::Logits(m), true) => (m.rows(), m.cols(), m.as_slice()),
            _ => return Err(format!("instance {inst}: kind changed")),
        };
        let same = r == rows && c == cols && slice.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits());
        check(same, || format!("instance {inst}: contents changed"))?;

        let bytes = std::fs::read(&path).unwrap();
        let cut = rng.random_range(1..=bytes.len());
        std::fs::write(&path, &bytes[..bytes.len() - cut]).unwrap();
        match read_matrix(&path) {
            Err(Error::Corrupt(_)) => {}
            other => return Err(format!("instance {inst}: truncated by {cut} bytes gave {other:?}")),
        }
    }
    Ok("1000 matrices bit-exact; every truncation rejected as corrupt".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("knn exactness", knn_exactness),
        ("auroc oracle", auroc_oracle),
        ("fpr95 contract", fpr95_contract),
        ("synthetic separation", synthetic_separation),
        ("identical-distribution null", identical_distribution_null),
        ("lof oracle", lof_oracle),
        ("pca completeness", pca_completeness),
        ("msp properties", msp_properties),
        ("determinism", determinism),
        ("format round-trip", format_round_trip),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} primary criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
