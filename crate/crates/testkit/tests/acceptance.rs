//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! Criteria 1-5 read the FNC-1 CSVs from `$FNC_DATA_DIR` (default
//! `<workspace>/data/fnc-1`). `FNC_EMBEDDINGS` optionally points at a word2vec
//! file, and `FNC_FULL=1` trains at 1000 rounds instead of the CI setting.

use std::collections::HashMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use fnc_stance::corpus::Stance;
use fnc_stance::eval::{fnc_score, render_report, write_predictions, ReportFormat, ScoreReport};
use fnc_stance::features::{write_feature_cache, FeatureConfig, FeatureResources, FeatureRow, Sidecars};
use fnc_stance::gbdt::{find_best_split, fit, grad_hess, softmax, TrainParams, TreeNode};
use fnc_stance::pipeline::{train_on_features, Oversample, StagePlan, Variant};
use fnc_stance::simil::{load_embeddings, load_embeddings_filtered, wmd, EmbeddingTable, WmdConfig};
use fnc_stance::topics::{lda_train, LdaParams};
use fnc_stance::{Dataset, TrainedPipeline};
use fnc_testkit::oracle::{
    argmax, count_stance_labels, exhaustive_split, numeric_derivatives, purity, random_data, rel_close,
    two_topic_corpus, wmd_lp,
};
use fnc_testkit::synth::{generate, label_only_dataset, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn data_dir() -> PathBuf {
    std::env::var_os("FNC_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .ancestors()
            .nth(2)
            .unwrap()
            .join("data/fnc-1")
    })
}

struct Official {
    train: Dataset,
    test: Dataset,
}

fn official_files() -> [PathBuf; 4] {
    let d = data_dir();
    [
        d.join("train_stances.csv"),
        d.join("train_bodies.csv"),
        d.join("competition_test_stances.csv"),
        d.join("competition_test_bodies.csv"),
    ]
}

fn load_official() -> Result<Official, String> {
    let [ts, tb, es, eb] = official_files();
    if let Some(missing) = [&ts, &tb, &es, &eb].into_iter().find(|p| !p.is_file()) {
        return Err(format!("official data not found: {}", missing.display()));
    }
    let train = Dataset::load(&ts, &tb, true).map_err(|e| e.to_string())?;
    let test = Dataset::load(&es, &eb, true).map_err(|e| e.to_string())?;
    Ok(Official { train, test })
}

// Published test-split confusion matrices (rows truth, columns prediction).
const ONE_STAGE: [[usize; 4]; 4] = [
    [144, 4, 1607, 148],
    [12, 1, 522, 162],
    [190, 2, 3874, 398],
    [2, 0, 246, 18101],
];
const TWO_STAGE: [[usize; 4]; 4] = [
    [27, 0, 1733, 143],
    [9, 0, 533, 155],
    [45, 0, 4060, 359],
    [5, 0, 366, 17978],
];
const RESAMPLED: [[usize; 4]; 4] = [
    [25, 21, 1718, 139],
    [4, 7, 529, 157],
    [33, 84, 3993, 354],
    [6, 3, 366, 17974],
];

fn expand(m: &[[usize; 4]; 4]) -> (Vec<Stance>, Vec<Stance>) {
    let (mut t, mut p) = (Vec::new(), Vec::new());
    for (i, row) in m.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            t.extend(std::iter::repeat_n(Stance::ALL[i], n));
            p.extend(std::iter::repeat_n(Stance::ALL[j], n));
        }
    }
    (t, p)
}

fn criterion_1() -> Outcome {
    let path = &official_files()[2];
    let (truth, unrelated, source) = if path.is_file() {
        let ds = match Dataset::load(path, &official_files()[3], true) {
            Ok(ds) => ds,
            Err(e) => return Outcome::new(false, e.to_string()),
        };
        let counted = count_stance_labels(path).get("unrelated").copied().unwrap_or(0);
        let truth: Vec<Stance> = ds.labels().into_iter().map(Option::unwrap).collect();
        (truth, counted, "official test labels")
    } else {
        let (truth, _) = expand(&ONE_STAGE);
        let counted = ONE_STAGE[3].iter().sum();
        (truth, counted, "labels rebuilt from published confusion row sums")
    };
    let start = Instant::now();
    let perfect = fnc_score(&truth, &truth).unwrap();
    let all_unrelated = fnc_score(&truth, &vec![Stance::Unrelated; truth.len()]).unwrap();
    let elapsed = start.elapsed();
    let mut pass = perfect.0 == 11651.25 && perfect.1 == 11651.25 && all_unrelated.0 == 0.25 * unrelated as f64;
    let mut detail = format!(
        "{source}; perfect {} / {}, all-unrelated {} vs 0.25 x {unrelated}",
        perfect.0, perfect.1, all_unrelated.0
    );
    for (name, m, published) in [
        ("1-stage", &ONE_STAGE, 9128.5),
        ("2-stage", &TWO_STAGE, 9161.5),
        ("resampled", &RESAMPLED, 9115.75),
    ] {
        let (t, p) = expand(m);
        let s = fnc_score(&t, &p).unwrap().0;
        pass &= s == published;
        detail.push_str(&format!("; {name} matrix {s}"));
    }
    pass &= within(elapsed, 1.0);
    Outcome::new(pass, format!("{detail}; {:.3}s", elapsed.as_secs_f64()))
}

const TABLE1: [usize; 4] = [3678, 840, 8909, 36545];

fn criterion_2() -> Outcome {
    // the resampling arithmetic can be checked on a label-only stand-in
    let stand_in = label_only_dataset(TABLE1);
    let os = stand_in.oversample(Stance::Disagree, TABLE1[0], 0).unwrap();
    let synthetic = format!(
        "oversampling on Table-1 label counts gives {} / {:?}",
        os.len(),
        os.label_counts()
    );
    let official = match load_official() {
        Ok(o) => o,
        Err(e) => return Outcome::new(false, format!("{e}; {synthetic}")),
    };
    let counts = official.train.label_counts();
    let os = official.train.oversample(Stance::Disagree, counts[0], 0).unwrap();
    let oc = os.label_counts();
    let pass = official.train.len() == 49_972 && counts == TABLE1 && os.len() == 52_810 && oc[1] == 3678;
    Outcome::new(
        pass,
        format!(
            "train {} {:?}; oversampled {} {:?}",
            official.train.len(),
            counts,
            os.len(),
            oc
        ),
    )
}

struct OfficialFeatures {
    train: Vec<FeatureRow>,
    test: Vec<FeatureRow>,
    fingerprint: String,
    note: String,
    seconds: f64,
}

fn official_features() -> &'static Result<OfficialFeatures, String> {
    static CELL: OnceLock<Result<OfficialFeatures, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let o = load_official()?;
        let start = Instant::now();
        let mut resources =
            FeatureResources::fit(&o.train, FeatureConfig::default(), None).map_err(|e| e.to_string())?;
        let mut note = String::from("no embeddings");
        if let Some(p) = std::env::var_os("FNC_EMBEDDINGS") {
            let mut texts: Vec<&str> = Vec::new();
            for ds in [&o.train, &o.test] {
                texts.extend(ds.instances().iter().map(|i| i.headline.as_str()));
                texts.extend(ds.bodies().values().map(|b| b.text.as_str()));
            }
            let vocab = resources.embedding_vocabulary(texts);
            let table: EmbeddingTable<f32> = load_embeddings_filtered(&p, Some(&vocab)).map_err(|e| e.to_string())?;
            resources = resources
                .with_embeddings(Arc::new(table), Some(PathBuf::from(&p)))
                .map_err(|e| e.to_string())?;
            note = format!("embeddings {}", Path::new(&p).display());
        }
        let train = resources
            .extract_dataset(&o.train, &Sidecars::default())
            .map_err(|e| e.to_string())?;
        let test = resources
            .extract_dataset(&o.test, &Sidecars::default())
            .map_err(|e| e.to_string())?;
        Ok(OfficialFeatures {
            train,
            test,
            fingerprint: resources.fingerprint().to_string(),
            note,
            seconds: start.elapsed().as_secs_f64(),
        })
    })
}

fn full_mode() -> bool {
    std::env::var("FNC_FULL").is_ok_and(|v| v == "1")
}

fn official_params() -> TrainParams {
    TrainParams {
        n_rounds: if full_mode() { 1000 } else { 300 },
        ..Default::default()
    }
}

fn evaluate(f: &OfficialFeatures, plan: &StagePlan) -> Result<ScoreReport, String> {
    let p = train_on_features(plan, &f.train, &f.fingerprint).map_err(|e| e.to_string())?;
    let pred = p.predict(&f.test, &f.fingerprint).map_err(|e| e.to_string())?;
    let truth: Vec<Stance> = f.test.iter().map(|r| r.stance.unwrap()).collect();
    ScoreReport::new(&truth, &pred).map_err(|e| e.to_string())
}

fn official_report(variant: Variant, oversample: bool) -> &'static Result<ScoreReport, String> {
    static CELLS: OnceLock<[OnceLock<Result<ScoreReport, String>>; 3]> = OnceLock::new();
    let cells = CELLS.get_or_init(Default::default);
    let slot = match (variant, oversample) {
        (Variant::TwoStage, false) => 0,
        (Variant::OneStage, _) => 1,
        (Variant::TwoStage, true) => 2,
    };
    cells[slot].get_or_init(|| {
        let f = official_features().as_ref().map_err(Clone::clone)?;
        let mut plan = StagePlan::new(variant, official_params());
        plan.stage2_params.seed = 1;
        if oversample {
            plan.oversample = Some(Oversample::disagree_to_agree(0));
        }
        evaluate(f, &plan)
    })
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let report = match official_report(Variant::TwoStage, false) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.clone()),
    };
    let f = official_features().as_ref().unwrap();
    let (floor, limit) = if full_mode() {
        (0.752, 45.0 * 60.0)
    } else {
        (0.74, 10.0 * 60.0)
    };
    let secs = start.elapsed().as_secs_f64() + f.seconds;
    let pass = report.relative >= floor && secs <= limit;
    let target = (report.relative - 0.786).abs() <= 0.015;
    Outcome::new(
        pass,
        format!(
            "{} rounds, {}: score {} / {} = {:.4} (floor {floor}, target 0.786 +/- 0.015 {}); {secs:.0}s",
            official_params().n_rounds,
            f.note,
            report.score,
            report.max_score,
            report.relative,
            if target { "met" } else { "missed" },
        ),
    )
}

fn criterion_4() -> Outcome {
    let two = official_report(Variant::TwoStage, false);
    let one = official_report(Variant::OneStage, false);
    match (two, one) {
        (Ok(two), Ok(one)) => Outcome::new(
            two.relative >= one.relative - 0.005,
            format!("2-stage {:.4} vs 1-stage {:.4}", two.relative, one.relative),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e.clone()),
    }
}

fn criterion_5() -> Outcome {
    let plain = official_report(Variant::TwoStage, false);
    let resampled = official_report(Variant::TwoStage, true);
    match (plain, resampled) {
        (Ok(p), Ok(r)) => {
            let (a, b) = (p.recall(Stance::Disagree), r.recall(Stance::Disagree));
            Outcome::new(b > a, format!("disagree recall {b:.4} oversampled vs {a:.4} original"))
        }
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e.clone()),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let words = rng.gen_range(2..=12);
        let mut table = EmbeddingTable::<f64>::new(8).unwrap();
        let mut vectors = HashMap::new();
        for w in 0..words {
            let v: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            table.insert(&format!("t{w}"), &v).unwrap();
            vectors.insert(format!("t{w}"), v);
        }
        let doc = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let distinct = rng.gen_range(1..=6.min(words));
            let pool: Vec<usize> = rand::seq::index::sample(rng, words, distinct).into_vec();
            let len = rng.gen_range(distinct..=3 * distinct);
            let mut d: Vec<String> = pool.iter().map(|w| format!("t{w}")).collect();
            d.extend((distinct..len).map(|_| format!("t{}", pool[rng.gen_range(0..distinct)])));
            d
        };
        let (a, b) = (doc(&mut rng), doc(&mut rng));
        let got = wmd(&a, &b, &table, &WmdConfig::default());
        let want = wmd_lp(&a, &b, &vectors).unwrap();
        worst = worst.max((got - want).abs());
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1e-6 && within(elapsed, 10.0),
        format!(
            "50 instances, max |exact - LP| = {worst:.2e}; {:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fd_ok = true;
    for _ in 0..100 {
        let k = rng.gen_range(2..=4);
        let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y = rng.gen_range(0..k);
        let (g, h) = grad_hess(&[y], &softmax(&z), k).unwrap();
        for c in 0..k {
            let (ng, nh) = numeric_derivatives(&z, y, c);
            fd_ok &= rel_close(g[c], ng, 1e-5) && rel_close(h[c], nh, 1e-5);
        }
    }

    let (x, y) = random_data(&mut rng, 200, 4, 3);
    let model = fit(
        &x,
        &y,
        3,
        &TrainParams {
            n_rounds: 200,
            max_depth: 3,
            ..Default::default()
        },
    )
    .unwrap();
    let monotone = model.train_loss.len() == 200 && model.train_loss.windows(2).all(|w| w[1] <= w[0]);

    let mut split_ok = 0;
    for _ in 0..20 {
        let n = rng.gen_range(20..=200);
        let d = rng.gen_range(1..=5);
        let (x, y) = random_data(&mut rng, n, d, 3);
        let params = TrainParams {
            n_rounds: 1,
            max_depth: 1,
            learning_rate: 1.0,
            ..Default::default()
        };
        let g: Vec<f64> = y.iter().map(|&c| 1.0 / 3.0 - if c == 0 { 1.0 } else { 0.0 }).collect();
        let h = vec![2.0 / 9.0; n];
        let oracle = exhaustive_split(&x, &g, &h, &params);
        let tree = &fit(&x, &y, 3, &params).unwrap().trees[0][0];
        let agree = match (tree, oracle) {
            (TreeNode::Split { feature, threshold, .. }, Some((f, thr, gain))) => {
                let col: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
                let single = find_best_split(&col, &g, &h, &params).unwrap();
                *feature == f && (threshold - thr).abs() < 1e-12 && (single.gain - gain).abs() < 1e-9
            }
            (TreeNode::Leaf { .. }, None) => true,
            _ => false,
        };
        split_ok += agree as usize;
    }
    let elapsed = start.elapsed();
    Outcome::new(
        fd_ok && monotone && split_ok == 20 && within(elapsed, 60.0),
        format!(
            "finite differences {}, loss non-increasing {monotone}, splits {split_ok}/20; {:.3}s",
            if fd_ok { "ok" } else { "off" },
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (docs, truth) = two_topic_corpus(200, &mut ChaCha8Rng::seed_from_u64(8));
    let params = LdaParams {
        train_iters: 200,
        seed: 3,
        ..LdaParams::with_topics(2)
    };
    let model = lda_train(&docs, &params).unwrap();
    let thetas: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| model.infer(d, params.infer_iters, params.seed))
        .collect();
    let worst = thetas
        .iter()
        .map(|t| (t.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let assigned: Vec<usize> = thetas.iter().map(|t| argmax(t)).collect();
    let p = purity(&assigned, &truth);
    let elapsed = start.elapsed();
    Outcome::new(
        p >= 0.9 && worst <= 1e-9 && within(elapsed, 30.0),
        format!(
            "purity {p:.3}, max |sum theta - 1| = {worst:.1e}; {:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// One run of the whole pipeline on the synthetic corpus, writing every
/// artefact under `out`.
fn full_run(vectors: &Path, out: &Path) {
    let (train, test) = generate(&SynthConfig::default()).split(4);
    let config = FeatureConfig {
        lda: LdaParams {
            train_iters: 100,
            ..LdaParams::with_topics(10)
        },
        ..Default::default()
    };
    let resources = FeatureResources::fit(&train.dataset(), config, None)
        .unwrap()
        .with_embeddings(Arc::new(load_embeddings(vectors).unwrap()), Some(vectors.to_path_buf()))
        .unwrap();
    resources.save(out.join("resources")).unwrap();
    let train_rows = resources
        .extract_dataset(&train.dataset(), &Sidecars::default())
        .unwrap();
    let test_rows = resources
        .extract_dataset(&test.dataset(), &Sidecars::default())
        .unwrap();
    write_feature_cache(&train_rows, out.join("train.features.tsv")).unwrap();
    write_feature_cache(&test_rows, out.join("test.features.tsv")).unwrap();
    let mut plan = StagePlan::new(
        Variant::TwoStage,
        TrainParams {
            n_rounds: 60,
            subsample: 0.8,
            colsample: 0.8,
            seed: 5,
            ..Default::default()
        },
    );
    plan.stage2_params.seed = 6;
    plan.oversample = Some(Oversample::disagree_to_agree(0));
    train_on_features(&plan, &train_rows, resources.fingerprint())
        .unwrap()
        .save(out.join("bundle"))
        .unwrap();
    let bundle = TrainedPipeline::load(out.join("bundle")).unwrap();
    let pred = bundle.predict(&test_rows, resources.fingerprint()).unwrap();
    write_predictions(out.join("predictions.csv"), test.dataset().instances(), &pred).unwrap();
    let truth: Vec<Stance> = test_rows.iter().map(|r| r.stance.unwrap()).collect();
    let report = ScoreReport::new(&truth, &pred).unwrap();
    fs::write(out.join("report.json"), render_report(&report, ReportFormat::Json)).unwrap();
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = fs::read(&p).unwrap();
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let inputs = tempfile::tempdir().unwrap();
    let vectors = inputs.path().join("vectors.txt");
    generate(&SynthConfig::default())
        .split(4)
        .0
        .write_embeddings(&vectors, 16, 3);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    full_run(&vectors, a.path());
    full_run(&vectors, b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    let names: Vec<String> = fa.iter().map(|(p, _)| p.display().to_string()).collect();
    let differing: Vec<String> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let pass = fa.len() == fb.len() && differing.is_empty() && names.iter().any(|n| n.ends_with("model.json"));
    Outcome::new(
        pass,
        format!(
            "synthetic corpus, {} files compared, {} differ {:?}; {:.1}s",
            fa.len(),
            differing.len(),
            differing,
            start.elapsed().as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("scorer exactness", criterion_1),
        ("data plumbing", criterion_2),
        ("end-to-end score", criterion_3),
        ("architecture ordering", criterion_4),
        ("resampling effect", criterion_5),
        ("WMD oracle", criterion_6),
        ("GBDT numerics", criterion_7),
        ("LDA sanity", criterion_8),
        ("determinism", criterion_9),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        failed += !outcome.pass as usize;
        println!(
            "criterion {n} {name}: {} ({})",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
