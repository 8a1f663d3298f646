//! Acceptance suite: one line per criterion.
//!
//! Dataset-backed criteria (4-8) need `LABELGCN_DATA_DIR` pointing at a
//! directory laid out as `cora/cora.{content,cites}`,
//! `citeseer/citeseer.{content,cites}`, `pubmed/pubmed.{content,cites}` and
//! `elliptic/elliptic_txs_{features,classes,edgelist}.csv`. Without it they
//! print SKIP. Synthetic stand-ins for 4-6 always run and are labelled as such.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use labelgcn::config::{dataset_paths, manifest, parse_key_values, Command, KeyValues, RunConfig};
use labelgcn::data::{
    build_input, features_only, load_citation, load_elliptic, sample_split, visibility_for_phase, GraphDataset,
    InputMatrix, LabelEncoding, LabelVisibility, Phase, SplitSizes, SplitSpec,
};
use labelgcn::model::gradcheck::{random_case, GradCheckOptions};
use labelgcn::model::{forward_input, init_params, ModelConfig, Mode};
use labelgcn::sparse::{build_adjacency, normalize_adjacency, propagate_masked, spmm};
use labelgcn::synthetic::{random_edges, PlantedPartition};
use labelgcn::train::{
    run_inductive_elliptic, run_transductive_sweep, train, InductiveConfig, Seeds, SweepConfig, SweepReport,
    TrainConfig, TrialInputs, Variant,
};
use labelgcn::{DenseMatrix, Error, LabelColumnMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADCHECK_TOL: f64 = 1e-6;
const GRADCHECK_SECONDS: f64 = 10.0;
const OCCLUSION_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-12;
const CORA_GCN: (f64, f64) = (79.3, 3.0);
const CORA_LABEL_GCN: (f64, f64) = (86.4, 3.0);
const CITESEER_GCN: (f64, f64) = (64.8, 4.0);
const PUBMED_GCN: (f64, f64) = (77.2, 4.0);
const ELLIPTIC_TRANSDUCTIVE_F1_MIN: f64 = 80.0;
const ELLIPTIC_INDUCTIVE_LABEL_GCN: (f64, f64) = (75.5, 4.0);
const ELLIPTIC_INDUCTIVE_GCN: (f64, f64) = (56.4, 4.0);
const CORA_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.62, 1.0];

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, id: &str, title: &str, verdict: Verdict, detail: String) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                self.failures += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("[{tag}] {id:<3} {title}: {detail}");
    }

    fn check(&mut self, id: &str, title: &str, ok: bool, detail: String) {
        self.report(id, title, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }
}

fn within(x: f64, (target, tol): (f64, f64)) -> bool {
    (x - target).abs() <= tol
}

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> (usize, Vec<(usize, usize)>) {
    let n = rng.gen_range(2..=max_n);
    let p = rng.gen_range(0.05..0.3);
    (n, random_edges(n, p, rng))
}

fn criterion_1(s: &mut Suite) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut kinks = 0;
    for seed in 0..10 {
        for masked in [false, true] {
            let report = random_case(20, masked, seed)
                .and_then(|c| c.check(GradCheckOptions { seed, ..Default::default() }))
                .expect("gradient check runs");
            worst = worst.max(report.max_rel_error);
            kinks += report.tensors.iter().map(|t| t.kinks_skipped).sum::<usize>();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    s.check(
        "1",
        "gradient correctness (both variants, 20 nodes, 10 graphs)",
        worst <= GRADCHECK_TOL && secs < GRADCHECK_SECONDS,
        format!("max rel error {worst:.2e} <= {GRADCHECK_TOL:.0e}, {kinks} kink coordinates skipped, {secs:.2} s < {GRADCHECK_SECONDS} s"),
    );
}

fn criterion_2(s: &mut Suite) {
    let (d, k) = (5, 3);
    let mut masked_out_max: f64 = 0.0;
    let mut masked_h1_max: f64 = 0.0;
    let mut unmasked_nonzero = 0;
    let cases = 100;
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let (n, edges) = random_graph(&mut rng, 30);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let x = DenseMatrix::from_fn(n, d + k, |_, c| if c < d { rng.gen_range(-1.0..1.0) } else { 0.0 });
        let input = InputMatrix {
            x,
            mask: LabelColumnMask::trailing(d + k, k),
        };
        let i = rng.gen_range(0..n);
        let mut perturbed = input.clone();
        perturbed.x.set(i, d + rng.gen_range(0..k), 1.0);
        for masked in [true, false] {
            let cfg = ModelConfig {
                input_dim: d + k,
                hidden_dim: 8,
                n_classes: k,
                dropout_rate: 0.5,
                masked_first_layer: masked,
            };
            let params = init_params(&cfg, case).unwrap();
            let a = forward_input(&params, &cfg, &ahat, &input, Mode::Eval).unwrap();
            let b = forward_input(&params, &cfg, &ahat, &perturbed, Mode::Eval).unwrap();
            let diff = |p: &DenseMatrix, q: &DenseMatrix| {
                p.row(i).iter().zip(q.row(i)).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
            };
            let out = diff(&a.probs, &b.probs);
            if masked {
                masked_out_max = masked_out_max.max(out);
                masked_h1_max = masked_h1_max.max(diff(&a.h1, &b.h1));
            } else if out > OCCLUSION_TOL {
                unmasked_nonzero += 1;
            }
        }
    }
    s.check(
        "2",
        "label occlusion at node output (100 cases)",
        masked_out_max <= OCCLUSION_TOL && unmasked_nonzero >= 90,
        format!(
            "masked max output change {masked_out_max:.2e} (need <= {OCCLUSION_TOL:.0e}); unmasked non-zero in \
             {unmasked_nonzero}/{cases}. The own label re-enters through the second convolution (i -> j -> i), \
             so the output-level claim cannot hold for a two-layer network"
        ),
    );
    s.check(
        "2b",
        "label occlusion at first layer (100 cases)",
        masked_h1_max <= OCCLUSION_TOL,
        format!("masked max first-layer change at node i {masked_h1_max:.2e} <= {OCCLUSION_TOL:.0e}"),
    );
}

fn dense_ahat(edges: &[(usize, usize)], n: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

fn criterion_3(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    for g in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + g);
        let (n, edges) = random_graph(&mut rng, 50);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let dense = dense_ahat(&edges, n);
        let (d, k) = (6, 3);
        let x = DenseMatrix::from_fn(n, d + k, |_, _| rng.gen_range(-1.0..1.0));
        let sp = spmm(ahat.matrix(), &x).unwrap();
        let masked = propagate_masked(&ahat, &x, &LabelColumnMask::trailing(d + k, k)).unwrap();
        let scale = sp.max_abs().max(masked.max_abs()).max(f64::MIN_POSITIVE);
        for (i, row) in dense.iter().enumerate() {
            for c in 0..d + k {
                let full: f64 = (0..n).map(|j| row[j] * x.get(j, c)).sum();
                // label columns: Â − diag(Â)
                let inner = if c >= d { full - row[i] * x.get(i, c) } else { full };
                worst = worst.max((sp.get(i, c) - full).abs() / scale);
                worst = worst.max((masked.get(i, c) - inner).abs() / scale);
            }
        }
    }
    s.check(
        "3",
        "dense-oracle equivalence (50 graphs, n <= 50)",
        worst <= ORACLE_TOL,
        format!("max rel error {worst:.2e} <= {ORACLE_TOL:.0e}"),
    );
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("LABELGCN_DATA_DIR").map(PathBuf::from)
}

fn load(dataset: &str) -> Result<GraphDataset, String> {
    let Some(dir) = data_dir() else {
        return Err("LABELGCN_DATA_DIR not set; dataset files are not bundled".into());
    };
    let paths = dataset_paths(dataset, &dir).map_err(|e| e.to_string())?;
    if let Some(p) = paths.iter().find(|p| !p.exists()) {
        return Err(format!("{} missing", p.display()));
    }
    let ds = if dataset == "elliptic" {
        load_elliptic(&paths[0], &paths[1], &paths[2])
    } else {
        load_citation(&paths[0], &paths[1]).map(|l| l.dataset)
    };
    ds.map_err(|e| format!("loading {dataset}: {e}"))
}

fn sweep_config(dataset: &str, n_splits: usize, n_inits: usize, fractions: &[f64], variants: Vec<Variant>) -> SweepConfig {
    let overrides: KeyValues = [("dataset", dataset)].iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let (cfg, _) = RunConfig::resolve(Command::Sweep, &KeyValues::new(), &overrides).expect("preset");
    SweepConfig {
        n_splits,
        n_inits,
        support_fractions: fractions.to_vec(),
        variants,
        jobs: 0,
        ..cfg.sweep_config()
    }
}

fn acc(report: &SweepReport, v: Variant, f: Option<f64>) -> (f64, f64, usize) {
    let m = report.row(v, f).and_then(|r| r.metrics.get("accuracy")).expect("row present");
    (100.0 * m.mean, 100.0 * m.std, m.n)
}

/// Checks that accuracy never drops by more than one pooled standard error
/// between consecutive support fractions. Returns the worst drop in SE units.
fn monotone_within_se(report: &SweepReport, fractions: &[f64]) -> (bool, String) {
    let rows: Vec<_> = fractions
        .iter()
        .map(|&f| acc(report, Variant::LabelGcn, Some(f)))
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for w in rows.windows(2) {
        let (m0, s0, n) = w[0];
        let (m1, s1, _) = w[1];
        let se = ((s0 * s0 + s1 * s1) / 2.0).sqrt() / (n as f64).sqrt();
        ok &= m1 >= m0 - se;
        parts.push(format!("{m0:.2}->{m1:.2} (SE {se:.2})"));
    }
    (ok, parts.join(", "))
}

fn criteria_4_to_6(s: &mut Suite) {
    match load("cora") {
        Err(reason) => {
            for (id, title) in [
                ("4", "CORA GCN baseline"),
                ("5", "CORA Label-GCN at full support"),
                ("6", "CORA monotone revelation trend"),
            ] {
                s.report(id, title, Verdict::Skip, reason.clone());
            }
        }
        Ok(ds) => {
            let cfg = sweep_config("cora", 20, 5, &CORA_FRACTIONS, vec![Variant::Gcn, Variant::LabelGcn]);
            match run_transductive_sweep(&ds, &cfg) {
                Err(e) => {
                    for id in ["4", "5", "6"] {
                        s.report(id, "CORA sweep", Verdict::Fail, e.to_string());
                    }
                }
                Ok(r) => {
                    let (g, gs, n) = acc(&r, Variant::Gcn, None);
                    s.check(
                        "4",
                        "CORA GCN baseline (20 splits x 5 inits)",
                        within(g, CORA_GCN),
                        format!("{g:.2} ± {gs:.2} over {n} trials, target {} ± {}", CORA_GCN.0, CORA_GCN.1),
                    );
                    let (l, ls, _) = acc(&r, Variant::LabelGcn, Some(1.0));
                    s.check(
                        "5",
                        "CORA Label-GCN at full support",
                        within(l, CORA_LABEL_GCN) && l > g,
                        format!(
                            "{l:.2} ± {ls:.2}, target {} ± {}, GCN {g:.2}",
                            CORA_LABEL_GCN.0, CORA_LABEL_GCN.1
                        ),
                    );
                    let (ok, detail) = monotone_within_se(&r, &CORA_FRACTIONS);
                    s.check("6", "CORA monotone revelation trend", ok, detail);
                }
            }
        }
    }

    // Synthetic stand-in: same pipeline on a homophilous planted partition.
    let ds = PlantedPartition::default().generate(7).unwrap();
    let cfg = sweep_config("synthetic", 10, 2, &CORA_FRACTIONS, vec![Variant::Gcn, Variant::LabelGcn]);
    let r = run_transductive_sweep(&ds, &cfg).expect("synthetic sweep");
    let (g, gs, _) = acc(&r, Variant::Gcn, None);
    let (l, ls, _) = acc(&r, Variant::LabelGcn, Some(1.0));
    s.check(
        "5s",
        "synthetic stand-in: Label-GCN at full support beats GCN",
        l > g,
        format!("Label-GCN {l:.2} ± {ls:.2} vs GCN {g:.2} ± {gs:.2} (10 splits x 2 inits, 600 nodes)"),
    );
    let (ok, detail) = monotone_within_se(&r, &CORA_FRACTIONS);
    s.check("6s", "synthetic stand-in: monotone revelation trend", ok, detail);
}

fn criterion_7(s: &mut Suite) {
    for (name, target) in [("citeseer", CITESEER_GCN), ("pubmed", PUBMED_GCN)] {
        let title = format!("{name} GCN baseline (10 splits x 3 inits)");
        match load(name) {
            Err(reason) => s.report("7", &title, Verdict::Skip, reason),
            Ok(ds) => match run_transductive_sweep(&ds, &sweep_config(name, 10, 3, &[1.0], vec![Variant::Gcn])) {
                Err(e) => s.report("7", &title, Verdict::Fail, e.to_string()),
                Ok(r) => {
                    let (g, gs, _) = acc(&r, Variant::Gcn, None);
                    s.check(
                        "7",
                        &title,
                        within(g, target),
                        format!("{g:.2} ± {gs:.2}, target {} ± {}", target.0, target.1),
                    );
                }
            },
        }
    }
}

fn criterion_8(s: &mut Suite) {
    let ds = match load("elliptic") {
        Err(reason) => {
            s.report("8", "Elliptic transductive and inductive", Verdict::Skip, reason);
            return;
        }
        Ok(ds) => ds,
    };
    let cfg = sweep_config("elliptic", 3, 2, &[1.0], vec![Variant::Gcn, Variant::LabelGcn]);
    match run_transductive_sweep(&ds, &cfg) {
        Err(e) => s.report("8a", "Elliptic transductive", Verdict::Fail, e.to_string()),
        Ok(r) => {
            let f1 = |v, f| 100.0 * r.row(v, f).and_then(|row| row.metrics.get("f1")).map_or(f64::NAN, |m| m.mean);
            let (l, g) = (f1(Variant::LabelGcn, Some(1.0)), f1(Variant::Gcn, None));
            s.check(
                "8a",
                "Elliptic transductive illicit F1 (3 splits x 2 inits)",
                l >= ELLIPTIC_TRANSDUCTIVE_F1_MIN && l > g,
                format!("Label-GCN {l:.1} >= {ELLIPTIC_TRANSDUCTIVE_F1_MIN}, GCN {g:.1}"),
            );
        }
    }
    match run_inductive_elliptic(&ds, &InductiveConfig::default()) {
        Err(e) => s.report("8b", "Elliptic inductive", Verdict::Fail, e.to_string()),
        Ok(r) => {
            let pick = |v, post: bool| {
                let sm = r.summary(v).expect("variant");
                100.0 * if post { sm.f1_post_shutdown } else { sm.f1 }.map_or(f64::NAN, |m| m.mean)
            };
            let (l, g) = (pick(Variant::LabelGcn, false), pick(Variant::Gcn, false));
            let (lp, gp) = (pick(Variant::LabelGcn, true), pick(Variant::Gcn, true));
            s.check(
                "8b",
                "Elliptic inductive illicit F1 (5 inits)",
                within(l, ELLIPTIC_INDUCTIVE_LABEL_GCN) && within(g, ELLIPTIC_INDUCTIVE_GCN) && lp > gp,
                format!(
                    "Label-GCN {l:.1} (target {} ± {}), GCN {g:.1} (target {} ± {}), post-shutdown {lp:.1} vs {gp:.1}",
                    ELLIPTIC_INDUCTIVE_LABEL_GCN.0,
                    ELLIPTIC_INDUCTIVE_LABEL_GCN.1,
                    ELLIPTIC_INDUCTIVE_GCN.0,
                    ELLIPTIC_INDUCTIVE_GCN.1
                ),
            );
        }
    }
}

fn criterion_9(s: &mut Suite) {
    let overrides: KeyValues = [("dataset", "synthetic"), ("n_splits", "3"), ("n_inits", "2"), ("baseline", "true"), ("seed", "42")]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let (cfg, map) = RunConfig::resolve(Command::Sweep, &KeyValues::new(), &overrides).unwrap();
    let text = manifest("sweep", &map);
    let run = |c: &RunConfig| {
        let ds = c.load_dataset().unwrap();
        let r = run_transductive_sweep(&ds, &c.sweep_config()).unwrap();
        // the echoed config carries `jobs`; compare results only
        serde_json::to_string(&(&r.rows, &r.trials, r.aborted_trials)).unwrap()
    };
    let first = run(&cfg);
    let reparsed = parse_key_values(&text, Path::new("manifest.txt")).unwrap();
    let (again, _) = RunConfig::resolve(Command::Sweep, &reparsed, &KeyValues::new()).unwrap();
    let second = run(&again);
    let threaded = run(&RunConfig { jobs: 4, ..again.clone() });
    s.check(
        "9",
        "determinism from manifest (single-threaded)",
        first == second && first == threaded,
        format!(
            "{} bytes of report JSON, rerun identical: {}, 4-thread identical: {}",
            first.len(),
            first == second,
            first == threaded
        ),
    );
}

fn tiny(n: usize, edges: Vec<(usize, usize)>, labels: Vec<Option<usize>>) -> GraphDataset {
    GraphDataset {
        name: "degenerate".into(),
        node_ids: (0..n).map(|i| i.to_string()).collect(),
        features: DenseMatrix::from_fn(n, 3, |i, j| ((i + 2 * j) % 3) as f64),
        labels,
        class_names: vec!["a".into(), "b".into()],
        edges,
        time_step: None,
        label_encoding: LabelEncoding::OneHot,
        positive_class: None,
    }
}

fn degenerate_cases() -> Vec<(&'static str, Result<(), String>)> {
    let short = TrainConfig {
        max_epochs: 20,
        ..Default::default()
    };
    let seeds = Seeds { init: 1, dropout: 2 };
    let run = |ds: &GraphDataset, vis: &LabelVisibility, split: &SplitSpec| {
        let ahat = normalize_adjacency(&ds.adjacency()?)?;
        let input = build_input(ds, vis);
        let inputs = TrialInputs {
            dataset: ds,
            ahat: &ahat,
            input: &input,
            model: Variant::LabelGcn.model_config(ds, 4, 0.5),
        };
        let (params, result) = train(&inputs, split, &short, seeds)?;
        if !params.is_finite() || result.train_loss.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument("non-finite result".into()));
        }
        Ok::<_, Error>(result)
    };
    let split = |train: Vec<usize>, validation: Vec<usize>, test: Vec<usize>| SplitSpec {
        train,
        validation,
        test,
        support: vec![],
    };
    let mut out = Vec::new();

    let ds = tiny(6, vec![], vec![Some(0), Some(1), Some(0), Some(1), Some(0), Some(1)]).validated().unwrap();
    let vis = LabelVisibility::from_nodes(vec![0, 1, 2, 3]);
    out.push((
        "empty edge set trains",
        run(&ds, &vis, &split(vec![0, 1], vec![2, 3], vec![4, 5])).map(|_| ()).map_err(|e| e.to_string()),
    ));

    let one = tiny(1, vec![], vec![Some(1)]).validated().unwrap();
    out.push((
        "single-node graph trains",
        run(&one, &LabelVisibility::from_nodes(vec![0]), &split(vec![0], vec![], vec![]))
            .map(|_| ())
            .map_err(|e| e.to_string()),
    ));

    out.push((
        "empty visibility trains",
        run(&ds, &LabelVisibility::none(), &split(vec![0, 1], vec![2], vec![4]))
            .map(|_| ())
            .map_err(|e| e.to_string()),
    ));

    let same = tiny(4, vec![(0, 1), (2, 3)], vec![Some(0); 4]).validated().unwrap();
    out.push((
        "all-one-class targets train",
        run(&same, &LabelVisibility::from_nodes(vec![0, 1]), &split(vec![0, 1], vec![2], vec![3]))
            .and_then(|r| {
                let acc = r.test.map(|m| m.accuracy).unwrap_or(0.0);
                (acc == 1.0).then_some(()).ok_or(Error::InvalidArgument(format!("accuracy {acc}")))
            })
            .map_err(|e| e.to_string()),
    ));

    let expect_err = |r: Result<(), Error>, want: fn(&Error) -> bool| match r {
        Err(e) if want(&e) => Ok(()),
        Err(e) => Err(format!("wrong error: {e}")),
        Ok(()) => Err("accepted".into()),
    };
    out.push((
        "no labeled training nodes rejected",
        expect_err(
            run(&tiny(2, vec![], vec![None, None]).validated().unwrap(), &LabelVisibility::none(), &split(vec![0], vec![], vec![]))
                .map(|_| ()),
            |e| matches!(e, Error::EmptyTargets),
        ),
    ));
    let sizes = SplitSizes {
        train: 5,
        validation: 5,
        test: 5,
        support: 5,
    };
    out.push((
        "oversized split rejected",
        expect_err(sample_split(&ds, sizes, 0).map(|_| ()), |e| matches!(e, Error::InsufficientLabels { .. })),
    ));
    out.push((
        "support fraction outside [0, 1] rejected",
        expect_err(
            visibility_for_phase(&split(vec![0], vec![], vec![]), Phase::Inference, 1.5, 0).map(|_| ()),
            |e| matches!(e, Error::InvalidArgument(_)),
        ),
    ));
    out.push((
        "out-of-range edge rejected",
        expect_err(build_adjacency(&[(0, 9)], 3).map(|_| ()), |e| matches!(e, Error::NodeOutOfRange(..))),
    ));
    let mut nan = ds.clone();
    nan.features.set(0, 0, f64::NAN);
    out.push((
        "NaN features reported as divergence",
        expect_err(
            run(&nan, &vis, &split(vec![0, 1], vec![2], vec![4])).map(|_| ()),
            |e| matches!(e, Error::Divergence { .. } | Error::InvalidArgument(_)),
        ),
    ));
    let baseline_input = features_only(&ds);
    out.push((
        "GCN input has no label columns",
        (baseline_input.mask.is_empty() && baseline_input.n_cols() == ds.d())
            .then_some(())
            .ok_or_else(|| "label block present".to_string()),
    ));
    out
}

fn criterion_10(s: &mut Suite) {
    let cases = std::panic::catch_unwind(degenerate_cases);
    match cases {
        Err(_) => s.report("10", "degenerate inputs", Verdict::Fail, "panicked".into()),
        Ok(cases) => {
            let failed: Vec<String> = cases
                .iter()
                .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
                .collect();
            s.check(
                "10",
                "degenerate inputs",
                failed.is_empty(),
                if failed.is_empty() {
                    format!("{} cases completed or were rejected as specified", cases.len())
                } else {
                    failed.join("; ")
                },
            );
        }
    }
}

fn main() -> ExitCode {
    let mut s = Suite { failures: 0 };
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_3(&mut s);
    criteria_4_to_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    criterion_10(&mut s);
    if s.failures == 0 {
        println!("acceptance: all evaluated criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criterion line(s) failed", s.failures);
        ExitCode::FAILURE
    }
}
