use std::f64::consts::PI;
use std::fs;

use hbias::collapse::{class_statistics, lift_to_superclass, nc1, ClassifierHead};
use hbias::io;
use hbias::labelspace::project_log;
use hbias::manifold::{self, CoverConfig};
use hbias::metrics;
use hbias::synth::{self, TrajectoryParams};

#[test]
fn monte_carlo_matches_closed_form_across_seeds() {
    let sizes = [12, 5, 3];
    let s = hbias::labelspace::LabelSpace::new(
        "s",
        20,
        vec![
            hbias::labelspace::Superclass { name: "a".into(), members: (0..12).collect() },
            hbias::labelspace::Superclass { name: "b".into(), members: (12..17).collect() },
            hbias::labelspace::Superclass { name: "c".into(), members: (17..20).collect() },
        ],
    )
    .unwrap();
    for p in [0.1, 0.55, 0.9] {
        let exact = metrics::theoretical_superclass_accuracy(p, &s, &metrics::uniform_priors(20)).unwrap();
        let hits = (0..100)
            .filter(|&seed| {
                let (est, se) = synth::mc_superclass_accuracy(p, &sizes, 20_000, seed).unwrap();
                (est - exact).abs() <= 3.0 * se
            })
            .count();
        assert!(hits >= 99, "p = {p}: {hits}/100 within 3 SE");
    }
}

#[test]
fn trajectory_collapses_at_the_end() {
    let (h, s) = synth::balanced_taxonomy(&[10, 10, 10]).unwrap();
    let params = TrajectoryParams::with_default_schedules(20, 48, 10, 3);
    let traj = synth::gen_hierarchical_trajectory(&h, &s, &params).unwrap();
    let last = class_statistics(traj.last().unwrap()).unwrap();
    assert!(nc1(&last).value <= 1e-6);

    let log = synth::ncc_prediction_log(&traj).unwrap();
    let converge = |m| {
        let a = metrics::accuracy_series(&project_log(&log, m).unwrap()).unwrap();
        metrics::convergence_epoch(&metrics::relative_accuracy(&a).unwrap(), 0.95).unwrap()
    };
    let (_, random) = hbias::labelspace::random_isomorphic(&s, 3);
    assert!(converge(&s.mapping()) <= converge(&random));
}

#[test]
fn hierarchy_fades_from_feature_geometry_at_collapse() {
    // superclass gap rises then vanishes, noise reaches zero: the final
    // epoch keeps only class-level structure
    let (h, s) = synth::balanced_taxonomy(&[10, 10, 10]).unwrap();
    let epochs = 20;
    let t = |i: usize| (i + 1) as f64 / epochs as f64;
    let params = TrajectoryParams {
        epochs,
        hypernym_gap: (0..epochs).map(|i| 4.0 * (PI * t(i)).sin().max(0.0)).collect(),
        hyponym_gap: (0..epochs).map(|i| 1.0 + 3.0 * t(i)).collect(),
        noise: (0..epochs).map(|i| 0.2 * (1.0 - t(i))).collect(),
        // fewer dimensions than directions, so class offsets are not orthogonal
        dim: 24,
        examples_per_class: 10,
        seed: 8,
    };
    let traj = synth::gen_hierarchical_trajectory(&h, &s, &params).unwrap();
    let d_w = h.graph_distance_matrix(&(0..30).collect::<Vec<_>>()).unwrap();
    let cfg = CoverConfig { k: 5, seed: 1, ..CoverConfig::default() };
    let ccc_at = |e: usize| {
        let (q, sup) = manifold::split_query_support(&traj[e - 1], &cfg).unwrap();
        let a = manifold::cover_similarity(&q, &sup, &cfg).unwrap();
        manifold::ccc(&manifold::to_distance_matrix(&a), &d_w).unwrap()
    };
    let (mid, last) = (ccc_at(epochs / 2), ccc_at(epochs));
    assert!(last < mid, "final {last} vs mid {mid}");
}

#[test]
fn lifted_statistics_match_relabeling_when_balanced() {
    let (h, s) = synth::balanced_taxonomy(&[4, 4, 4]).unwrap();
    let params = TrajectoryParams::with_default_schedules(6, 10, 5, 2);
    let f = &synth::gen_hierarchical_trajectory(&h, &s, &params).unwrap()[2];
    let stats = class_statistics(f).unwrap();
    let head = ClassifierHead::nearest_centroid(&stats.class_means);
    let (lifted, _) = lift_to_superclass(&stats, &head, &s).unwrap();
    let direct = class_statistics(&f.relabeled(s.mapping().table(), s.len()).unwrap()).unwrap();
    assert!((lifted.class_means - &direct.class_means).amax() < 1e-12);
    assert!((lifted.sigma_b - &direct.sigma_b).amax() < 1e-12);
    assert!((lifted.sigma_w - &direct.sigma_w).amax() < 1e-12);
}

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["hbias"];
    argv.extend_from_slice(args);
    hbias::cli::run(argv)
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(cli(&["frobnicate"]), 2);
    assert_eq!(cli(&["labelspace", "random", "--labelspace", "x.tsv"]), 2);
    assert_eq!(cli(&["metrics", "curves", "--log", "a", "--labelspace", "b", "--random-iso"]), 2);
    assert_eq!(cli(&["--help"]), 0);
    let missing = tmp.path().join("nope.tsv");
    let code = cli(&["labelspace", "random", "--labelspace", missing.to_str().unwrap(), "--seed", "1", "--out", out]);
    assert_eq!(code, 1);
    assert!(!tmp.path().join("run.json").exists());
    assert_eq!(cli(&["synth", "etf", "--classes", "5", "--dim", "3", "--out", out]), 1);
}

#[test]
fn cli_results_equal_library_results() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let (h, s) = synth::balanced_taxonomy(&[3, 3]).unwrap();
    let mut edges = String::new();
    for c in 0..6 {
        edges.push_str(&format!("s{}\tc{c}\n", c / 3));
    }
    fs::write(p("edges.tsv"), format!("root\ts0\nroot\ts1\n{edges}")).unwrap();
    fs::write(p("classes.tsv"), (0..6).map(|c| format!("{c}\tc{c}\n")).collect::<String>()).unwrap();
    fs::write(p("ls.tsv"), hbias::labelspace::format_mapping(&s.mapping())).unwrap();

    let log = synth::gen_prediction_trajectory(&s, &[0.3, 0.6, 0.8], &[0.7, 0.7, 0.7], 60, 4).unwrap().log;
    io::write_predictions(&log, root.join("log.csv").as_path()).unwrap();
    assert_eq!(cli(&["metrics", "curves", "--log", &p("log.csv"), "--labelspace", &p("ls.tsv"), "--out", &p("curves")]), 0);
    let projected = project_log(&log, &s.mapping()).unwrap();
    let a = metrics::accuracy_series(&projected).unwrap();
    assert_eq!(fs::read_to_string(p("curves/hypernym_accuracy.csv")).unwrap(), io::series_csv(&a));
    let b = metrics::baseline(&s, &log.empirical_priors().unwrap()).unwrap();
    let g = metrics::relative_gain(&a, b).unwrap();
    assert_eq!(fs::read_to_string(p("curves/hypernym_relative_gain.csv")).unwrap(), io::series_csv(&g));

    let params = TrajectoryParams::with_default_schedules(4, 8, 6, 9);
    let traj = synth::gen_hierarchical_trajectory(&h, &s, &params).unwrap();
    io::write_features(&traj[3], root.join("f.bin").as_path()).unwrap();
    assert_eq!(
        cli(&["manifold", "ccc", "--features", &p("f.bin"), "--hierarchy", &p("edges.tsv"), "--classes", &p("classes.tsv"), "--k", "3", "--seed", "2", "--out", &p("ccc")]),
        0
    );
    let f = io::read_features(root.join("f.bin").as_path()).unwrap();
    let cfg = CoverConfig { k: 3, seed: 2, ..CoverConfig::default() };
    let (q, sup) = manifold::split_query_support(&f, &cfg).unwrap();
    let value = manifold::ccc(
        &manifold::to_distance_matrix(&manifold::cover_similarity(&q, &sup, &cfg).unwrap()),
        &h.graph_distance_matrix(&(0..6).collect::<Vec<_>>()).unwrap(),
    )
    .unwrap();
    let table = fs::read_to_string(p("ccc/ccc.csv")).unwrap();
    assert!(table.ends_with(&format!(",cover,{}\n", io::fmt_sig9(value))), "{table}");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("ccc/run.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["command"], "manifold ccc");
}
