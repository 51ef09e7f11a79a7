use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const SMALL: &str = r#"
seeds = [1, 2]

[training]
n_train = 200
epochs = 20

[fidelity]
repetitions = 5
exact_samples = 20000
eval_grid = 6

[memorization]
n_base = 150
n_replicas = 40
grid_size = 8
n_background = 20

[bounds]
n_anchors = 12
surface_points = 5

[sample]
n = 50
"#;

fn write_config(dir: &Path, experiment: &str, extra: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{experiment}.toml"));
    fs::write(&path, format!("experiment = \"{experiment}\"\n{SMALL}\n{extra}")).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_plaplace")).args(args).output().unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn memorize_is_deterministic_and_has_one_row_per_p_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "memorization", "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run(&["memorize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["percentiles.csv", "detection.csv", "seed_1_memorized/grid_p1.csv", "seed_2_null/grid_p3.csv"] {
        assert!(fs::read_to_string(a.join(name)).unwrap() == fs::read_to_string(b.join(name)).unwrap(), "{name}");
    }
    let rows = data_rows(&a.join("percentiles.csv"));
    // 2 seeds x 2 conditions x 3 p values.
    assert_eq!(rows.len(), 12);
    for seed in ["1", "2"] {
        for p in ["1", "2", "3"] {
            let n = rows.iter().filter(|r| r[0] == seed && r[1] == "memorized" && r[2] == p).count();
            assert_eq!(n, 1);
        }
    }
    let summary = json(&a.join("summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config"]["memorization"]["n_replicas"], 40);
    let grid = data_rows(&a.join("seed_1_memorized/grid_p1.csv"));
    assert_eq!(grid.len() + 1, 8);
    assert!(fs::read_to_string(a.join("seed_1_memorized/grid_p1.svg")).unwrap().contains("<svg"));
}

#[test]
fn bounds_summary_and_self_test() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bounds", "");
    let out = tmp.path().join("out");
    let o = run(&["bounds", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("summary.json"));
    let frac = summary["assumption_ok_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&frac));
    assert_eq!(summary["config"]["seeds"], serde_json::json!([4]));
    let rows = data_rows(&out.join("seed_4/bound_reports.csv"));
    assert_eq!(rows.len(), 12 * 3);
    for r in &rows {
        // anchor, x0, x1, p, delta, m, big_m, segment_min, c_p, empirical_error, ratio, assumptions_ok
        let (c_p, err): (f64, f64) = (r[8].parse().unwrap(), r[9].parse().unwrap());
        if r[11] == "true" {
            assert!(err <= c_p);
        }
    }

    let text = fs::read_to_string(&cfg).unwrap().replace("n_anchors = 12", "n_anchors = 12\nself_test = true");
    let self_path = tmp.path().join("self.toml");
    fs::write(&self_path, text).unwrap();
    let out = tmp.path().join("self");
    let o = run(&["bounds", "--config", self_path.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    for r in data_rows(&out.join("seed_4/bound_reports.csv")) {
        assert_eq!(r[9].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn fidelity_writes_every_repetition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fidelity", "");
    let out = tmp.path().join("out");
    let o = run(&["fidelity", "--config", cfg.to_str().unwrap(), "--seed", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // 6 anchors x 2 fields x 2 formulations x 3 p x 5 repetitions.
    assert_eq!(data_rows(&out.join("seed_2/estimates.csv")).len(), 6 * 2 * 2 * 3 * 5);
    assert_eq!(data_rows(&out.join("seed_2/summary.csv")).len(), 6 * 2 * 2 * 3);
    assert_eq!(data_rows(&out.join("seed_2/score_error.csv")).len(), 36);
    let text = fs::read_to_string(out.join("seed_2/estimates.csv")).unwrap();
    assert!(text.starts_with("# config: {"));
    assert!(text.lines().nth(1).unwrap() == "# seed: 2");
    assert_eq!(
        text.lines().nth(2).unwrap(),
        "anchor,kind,x0,x1,field,formulation,p,n,radius,seed,rep,value,std_error,singular_hits"
    );
}

#[test]
fn train_then_sample_from_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fidelity", "");
    let out = tmp.path().join("train");
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = out.join("seed_7/model.json");
    assert_eq!(data_rows(&out.join("seed_7/losses.csv")).len(), 20);

    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("n = 50", &format!("n = 50\ncheckpoint = {:?}", ckpt.to_str().unwrap()));
    let sample_cfg = tmp.path().join("sample.toml");
    fs::write(&sample_cfg, text).unwrap();
    let a = tmp.path().join("sa");
    let b = tmp.path().join("sb");
    for dir in [&a, &b] {
        let o =
            run(&["sample", "--config", sample_cfg.to_str().unwrap(), "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let sa = data_rows(&a.join("seed_7/samples.csv"));
    assert_eq!(sa.len(), 50);
    assert_eq!(sa, data_rows(&b.join("seed_7/samples.csv")));
}

#[test]
fn bad_config_and_failing_seeds_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bounds", "[estimator]\nradius = 1.0\ntypo = 3\n");
    let o = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo"));

    // A learning rate this large overflows, so every seed fails.
    let text = fs::read_to_string(write_config(tmp.path(), "bounds", ""))
        .unwrap()
        .replace("epochs = 20", "epochs = 20\nlearning_rate = 1e200");
    let path = tmp.path().join("diverge.toml");
    fs::write(&path, text).unwrap();
    let out = tmp.path().join("diverge");
    let o = run(&["bounds", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let errors = json(&out.join("errors.json"));
    let failed: Vec<u64> =
        errors["failed_seeds"].as_array().unwrap().iter().map(|e| e["seed"].as_u64().unwrap()).collect();
    assert_eq!(failed, vec![1, 2]);
}
