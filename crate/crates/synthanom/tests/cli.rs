use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_synthanom"));
    c.env_remove("SYNTHANOM_OUTPUT_ROOT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn err_json(out: &Output, code: i32) -> Value {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

/// Tiny deterministic generator so the fixtures do not depend on any RNG crate.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        f.write(
            "schema.json",
            r#"{"columns":[
                {"name":"x1","kind":"numeric","role":"feature"},
                {"name":"x2","kind":"numeric","role":"feature"},
                {"name":"proto","kind":"categorical","categories":["tcp","udp","icmp"],"role":"feature"},
                {"name":"label","kind":"categorical","role":"label"},
                {"name":"kind","kind":"categorical","role":"subtype"}],
              "label_convention":{"normal":["normal"]}}"#,
        );
        let mut rng = Lcg(42);
        let mut normal = String::from("x1,x2,proto\n");
        for _ in 0..120 {
            normal += &format!("{},{},tcp\n", 0.4 + 0.2 * rng.next(), 0.2 + 0.2 * rng.next());
        }
        normal += "0,0,udp\n1,1,icmp\n";
        let mut anom = String::from("x1,x2,proto\n");
        for _ in 0..30 {
            anom += &format!("{},{},udp\n", 0.3 + 0.4 * rng.next(), 0.8 + 0.15 * rng.next());
        }
        f.write("normal.csv", &normal);
        f.write("anom.csv", &anom);
        let mut test = String::from("x1,x2,proto,label,kind\n");
        for _ in 0..40 {
            test += &format!("{},{},tcp,normal,\n", 0.4 + 0.2 * rng.next(), 0.2 + 0.2 * rng.next());
        }
        for _ in 0..10 {
            test += &format!("{},{},udp,attack,known\n", 0.3 + 0.4 * rng.next(), 0.8 + 0.15 * rng.next());
        }
        for _ in 0..10 {
            test += &format!("{},{},tcp,attack,novel\n", 0.05 * rng.next(), 0.5 + 0.1 * rng.next());
        }
        test += "5.0,0.3,tcp,attack,novel\n";
        f.write("test.csv", &test);
        let plain: String = test
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
            .collect();
        f.write("test_nosub.csv", &plain);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn write(&self, name: &str, body: &str) {
        std::fs::write(self.path(name), body).unwrap();
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "train".to_string(),
            "--schema".into(),
            self.p("schema.json"),
            "--normal".into(),
            self.p("normal.csv"),
            "--known-anom".into(),
            self.p("anom.csv"),
            "--seed".into(),
            "7".into(),
            "--max-epochs".into(),
            "30".into(),
            "--hidden".into(),
            "16,16".into(),
            "--out".into(),
            self.p(out),
        ];
        if !extra.contains(&"--learning-rate") {
            args.extend(["--learning-rate".to_string(), "0.01".to_string()]);
        }
        args.extend(extra.iter().map(|s| s.to_string()));
        bin().args(&args).output().unwrap()
    }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let f = Fixture::new();
    let s1 = ok_json(&f.train("a", &["--synthetic", "match-real"]));
    assert!(s1["final_val_risk"].as_f64().unwrap().is_finite());
    // n' = n + n⁻ over the training split: 122 - 24 normals, 30 - 6 anomalies.
    assert_eq!(s1["synthetic"], 98 + 24);
    for name in ["checkpoint.json", "normalizer.json", "history.csv", "manifest.json"] {
        assert!(f.path("a").join(name).exists(), "{name}");
    }
    ok_json(&f.train("b", &["--synthetic", "match-real"]));
    assert_eq!(read(&f.path("a/history.csv")), read(&f.path("b/history.csv")));
    // The config hash covers the output directory, so compare everything else.
    let ck_a: Value = serde_json::from_slice(&read(&f.path("a/checkpoint.json"))).unwrap();
    let ck_b: Value = serde_json::from_slice(&read(&f.path("b/checkpoint.json"))).unwrap();
    assert_eq!(ck_a["model"], ck_b["model"]);
    assert_eq!(ck_a["normalizer"], ck_b["normalizer"]);

    let manifest: Value = serde_json::from_slice(&read(&f.path("a/manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["config"]["train"]["model"]["hidden"], serde_json::json!([16, 16]));
    let ck: Value = serde_json::from_slice(&read(&f.path("a/checkpoint.json"))).unwrap();
    assert_eq!(ck["config_hash"], manifest["config_hash"]);
    let history = String::from_utf8(read(&f.path("a/history.csv"))).unwrap();
    assert!(history.starts_with("epoch,train_risk,val_risk\n0,"));
}

#[test]
fn zero_multiplier_is_the_plain_classifier() {
    let f = Fixture::new();
    let s = ok_json(&f.train("vc", &["--synthetic", "multiplier=0"]));
    assert_eq!(s["synthetic"], 0);
}

#[test]
fn evaluate_reports_subtypes_and_short_circuits_out_of_domain_rows() {
    let f = Fixture::new();
    ok_json(&f.train("m", &[]));
    let ck = f.p("m/checkpoint.json");
    let report = ok_json(&run(&["evaluate", "--checkpoint", &ck, "--data", &f.p("test.csv"), "--out", &f.p("ev")]));
    let names: Vec<&str> = report["subtypes"].as_array().unwrap().iter().map(|r| r["subtype"].as_str().unwrap()).collect();
    assert_eq!(names, ["known", "novel", "all"]);
    assert_eq!(report["rows"], 61);
    assert_eq!(report["out_of_domain"], 1);
    let known = &report["subtypes"][0];
    assert!((known["baseline"].as_f64().unwrap() - 10.0 / 50.0).abs() < 1e-12);

    let scores = String::from_utf8(read(&f.path("ev/scores.csv"))).unwrap();
    let last = scores.lines().last().unwrap();
    assert!(last.starts_with("61,") && last.ends_with(",1.0"), "{last}");
    let curve = String::from_utf8(read(&f.path("ev/pr_curve.csv"))).unwrap();
    assert!(curve.starts_with("subtype,threshold,precision,recall\n"));
    assert!(f.path("ev/manifest.json").exists());

    // Test data drawn like the training data scores well above the baseline.
    let known_aupr = known["aupr"].as_f64().unwrap();
    assert!(known_aupr > 0.6, "{known_aupr}");
}

#[test]
fn evaluate_without_subtype_column_uses_one_group() {
    let f = Fixture::new();
    ok_json(&f.train("m", &[]));
    let ck = f.p("m/checkpoint.json");
    let report = ok_json(&run(&["evaluate", "--checkpoint", &ck, "--data", &f.p("test_nosub.csv"), "--out", &f.p("ev")]));
    let rows = report["subtypes"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["subtype"], "all");
    assert_eq!(rows[0]["anomalies"], 21);
}

#[test]
fn sample_counts_determinism_and_uniform_categories() {
    let f = Fixture::new();
    let args = |out: &str, count: &str, seed: &str| {
        run(&["sample", "--schema", &f.p("schema.json"), "--count", count, "--n", "70", "--n-minus", "30", "--seed", seed, "--out", &f.p(out)])
    };
    assert_eq!(ok_json(&args("s1", "match-real", "1"))["rows"], 100);
    ok_json(&args("s2", "match-real", "1"));
    assert_eq!(read(&f.path("s1/synthetic.csv")), read(&f.path("s2/synthetic.csv")));
    ok_json(&args("s3", "match-real", "2"));
    assert_ne!(read(&f.path("s1/synthetic.csv")), read(&f.path("s3/synthetic.csv")));

    let body = String::from_utf8(read(&f.path("s1/synthetic.csv"))).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,proto,label");
    for l in lines {
        let cells: Vec<&str> = l.split(',').collect();
        let x: f64 = cells[0].parse().unwrap();
        assert!((0.0..1.0).contains(&x));
        assert!(["tcp", "udp", "icmp"].contains(&cells[2]));
        assert_eq!(cells[3], "synthetic");
    }

    ok_json(&args("big", "absolute=30000", "3"));
    let body = String::from_utf8(read(&f.path("big/synthetic.csv"))).unwrap();
    let mut counts = [0f64; 3];
    for l in body.lines().skip(1) {
        let cat = l.split(',').nth(2).unwrap();
        counts[["tcp", "udp", "icmp"].iter().position(|c| *c == cat).unwrap()] += 1.0;
    }
    let chi2: f64 = counts.iter().map(|c| (c - 10_000.0).powi(2) / 10_000.0).sum();
    // 99.9% quantile of chi-square with 2 degrees of freedom.
    assert!(chi2 < 13.82, "{counts:?}");
}

#[test]
fn sample_with_normalizer_writes_raw_units() {
    let f = Fixture::new();
    ok_json(&f.train("m", &[]));
    ok_json(&run(&[
        "sample", "--schema", &f.p("schema.json"), "--normalizer", &f.p("m/normalizer.json"),
        "--count", "absolute=200", "--seed", "5", "--out", &f.p("s"),
    ]));
    let body = String::from_utf8(read(&f.path("s/synthetic.csv"))).unwrap();
    for l in body.lines().skip(1) {
        let x2: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        // Training range of x2 is [0, 1] only because of the two corner rows.
        assert!((0.0..=1.0).contains(&x2));
    }
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let e = err_json(&run(&["train", "--no-such-flag"]), 1);
    assert_eq!(e["error"], "usage");
    let e = err_json(&f.train("x", &["--synthetic", "lots"]), 1);
    assert_eq!(e["error"], "usage");
    let e = err_json(&f.train("x", &["--momentum", "1.5"]), 1);
    assert_eq!(e["exit_code"], 1);

    let e = err_json(&run(&["train", "--schema", &f.p("missing.json"), "--normal", &f.p("normal.csv")]), 2);
    assert_eq!(e["error"], "io");
    f.write("bad.csv", "x1,x2,proto\n0.1,0.2,tcp\n0.1,zzz,tcp\n");
    let e = err_json(&run(&["train", "--schema", &f.p("schema.json"), "--normal", &f.p("bad.csv")]), 2);
    assert_eq!(e["error"], "parse");
    assert_eq!(e["row"], 2);
    f.write("cat.csv", "x1,x2,proto\n0.1,0.2,gre\n");
    let e = err_json(&run(&["train", "--schema", &f.p("schema.json"), "--normal", &f.p("cat.csv")]), 2);
    assert_eq!(e["error"], "schema");

    let e = err_json(&f.train("boom", &["--learning-rate", "1e12", "--momentum", "0"]), 3);
    assert_eq!(e["error"], "training_failure");
    assert!(e["epoch"].as_u64().is_some());
    assert!(f.path("boom/history.csv").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let f = Fixture::new();
    f.write(
        "cfg.json",
        &format!(
            r#"{{"schema":"{}","normal":"{}","known_anom":"{}","seed":7,"max_epochs":30,"hidden":[16,16],"learning_rate":0.01,"synthetic":"multiplier=2"}}"#,
            f.p("schema.json"),
            f.p("normal.csv"),
            f.p("anom.csv")
        ),
    );
    let s = ok_json(&run(&["train", "--config", &f.p("cfg.json"), "--out", &f.p("c1")]));
    assert_eq!(s["synthetic"], 2 * (98 + 24));
    let s = ok_json(&run(&["train", "--config", &f.p("cfg.json"), "--synthetic", "multiplier=0", "--out", &f.p("c2")]));
    assert_eq!(s["synthetic"], 0);
    // Same settings via flags give the same history.
    ok_json(&f.train("c3", &["--synthetic", "multiplier=2"]));
    assert_eq!(read(&f.path("c1/history.csv")), read(&f.path("c3/history.csv")));

    f.write("broken.json", "[1,2]");
    err_json(&run(&["train", "--config", &f.p("broken.json")]), 1);
}

#[test]
fn output_root_from_environment() {
    let f = Fixture::new();
    let out = bin()
        .env("SYNTHANOM_OUTPUT_ROOT", f.path("root"))
        .args(["sample", "--schema", &f.p("schema.json"), "--count", "absolute=3"])
        .output()
        .unwrap();
    ok_json(&out);
    assert!(f.path("root/sample/synthetic.csv").exists());
    assert!(f.path("root/sample/manifest.json").exists());
}

#[test]
fn plan_architecture_prints_the_plan() {
    let v = ok_json(&run(&["theory", "plan-architecture", "--nmin", "10000", "--alpha", "1", "--d", "1", "--q", "0", "--m", "1"]));
    let n = v["n"].as_u64().unwrap();
    // N = ceil((n / ln^4 n)^(1/3)).
    let ln = (10000f64).ln();
    assert_eq!(n, (10000.0 / ln.powi(4)).powf(1.0 / 3.0).ceil() as u64);
    assert!((v["tau"].as_f64().unwrap() - 1.0 / n as f64).abs() < 1e-15);
    assert_eq!(v["depth"], 8 + 6);
    assert_eq!(v["width"], 6 * 2 * n);
    err_json(&run(&["theory", "plan-architecture", "--alpha", "1", "--d", "1"]), 1);
}

#[test]
fn small_theory_runs_write_tables() {
    let f = Fixture::new();
    let out = run(&[
        "theory", "convergence", "--sizes", "20,40", "--seeds", "3", "--max-epochs", "3", "--hidden", "4", "--out", &f.p("conv"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let medians = String::from_utf8(out.stdout).unwrap();
    assert!(medians.starts_with("n,median_excess_risk,median_s_error,runs,failures\n20,"), "{medians}");
    assert_eq!(medians.lines().count(), 3);
    assert!(f.path("conv/manifest.json").exists());
    err_json(&run(&["theory", "convergence", "--sizes", "40,20"]), 1);

    let v = ok_json(&run(&["theory", "verify-bound", "--runs", "3", "--trained", "0", "--grid", "2000", "--out", &f.p("vb")]));
    assert_eq!(v["total"], 3);
    assert_eq!(v["holds"], 3);

    let v = ok_json(&run(&[
        "theory", "discontinuity", "--n", "50", "--seeds", "1", "--max-epochs", "3", "--hidden", "4", "--contrast-epochs", "3",
        "--resolutions", "100,200", "--out", &f.p("disc"),
    ]));
    let zero = v["zero_margin_sup_errors"].as_array().unwrap();
    assert_eq!(zero.len(), 1);
    assert!(zero[0].as_f64().unwrap() >= 0.99 - 0.02);

    let v = ok_json(&run(&[
        "theory", "ablate", "--widths", "4", "--depths", "1", "--multipliers", "0,1", "--seeds", "1",
        "--max-epochs", "3", "--out", &f.p("abl"),
    ]));
    assert_eq!(v["cells"], 2);
    let table = String::from_utf8(read(&f.path("abl/table.csv"))).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "model,width,depth,multiplier,all_mean,all_sd,known_mean,known_sd,unknown_mean,unknown_sd");
    assert!(lines.next().unwrap().starts_with("random,"));
    assert_eq!(lines.count(), 2);

    let v = ok_json(&run(&["theory", "probe-noise", "--grid", "20000", "--out", &f.p("noise")]));
    let q = v["q_hat"].as_f64().unwrap();
    assert!((q - 1.0).abs() < 0.15, "{q}");
}
