use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bcgraph::graph::read_graph;
use bcgraph::laplacian::read_spectral;
use bcgraph::wave::read_nd;
use serde_json::Value;

const EXP1: [&str; 8] = ["--family", "rect", "--m", "10", "--n", "9", "--w", "const:0.25"];

fn bcgraph(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcgraph"))
        .args(args)
        .current_dir(dir)
        .env_remove("BCGRAPH_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn generate_writes_a_loadable_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bcgraph(&with(&["generate"], &with(&EXP1, &["--mu", "degree", "--out", "g"])), tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("|G|       90") && text.contains("|dG|      38"), "{text}");
    assert!(text.contains("foliation holds"));
    let g = read_graph(fs::read(tmp.path().join("g/graph.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(g.n_interior(), 90);

    let o = bcgraph(&["generate", "--family", "hex", "--m", "9", "--n", "4", "--out", "h"], tmp.path());
    assert!(stdout(&o).contains("|dG|      28"));
}

#[test]
fn even_hex_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bcgraph(&["generate", "--family", "hex", "--m", "8", "--n", "4"], tmp.path());
    assert_eq!(o.status.code(), Some(21));
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd m"));
}

#[test]
fn usage_and_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bcgraph(&["frobnicate"], tmp.path()).status.code(), Some(20));
    assert_eq!(bcgraph(&["check"], tmp.path()).status.code(), Some(20));
    assert_eq!(bcgraph(&["replicate-experiment", "4"], tmp.path()).status.code(), Some(20));
    assert_eq!(bcgraph(&["check", "--graph", "missing.txt"], tmp.path()).status.code(), Some(22));
    assert_eq!(bcgraph(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn forward_prints_small_frne_and_files_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bcgraph(&with(&["forward"], &with(&EXP1, &["--mu", "degree", "--T", "9", "--out", "f"])), tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("FRNE")).unwrap();
    let value: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(value <= 1e-10, "{line}");
    let dir = tmp.path().join("f");
    let spec = read_spectral(fs::read(dir.join("spectral.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(spec.n_eigen(), 90);
    let a = read_nd(fs::read(dir.join("nd_spectral.txt")).unwrap().as_slice()).unwrap();
    let b = read_nd(fs::read(dir.join("nd_simulated.txt")).unwrap().as_slice()).unwrap();
    assert_eq!((a.horizon, a.ordering_hash), (b.horizon, b.ordering_hash));
}

#[test]
fn noiseless_reconstruction_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bcgraph(&with(&["reconstruct"], &with(&EXP1, &["--mu", "degree", "--T", "9", "--out", "r"])), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let dir = tmp.path().join("r");
    let report = json(&dir.join("report.json"));
    assert_eq!(report["status"], "full");
    assert!(report["l2rne"].as_f64().unwrap() <= 1e-3);
    assert_eq!(report["ranks"]["rank_delta_g"], 90);
    assert_eq!(report["ranks"]["harmonic_dim"], 38);
    let csv = fs::read_to_string(dir.join("mu.csv")).unwrap();
    assert_eq!(csv.lines().count(), 91);
    assert!(csv.starts_with("vertex,mu_true,mu_rec,abs_err"));
    for f in ["timings.json", "control_singular_values.csv", "product_singular_values.csv", "config.toml"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    // the echoed config reproduces the run
    let o = bcgraph(&["reconstruct", "--config", "r/config.toml", "--out", "again"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(dir.join("report.json")).unwrap(), fs::read(tmp.path().join("again/report.json")).unwrap());
}

#[test]
fn noisy_run_is_reproducible_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        with(
            &["reconstruct"],
            &with(&EXP1, &["--mu", "degree", "--T", "9", "--sigma", "0.001", "--seed", "42", "--verify", "--out", out]),
        )
    };
    let a = bcgraph(&args("a"), tmp.path());
    let b = bcgraph(&args("b"), tmp.path());
    assert!(a.status.success() && b.status.success());
    let ra = fs::read(tmp.path().join("a/report.json")).unwrap();
    assert_eq!(ra, fs::read(tmp.path().join("b/report.json")).unwrap());
    let report = json(&tmp.path().join("a/report.json"));
    for key in ["frne_nd", "frne_wstar_w", "l2rne", "projection_l2rne"] {
        assert!(report[key].as_f64().is_some_and(f64::is_finite), "{key}");
    }
    assert_eq!(report["seed"], 42);
}

#[test]
fn pendant_pair_exits_degraded() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bcgraph(&["reconstruct", "--family", "pendant-pair", "--out", "p"], tmp.path());
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(json(&tmp.path().join("p/report.json"))["status"], "projection_only");
}

#[test]
fn condition_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bcgraph(&["check", "--family", "gateway", "--out", "a"], tmp.path());
    let text = stdout(&o);
    assert!(text.contains("foliation   holds") && text.contains("two-points  fails"), "{text}");

    let o = bcgraph(&["check", "--family", "stalled-foliation", "--out", "b"], tmp.path());
    let text = stdout(&o);
    assert!(text.contains("foliation   fails") && text.contains("two-points  holds"), "{text}");
    assert!(text.contains("(2,3)") && text.contains("(4,2)"));

    let o = bcgraph(&with(&["check"], &with(&EXP1, &["--mu", "degree", "--T", "9", "--out", "c"])), tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let report = json(&tmp.path().join("c/check.json"));
    assert_eq!(report["control"]["rank"], 90);
}

#[test]
fn config_file_env_dir_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.toml"), "family = \"rect\"\nm = 3\nn = 2\nw = \"const:0.5\"\nmu = \"degree\"\nT = 2\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bcgraph"))
        .args(["reconstruct", "--config", "run.toml", "--T", "3"])
        .current_dir(tmp.path())
        .env("BCGRAPH_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&tmp.path().join("from-env/report.json"));
    assert_eq!(report["horizon"], 3);

    fs::write(tmp.path().join("bad.toml"), "colour = 1\n").unwrap();
    assert_eq!(bcgraph(&["check", "--config", "bad.toml"], tmp.path()).status.code(), Some(21));
}

#[test]
fn spectral_file_without_truth_has_no_error_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["--family", "rect", "--m", "4", "--n", "3", "--w", "const:0.25", "--mu", "degree"];
    assert!(bcgraph(&with(&["forward"], &with(&base, &["--out", "f"])), tmp.path()).status.success());
    let o = bcgraph(&with(&["reconstruct"], &with(&base, &["--spectral", "f/spectral.txt", "--out", "r"])), tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let report = json(&tmp.path().join("r/report.json"));
    assert!(report["l2rne"].is_null());
    let o = bcgraph(
        &with(&["reconstruct"], &with(&base, &["--spectral", "f/spectral.txt", "--truth-from-graph", "--out", "t"])),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&tmp.path().join("t/report.json"))["l2rne"].as_f64().unwrap() < 1e-3);
}
