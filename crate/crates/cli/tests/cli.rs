use std::path::Path;
use std::process::{Command, Output};

use stylized_facts::ingestion::{write_candles, CandleRecord};
use stylized_facts::synth;

const START: i64 = 1_577_836_800;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stylized"));
    c.env_remove("ALLOW_NETWORK");
    c
}

fn write_prices(path: &Path, returns: &[f64], interval: i64) {
    let p = synth::prices_from_returns("x", interval, START, 100.0, returns).unwrap();
    let candles: Vec<CandleRecord> = p
        .points()
        .iter()
        .map(|&(t, c)| CandleRecord {
            timestamp: t,
            open: c,
            high: c,
            low: c,
            close: c,
            volume: 1.0,
        })
        .collect();
    write_candles(path, &candles).unwrap();
}

fn setup(dir: &Path, n: usize, extra_source: &str) -> std::path::PathBuf {
    let mut cfg = String::from("seed = 3\noutput_dir = \"out\"\n[cross_section]\nbootstrap_trials = 10\nbootstrap_sample_size = 2\nrolling_window = 20\n");
    for i in 0..n {
        write_prices(&dir.join(format!("a{i}.csv")), &synth::garch(24 * 90, 1e-6, 0.08, 0.9, i as u64), 3600);
        cfg.push_str(&format!(
            "[[sources]]\nasset_id = \"A{i}\"\nkind = \"file\"\nlocation = \"a{i}.csv\"\ninterval_seconds = 3600\n"
        ));
    }
    cfg.push_str(extra_source);
    let p = dir.join("run.toml");
    std::fs::write(&p, cfg).unwrap();
    p
}

fn text(o: &Output) -> (String, String) {
    (String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn report_succeeds_and_honours_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), 3, "");
    let out_dir = tmp.path().join("elsewhere");
    let o = bin()
        .args(["report", "--config"])
        .arg(&cfg)
        .args(["--seed", "42", "--from", "2020-01-05", "--offline", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{:?}", text(&o));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=42\n"));
    assert!(manifest.contains("window_from=1578182400\n"));
    assert!(manifest.contains("rows=3\n"));
}

#[test]
fn partial_report_exits_2_and_fatal_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "[[sources]]\nasset_id = \"GONE\"\nkind = \"file\"\nlocation = \"nope.csv\"\ninterval_seconds = 3600\n";
    let cfg = setup(tmp.path(), 2, extra);
    let o = bin().args(["report", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{:?}", text(&o));
    assert!(text(&o).1.contains("GONE"));
    assert!(tmp.path().join("out/manifest.txt").exists());

    let o = bin().args(["report", "--config", "/no/such/run.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().arg("report").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).1.contains("--config"));
}

#[test]
fn plotdata_writes_one_figure_and_rejects_unknown_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), 3, "");
    let figs = tmp.path().join("figs");
    let o = bin()
        .args(["plotdata", "--figure", "leverage", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&figs)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{:?}", text(&o));
    assert_eq!(text(&o).0.lines().count(), 3);
    assert!(figs.join("leverage/A0.csv").exists());

    let o = bin().args(["plotdata", "--figure", "pie", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o).1;
    assert!(err.contains("mountain-cdf") && err.contains("clusters"), "{err}");
}

#[test]
fn row_from_input_and_from_config_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), 1, "");
    let a = bin()
        .args(["row", "--asset", "A0", "--input"])
        .arg(tmp.path().join("a0.csv"))
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "{:?}", text(&a));
    let b = bin().args(["row", "--asset", "A0", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(b.status.code(), Some(0), "{:?}", text(&b));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<String> = text(&a).0.lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("asset_id,sector,"));
    assert!(lines[1].starts_with("A0,"));

    let o = bin().args(["row", "--asset", "ZZ", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cluster_reads_report_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), 4, "");
    assert_eq!(bin().args(["report", "--config"]).arg(&cfg).status().unwrap().code(), Some(0));
    let o = bin()
        .args(["cluster", "--k", "2", "--rows"])
        .arg(tmp.path().join("out/rows.csv"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{:?}", text(&o));
    let out = text(&o).0;
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "asset,cluster,leaf_position");
    assert_eq!(lines.len(), 5);
    let clusters: std::collections::BTreeSet<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(clusters.len(), 2);
}

#[test]
fn dexarb_on_simulated_pool() {
    let tmp = tempfile::tempdir().unwrap();
    let r: Vec<f64> = synth::gaussian(6 * 24 * 30, 5).iter().map(|z| 0.002 * z).collect();
    let reference = tmp.path().join("ref.csv");
    write_prices(&reference, &r, 600);
    let o = bin().arg("dexarb").arg("--reference").arg(&reference).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{:?}", text(&o));
    let out = text(&o).0;
    assert!(out.contains("band_violations=0"), "{out}");
    let lag0: Vec<&str> = out.lines().find(|l| l.starts_with("0,")).unwrap().split(',').collect();
    assert_eq!(lag0[3], "1");
}

#[test]
fn offline_ingest_without_cache_reports_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[[sources]]\nasset_id = \"ETH\"\nkind = \"http\"\nlocation = \"http://127.0.0.1:9/k?s={start}&e={end}\"\ninterval_seconds = 3600\nstart = \"2020-01-01\"\nend = \"2020-02-01\"\nrate_limit = 1.0\n",
    )
    .unwrap();
    let o = bin().args(["ingest", "--offline", "--config"]).arg(&cfg).env("ALLOW_NETWORK", "1").output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{:?}", text(&o));
    assert!(text(&o).1.contains("network access disabled"));
}
