use std::path::Path;
use std::process::{Command, Output};

use trajcast::data::{load_csv, Manifest};
use trajcast::harness::{BenchReport, TrainSummary};

const CONFIG: &str = "[synth]\nflights = 45\n\n[model]\nk = 9\nn = 3\nmax_horizons = 8\n\
point_embed_dim = 16\nhorizon_embed_dim = 16\nmodel_dim = 16\nencoder_layers = 2\ndecoder_layers = 2\n\
feedforward_dim = 32\nconv_channels = 4\n\n[train]\nsteps = 40\nlr = 1e-3\neval_interval = 20\n\
max_train_windows = 128\nval_windows = 32\n\n[eval]\nmax_windows = 48\n\n[bench]\nwindows = 30\n";

fn trajcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajcast"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = trajcast(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.toml"), CONFIG).unwrap();
    tmp
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_with_zero_flights_writes_empty_manifest() {
    let tmp = setup();
    std::fs::write(tmp.path().join("zero.toml"), "[synth]\nflights = 0\n").unwrap();
    ok(tmp.path(), &["synth", "--config", "zero.toml", "--out", "data"]);
    let m = Manifest::read(&tmp.path().join("data/manifest.json")).unwrap();
    assert_eq!((m.flights, m.points, m.files.len()), (0, 0, 0));
}

#[test]
fn synth_is_reproducible_per_seed() {
    let tmp = setup();
    let dir = tmp.path();
    for (seed, out) in [("3", "a"), ("3", "b"), ("4", "c")] {
        ok(dir, &["synth", "--config", "run.toml", "--seed", seed, "--out", out]);
    }
    let m = Manifest::read(&dir.join("a/manifest.json")).unwrap();
    assert_eq!(m.flights, 45);
    assert!(m.files.len() >= 3);
    let read = |run: &str, f: &str| std::fs::read(dir.join(run).join(f)).unwrap();
    assert_eq!(read("a", "manifest.json"), read("b", "manifest.json"));
    for f in &m.files {
        assert_eq!(read("a", &f.file), read("b", &f.file), "{}", f.file);
    }
    assert_ne!(read("a", &m.files[0].file), read("c", &m.files[0].file));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = setup();
    std::fs::write(tmp.path().join("bad.toml"), "[train]\nsteps = 10\nlearning_rate = 0.1\n").unwrap();
    let out = trajcast(tmp.path(), &["synth", "--config", "bad.toml", "--out", "data"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(tmp.path().join("bad.toml"), "[model]\nn = 40\n").unwrap();
    let out = trajcast(tmp.path(), &["synth", "--config", "bad.toml", "--out", "data"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let tmp = setup();
    let dir = tmp.path();
    ok(dir, &["synth", "--config", "run.toml", "--out", "data"]);
    let out = trajcast(dir, &["eval", "--config", "run.toml", "--data", "data", "--checkpoint", "nope.ckpt"]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_end_to_end() {
    let tmp = setup();
    let dir = tmp.path();
    let common = ["--config", "run.toml", "--data", "data", "--out", "run"];
    ok(dir, &["synth", "--config", "run.toml", "--out", "data"]);
    ok(dir, &[&["prepare"], &common[..]].concat());
    let prepared = Manifest::read(&dir.join("run/prepared.json")).unwrap();
    assert_eq!(prepared.windows.len(), 3);
    assert!(prepared.split.is_some());
    assert!(prepared.windows.iter().all(|(_, s)| s.kept > 0));

    ok(dir, &[&["train"], &common[..]].concat());
    let summary: TrainSummary = read_json(&dir.join("run/train_summary.json"));
    assert_eq!((summary.first_step, summary.steps), (0, 40));
    for f in ["best.ckpt", "last.ckpt", "train_log.csv", "config.toml"] {
        assert!(dir.join("run").join(f).exists(), "{f}");
    }

    // resume continues the step counter from the checkpoint
    ok(
        dir,
        &[&["train", "--resume", "run/last.ckpt", "--steps", "50"], &common[..2], &["--data", "data", "--out", "resumed"]].concat(),
    );
    let resumed: TrainSummary = read_json(&dir.join("resumed/train_summary.json"));
    assert_eq!((resumed.first_step, resumed.steps), (40, 50));
    let log = std::fs::read_to_string(dir.join("resumed/train_log.csv")).unwrap();
    assert!(log.lines().nth(1).unwrap().starts_with("41,"));

    ok(dir, &[&["eval", "--instantaneous", "--embeddings"], &common[..]].concat());
    for f in [
        "metrics_direct.csv",
        "metrics_autoregressive.json",
        "metrics_kf_instantaneous.csv",
        "mde_series.csv",
        "embeddings.csv",
        "metrics.json",
    ] {
        assert!(dir.join("run").join(f).exists(), "{f}");
    }
    let series = std::fs::read_to_string(dir.join("run/mde_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 4);

    // predict: 12 observed points suffice, 8 do not
    let data = load_csv(&dir.join("data/day_00.csv"), 12).unwrap();
    let track = &data.tracks[0];
    let mut csv = String::from("timestamp,callsign,lon,lat,alt_m,vx_kmh,vy_kmh,vz_kmh\n");
    for p in &track.points[..12] {
        csv += &format!("{},{},{},{},{},{},{},{}\n", p.timestamp, p.callsign, p.lon, p.lat, p.alt, p.vx, p.vy, p.vz);
    }
    std::fs::write(dir.join("obs.csv"), &csv).unwrap();
    ok(dir, &[&["predict", "--input", "obs.csv"], &common[..]].concat());
    let pred = load_csv(&dir.join("run/predictions.csv"), 1).unwrap();
    let points = &pred.tracks[0].points;
    assert_eq!(points.len(), 3);
    for (j, p) in points.iter().enumerate() {
        assert_eq!(p.timestamp, track.points[11].timestamp + 20 * (j as i64 + 1));
        assert_eq!(p.callsign, track.callsign);
    }
    let short: String = csv.lines().take(9).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.join("short.csv"), short).unwrap();
    let out = trajcast(dir, &[&["predict", "--input", "short.csv"], &common[..]].concat());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("8 observations"));

    ok(dir, &[&["bench"], &common[..]].concat());
    let bench: BenchReport = read_json(&dir.join("run/bench.json"));
    assert_eq!(bench.windows, 30);
    assert_eq!(bench.entries.len(), 5);
    assert_eq!(bench.ratios.len(), 4);
    let mtc = |p: &str, h: usize| bench.mtc(p, h).unwrap();
    assert!(bench.entries.iter().all(|e| e.mtc_ms > 0.0));
    assert!(mtc("kf", 3) < mtc("direct", 3));
    assert!(mtc("autoregressive", 3) > mtc("direct", 3));
    assert!(std::fs::read_to_string(dir.join("run/bench_ratios.csv")).unwrap().starts_with("ratio,value\n"));
}

#[test]
fn empty_split_is_a_data_error() {
    let tmp = setup();
    let dir = tmp.path();
    ok(dir, &["synth", "--config", "run.toml", "--out", "data"]);
    std::fs::write(dir.join("tiny.toml"), CONFIG.replace("steps = 40", "steps = 2")).unwrap();
    ok(dir, &["train", "--config", "tiny.toml", "--data", "data", "--out", "run"]);

    // three days; the last one's steps overflow the differential fields, so it yields no window
    let header = "timestamp,callsign,lon,lat,alt_m,vx_kmh,vy_kmh,vz_kmh\n";
    std::fs::create_dir(dir.join("sparse")).unwrap();
    for (day, step) in [(0i64, 0.004), (1, 0.004), (2, 1.0)] {
        let mut csv = header.to_string();
        for i in 0..40 {
            let t = 1_613_692_800 + day * 86_400 + 3600 + 20 * i;
            csv += &format!("{t},TEST1,{},30.0,9000,700,0,0\n", 100.0 + step * i as f64);
        }
        std::fs::write(dir.join(format!("sparse/day_{day:02}.csv")), csv).unwrap();
    }
    let out = trajcast(
        dir,
        &["eval", "--config", "tiny.toml", "--data", "sparse", "--out", "run", "--split", "test"],
    );
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("test"), "{stderr}");
}
