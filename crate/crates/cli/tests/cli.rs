use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn mvtrack(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvtrack")).args(args).arg("--quiet").arg("--out").arg(out).output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn generate_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let args = ["generate", "--preset", "simple", "--frames", "4", "--seed", "7"];
    ok(&mvtrack(&args, &t.path().join("a")));
    ok(&mvtrack(&args, &t.path().join("b")));
    ok(&mvtrack(&["generate", "--preset", "simple", "--frames", "4", "--seed", "8"], &t.path().join("c")));
    let a = tree(&t.path().join("a"));
    assert!(a.contains_key("scenario.json") && a.contains_key("gt/positions.jsonl"));
    assert!(a.contains_key("obs/frame_0003_drone_7.jsonl") && a.contains_key("calib/frame_0000_drone_0.json"));
    assert_eq!(a, tree(&t.path().join("b")));
    assert_ne!(a, tree(&t.path().join("c")));
}

#[test]
fn complex_preset_has_forty_pedestrians_and_an_obstruction() {
    let t = tempfile::tempdir().unwrap();
    ok(&mvtrack(&["generate", "--preset", "complex", "--frames", "2"], t.path()));
    let scen: serde_json::Value = serde_json::from_slice(&std::fs::read(t.path().join("scenario.json")).unwrap()).unwrap();
    assert_eq!(scen["pedestrian_count"], 40);
    assert!(scen["obstruction"].is_object());
}

#[test]
fn ten_seeds_give_twelve_report_rows() {
    let t = tempfile::tempdir().unwrap();
    ok(&mvtrack(&["run", "--preset", "simple", "--frames", "5", "--seeds", "10"], t.path()));
    let csv = std::fs::read_to_string(t.path().join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows[10].starts_with("mean,") && rows[11].starts_with("std,"));
    for s in 0..10 {
        assert!(t.path().join(format!("seed_{s}/tracks/pred.jsonl")).exists());
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(t.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seeds"].as_array().unwrap().len(), 10);
}

#[test]
fn runs_leave_the_dataset_untouched() {
    let t = tempfile::tempdir().unwrap();
    let ds = t.path().join("ds");
    ok(&mvtrack(&["generate", "--frames", "6"], &ds));
    let before = tree(&ds);
    let ds_arg = ds.to_str().unwrap();
    ok(&mvtrack(&["run", "--dataset", ds_arg, "--seeds", "2", "--dropout", "0.5", "--heatmaps"], &t.path().join("run")));
    assert_eq!(before, tree(&ds));
    let run = tree(&t.path().join("run"));
    assert!(run.contains_key("seed_1/heatmaps/frame_0005.pgm"));
    assert!(run.contains_key("seed_0/det/frame_0000.jsonl"));
    assert!(run.keys().any(|k| k.starts_with("seed_0/calib_est/")));
    assert!(run.keys().any(|k| k.starts_with("seed_0/reg/")));
}

#[test]
fn single_rate_sweep_matches_run() {
    let t = tempfile::tempdir().unwrap();
    let common = ["--preset", "complex", "--frames", "8", "--seeds", "2", "--seed", "3"];
    let mut sweep = vec!["sweep", "--rates", "0.25"];
    sweep.extend(common);
    let mut run = vec!["run", "--dropout", "0.25"];
    run.extend(common);
    ok(&mvtrack(&sweep, &t.path().join("s")));
    ok(&mvtrack(&run, &t.path().join("r")));
    let s = std::fs::read(t.path().join("s/rate_0.25/report.json")).unwrap();
    let r = std::fs::read(t.path().join("r/report.json")).unwrap();
    assert_eq!(s, r);
    let csv = std::fs::read_to_string(t.path().join("s/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "rate,MODA_mean,MODA_std,MODP_mean,MODP_std,MOTA_mean,MOTA_std,MOTP_mean,MOTP_std");
    assert!(lines.next().unwrap().starts_with("0.25,"));
    assert!(lines.next().is_none());
}

#[test]
fn per_sequence_dropout_is_accepted() {
    let t = tempfile::tempdir().unwrap();
    ok(&mvtrack(&["run", "--frames", "4", "--dropout", "0.5", "--dropout-mode", "per_sequence"], t.path()));
    let o = mvtrack(&["run", "--frames", "4", "--dropout-mode", "sometimes"], t.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_overrides_scenario_and_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"pedestrian_count": 3, "frame_count": 5, "pipeline": {"match_radius": 0.75, "fuse": {"alpha": 1.0}}}"#)
        .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mvtrack"))
        .args(["--quiet", "--config", cfg.to_str().unwrap(), "generate", "--out"])
        .arg(t.path().join("ds"))
        .output()
        .unwrap();
    ok(&o);
    let scen: serde_json::Value = serde_json::from_slice(&std::fs::read(t.path().join("ds/scenario.json")).unwrap()).unwrap();
    assert_eq!((scen["pedestrian_count"].as_u64(), scen["frame_count"].as_u64()), (Some(3), Some(5)));
    let o = mvtrack(&["--config", cfg.to_str().unwrap(), "validate"], t.path());
    ok(&o);
}

#[test]
fn exit_codes_distinguish_failures() {
    let t = tempfile::tempdir().unwrap();
    let bad = t.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"frame_count\": 4,\n  \"colour\": \"red\"\n}\n").unwrap();
    let o = mvtrack(&["run", "--config", bad.to_str().unwrap()], t.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json:3"), "{}", String::from_utf8_lossy(&o.stderr));

    let o = mvtrack(&["run", "--dataset", t.path().join("missing").to_str().unwrap()], t.path());
    assert_eq!(o.status.code(), Some(5));

    assert_eq!(mvtrack(&["run", "--preset", "tiny"], t.path()).status.code(), Some(2));
    assert_eq!(mvtrack(&["sweep", "--rates", "0.5,0.25"], t.path()).status.code(), Some(2));
    assert_eq!(mvtrack(&["sweep", "--rates", "1.0"], t.path()).status.code(), Some(2));
    assert_eq!(mvtrack(&["run", "--frames", "4", "--dropout", "1"], t.path()).status.code(), Some(3));

    // drone 0 sees no checkerboard corners in its first frame
    let ds = t.path().join("ds");
    ok(&mvtrack(&["generate", "--frames", "3"], &ds));
    let obs = ds.join("obs/frame_0000_drone_0.jsonl");
    let kept: String =
        std::fs::read_to_string(&obs).unwrap().lines().filter(|l| !l.contains("checkerboard_corner")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&obs, kept).unwrap();
    let o = mvtrack(&["run", "--dataset", ds.to_str().unwrap()], &t.path().join("run"));
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    // a malformed observation line is reported with its file and line
    let obs = ds.join("obs/frame_0001_drone_2.jsonl");
    let mut text = std::fs::read_to_string(&obs).unwrap();
    text.push_str("{\"kind\": \"landmark\", \"u\": 1.0}\n");
    let line = text.lines().count();
    std::fs::write(&obs, text).unwrap();
    let o = mvtrack(&["validate", "--dataset", ds.to_str().unwrap()], t.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("frame_0001_drone_2.jsonl:{line}")));
}

#[test]
fn dump_renders_rasters_and_legend() {
    let t = tempfile::tempdir().unwrap();
    let run = t.path().join("run");
    ok(&mvtrack(&["run", "--preset", "complex", "--frames", "3"], &run));
    ok(&mvtrack(&["dump", "--run", run.to_str().unwrap()], &t.path().join("dump")));
    let files = tree(&t.path().join("dump"));
    let legend = String::from_utf8(files["seed_0/legend.txt"].clone()).unwrap();
    assert!(legend.starts_with("gt_ids 40\n"), "{legend}");
    for f in 0..3 {
        for kind in ["gt_heatmaps", "det_heatmaps"] {
            let pgm = String::from_utf8(files[&format!("seed_0/{kind}/frame_{f:04}.pgm")].clone()).unwrap();
            assert!(pgm.starts_with("P2\n60 60\n255\n"), "{}", &pgm[..20]);
        }
    }
    let img = String::from_utf8(files["seed_0/trajectories.pgm"].clone()).unwrap();
    let mut it = img.split_whitespace();
    assert_eq!(it.next(), Some("P2"));
    let (w, h): (usize, usize) = (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap());
    assert_eq!(it.next(), Some("255"));
    assert_eq!(it.count(), w * h);
    assert_eq!(mvtrack(&["dump", "--run", t.path().join("nothing").to_str().unwrap()], t.path()).status.code(), Some(5));
}
