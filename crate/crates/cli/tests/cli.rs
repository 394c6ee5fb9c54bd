use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TOY: &str = r#"
[topology]
bs_antennas = 2
num_ris = 1
ris_rows = 1
ris_cols = 2
ue_slots_per_ris = 1

[rl]
episodes = 2
steps_per_episode = 5
minibatch = 2
hidden_units = 8

[experiment]
eval_set_size = 3
ue_count = { mode = "fixed", count = 1 }
eval_ue_count = { mode = "fixed", count = 1 }
p_max_sweep_dbm = [0.0, 20.0]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-ddpg")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_succeeds_on_a_toy_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    for args in [
        vec!["train", "--config", &cfg, "--out", o],
        vec!["baselines", "--config", &cfg, "--out", o],
        vec!["dump-channels", "--config", &cfg, "--out", o, "--count", "2"],
        vec!["train", "--config", &cfg, "--out", o, "--mode", "ideal", "--seed", "4"],
    ] {
        let r = run(&args);
        assert_eq!(code(&r), 0, "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let ckpt = out.join("best_checkpoint.json");
    let r = run(&["eval", "--config", &cfg, "--out", o, "--checkpoint", s(&ckpt), "--powers", "-5,10"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));

    let rate = fs::read_to_string(out.join("rate_vs_power.csv")).unwrap();
    let data: Vec<&str> = rate.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 2);
    assert!(data[0].starts_with("-5,"));

    for entry in fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                assert!(text.lines().any(|l| l.starts_with("# config: {")), "{path:?}");
                assert!(text.lines().any(|l| l.starts_with("# seed: ")), "{path:?}");
            }
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                let has = |v: &serde_json::Value| v.get("config").is_some() && v.get("seed").is_some();
                assert!(has(&v) || has(&v["metadata"]), "{path:?}");
            }
            _ => panic!("unexpected artifact {path:?}"),
        }
    }
}

#[test]
fn sweep_subcommand_reports_each_variant() {
    let dir = tempfile::tempdir().unwrap();
    let text = TOY.replace("ue_slots_per_ris = 1", "ue_slots_per_ris = 2");
    let cfg = write_config(dir.path(), &text);
    let r = run(&["sweep", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    for label in ["fixed-1", "fixed-2", "random-1-2", "random-action"] {
        assert!(stdout.contains(label), "{stdout}");
    }
    assert!(dir.path().join("sweep_comparison.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&run(&["train", "--config", &cfg, "--out", s(out)])), 0);
        assert_eq!(code(&run(&["baselines", "--config", &cfg, "--out", s(out)])), 0);
    }
    for name in ["training_curve.csv", "best_checkpoint.json", "baselines.csv", "config.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn configuration_problems_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&run(&["train", "--config", s(&missing), "--out", out])), 1);
    assert_eq!(code(&run(&["train", "--bogus"])), 1);
    assert_eq!(code(&run(&["train", "--mode", "perfect"])), 1);

    let zero = write_config(dir.path(), &TOY.replace("bs_antennas = 2", "bs_antennas = 0"));
    let r = run(&["train", "--config", &zero, "--out", out]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("topology.bs_antennas"));

    let unknown = write_config(dir.path(), &format!("{TOY}\n[rl.extra]\nx = 1\n"));
    assert_eq!(code(&run(&["train", "--config", &unknown, "--out", out])), 1);

    let cfg = write_config(dir.path(), TOY);
    assert_eq!(code(&run(&["train", "--config", &cfg, "--out", out])), 0);
    let bigger = dir.path().join("bigger.toml");
    fs::write(&bigger, TOY.replace("bs_antennas = 2", "bs_antennas = 3")).unwrap();
    let ckpt = dir.path().join("best_checkpoint.json");
    let r = run(&["eval", "--config", s(&bigger), "--out", out, "--checkpoint", s(&ckpt)]);
    assert_eq!(code(&r), 1, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let r = run(&["train", "--config", &cfg, "--out", s(&blocker.join("out"))]);
    assert_eq!(code(&r), 2, "{}", String::from_utf8_lossy(&r.stderr));

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{").unwrap();
    let r = run(&["eval", "--config", &cfg, "--out", s(dir.path()), "--checkpoint", s(&garbage)]);
    assert_eq!(code(&r), 2);
}

/// Mean per-entry power of the BS→RIS link over 1000 dumps against `PL(d)·G`.
#[test]
fn dumped_bs_ris_entries_have_the_path_loss_variance() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{TOY}\n[channel.path_loss]\nexponent_los = 2.0\nexponent_nlos = 2.0\nris_gain = 1000.0\n"
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("dumps");
    let r = run(&["dump-channels", "--config", &cfg, "--out", s(&out), "--count", "1000"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));

    let (mut total, mut entries, mut expected) = (0.0, 0usize, 0.0);
    for entry in fs::read_dir(&out).unwrap() {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(entry.unwrap().path()).unwrap()).unwrap();
        let pl = &v["config"]["channel"]["path_loss"];
        let d = v["config"]["topology"]["bs_ris_distance"].as_f64().unwrap();
        let loss_db = pl["reference_loss_db"].as_f64().unwrap() + 10.0 * 2.0 * d.log10();
        expected = 10f64.powf(-loss_db / 10.0) * pl["ris_gain"].as_f64().unwrap();
        for z in v["realization"]["bs_to_ris"][0]["data"].as_array().unwrap() {
            let (re, im) = (z[0].as_f64().unwrap(), z[1].as_f64().unwrap());
            total += re * re + im * im;
            entries += 1;
        }
    }
    assert_eq!(entries, 1000 * 2 * 2);
    let ratio = total / entries as f64 / expected;
    assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
}
