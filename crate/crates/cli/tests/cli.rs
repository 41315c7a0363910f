use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{
    "dataset": {"kind": "moving_crop", "source": {"kind": "textures", "height": 10, "width": 10},
                "crop": 5, "frames": 6, "count": 10},
    "methods": ["gft-grid", "gft-geo", "ae", "raw"],
    "latent_dims": [5, 10],
    "ae_schedule": {"epochs": 3, "batch_size": 10, "lr0": 0.01},
    "lstm_schedule": {"epochs": 2, "batch_size": 3, "lr0": 0.01},
    "warmup": 3,
    "latent_scaling": "max_abs",
    "seed": 4
}"#;

fn gtslatent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtslatent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_ok(args: &[&str]) -> Output {
    let out = gtslatent(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn reconstruct_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("recon");
    let out = run_ok(&["reconstruct", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("gft-geo"));

    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    assert!(csv.starts_with("method,m,recon_mse,pred_mse\n"));
    for name in ["report.json", "recon_mse.svg", "codecs/ae_m5.gts", "codecs/ae_m10.gts"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn predict_is_deterministic_and_seed_matters() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let run = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        run_ok(&["predict", "--config", &config, "--seed", seed, "--out", out_dir.to_str().unwrap()]);
        fs::read(out_dir.join("results.csv")).unwrap()
    };
    let a = run("a", "9");
    let b = run("b", "9");
    let c = run("c", "10");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    for line in text.lines().skip(1) {
        let pred: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(pred.is_finite() && pred >= 0.0);
    }
    assert!(dir.path().join("a/samples/ae_m5_seq0.gts").is_file());
}

#[test]
fn gen_data_writes_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("data");
    let out = run_ok(&["gen-data", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("10 sequences of 6 frames (5x5)"));
    let bytes = fs::read(out_dir.join("dataset.gts")).unwrap();
    assert_eq!(&bytes[..4], b"GTS1");
    assert_eq!(bytes.len(), 4 + 4 + 4 * 4 + 4 * 10 * 6 * 25);

    // a tensor dataset replays the generated one
    let replay = r#"{"dataset": {"kind": "tensor", "path": "data/dataset.gts"},
                     "methods": ["gft-grid"], "latent_dims": [25], "seed": 4}"#;
    let replay_config = dir.path().join("replay.json");
    fs::write(&replay_config, replay).unwrap();
    let out_dir = dir.path().join("replay");
    run_ok(&[
        "reconstruct",
        "--config",
        replay_config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mse: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(mse < 1e-10, "full basis mse {mse}");
}

#[test]
fn errors_exit_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = gtslatent(&["reconstruct", "--config", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let too_wide = TINY.replace("[5, 10]", "[5, 26]");
    let config = write_config(dir.path(), &too_wide);
    let out = gtslatent(&["reconstruct", "--config", &config]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("26"), "{stderr}");

    let out = gtslatent(&["predict"]);
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let config = gtslatent::harness::ExperimentConfig::load(&path).unwrap();
            config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
