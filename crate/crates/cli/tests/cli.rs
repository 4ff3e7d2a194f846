use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn radcom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radcom"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn radcom")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

const SMALL: &str = r#"
[dataset]
kind = "RadComAWGN"
frames_per_stratum = 10
master_seed = 7
snrs = [0, 10]

[train]
epochs = 2
batch_size = 64
seed = 3

[evaluate]
confusion_snr = 10

[sweep]
weight_snr = 10
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    dir
}

#[test]
fn generate_reports_2400_records_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("g.toml"), "[dataset]\nkind = \"RadComAWGN\"\nframes_per_stratum = 10\nmaster_seed = 1\n").unwrap();
    let o = radcom(&["generate", "--config", "g.toml", "--dataset", "a/d.rcds"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2400 records"));
    assert!(p.join("a/experiment.toml").exists());

    let again = radcom(&["generate", "--config", "g.toml", "--dataset", "a/d.rcds"], p);
    assert_eq!(code(&again), 2, "existing output without --force");

    let o = radcom(&["generate", "--config", "g.toml", "--dataset", "b/d.rcds"], p);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(p.join("a/d.rcds")).unwrap(), fs::read(p.join("b/d.rcds")).unwrap());
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&radcom(&["generate", "--kind", "RadComFoo"], p)), 2);
    assert_eq!(code(&radcom(&["frobnicate"], p)), 2);
    fs::write(p.join("bad.toml"), "[dataset]\nkind = \"nope\"\n").unwrap();
    assert_eq!(code(&radcom(&["generate", "--config", "bad.toml"], p)), 2);
    assert_eq!(code(&radcom(&["evaluate", "--out", "o"], p)), 2);
}

#[test]
fn corrupt_or_missing_container_is_a_data_error() {
    let dir = setup();
    let p = dir.path();
    fs::write(p.join("junk.rcds"), b"NOPE and some more bytes").unwrap();
    let o = radcom(&["train", "--config", "exp.toml", "--dataset", "junk.rcds", "--out", "t"], p);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("junk.rcds"));
    let o = radcom(&["train", "--config", "exp.toml", "--dataset", "missing.rcds", "--out", "t2"], p);
    assert_eq!(code(&o), 3);
}

#[test]
fn oracle_evaluation_draws_a_diagonal_heatmap() {
    let dir = setup();
    let p = dir.path();
    assert_eq!(code(&radcom(&["generate", "--config", "exp.toml", "--dataset", "d.rcds"], p)), 0);
    let o = radcom(&["evaluate", "--oracle", "--config", "exp.toml", "--dataset", "d.rcds", "--out", "e"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["confusion_modulation.svg", "confusion_signal.svg"] {
        let svg = fs::read_to_string(p.join("e").join(f)).unwrap();
        let mut cells = 0;
        for line in svg.lines().filter(|l| l.contains(r#"class="cell""#)) {
            let attr = |name: &str| -> u64 {
                let start = line.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                line[start..].split('"').next().unwrap().parse().unwrap()
            };
            let (r, c, n) = (attr("data-row"), attr("data-col"), attr("data-count"));
            assert!(r == c || n == 0, "{f}: off-diagonal count at ({r}, {c})");
            cells += 1;
        }
        assert!(cells > 0);
    }
    let acc = fs::read_to_string(p.join("e/accuracy.csv")).unwrap();
    assert!(acc.starts_with("snr_db,n,mod_correct"));
}

#[test]
fn train_is_reproducible_and_sweep_has_eleven_rows() {
    let dir = setup();
    let p = dir.path();
    assert_eq!(code(&radcom(&["generate", "--config", "exp.toml", "--dataset", "d.rcds"], p)), 0);
    for out in ["t1", "t2"] {
        let o = radcom(&["train", "--config", "exp.toml", "--dataset", "d.rcds", "--out", out, "--seed", "5"], p);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["history.csv", "accuracy.csv", "confusion_signal.csv"] {
        assert_eq!(fs::read(p.join("t1").join(f)).unwrap(), fs::read(p.join("t2").join(f)).unwrap(), "{f}");
    }
    assert!(fs::read_to_string(p.join("t1/experiment.toml")).unwrap().contains("seed = 5"));

    let o = radcom(
        &["evaluate", "--config", "exp.toml", "--dataset", "d.rcds", "--checkpoint", "t1/model.rcmw", "--out", "ev"],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(p.join("t1/accuracy.csv")).unwrap(), fs::read(p.join("ev/accuracy.csv")).unwrap());

    let o = radcom(&["transfer", "--config", "exp.toml", "--dataset", "d.rcds", "--checkpoint", "t1/model.rcmw", "--out", "tr"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(p.join("one_epoch.toml"), SMALL.replace("epochs = 2", "epochs = 1")).unwrap();
    let o = radcom(&["sweep-weights", "--config", "one_epoch.toml", "--dataset", "d.rcds", "--out", "sw"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(p.join("sw/sweep_weights.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11);
    assert!(p.join("sw/sweep_weights.svg").exists());
}

#[test]
fn transfer_rejects_a_mismatched_checkpoint() {
    let dir = setup();
    let p = dir.path();
    assert_eq!(code(&radcom(&["generate", "--config", "exp.toml", "--dataset", "d.rcds"], p)), 0);
    assert_eq!(code(&radcom(&["train", "--config", "exp.toml", "--dataset", "d.rcds", "--out", "t"], p)), 0);
    fs::write(p.join("dense.toml"), format!("{SMALL}\n[model]\nc_sh = 16\n")).unwrap();
    let o = radcom(&["transfer", "--config", "dense.toml", "--dataset", "d.rcds", "--checkpoint", "t/model.rcmw", "--out", "x"], p);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("architecture"));
}
