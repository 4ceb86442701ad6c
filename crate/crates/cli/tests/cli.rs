//! End-to-end checks of the `ssop` binary: artifact layout, exit codes,
//! overwrite guards, and byte-level determinism across reruns.

use std::path::Path;
use std::process::{Command, Output};

const BASE_CFG: &str = "\
[system]
kind = antiderivative
length_scale = 0.4

[model]
name = linear

[train]
epochs = 4
batch_size = 8
lr0 = 0.01

[protocol]
name = interpolation
n_train = 6
n_test = 3
seed = 7

[output]
dir = run_a
";

const PK_CFG: &str = "\
[system]
kind = pk_two_compartment

[model]
name = linear

[train]
epochs = 3
batch_size = 4
lr0 = 0.001
physics_weight = 1.0

[protocol]
name = pkpd-physics
n_train = 6
n_test = 2
seed = 3
labeled = 2
unlabeled = 3

[output]
dir = pkrun
";

fn ssop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssop"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should run")
}

fn ssop_env(dir: &Path, args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssop"))
        .current_dir(dir)
        .env(key, value)
        .args(args)
        .output()
        .expect("binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn write_cfg(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

/// Lines of a metrics table whose exact (model, split, metric) triple
/// matches, returned as full rows.
fn metric_lines<'t>(table: &'t str, model: &str, split: &str, metric: &str) -> Vec<&'t str> {
    table
        .lines()
        .filter(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            fields.len() == 5 && fields[0] == model && fields[1] == split && fields[2] == metric
        })
        .collect()
}

#[test]
fn gen_writes_datasets_and_manifest_then_guards_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);

    let first = ssop(dir.path(), &["gen", "--config", "exp.cfg"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    for file in ["train.ds", "test.ds", "manifest.txt"] {
        assert!(dir.path().join("run_a").join(file).exists(), "missing {file}");
    }
    let manifest = read(&dir.path().join("run_a/manifest.txt"));
    assert!(manifest.contains("config_hash = "));
    assert!(manifest.contains("seed = 7"));

    let refused = ssop(dir.path(), &["gen", "--config", "exp.cfg"]);
    assert_eq!(code(&refused), 2);
    assert!(stderr(&refused).contains("refusing to overwrite"));

    let forced = ssop(dir.path(), &["gen", "--config", "exp.cfg", "--force"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));

    // Any config field change moves the manifest hash.
    write_cfg(dir.path(), "exp2.cfg", &BASE_CFG.replace("seed = 7", "seed = 8"));
    let other = ssop(dir.path(), &["gen", "--config", "exp2.cfg", "--out", "run_b"]);
    assert_eq!(code(&other), 0, "{}", stderr(&other));
    let hash_of = |text: &str| {
        text.lines()
            .find(|l| l.starts_with("config_hash"))
            .map(str::to_string)
            .expect("hash line")
    };
    assert_ne!(hash_of(&manifest), hash_of(&read(&dir.path().join("run_b/manifest.txt"))));
}

#[test]
fn generation_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);
    let a = ssop(dir.path(), &["gen", "--config", "exp.cfg", "--out", "a"]);
    let b = ssop(dir.path(), &["gen", "--config", "exp.cfg", "--out", "b"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0, "{}", stderr(&b));
    for file in ["train.ds", "test.ds"] {
        assert_eq!(
            read_bytes(&dir.path().join("a").join(file)),
            read_bytes(&dir.path().join("b").join(file)),
            "{file} differs between identically seeded runs"
        );
    }
}

#[test]
fn train_smoke_writes_checkpoint_metrics_and_loss_curve() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);
    assert_eq!(code(&ssop(dir.path(), &["gen", "--config", "exp.cfg"])), 0);

    let trained = ssop(dir.path(), &["train", "--config", "exp.cfg"]);
    assert_eq!(code(&trained), 0, "{}", stderr(&trained));
    let run = dir.path().join("run_a");
    for file in ["model_seed7.ckpt", "metrics.csv", "loss_seed7.csv", "per_time_seed7.csv"] {
        assert!(run.join(file).exists(), "missing {file}");
    }
    let losses = read(&run.join("loss_seed7.csv"));
    assert_eq!(losses.lines().count(), 1 + 4, "header plus one line per epoch");
    assert!(losses.starts_with("epoch,loss\n"));
    let metrics = read(&run.join("metrics.csv"));
    assert_eq!(metric_lines(&metrics, "linear", "test", "mse").len(), 1);

    // Checkpoints are guarded exactly like generated datasets.
    let refused = ssop(dir.path(), &["train", "--config", "exp.cfg"]);
    assert_eq!(code(&refused), 2);
}

#[test]
fn train_over_two_seeds_adds_aggregate_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);
    assert_eq!(code(&ssop(dir.path(), &["gen", "--config", "exp.cfg"])), 0);

    let trained = ssop(dir.path(), &["train", "--config", "exp.cfg", "--seed", "1,2"]);
    assert_eq!(code(&trained), 0, "{}", stderr(&trained));
    let metrics = read(&dir.path().join("run_a/metrics.csv"));
    assert_eq!(metric_lines(&metrics, "linear", "test", "rel_l2").len(), 2);
    for aggregate in ["rel_l2.mean", "rel_l2.std", "rel_l2.median"] {
        assert_eq!(
            metric_lines(&metrics, "linear", "test", aggregate).len(),
            1,
            "missing {aggregate}"
        );
    }
}

#[test]
fn train_without_datasets_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);
    let out = ssop(dir.path(), &["train", "--config", "exp.cfg"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("missing input"));
}

#[test]
fn training_divergence_exits_4_but_still_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    // A step size large enough that the first update overflows the squared
    // error, exercising the divergence-as-terminal-state path.
    write_cfg(dir.path(), "exp.cfg", &BASE_CFG.replace("lr0 = 0.01", "lr0 = 1e160"));
    assert_eq!(code(&ssop(dir.path(), &["gen", "--config", "exp.cfg"])), 0);

    let out = ssop(dir.path(), &["train", "--config", "exp.cfg"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
    let metrics = read(&dir.path().join("run_a/metrics.csv"));
    let diverged = metric_lines(&metrics, "linear", "train", "diverged");
    assert_eq!(diverged.len(), 1);
    assert!(diverged[0].contains(",1,7"), "diverged flag should be 1: {}", diverged[0]);
    assert!(metric_lines(&metrics, "linear", "test", "mse").is_empty());
}

#[test]
fn training_reruns_reproduce_loss_curves_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);
    for out in ["a", "b"] {
        let gen = ssop(dir.path(), &["gen", "--config", "exp.cfg", "--out", out]);
        assert_eq!(code(&gen), 0, "{}", stderr(&gen));
        let trained = ssop(dir.path(), &["train", "--config", "exp.cfg", "--out", out]);
        assert_eq!(code(&trained), 0, "{}", stderr(&trained));
    }
    for file in ["loss_seed7.csv", "model_seed7.ckpt", "per_time_seed7.csv"] {
        assert_eq!(
            read_bytes(&dir.path().join("a").join(file)),
            read_bytes(&dir.path().join("b").join(file)),
            "{file} differs between identically seeded runs"
        );
    }
}

#[test]
fn eval_reproduces_the_training_time_test_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "exp.cfg", BASE_CFG);
    assert_eq!(code(&ssop(dir.path(), &["gen", "--config", "exp.cfg"])), 0);
    assert_eq!(code(&ssop(dir.path(), &["train", "--config", "exp.cfg"])), 0);

    let eval = ssop(dir.path(), &["eval", "--config", "exp.cfg"]);
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
    let run = dir.path().join("run_a");
    assert!(run.join("per_time_eval_seed7.csv").exists());

    // The checkpoint round trip is exact, so eval and train-time test
    // metrics agree to the last bit.
    let trained = read(&run.join("metrics.csv"));
    let evaled = read(&run.join("metrics_interpolation.csv"));
    for metric in ["mse", "rel_l2"] {
        assert_eq!(
            metric_lines(&trained, "linear", "test", metric),
            metric_lines(&evaled, "linear", "test", metric),
            "{metric} differs between train-time and eval-time"
        );
    }
}

#[test]
fn report_ranks_models_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for (run, model, value) in [("alpha", "alpha", 0.5), ("beta", "beta", 0.25)] {
        let run_dir = dir.path().join(run);
        std::fs::create_dir_all(&run_dir).unwrap();
        std::fs::write(
            run_dir.join("metrics.csv"),
            format!("model,split,metric,value,seed\n{model},test,rel_l2,{value},1\n"),
        )
        .unwrap();
    }
    std::fs::write(dir.path().join("alpha/per_time_seed1.csv"), "t,rel_l2\n0,0.1\n1,0.2\n")
        .unwrap();

    let report = ssop(dir.path(), &["report", "alpha", "beta", "--out", "rep"]);
    assert_eq!(code(&report), 0, "{}", stderr(&report));
    let csv = read(&dir.path().join("rep/report.csv"));
    assert!(csv.contains("beta,test,rel_l2,0.25,0,1,1"), "{csv}");
    assert!(csv.contains("alpha,test,rel_l2,0.5,0,1,2"), "{csv}");
    let text = read(&dir.path().join("rep/report.txt"));
    assert!(text.contains("2.500e-1(1)"), "{text}");
    let curves = read(&dir.path().join("rep/curves.csv"));
    assert!(curves.contains("alpha/per_time_seed1,0,0.1"), "{curves}");

    let again = ssop(dir.path(), &["report", "alpha", "beta", "--out", "rep"]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    for file in ["report.csv", "report.txt", "curves.csv"] {
        let path = dir.path().join("rep").join(file);
        let bytes = read_bytes(&path);
        assert_eq!(bytes, read_bytes(&path), "{file} changed across identical reruns");
    }
    assert_eq!(read(&dir.path().join("rep/report.csv")), csv);
}

#[test]
fn report_rejects_mismatched_metric_sets() {
    let dir = tempfile::tempdir().unwrap();
    for (run, metric) in [("alpha", "rel_l2"), ("gamma", "mse")] {
        let run_dir = dir.path().join(run);
        std::fs::create_dir_all(&run_dir).unwrap();
        std::fs::write(
            run_dir.join("metrics.csv"),
            format!("model,split,metric,value,seed\nm,test,{metric},0.5,1\n"),
        )
        .unwrap();
    }
    let report = ssop(dir.path(), &["report", "alpha", "gamma", "--out", "rep"]);
    assert_eq!(code(&report), 1);
    let msg = stderr(&report);
    assert!(msg.contains("incompatible metric sets"), "{msg}");
    assert!(msg.contains("rel_l2") && msg.contains("mse"), "{msg}");
}

#[test]
fn physics_sweep_trains_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "pk.cfg", PK_CFG);
    let gen = ssop(dir.path(), &["gen", "--config", "pk.cfg"]);
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let swept = ssop(dir.path(), &["sweep", "--config", "pk.cfg"]);
    assert_eq!(code(&swept), 0, "{}", stderr(&swept));

    let run = dir.path().join("pkrun");
    for file in ["loss_pure_seed3.csv", "loss_hybrid_seed3.csv", "metrics.csv"] {
        assert!(run.join(file).exists(), "missing {file}");
    }
    let metrics = read(&run.join("metrics.csv"));
    for arm in ["pure", "hybrid"] {
        assert_eq!(metric_lines(&metrics, "linear", arm, "rel_l2").len(), 1, "{arm} row");
    }
}

#[test]
fn parallel_sweep_matches_serial_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "pk.cfg", PK_CFG);
    for out in ["serial", "pooled"] {
        let gen = ssop(dir.path(), &["gen", "--config", "pk.cfg", "--out", out]);
        assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    }
    let serial = ssop(
        dir.path(),
        &["sweep", "--config", "pk.cfg", "--out", "serial", "--seeds", "3,4"],
    );
    assert_eq!(code(&serial), 0, "{}", stderr(&serial));
    let pooled = ssop_env(
        dir.path(),
        &["sweep", "--config", "pk.cfg", "--out", "pooled", "--seeds", "3,4"],
        "SSOP_THREADS",
        "2",
    );
    assert_eq!(code(&pooled), 0, "{}", stderr(&pooled));
    assert_eq!(
        read_bytes(&dir.path().join("serial/metrics.csv")),
        read_bytes(&dir.path().join("pooled/metrics.csv")),
        "worker-pool scheduling leaked into the metrics table"
    );
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = ssop(dir.path(), &["frobnicate"]);
    assert_eq!(code(&unknown), 1);

    write_cfg(dir.path(), "bad.cfg", "[protocol]\nname = teleportation\n");
    let bad = ssop(dir.path(), &["gen", "--config", "bad.cfg"]);
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("unknown protocol"));

    let absent = ssop(dir.path(), &["gen", "--config", "nope.cfg"]);
    assert_eq!(code(&absent), 3);
}
