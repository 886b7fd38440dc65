use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SBM: &str = "dataset = sbm
layers = 2
hidden = 16
lr = 0.01
epochs_pretrain = 12
epochs_continue = 4
batch_size = 256
";

fn ltlp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltlp"))
        .args(args)
        .current_dir(dir)
        .env_remove("LTLP_OUT")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_writes_every_artifact_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "run.conf", &format!("{SBM}seeds = 0, 1\n"));
    ok(&ltlp(tmp.path(), &["pipeline", "--config", cfg.to_str().unwrap(), "--out", "runs"]));
    for seed in [0, 1] {
        let root = tmp.path().join(format!("runs/seed-{seed}"));
        for f in [
            "split/manifest.json",
            "split/train.tsv",
            "pretrain/params.ckpt",
            "pretrain/snapshots.ckpt",
            "pretrain/log.jsonl",
            "augment/graph.ckpt",
            "augment/edges.txt",
            "augment/sidecar.json",
            "train/params.ckpt",
            "train/log.jsonl",
            "report.json",
        ] {
            assert!(root.join(f).is_file(), "missing {f}");
        }
        let report = json(root.join("report.json"));
        assert_eq!(report["seed"], seed);
        let sem = &report["sem"];
        let (o, s, f) = (sem["num_candidates"].as_u64().unwrap(), sem["num_score_filtered"].as_u64().unwrap(), sem["num_selected"].as_u64().unwrap());
        assert!(f <= s && s <= o);
        assert!(report["baseline"]["auc"].is_f64() && report["ltlp"]["auc"].is_f64());
        let manifest = json(root.join("split/manifest.json"));
        assert_eq!(manifest["seed"], seed);
        assert_eq!(manifest["digests"]["train.tsv"].as_str().unwrap().len(), 64);
        let logs = fs::read_to_string(root.join("pretrain/log.jsonl")).unwrap();
        assert_eq!(logs.lines().count(), 12);
    }
    assert!(tmp.path().join("runs/summary.json").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "run.conf", SBM);
    for out in ["a", "b"] {
        ok(&ltlp(tmp.path(), &["pipeline", "--config", "run.conf", "--seed", "3", "--out", out]));
    }
    for f in ["report.json", "augment/sidecar.json", "split/manifest.json", "augment/edges.txt"] {
        let a = fs::read(tmp.path().join("a/seed-3").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b/seed-3").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn stages_run_separately_from_stored_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "run.conf", SBM);
    let early = ltlp(tmp.path(), &["augment", "--config", "run.conf", "--out", "o"]);
    assert!(!early.status.success());
    assert!(String::from_utf8_lossy(&early.stderr).contains("ltlp pretrain"));
    for cmd in ["pretrain", "augment", "train", "eval"] {
        ok(&ltlp(tmp.path(), &[cmd, "--config", "run.conf", "--out", "o"]));
    }
    let eval = json(tmp.path().join("o/seed-0/eval.json"));
    assert!(eval["ltlp"]["auc"].is_f64());

    // the staged run matches the one-shot pipeline
    ok(&ltlp(tmp.path(), &["pipeline", "--config", "run.conf", "--out", "p"]));
    let report = json(tmp.path().join("p/seed-0/report.json"));
    assert_eq!(report["baseline"], eval["baseline"]);
    assert_eq!(report["ltlp"], eval["ltlp"]);
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "bad.conf", "dataset = sbm\nlearning_rate = 0.1\n");
    let out = ltlp(tmp.path(), &["pipeline", "--config", "bad.conf"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `learning_rate`"));

    let out = ltlp(tmp.path(), &["pipeline", "--dataset", "cora", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));

    config(tmp.path(), "ratio.conf", "dataset = sbm\n");
    let out = ltlp(tmp.path(), &["sparsity", "--config", "ratio.conf", "--ratios", "0.5,1.5"]);
    assert!(!out.status.success());
}

#[test]
fn analyze_writes_bucket_tables_and_rejects_tiny_data() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "run.conf", SBM);
    for out in ["a", "b"] {
        ok(&ltlp(tmp.path(), &["analyze", "--config", "run.conf", "--out", out]));
    }
    for f in ["buckets_degree_pair.csv", "buckets_common_neighbors.csv"] {
        let a = fs::read_to_string(tmp.path().join("a/seed-0/analyze").join(f)).unwrap();
        assert_eq!(a.lines().count(), 11, "{f}");
        assert_eq!(a, fs::read_to_string(tmp.path().join("b/seed-0/analyze").join(f)).unwrap());
    }

    let edges: String = (0..12).map(|i| format!("{i} {}\n", (i + 1) % 12)).collect::<String>()
        + &(0..12).map(|i| format!("{i} {}\n", (i + 5) % 12)).collect::<String>();
    fs::write(tmp.path().join("tiny.txt"), edges).unwrap();
    config(tmp.path(), "tiny.conf", "epochs_pretrain = 5\nlayers = 1\nhidden = 4\n");
    let out = ltlp(tmp.path(), &["analyze", "--config", "tiny.conf", "--dataset", "tiny.txt", "--out", "t"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pairs"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn hard_negatives_write_one_table_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "run.conf", SBM);
    ok(&ltlp(tmp.path(), &["hard-negatives", "--config", "run.conf", "--levels", "1,2,4,8", "--out", "h"]));
    for s in [1, 2, 4, 8] {
        let text = fs::read_to_string(tmp.path().join(format!("h/seed-0/hard_negatives/level_{s}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch,difficulty,R_ler_raw,R_ler_after_variance_filter");
        // rows start once five epochs have been seen
        assert_eq!(lines.count(), 12 - 4);
    }

    config(tmp.path(), "strict.conf", &format!("{SBM}hn_tau = 1.0\n"));
    ok(&ltlp(tmp.path(), &["hard-negatives", "--config", "strict.conf", "--out", "s"]));
    let text = fs::read_to_string(tmp.path().join("s/seed-0/hard_negatives/level_8.csv")).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!((cols[2], cols[3]), ("0", "0"));
    }
}

#[test]
fn sparsity_has_one_row_per_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "run.conf", SBM);
    ok(&ltlp(tmp.path(), &["sparsity", "--config", "run.conf", "--ratios", "0.1,0.5,0.9", "--out", "s"]));
    let text = fs::read_to_string(tmp.path().join("s/seed-0/sparsity.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ratio,baseline_auc,baseline_tail_acc,ltlp_auc,ltlp_tail_acc");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.1,"));
}

#[test]
fn output_root_comes_from_the_environment_unless_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "run.conf", &format!("{SBM}out = from_file\n"));
    let run = |extra: &[&str]| {
        let mut args = vec!["pretrain", "--config", "run.conf"];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_ltlp"))
            .args(&args)
            .current_dir(tmp.path())
            .env("LTLP_OUT", tmp.path().join("from_env"))
            .output()
            .unwrap();
        ok(&out);
    };
    run(&[]);
    assert!(tmp.path().join("from_env/seed-0/pretrain/params.ckpt").is_file());
    assert!(!tmp.path().join("from_file").exists());
    run(&["--out", "from_flag"]);
    assert!(tmp.path().join("from_flag/seed-0/pretrain/params.ckpt").is_file());
}
