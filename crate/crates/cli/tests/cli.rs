use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tkg")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = r#"
[model]
d = 8
relation_layers = 1
entity_layers = 1

[train]
epochs = 1
negatives = 8
batch = 32

[eval]
subsets = ["symmetric", "inverse"]
"#;

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(code(&tkg(&[])), 1);
    assert_eq!(code(&tkg(&["frobnicate"])), 1);
    assert_eq!(code(&tkg(&["eval"])), 1);
    assert_eq!(code(&tkg(&["--help"])), 0);
}

#[test]
fn bad_inputs_map_to_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nwidth = 3\n").unwrap();
    assert_eq!(code(&tkg(&["verify", "--config", p(&cfg), "--out", p(dir.path())])), 1);

    let missing = dir.path().join("nope.ckpt");
    let o = tkg(&["eval", "--checkpoint", p(&missing), "--dataset", p(dir.path())]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let junk = dir.path().join("junk.ckpt");
    fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(code(&tkg(&["eval", "--checkpoint", p(&junk), "--dataset", p(dir.path())])), 3);

    let data = dir.path().join("train.txt");
    fs::write(&data, "a\tr\tb\n").unwrap();
    let ingest = dir.path().join("ingest.toml");
    fs::write(&ingest, "[data.paths]\ntrain = \"train.txt\"\n").unwrap();
    let o = tkg(&["ingest", "--config", p(&ingest), "--out", p(&dir.path().join("bundle"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_and_gradcheck_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = tkg(&["verify", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let kv = fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(kv.contains("shift_invariance.passed=true"));
    assert!(kv.contains("compat_residual.passed=true"));
    assert!(kv.ends_with("all_passed=false\n"), "{kv}");
    assert!(dir.path().join("verify_report.txt").exists());

    let cfg = dir.path().join("g.toml");
    fs::write(&cfg, "[gradcheck]\nseeds = 2\nstack_seeds = 1\n").unwrap();
    assert_eq!(code(&tkg(&["gradcheck", "--config", p(&cfg), "--out", p(dir.path())])), 0);
    let g = fs::read_to_string(dir.path().join("gradcheck.txt")).unwrap();
    assert!(g.ends_with("all_passed=true\n"), "{g}");
}

#[test]
fn synth_train_eval_transfer_patterns_flow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let run = |args: &[&str]| {
        let o = tkg(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let data = root.join("data");
    let out = run(&["synth", "--config", p(&cfg), "--seed", "3", "--out", p(&data)]);
    assert!(out.starts_with("a: entities=50"), "{out}");
    for f in ["vocab_entities.txt", "train.quads", "test.quads", "rule.txt"] {
        assert!(data.join("a").join(f).exists(), "{f}");
    }

    let model = root.join("model");
    let out = run(&["train", "--config", p(&cfg), "--dataset", p(&data.join("a")), "--out", p(&model), "--epochs", "2"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("epoch=")).count(), 2);
    assert_eq!(fs::read_to_string(model.join("train.log")).unwrap().lines().count(), 2);
    let saved = fs::read_to_string(model.join("config.toml")).unwrap();
    assert!(saved.contains("epochs = 2"), "{saved}");
    let ckpt = model.join("model.ckpt");
    assert!(fs::read(&ckpt).unwrap().starts_with(b"POSTRA1"));

    let ev = root.join("eval");
    run(&["eval", "--config", p(&cfg), "--checkpoint", p(&ckpt), "--dataset", p(&data.join("a")), "--out", p(&ev)]);
    let metrics = fs::read_to_string(ev.join("metrics.txt")).unwrap();
    assert!(metrics.starts_with("mrr=") && metrics.contains("queries="), "{metrics}");
    let csv = fs::read_to_string(ev.join("metrics_ranks.csv")).unwrap();
    assert!(csv.starts_with("head,relation,tail,time,direction,rank\n"));
    assert!(ev.join("metrics_symmetric.txt").exists() && ev.join("metrics_inverse.txt").exists());

    let tr = root.join("transfer");
    run(&["transfer", "--config", p(&cfg), "--checkpoint", p(&ckpt), "--dataset", p(&data.join("b")), "--out", p(&tr)]);
    let base = fs::read_to_string(tr.join("baseline.txt")).unwrap();
    assert!(base.contains("mrr=") && base.contains("expected_mrr="), "{base}");

    let pat = root.join("patterns");
    run(&["patterns", "--dataset", p(&data.join("b")), "--checkpoint", p(&ckpt), "--out", p(&pat)]);
    for f in ["symmetric.quads", "inverse.quads", "inverse_support.txt"] {
        assert!(pat.join(f).exists(), "{f}");
    }
}

#[test]
fn ingest_writes_a_loadable_bundle() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.txt"), "a,r,b,2001\nb,s,c,2002\n").unwrap();
    fs::write(dir.path().join("test.txt"), "a,s,c,2003\n").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[data]\nseparator = \"comma\"\ntimestamp_ordering = \"integer\"\n[data.paths]\ntrain = \"train.txt\"\ntest = \"test.txt\"\n",
    )
    .unwrap();
    let bundle = dir.path().join("bundle");
    let o = tkg(&["ingest", "--config", p(&cfg), "--out", p(&bundle)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "entities=3 relations=2 timestamps=3 train=2 observed=0 valid=0 test=1");
    assert_eq!(fs::read_to_string(bundle.join("vocab_times.txt")).unwrap(), "2001\n2002\n2003\n");
}
