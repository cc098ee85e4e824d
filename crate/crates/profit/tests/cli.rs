use std::path::Path;
use std::process::{Command, Output};

use profit::store::read_store;

fn profit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_profit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PROFIT_DATA_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, rel: &str, text: &str) {
    let p = dir.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
}

/// Tiny Amazon-style data in `data/` and a MAJ manifest next to it.
fn tiny_project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data/en/train.tsv", "seg1\tlabel\ngreat\t5\nawful\t1\nfine\t5\nbad\t2\nsuper\t5\n");
    write(dir.path(), "data/en/test.tsv", "seg1\tlabel\nok\t5\nno\t1\n");
    write(dir.path(), "data/de/test.tsv", "seg1\tlabel\ngut\t5\nschlecht\t1\nsuper\t5\n");
    write(
        dir.path(),
        "exp.toml",
        "[manifest]\nrun_id = \"tiny\"\n[task]\nid = \"amazon\"\n[training]\nmethods = [\"MAJ\"]\nseeds = [1]\n\
             [data]\ndir = \"data\"\ntrain = \"en/train.tsv\"\ntest_languages = [\"en\", \"de\"]\n\
             [backend]\ndim = 16\n[output]\ndir = \"out\"\n",
    );
    dir
}

#[test]
fn maj_run_writes_one_record_per_language() {
    let p = tiny_project();
    let o = profit(&["run", "--config", "exp.toml"], p.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_store(&p.path().join("out/results.tsv")).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].language, "en");
    assert_eq!(recs[1].language, "de");
    assert!((recs[1].accuracy - 2.0 / 3.0).abs() < 1e-12);
    assert!(p.path().join("out/manifests/tiny.toml").exists());
}

#[test]
fn duplicate_run_refused_unless_forced() {
    let p = tiny_project();
    assert_eq!(code(&profit(&["run", "--config", "exp.toml"], p.path())), 0);
    let before = std::fs::read(p.path().join("out/results.tsv")).unwrap();
    let o = profit(&["run", "--config", "exp.toml"], p.path());
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tiny:MAJ:full:1"));
    assert_eq!(std::fs::read(p.path().join("out/results.tsv")).unwrap(), before);
    assert_eq!(code(&profit(&["run", "--config", "exp.toml", "--force"], p.path())), 0);
    assert_eq!(read_store(&p.path().join("out/results.tsv")).unwrap().len(), 2);
}

#[test]
fn exit_codes_by_error_class() {
    let p = tiny_project();
    let typo = std::fs::read_to_string(p.path().join("exp.toml")).unwrap().replace("seeds", "learnig_rate = 1\nseeds");
    write(p.path(), "typo.toml", &typo);
    assert_eq!(code(&profit(&["run", "--config", "typo.toml"], p.path())), 2);
    assert_eq!(code(&profit(&["run", "--config", "missing.toml"], p.path())), 2);

    std::fs::remove_file(p.path().join("data/de/test.tsv")).unwrap();
    assert_eq!(code(&profit(&["run", "--config", "exp.toml"], p.path())), 3);

    let q = tiny_project();
    let bad_lr = std::fs::read_to_string(q.path().join("exp.toml")).unwrap().replace("[backend]\n", "[backend]\npretrain_lr = -1.0\n");
    let direct = bad_lr.replace("\"MAJ\"", "\"Direct\"");
    write(q.path(), "direct.toml", &direct);
    assert_eq!(code(&profit(&["run", "--config", "direct.toml"], q.path())), 4);
}

#[test]
fn failed_run_leaves_only_whole_records() {
    // K=1 runs land, then K=50 lacks examples and aborts.
    let p = tiny_project();
    let train: String = (0..10).map(|i| format!("w{i}\t{}\n", 1 + i % 5)).collect();
    write(p.path(), "data/en/train.tsv", &format!("seg1\tlabel\n{train}"));
    let text = std::fs::read_to_string(p.path().join("exp.toml")).unwrap().replace("seeds = [1]", "seeds = [1]\nshots = [1, 50]");
    write(p.path(), "exp.toml", &text);
    let o = profit(&["run", "--config", "exp.toml"], p.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let raw = std::fs::read_to_string(p.path().join("out/results.tsv")).unwrap();
    assert!(raw.ends_with('\n'));
    let recs = read_store(&p.path().join("out/results.tsv")).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r.run_id == "tiny:MAJ:1:1"));
    let leftovers: Vec<_> = std::fs::read_dir(p.path().join("out"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("tmp") || e.file_name().to_string_lossy().ends_with("lock"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn data_dir_falls_back_to_environment() {
    let p = tiny_project();
    let text = std::fs::read_to_string(p.path().join("exp.toml")).unwrap().replace("dir = \"data\"\n", "");
    write(p.path(), "env.toml", &text);
    assert_eq!(code(&profit(&["run", "--config", "env.toml"], p.path())), 3);
    let o = Command::new(env!("CARGO_BIN_EXE_profit"))
        .args(["run", "--config", "env.toml"])
        .current_dir(p.path())
        .env("PROFIT_DATA_DIR", p.path().join("data"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn single_record_report_is_flagged() {
    let p = tiny_project();
    let text = std::fs::read_to_string(p.path().join("exp.toml"))
        .unwrap()
        .replace("[\"en\", \"de\"]", "[\"en\"]");
    write(p.path(), "exp.toml", &text);
    assert_eq!(code(&profit(&["run", "--config", "exp.toml"], p.path())), 0);
    let o = profit(&["report", "--out", "out"], p.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("n=1"), "{stdout}");
    assert!(p.path().join("out/accuracy.tsv").exists());

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&profit(&["report", "--out", "."], empty.path())), 3);
}

#[test]
fn shipped_correlation_report() {
    let p = tiny_project();
    assert_eq!(code(&profit(&["run", "--config", "exp.toml"], p.path())), 0);
    let o = profit(&["report", "--out", "out", "--features", "shipped"], p.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("xnli-M\tP"), "{stdout}");
    assert!(stdout.contains("(9e-05)"), "{stdout}");
}

#[test]
fn shipped_plot_starts_at_amazon_mbert_k1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&profit(&["plot", "--shipped", "--out", "fig"], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("fig/deltas.tsv")).unwrap();
    let table = profit::plot::parse_delta_tsv(&text).unwrap();
    let first = table.rows.iter().find(|r| r.task_id == "amazon" && r.backend == "mBERT").unwrap();
    assert_eq!(first.shots, profit_core::training::Shots::K(1));
    assert!((first.delta - 5.90).abs() < 1e-9);
    assert!(dir.path().join("fig/deltas.svg").exists());
}

const SYNTH: &str = "[manifest]\nrun_id = \"syn\"\n[training]\nmethods = [\"ProFiT\"]\nshots = [4]\nseeds = [10]\n\
                     learning_rate = 0.5\n[synth]\nsentences_per_language = 60\n[backend]\ndim = 64\n[output]\ndir = \"out\"\n";

#[test]
fn synth_sample_pretrain_and_checkpointed_run() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "syn.toml", SYNTH);
    assert_eq!(code(&profit(&["synth", "--config", "syn.toml", "--out", "corpus"], dir.path())), 0);
    for f in ["en/train.tsv", "en/dev.tsv", "s1/test.tsv", "s2/test.tsv", "pretrain.txt", "anchors.tsv"] {
        assert!(dir.path().join("corpus").join(f).exists(), "{f}");
    }

    let o = profit(&["sample", "--config", "syn.toml", "--k", "2", "--seed", "42", "--out", "s"], dir.path());
    assert_eq!(code(&o), 0);
    let train = std::fs::read_to_string(dir.path().join("s/train_k2_s42.tsv")).unwrap();
    assert_eq!(train.lines().count(), 1 + 2 * 3);

    assert_eq!(code(&profit(&["pretrain", "--config", "syn.toml", "--out", "ckpt"], dir.path())), 0);
    let with_ckpt = SYNTH.replace("dim = 64\n", "dim = 64\ncheckpoint = \"ckpt/backend.bin\"\n").replace("\"out\"", "\"out2\"");
    write(dir.path(), "ckpt.toml", &with_ckpt);

    assert_eq!(code(&profit(&["run", "--config", "syn.toml"], dir.path())), 0);
    assert_eq!(code(&profit(&["run", "--config", "ckpt.toml"], dir.path())), 0);
    let a = read_store(&dir.path().join("out/results.tsv")).unwrap();
    let b = read_store(&dir.path().join("out2/results.tsv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_and_k_flags_narrow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "syn.toml", &SYNTH.replace("seeds = [10]", "seeds = [10, 42]"));
    let o = profit(&["run", "--config", "syn.toml", "--seed", "7", "--k", "2", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_store(&dir.path().join("o/results.tsv")).unwrap();
    assert!(recs.iter().all(|r| r.seed == 7 && r.run_id == "syn:ProFiT:2:7"));
}
