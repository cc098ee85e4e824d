use profit_core::backend::{pretrain_reference, BasicTokenizer, ConstantBackend, ReferenceConfig, MASK_TOKEN};
use profit_core::data::{synth_corpus, SynthConfig};
use profit_core::eval::{delta_table, fewshot_sweep};
use profit_core::training::{finetune, multi_seed_run, run_once, Experiment, Method, RunConfig, Shots};
use profit_core::{Dataset, Example, MaskedLm, Split, TaskSpec};

fn small_synth() -> profit_core::data::SynthCorpus {
    synth_corpus(&SynthConfig {
        sentences_per_language: 90,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn pretrained(c: &profit_core::data::SynthCorpus) -> profit_core::ReferenceBackend {
    pretrain_reference(
        &c.pretrain,
        &ReferenceConfig {
            dim: 256,
            extra_words: c.task.pvp.verbalizer().to_vec(),
            ..ReferenceConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn constant_backend_predicts_its_argmax_everywhere() {
    let task = TaskSpec::pawsx();
    let vocab: Vec<String> = ["[UNK]", MASK_TOKEN, "wrong", "right", "the"].iter().map(|s| s.to_string()).collect();
    let backend = ConstantBackend::new(
        BasicTokenizer::new(MASK_TOKEN),
        vocab,
        vec![0.1, 0.0, 0.2, 0.6, 0.1],
        vec![0.7, 0.3],
    );
    let ex = |a: &str, b: &str, y| Example::new(vec![a.into(), b.into()], Some(y), "de");
    let test = Dataset::new("pawsx", "de", Split::Test, vec![ex("a", "b", 1), ex("c", "d", 0), ex("e", "f", 1)]);
    let train = Dataset::new("pawsx", "en", Split::Train, vec![ex("x", "y", 0), ex("z", "w", 1)]);
    let exp = Experiment {
        run_id: "const",
        task: &task,
        train: &train,
        dev: None,
        tests: std::slice::from_ref(&test),
    };
    let direct = run_once(&backend, &exp, &RunConfig::new("pawsx", Method::Direct, Shots::Full, 1)).unwrap();
    assert!((direct.records[0].accuracy - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(direct.records[0].run_id, "const:Direct:full:1");
    let maj = run_once(&backend, &exp, &RunConfig::new("pawsx", Method::Maj, Shots::Full, 1)).unwrap();
    assert!((maj.records[0].accuracy - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn direct_on_pretrained_synth_beats_chance() {
    let c = small_synth();
    let backend = pretrained(&c);
    let exp = Experiment {
        run_id: "direct",
        task: &c.task,
        train: &c.train,
        dev: None,
        tests: &c.tests,
    };
    let out = run_once(&backend, &exp, &RunConfig::new("synth", Method::Direct, Shots::Full, 1)).unwrap();
    let en = out.records.iter().find(|r| r.language == "en").unwrap();
    assert!(en.accuracy > 0.5, "{}", en.accuracy);
}

#[test]
fn full_batch_profit_loss_decreases() {
    let c = small_synth();
    let mut backend = pretrained(&c);
    let mut cfg = RunConfig::new("synth", Method::Profit, Shots::Full, 3);
    cfg.lr = 0.05;
    cfg.epochs = 8;
    cfg.batch_size = c.train.len();
    cfg.grad_accum_steps = 1;
    let h = finetune(&mut backend, &c.task, &c.train, None, &cfg).unwrap();
    assert_eq!(h.train_loss.len(), 8);
    for w in h.train_loss.windows(2) {
        assert!(w[1] < w[0], "{:?}", h.train_loss);
    }
}

#[test]
fn identical_methods_give_zero_deltas() {
    let c = small_synth();
    let backend = pretrained(&c);
    let exp = Experiment {
        run_id: "same",
        task: &c.task,
        train: &c.train,
        dev: Some(&c.dev),
        tests: &c.tests,
    };
    let mut cfg = RunConfig::new("synth", Method::Profit, Shots::K(2), 0);
    cfg.lr = 0.5;
    let profit = multi_seed_run(&backend, &exp, &cfg, &[1, 2]).unwrap();
    let as_vanilla: Vec<_> = profit
        .iter()
        .cloned()
        .map(|mut r| {
            r.method = Method::Vanilla;
            r
        })
        .collect();
    let all: Vec<_> = profit.into_iter().chain(as_vanilla).collect();
    let table = delta_table(&all, "en").unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].delta, 0.0);
}

#[test]
fn sweep_extremes_are_finite() {
    let c = synth_corpus(&SynthConfig {
        sentences_per_language: 4100,
        num_labels: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let backend = pretrained(&c);
    let exp = Experiment {
        run_id: "ends",
        task: &c.task,
        train: &c.train,
        dev: Some(&c.dev),
        tests: &c.tests,
    };
    let mut cfg = RunConfig::new("synth", Method::Profit, Shots::K(1), 0);
    cfg.lr = 0.5;
    cfg.epochs = 2;
    let start = std::time::Instant::now();
    let (table, records) = fewshot_sweep(&backend, &exp, &cfg, &[Shots::K(1), Shots::K(1024)], &[7], "en").unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().all(|r| r.delta.is_finite()));
    assert_eq!(records.len(), 2 * 2 * c.tests.len());
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn reference_backend_is_object_safe() {
    let c = small_synth();
    let b = pretrained(&c);
    let dynamic: &dyn MaskedLm = &b;
    assert_eq!(dynamic.parameters().len(), b.parameters().len());
}
