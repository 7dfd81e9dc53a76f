use std::path::PathBuf;

use factcheck_core::assemble::assemble;
use factcheck_core::clock::TokioClock;
use factcheck_core::config::AppConfig;
use factcheck_eval::dataset::{load_dataset, DatasetFormat, LabelMap, LoadOptions};
use factcheck_eval::synth::{synthetic_corpus, synthetic_verifier};
use factcheck_eval::{run_eval, EvalContext, LabeledClaim, Variant};

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn replay_config() -> AppConfig {
    let root = repo_root();
    AppConfig::from_toml_str(&format!(
        r#"
[search]
blacklist_path = "{root}/data/blacklist_sample.txt"

[dispatch]
rate = 10000

[service]
provider_mode = "replay"
fixtures_dir = "{root}/fixtures/demo"
"#,
        root = root.display()
    ))
    .unwrap()
}

fn demo_claims() -> Vec<LabeledClaim> {
    let options = LoadOptions::new(LabelMap::binary());
    load_dataset(&repo_root().join("fixtures/demo/claims.csv"), DatasetFormat::GenericCsv, &options)
        .unwrap()
        .claims
}

#[tokio::test]
async fn replay_reproduces_the_recorded_run() {
    let claims = demo_claims();
    assert_eq!(claims.len(), 20);
    let cfg = replay_config();

    let mut outcomes = Vec::new();
    for _ in 0..2 {
        let assembly = assemble(&cfg, TokioClock::shared()).unwrap();
        let deny = assembly.deny.clone().expect("replay refuses network access");
        let ctx = EvalContext::new(assembly.verifier, cfg.pipeline_config(), cfg.llm.swap_model.clone());
        let run = run_eval(&ctx, &claims, Variant::Full).await.unwrap();
        assert_eq!(deny.attempts(), 0);
        let summary: Vec<_> = run
            .records
            .iter()
            .map(|r| (r.id.clone(), r.prediction, r.confidence, r.iterations_used))
            .collect();
        outcomes.push((summary, run.metrics));
    }
    assert_eq!(outcomes[0], outcomes[1]);

    // and it agrees with running the offline judge directly
    let corpus = synthetic_corpus();
    let ctx = EvalContext::new(synthetic_verifier(&corpus, "gpt-4"), cfg.pipeline_config(), "x");
    let direct = run_eval(&ctx, &claims, Variant::Full).await.unwrap();
    let direct: Vec<_> = direct
        .records
        .iter()
        .map(|r| (r.id.clone(), r.prediction, r.confidence, r.iterations_used))
        .collect();
    assert_eq!(outcomes[0].0, direct);
}

#[tokio::test]
async fn missing_fixture_names_the_request_key() {
    let cfg = replay_config();
    let assembly = assemble(&cfg, TokioClock::shared()).unwrap();
    let ctx = EvalContext::new(assembly.verifier, cfg.pipeline_config(), "x");
    let claim = LabeledClaim {
        id: "unrecorded-1".into(),
        text: "A claim nobody recorded".into(),
        gold: factcheck_eval::Gold::Real,
    };
    let err = run_eval(&ctx, &[claim], Variant::Full).await.unwrap_err();
    let message = err.to_string();
    assert!(message.starts_with("claim unrecorded-1:"), "{message}");
    let key = message.rsplit(' ').next().unwrap();
    assert!(key.len() == 64 && key.chars().all(|c| c.is_ascii_hexdigit()), "{message}");
}
