use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use factcheck_core::assemble::assemble;
use factcheck_core::clock::TokioClock;
use factcheck_core::config::{AppConfig, ProviderMode};
use factcheck_eval::dataset::{load_dataset, write_generic_csv, DatasetFormat, ExpectedCounts, LabelMap, LoadOptions, LoadReport};
use factcheck_eval::report::{metrics_table, write_run, write_sweep};
use factcheck_eval::runner::{measure_latency, run_eval, sweep_rounds, EvalContext, Variant};
use factcheck_eval::synth::{record_fixtures, sample_blacklist_text, synthetic_corpus, synthetic_verifier};
use factcheck_eval::LabeledClaim;

#[derive(Parser)]
#[command(name = "eval", about = "Evaluate claim verification on labeled datasets")]
struct Cli {
    /// TOML config; `[eval]` keys supply defaults for every flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one variant and write report.json and predictions.csv.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Evaluate max_iters = 1..=ROUNDS and write sweep.csv.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        rounds: Option<u32>,
    },
    /// Report per-claim wall-time statistics for the full variant.
    Latency {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Write the synthetic corpus, sample blacklist, and recorded fixtures.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Live,
    Replay,
    OfflineDeterministic,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DatasetFormat>,
    /// `source=real|fake,...`; required for LIAR.
    #[arg(long)]
    label_map: Option<String>,
    /// Fail on labels missing from the map instead of skipping the row.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    expect_real: Option<usize>,
    #[arg(long)]
    expect_fake: Option<usize>,
    /// Fixture directory for replay mode.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the built-in synthetic corpus with the offline judge.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    concurrency: Option<usize>,
}

struct Prepared {
    ctx: EvalContext,
    claims: Vec<LabeledClaim>,
    load_report: Option<LoadReport>,
    out: PathBuf,
}

fn parse_enum<T: ValueEnum>(value: &str, key: &str) -> anyhow::Result<T> {
    T::from_str(value, true).map_err(|e| anyhow::anyhow!("eval.{key}: {e}"))
}

fn prepare(cfg: &mut AppConfig, input: InputArgs) -> anyhow::Result<Prepared> {
    let out = input.out.unwrap_or_else(|| cfg.eval.output_dir.clone());
    let concurrency = input.concurrency.unwrap_or(cfg.eval.concurrency);
    if input.synthetic {
        let corpus = synthetic_corpus();
        let mut ctx = EvalContext::new(
            synthetic_verifier(&corpus, &cfg.llm.model),
            cfg.pipeline_config(),
            cfg.llm.swap_model.clone(),
        );
        ctx.concurrency = concurrency;
        return Ok(Prepared {
            ctx,
            claims: corpus.labeled(),
            load_report: None,
            out,
        });
    }

    if let Some(mode) = input.mode {
        cfg.service.provider_mode = match mode {
            Mode::Live => ProviderMode::Live,
            Mode::Replay => ProviderMode::Replay,
            Mode::OfflineDeterministic => ProviderMode::OfflineDeterministic,
        };
    }
    if let Some(dir) = input.fixtures {
        cfg.service.fixtures_dir = Some(dir);
        if input.mode.is_none() {
            cfg.service.provider_mode = ProviderMode::Replay;
        }
    }
    let path = input
        .dataset
        .or_else(|| cfg.eval.dataset.clone())
        .context("no dataset: pass --dataset, set eval.dataset, or use --synthetic")?;
    let format = match input.format {
        Some(f) => f,
        None => parse_enum(&cfg.eval.format, "format")?,
    };
    let label_map: LabelMap = match input.label_map.or_else(|| cfg.eval.label_map.clone()) {
        Some(text) => text.parse().map_err(anyhow::Error::msg)?,
        None if format == DatasetFormat::LiarTsv => {
            bail!("LIAR has six labels; pass --label-map to say which count as real and which as fake")
        }
        None => LabelMap::binary(),
    };
    let expected = match (
        input.expect_real.or(cfg.eval.expect_real),
        input.expect_fake.or(cfg.eval.expect_fake),
    ) {
        (Some(real), Some(fake)) => Some(ExpectedCounts { real, fake }),
        (None, None) => None,
        _ => bail!("--expect-real and --expect-fake go together"),
    };
    let options = LoadOptions {
        label_map,
        strict: input.strict || cfg.eval.strict,
        expected,
    };
    let dataset = load_dataset(&path, format, &options)?;
    eprintln!(
        "loaded {} claims ({} real, {} fake); skipped {} malformed, {} unmapped",
        dataset.claims.len(),
        dataset.report.real,
        dataset.report.fake,
        dataset.report.skipped_malformed,
        dataset.report.skipped_unmapped
    );

    let assembly = assemble(cfg, TokioClock::shared())?;
    if !assembly.credentials_present {
        bail!("live mode needs {} and the search credentials in the environment", cfg.llm.api_key_env);
    }
    let mut ctx = EvalContext::new(assembly.verifier, cfg.pipeline_config(), cfg.llm.swap_model.clone());
    ctx.concurrency = concurrency;
    Ok(Prepared {
        ctx,
        claims: dataset.claims,
        load_report: Some(dataset.report),
        out,
    })
}

async fn synth(out: PathBuf, cfg: &AppConfig) -> anyhow::Result<()> {
    let corpus = synthetic_corpus();
    std::fs::create_dir_all(&out)?;
    write_generic_csv(&out.join("synthetic_corpus.csv"), &corpus.labeled())?;
    std::fs::write(out.join("blacklist_sample.txt"), sample_blacklist_text())?;
    let labeled = corpus.labeled();
    let picked = corpus.demo_claims();
    let fixtures_dir = out.join("fixtures");
    let n = record_fixtures(&corpus, &picked, &fixtures_dir, &cfg.llm.model, &cfg.pipeline_config()).await?;
    write_generic_csv(&fixtures_dir.join("claims.csv"), &picked)?;
    eprintln!("wrote {} claims, {} blacklist entries, {n} fixture records", labeled.len(), factcheck_eval::synth::SAMPLE_BLACKLIST_SIZE);
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Run { input, variant } => {
            let variant = match variant {
                Some(v) => v,
                None => parse_enum(&cfg.eval.variant, "variant")?,
            };
            let p = prepare(&mut cfg, input)?;
            let run = run_eval(&p.ctx, &p.claims, variant).await?;
            let latency = measure_latency(&run.records);
            print!("variant={} model={} max_iters={}\n{}", variant.name(), run.model, run.max_iters, metrics_table(&run.metrics));
            write_run(&p.out, &run, p.load_report.as_ref(), latency)?;
        }
        Command::Sweep { input, rounds } => {
            let rounds = rounds.unwrap_or(cfg.eval.sweep_max_rounds);
            let p = prepare(&mut cfg, input)?;
            let rows = sweep_rounds(&p.ctx, &p.claims, rounds).await?;
            println!("rounds  real_f1  fake_f1  n_nei");
            for r in &rows {
                println!("{:>6}  {:>7.4}  {:>7.4}  {:>5}", r.rounds, r.metrics.real.f1, r.metrics.fake.f1, r.metrics.n_nei);
            }
            write_sweep(&p.out, &rows)?;
        }
        Command::Latency { input } => {
            let p = prepare(&mut cfg, input)?;
            let run = run_eval(&p.ctx, &p.claims, Variant::Full).await?;
            let s = measure_latency(&run.records);
            println!(
                "n={} min={}ms max={}ms mean={:.1}ms p50={}ms p95={}ms",
                s.n, s.min_ms, s.max_ms, s.mean_ms, s.p50_ms, s.p95_ms
            );
            write_run(&p.out, &run, p.load_report.as_ref(), s)?;
        }
        Command::Synth { out } => synth(out, &cfg).await?,
    }
    Ok(())
}
