use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chainrisk_core::alert::{RuleSet, Sink};
use chainrisk_core::kri::{KriContext, KriEngine, KriRegistry};
use chainrisk_core::scoring::{default_norms, parse_norms, RiskWeights, Scorer};
use chainrisk_core::sim::{bundled, run, SimConfig, Simulation};
use chainrisk_core::telemetry::{parse_event_log, TelemetryEvent};
use chainrisk_service::audit::{read_log, AuditLog};
use chainrisk_service::pipeline::{self, Pipeline, PipelineConfig, Snapshot, Source};
use chainrisk_service::report::generate_report;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainrisk", version, about = "Blockchain risk monitoring")]
struct Cli {
    /// Root directory for the audit log and state snapshot.
    #[arg(long, env = "CHAINRISK_DATA_DIR", default_value = "chainrisk-data", global = true)]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a telemetry log from a scenario.
    Simulate {
        /// Simulator config JSON; replaces the scenario file's config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bundled scenario name or scenario file path.
        #[arg(long, default_value = "healthy")]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        slots: Option<u64>,
        /// Output NDJSON path; `-` for stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Run the pipeline and serve the HTTP API.
    Serve {
        /// `sim:<scenario>` for live simulation or `log:<path>` to replay.
        #[arg(long, default_value = "sim:healthy")]
        source: String,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Static token required on mutating routes.
        #[arg(long, env = "CHAINRISK_API_TOKEN")]
        token: Option<String>,
        /// Wall-clock delay between ticks.
        #[arg(long, default_value_t = 1000)]
        tick_ms: u64,
        /// Stop a simulated source after this many slots.
        #[arg(long)]
        slots: Option<u64>,
        /// Append fired alerts to this NDJSON file.
        #[arg(long)]
        alert_file: Option<PathBuf>,
        /// POST fired alerts to this URL.
        #[arg(long)]
        webhook: Option<String>,
    },
    /// Replay a telemetry log through the pipeline as fast as possible.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Compliance report over the audit log in the data directory.
    Report {
        #[arg(long, allow_negative_numbers = true)]
        from: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<i64>,
    },
    /// Risk score at the end of a telemetry log.
    Score {
        #[arg(long)]
        log: PathBuf,
        /// `equal`, `financial_institution` or a weights JSON path.
        #[arg(long, default_value = "equal")]
        weights: String,
        #[arg(long)]
        norms: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// KRI registry JSON; the bundled registry when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// `default`, `table1` or a rules JSON path. When omitted the last
    /// persisted ruleset is used, falling back to `default`.
    #[arg(long)]
    rules: Option<String>,
    /// `equal`, `financial_institution` or a weights JSON path.
    #[arg(long, default_value = "equal")]
    weights: String,
    /// Normalization anchors JSON; the bundled norms when omitted.
    #[arg(long)]
    norms: Option<PathBuf>,
    /// Evaluation context JSON (own validators, censorship horizon, ...).
    #[arg(long)]
    context: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_registry(path: Option<&Path>) -> Result<KriRegistry> {
    match path {
        Some(p) => Ok(KriRegistry::from_json(&read(p)?)?),
        None => Ok(KriRegistry::default_registry()),
    }
}

fn load_rules(spec: &str) -> Result<RuleSet> {
    Ok(match spec {
        "default" => RuleSet::default_rules(),
        "table1" => RuleSet::table1(),
        path => RuleSet::from_json(&read(Path::new(path))?)?,
    })
}

fn load_weights(spec: &str) -> Result<RiskWeights> {
    Ok(match spec {
        "equal" => RiskWeights::equal(),
        "financial_institution" => RiskWeights::financial_institution(),
        path => RiskWeights::from_json(&read(Path::new(path))?)?,
    })
}

fn load_log(path: &Path) -> Result<Vec<TelemetryEvent>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(parse_event_log(std::io::BufReader::new(file))?)
}

fn pipeline_config(engine: &EngineArgs, data_dir: &Path) -> Result<PipelineConfig> {
    let snapshot_path = data_dir.join("state.json");
    let rules = match &engine.rules {
        Some(spec) => load_rules(spec)?,
        None => match Snapshot::load(&snapshot_path) {
            Some(snap) => {
                tracing::info!(version = snap.rules.version, "restoring persisted ruleset");
                snap.rules
            }
            None => RuleSet::default_rules(),
        },
    };
    let context = match &engine.context {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => KriContext::default(),
    };
    Ok(PipelineConfig {
        registry: load_registry(engine.registry.as_deref())?,
        context,
        rules,
        norms: match &engine.norms {
            Some(p) => parse_norms(&read(p)?)?,
            None => default_norms(),
        },
        weights: load_weights(&engine.weights)?,
        snapshot_path: Some(snapshot_path),
        ..PipelineConfig::default()
    })
}

fn open_audit(data_dir: &Path) -> Result<AuditLog> {
    std::fs::create_dir_all(data_dir)
        .with_context(|| format!("creating data dir {}", data_dir.display()))?;
    let (log, recovery) = AuditLog::open(data_dir.join("audit.ndjson"))?;
    tracing::info!(
        entries = recovery.entries,
        discarded_bytes = recovery.discarded_bytes,
        next_seq = log.next_seq(),
        "audit log opened"
    );
    Ok(log)
}

fn source(spec: &str, slots: Option<u64>) -> Result<Source> {
    if let Some(name) = spec.strip_prefix("sim:") {
        let file = bundled::resolve(name)?;
        return Ok(Source::simulate(Simulation::new(file.config, file.scenarios)?, slots));
    }
    if let Some(path) = spec.strip_prefix("log:") {
        return Ok(Source::replay(load_log(Path::new(path))?));
    }
    bail!("--source must be `sim:<scenario>` or `log:<path>`, got `{spec}`")
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Simulate {
            config,
            scenario,
            seed,
            slots,
            out,
        } => {
            let file = bundled::resolve(&scenario)?;
            let mut cfg: SimConfig = match config {
                Some(p) => serde_json::from_str(&read(&p)?)?,
                None => file.config,
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let n = slots.or(file.slots).unwrap_or(384);
            let bytes = run(cfg, &file.scenarios, n)?;
            if out == "-" {
                use std::io::Write;
                std::io::stdout().write_all(&bytes)?;
            } else {
                std::fs::write(&out, bytes).with_context(|| format!("writing {out}"))?;
                tracing::info!(slots = n, out = %out, "telemetry written");
            }
        }
        Cmd::Serve {
            source: spec,
            engine,
            port,
            bind,
            token,
            tick_ms,
            slots,
            alert_file,
            webhook,
        } => {
            let mut config = pipeline_config(&engine, &cli.data_dir)?;
            if let Some(path) = alert_file {
                config.sinks.push(Sink::File { path });
            }
            if let Some(url) = webhook {
                config.sinks.push(Sink::Webhook {
                    url,
                    timeout_ms: 2_000,
                });
            }
            let p = Pipeline::new(config, source(&spec, slots)?, open_audit(&cli.data_dir)?)?;
            let (handle, _join) = pipeline::spawn(p, Duration::from_millis(tick_ms));
            let app = chainrisk_service::api::router(handle.clone(), token);
            let listener = tokio::net::TcpListener::bind((bind.as_str(), port)).await?;
            tracing::info!(addr = %listener.local_addr()?, "serving");
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
            handle.shutdown();
        }
        Cmd::Replay { log, engine } => {
            let config = pipeline_config(&engine, &cli.data_dir)?;
            let mut p = Pipeline::new(config, Source::replay(load_log(&log)?), open_audit(&cli.data_dir)?)?;
            let ticks = p.run_to_end()?;
            let fired: Vec<_> = p
                .alerts()
                .iter()
                .map(|a| serde_json::json!({ "alert_id": a.alert_id, "rule_id": a.rule_id, "fired_at": a.fired_at, "state": a.state }))
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "ticks": ticks, "alerts": fired }))?
            );
        }
        Cmd::Report { from, to } => {
            let entries = read_log(cli.data_dir.join("audit.ndjson"))?;
            let report = generate_report(&entries, from.unwrap_or(i64::MIN), to.unwrap_or(i64::MAX))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Score { log, weights, norms } => {
            let registry = KriRegistry::default_registry();
            let norms = match norms {
                Some(p) => parse_norms(&read(&p)?)?,
                None => default_norms(),
            };
            let scorer = Scorer::with_registry(norms, load_weights(&weights)?, &registry)?;
            let events = load_log(&log)?;
            let Some(last) = events.last().map(|e| e.ts) else {
                bail!("{} holds no events", log.display());
            };
            let mut engine = KriEngine::new(registry, KriContext::default());
            for e in &events {
                engine.ingest(e)?;
            }
            let score = scorer.score(&engine.evaluate(last), last)?;
            println!("{}", serde_json::to_string_pretty(&score)?);
        }
    }
    Ok(())
}
