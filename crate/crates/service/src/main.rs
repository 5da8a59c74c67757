use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fairsense::config::{resolve_config_path, EngineConfig};
use fairsense::{batch, server, AppState};
use fairsense_core::image::{ImageInput, MediaType};
use fairsense_core::index::{build_index, ingest_risk_corpus, ingest_rmf_corpus, save_index};
use fairsense_core::risk::{assess, to_csv, AssessOptions};
use tracing::info;

#[derive(Parser)]
#[command(name = "fairsense", version, about = "Bias analysis for text and images, plus AI risk lookup")]
struct Cli {
    /// Config file (TOML). FAIRSENSE_CONFIG takes precedence when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one text and print the report as JSON.
    AnalyzeText {
        /// Text to analyze; read from --file or stdin when omitted.
        text: Option<String>,
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Analyze one PNG or JPEG image and print the report as JSON.
    AnalyzeImage {
        path: PathBuf,
        #[arg(long)]
        id: Option<String>,
    },
    /// Analyze a CSV with a `text` column (and optional `id`).
    BatchText { input: PathBuf, output: PathBuf },
    /// Analyze every image listed in a file, one path per line.
    BatchImages { list: PathBuf, output: PathBuf },
    /// Match a project description against the risk catalogue and write CSV.
    Risk {
        /// Project or use-case description.
        description: String,
        #[arg(long, default_value_t = 5)]
        k_risks: usize,
        #[arg(long, default_value_t = 3)]
        k_mit: usize,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Index management.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Embed the risk and framework corpora into `<out>/risks.idx` and `<out>/rmf.idx`.
    Build {
        #[arg(long)]
        risks: PathBuf,
        #[arg(long)]
        rmf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Overrides the configured port.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

fn load_config(flag: Option<PathBuf>) -> Result<EngineConfig> {
    let Some(path) = resolve_config_path(flag) else {
        bail!("no config file: pass --config <file> or set FAIRSENSE_CONFIG");
    };
    let cfg = EngineConfig::load(&path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_text(text: Option<String>, file: Option<PathBuf>) -> Result<String> {
    if let Some(t) = text {
        return Ok(t);
    }
    if let Some(f) = file {
        return std::fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()));
    }
    let mut buf = String::new();
    std::io::Read::read_to_string(&mut std::io::stdin(), &mut buf)?;
    Ok(buf)
}

fn index_build(cfg: &EngineConfig, risks: &Path, rmf: &Path, out: &Path) -> Result<()> {
    let embedder = cfg
        .embedder(cfg.limiter())?
        .context("index build needs an [embedding] backend")?;
    let risk_entries = ingest_risk_corpus(risks)?;
    let rmf_entries = ingest_rmf_corpus(rmf)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, entries) in [("risks.idx", risk_entries), ("rmf.idx", rmf_entries)] {
        let n = entries.len();
        let (index, _) = build_index(entries, embedder.as_ref())?;
        let path = out.join(name);
        save_index(&index, &path)?;
        info!(entries = n, tag = index.embedder_tag(), path = %path.display(), "wrote index");
    }
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    info!("shutting down; finishing in-flight requests");
}

fn serve(cfg: &EngineConfig, args: ServeArgs) -> Result<()> {
    let state = Arc::new(AppState::from_config(cfg)?);
    let port = args.port.unwrap_or(cfg.port);
    if port == 0 {
        bail!("port must be in [1, 65535]");
    }
    let addr: SocketAddr = format!("{}:{port}", args.host)
        .parse()
        .with_context(|| format!("bad listen address {}:{port}", args.host))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        info!(%addr, risk_routes = state.risk.is_some(), "serving");
        server::run(listener, state, shutdown_signal()).await?;
        Ok(())
    })
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let cfg = load_config(cli.config)?;
    match cli.command {
        Command::AnalyzeText { text, file, id } => {
            let engine = cfg.engine(&cfg.limiter())?;
            let text = read_text(text, file)?;
            print_json(&engine.analyze_text(id.as_deref(), &text)?)?;
        }
        Command::AnalyzeImage { path, id } => {
            let engine = cfg.engine(&cfg.limiter())?;
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let media_type = MediaType::from_path(&path).or_else(|_| MediaType::sniff(&bytes))?;
            let id = id.unwrap_or_else(|| path.display().to_string());
            print_json(&engine.analyze_image(&ImageInput::new(id, bytes, media_type))?)?;
        }
        Command::BatchText { input, output } => {
            let engine = cfg.engine(&cfg.limiter())?;
            print_json(&batch::batch_analyze_text(&input, &output, &engine, cfg.batch.workers)?)?;
        }
        Command::BatchImages { list, output } => {
            let engine = cfg.engine(&cfg.limiter())?;
            print_json(&batch::batch_analyze_images(&list, &output, &engine, cfg.batch.workers)?)?;
        }
        Command::Risk {
            description,
            k_risks,
            k_mit,
            out,
        } => {
            let state = AppState::from_config(&cfg)?;
            let risk = state
                .risk
                .context("risk assessment needs [index] risks and rmf in the config")?;
            let (a, _) = assess(
                &description,
                &risk.risks,
                &risk.rmf,
                risk.embedder.as_ref(),
                AssessOptions { k_risks, k_mit },
            )?;
            let csv = to_csv(&a);
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
                    info!(rows = a.rows.len(), path = %path.display(), "wrote risk table");
                }
                None => std::io::Write::write_all(&mut std::io::stdout(), &csv)?,
            }
        }
        Command::Index {
            command: IndexCommand::Build { risks, rmf, out },
        } => index_build(&cfg, &risks, &rmf, &out)?,
        Command::Serve(args) => serve(&cfg, args)?,
    }
    Ok(())
}
