use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use msense_core::dialogue::MultisensoryModel;
use msense_core::serve::{ConversationService, DialogueAgent, ScriptedAgent, ServeConfig};
use tracing::{error, info};

use crate::config::{config_path, ConfigError, PipelineConfig};
use crate::modelling::{self, EvaluateArgs, GenerateArgs, TrainArgs};
use crate::pipeline::{self, StatsFormat};
use crate::{adapters, http};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "msense", version, about = "Build multisensory conversation corpora, train and serve the dialogue model")]
pub struct Cli {
    /// TOML config file. The MSENSE_CONFIG environment variable takes precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Validate config and inputs without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment raw sources into utterance drafts.
    Ingest {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sources processed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Split drafts into dialogues and assign dialogue-scoped speaker IDs.
    Speakers {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add paralinguistic annotations and voice descriptions.
    Annotate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut media, assign splits and write training examples.
    Build {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print per-split corpus statistics.
    Stats {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: StatsFormat,
    },
    /// Fine-tune the fusion modules and adapters.
    Train {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Generate responses and voice descriptions for held-out examples.
    Generate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        examples: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        /// Also synthesize each response into this directory.
        #[arg(long)]
        speech_dir: Option<PathBuf>,
    },
    /// Score generations, or run the modality ablation.
    Evaluate {
        #[arg(long)]
        generations: Option<PathBuf>,
        #[arg(long)]
        ablation: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        examples: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        /// Directory of WAVs, in name order, to score for emotion consistency.
        #[arg(long)]
        emotion_audio: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the HTTP conversation service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Answer with a stand-in agent that echoes the user.
        #[arg(long, conflicts_with = "checkpoint")]
        echo: bool,
    },
    /// Write a pairwise preference packet for human raters.
    ExportHumanEval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn load_config(flag: Option<&std::path::Path>) -> Result<PipelineConfig, ConfigError> {
    match config_path(flag) {
        Some(p) => PipelineConfig::load(&p),
        None => {
            let cwd = std::env::current_dir().map_err(|e| ConfigError { violations: vec![e.to_string()] })?;
            let mut cfg = PipelineConfig::default();
            cfg.resolve(&cwd);
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cfg, cli.command, cli.dry_run) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(cfg: &PipelineConfig, command: Command, dry_run: bool) -> Result<()> {
    match command {
        Command::Ingest { out, jobs } => pipeline::ingest(cfg, out, jobs, dry_run),
        Command::Speakers { input, out } => pipeline::speakers(cfg, input, out, dry_run),
        Command::Annotate { input, out } => pipeline::annotate(cfg, input, out, dry_run),
        Command::Build { input } => pipeline::build(cfg, input, dry_run),
        Command::Stats { manifest, splits, format } => pipeline::stats(cfg, manifest, splits, format),
        Command::Train { out, log, max_steps, epochs } => {
            modelling::train_cmd(cfg, TrainArgs { out, log, max_steps, epochs }, dry_run)
        }
        Command::Generate { checkpoint, examples, out, limit, speech_dir } => {
            modelling::generate_cmd(cfg, GenerateArgs { checkpoint, examples, out, limit, speech_dir }, dry_run)
        }
        Command::Evaluate { generations, ablation, checkpoint, examples, limit, emotion_audio, out_dir } => {
            modelling::evaluate_cmd(
                cfg,
                EvaluateArgs { generations, ablation, checkpoint, examples, limit, emotion_audio, out_dir },
                dry_run,
            )
        }
        Command::Serve { port, checkpoint, echo } => serve(cfg, port, checkpoint, echo, dry_run),
        Command::ExportHumanEval { samples, out } => modelling::export_human_eval_cmd(cfg, &samples, &out, dry_run),
    }
}

pub fn build_service(cfg: &PipelineConfig, checkpoint: Option<PathBuf>, echo: bool) -> Result<ConversationService> {
    let agent: Box<dyn DialogueAgent> = if echo {
        Box::new(ScriptedAgent::default())
    } else {
        let ckpt = checkpoint.unwrap_or_else(|| modelling::checkpoint_path(cfg));
        Box::new(MultisensoryModel::load(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?)
    };
    let mut serve_cfg =
        ServeConfig::new(cfg.serve.audio_dir.clone().unwrap_or_else(|| cfg.paths.runs_dir.join("serve_audio")));
    serve_cfg.max_history = cfg.serve.max_history;
    serve_cfg.session_ttl = Duration::from_secs(cfg.serve.session_ttl_s);
    serve_cfg.generation = cfg.generation;
    Ok(ConversationService::new(serve_cfg, agent, adapters::tts(cfg), adapters::live_asr(cfg))?)
}

fn serve(cfg: &PipelineConfig, port: Option<u16>, checkpoint: Option<PathBuf>, echo: bool, dry_run: bool) -> Result<()> {
    let service = Arc::new(build_service(cfg, checkpoint, echo)?);
    let port = port.unwrap_or(cfg.serve.port);
    if dry_run {
        info!(port, "dry run: service builds, not listening");
        return Ok(());
    }
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async move {
        let evictor = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                let n = evictor.evict_idle(std::time::Instant::now());
                if n > 0 {
                    info!(sessions = n, "evicted idle sessions");
                }
            }
        });
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await.with_context(|| format!("binding port {port}"))?;
        info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, http::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server failed")
    })
}
