use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use jokeasy_cli::config::{build_engine, ConfigArgs};
use jokeasy_cli::replay::{replay, Direct, Http, BUNDLED_FIXTURE, BUNDLED_TRACE};
use jokeasy_cli::server::{self, AppState, Background};
use jokeasy_cli::trace::parse_trace;
use jokeasy_core::providers::{FixtureProvider, FixtureScript};
use jokeasy_core::{export_final, Engine, SessionId, Store, SystemClock, TopicBrief};

#[derive(Parser)]
#[command(name = "jokeasy", version, about = "Search-grounded co-writing of thematic jokes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Serve scripted provider replies instead of live APIs.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Persist sessions under this directory.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Replay a command trace against a fixture. Defaults to the bundled adult_life pair.
    Replay {
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Go through an in-process HTTP service instead of direct calls.
        #[arg(long)]
        http: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Create a session and save it.
    New {
        #[arg(long)]
        topic: String,
        #[arg(long)]
        supplement: Vec<String>,
        #[arg(long)]
        audience: Option<String>,
        #[arg(long)]
        data_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the final joke of a saved session.
    Export {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        session: String,
    },
}

fn read(path: &Option<PathBuf>, bundled: &str) -> anyhow::Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(bundled.to_owned()),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Cmd::Serve {
            addr,
            fixture,
            data_dir,
            config,
        } => {
            let config = config.resolve()?;
            let (engine, _) = build_engine(fixture.as_ref())?;
            let store = data_dir.map(Store::open).transpose()?;
            let state = AppState::new(engine, config, store)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = server::bind(&addr).await?;
                tracing::info!(addr = %listener.local_addr()?, "listening");
                server::serve(listener, state).await?;
                anyhow::Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Replay {
            fixture,
            trace,
            http,
            config,
        } => {
            let config = config.resolve()?;
            let script = FixtureScript::parse(&read(&fixture, BUNDLED_FIXTURE)?)?;
            let trace = parse_trace(&read(&trace, BUNDLED_TRACE)?)?;
            let (engine, _) = Engine::with_fixture(script);
            let report = if http {
                let state = AppState::new(engine, config.clone(), None)?;
                let bg = Background::start(state, "127.0.0.1:0")?;
                replay(&trace, &config, &mut Http::new(bg.url()))?
            } else {
                replay(&trace, &config, &mut Direct { engine: &engine })?
            };
            print!("{}", report.summary());
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::New {
            topic,
            supplement,
            audience,
            data_dir,
            config,
        } => {
            let config = config.resolve()?;
            let store = Store::open(data_dir)?;
            let idle = Arc::new(FixtureProvider::new(FixtureScript::new(true)));
            let engine = Engine::new(idle.clone(), idle, Arc::new(SystemClock));
            for id in store.list()? {
                engine.adopt(&store.load(&id)?);
            }
            let mut brief = TopicBrief::new(topic).with_supplements(supplement);
            brief.audience_hint = audience;
            let s = engine.create_session(brief, config)?;
            store.save(&s)?;
            println!("{}", s.id);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Export { data_dir, session } => {
            let store = Store::open(data_dir)?;
            print!("{}", export_final(&store.load(&SessionId::new(session))?)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
