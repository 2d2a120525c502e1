use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use convo::config::Config;
use convo::script::{run_replay, ReplayOptions};
use convo::session::{server, Service};

/// Build and run small programs by talking to an agent.
///
/// With no mode flag, starts a typed conversation on the terminal.
#[derive(Debug, Parser)]
#[command(name = "convo", version)]
struct Args {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay a conversation script headlessly
    #[arg(long, value_name = "SCRIPT", conflicts_with = "serve")]
    replay: Option<PathBuf>,
    /// Compare the replay's program and events against this golden file
    #[arg(long, value_name = "GOLDEN", requires = "replay")]
    assert: Option<PathBuf>,
    /// Write the golden file instead of comparing
    #[arg(long, requires = "assert")]
    bless: bool,
    /// Append this session's telemetry row to a CSV file
    #[arg(long, value_name = "CSV")]
    export_telemetry: Option<PathBuf>,
    /// Serve the WebSocket protocol on the configured address
    #[arg(long)]
    serve: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let config = match Config::load(args.config.as_deref()) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("convo: {err}");
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    let code = if let Some(script) = args.replay {
        let opts = ReplayOptions {
            script,
            assert: args.assert,
            bless: args.bless,
            telemetry: args.export_telemetry,
        };
        run_replay(&config, &opts, &mut stdout.lock())
    } else if args.serve {
        serve(&config)
    } else {
        match Service::from_config(&config) {
            Ok(service) => convo::repl::repl(&service, args.export_telemetry, std::io::stdin().lock(), &mut stdout.lock()),
            Err(err) => {
                eprintln!("convo: {err}");
                2
            }
        }
    };
    let _ = stdout.lock().flush();
    ExitCode::from(code as u8)
}

fn serve(config: &Config) -> i32 {
    let service = match Service::from_config(config) {
        Ok(s) => Arc::new(s),
        Err(err) => {
            eprintln!("convo: {err}");
            return 2;
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    runtime.block_on(async {
        let listener = match tokio::net::TcpListener::bind(&config.listen).await {
            Ok(l) => l,
            Err(err) => {
                eprintln!("convo: binding {}: {err}", config.listen);
                return 2;
            }
        };
        match listener.local_addr() {
            Ok(addr) => println!("listening on ws://{addr}/session"),
            Err(_) => println!("listening on ws://{}/session", config.listen),
        }
        match server::serve(service, listener).await {
            Ok(()) => 0,
            Err(err) => {
                eprintln!("convo: {err}");
                1
            }
        }
    })
}
