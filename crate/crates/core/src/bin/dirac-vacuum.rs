use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Parser;
use serde_json::json;

use dirac_vacuum::config::{self, RunConfig};
use dirac_vacuum::output::write_json;
use dirac_vacuum::run::{self, Logger};
use dirac_vacuum::Error;

/// Number of concurrent child processes used by `--sweep`.
const WORKERS_ENV: &str = "DIRAC_VACUUM_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "dirac-vacuum", version, about = "Polarized Dirac vacuum solver")]
struct Cli {
    /// Configuration document (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,

    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    output: PathBuf,

    /// Start the SCF iteration from the density of a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,

    /// Run once per value, each in `<output>/<key>=<value>/`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,

    /// Override a single key (used by sweep workers).
    #[arg(long = "set", value_name = "KEY=VALUE", hide = true)]
    set: Vec<String>,
}

fn split_pair(s: &str, flag: &str) -> Result<(String, String), Error> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Validation {
            key: flag.to_owned(),
            message: format!("expected KEY=VALUE, got {s:?}"),
        })
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(&cli.config)?;
    let overrides = cli
        .set
        .iter()
        .map(|s| split_pair(s, "--set"))
        .collect::<Result<Vec<_>, _>>()?;
    config::parse_config_with(&text, &overrides)
}

fn single(cli: &Cli) -> ExitCode {
    let mut log = Logger::open(&cli.output).unwrap_or_else(|e| {
        eprintln!("warning: cannot open log in {}: {e}", cli.output.display());
        Logger::disabled()
    });
    let outcome = load(cli).and_then(|cfg| run::run(&cfg, &cli.output, cli.resume.as_deref(), &mut log));
    match outcome {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", cli.output.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log.error(&e);
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn sweep(cli: &Cli, spec: &str) -> ExitCode {
    let fail = |e: Error| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    };
    let (key, values) = match split_pair(spec, "--sweep") {
        Ok(kv) => kv,
        Err(e) => return fail(e),
    };
    if !config::known_keys().any(|k| k == key) {
        return fail(Error::Validation {
            key,
            message: "unknown sweep key".into(),
        });
    }
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_owned()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return fail(Error::Validation {
            key: "--sweep".into(),
            message: "no values given".into(),
        });
    }
    // validate every point up front so a typo fails before any work starts
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(e.into()),
    };
    for v in &values {
        let mut overrides: Vec<(String, String)> = Vec::new();
        for s in &cli.set {
            match split_pair(s, "--set") {
                Ok(kv) => overrides.push(kv),
                Err(e) => return fail(e),
            }
        }
        overrides.push((key.clone(), v.clone()));
        if let Err(e) = config::parse_config_with(&text, &overrides) {
            return fail(e);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cli.output) {
        return fail(e.into());
    }
    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1);
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => return fail(e.into()),
    };
    let dirs: Vec<PathBuf> = values
        .iter()
        .map(|v| cli.output.join(format!("{key}={}", v.replace(['/', '\\'], "_"))))
        .collect();
    let next = AtomicUsize::new(0);
    let codes = Mutex::new(vec![0i32; values.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers.min(values.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= values.len() {
                    break;
                }
                let mut cmd = std::process::Command::new(&exe);
                cmd.arg("--config").arg(&cli.config).arg("--output").arg(&dirs[i]);
                if let Some(r) = &cli.resume {
                    cmd.arg("--resume").arg(r);
                }
                for o in &cli.set {
                    cmd.arg("--set").arg(o);
                }
                cmd.arg("--set").arg(format!("{key}={}", values[i]));
                let code = match cmd.status() {
                    Ok(st) => st.code().unwrap_or(1),
                    Err(e) => {
                        eprintln!("error: cannot start worker: {e}");
                        1
                    }
                };
                codes.lock().expect("codes lock")[i] = code;
            });
        }
    });
    let codes = codes.into_inner().expect("codes lock");
    let runs: Vec<_> = values
        .iter()
        .zip(&dirs)
        .zip(&codes)
        .map(|((v, d), c)| json!({"value": v, "directory": rel(d, &cli.output), "exit_code": c}))
        .collect();
    if let Err(e) = write_json(&cli.output.join("sweep.json"), &json!({"key": key, "runs": runs})) {
        return fail(e);
    }
    match codes.iter().find(|&&c| c != 0) {
        Some(&c) => ExitCode::from(c.clamp(1, 255) as u8),
        None => ExitCode::SUCCESS,
    }
}

fn rel(p: &Path, base: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.sweep {
        Some(spec) => sweep(&cli, spec),
        None => single(&cli),
    }
}
