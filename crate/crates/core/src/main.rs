use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use volterra_mr::harness::{run, write_output, ExperimentConfig, HarnessError, Scenario};

fn cli() -> Command {
    let mut cmd = Command::new("volterra-mr")
        .about("Solvers and regularity diagnostics for parabolic Volterra equations")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_name("N")
                .help("RNG seed"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("PATH")
                .help("CSV output path (default: stdout)"),
        )
        .arg(
            Arg::new("tol")
                .long("tol")
                .global(true)
                .value_name("TOL")
                .help("quadrature tolerance"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key = value file; flags override it"),
        );
    for s in Scenario::ALL {
        let mut sub = Command::new(s.name());
        for (key, default) in s.schema() {
            let help = if default.is_empty() {
                String::new()
            } else {
                format!("[default: {default}]")
            };
            sub = sub.arg(Arg::new(*key).long(*key).value_name("VALUE").help(help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn build_config(scenario: Scenario, m: &ArgMatches) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| HarnessError::validation("config", format!("{path}: {e}")))?;
            ExperimentConfig::parse(scenario, &text)?
        }
        None => ExperimentConfig::new(scenario),
    };
    for key in ["seed", "out", "tol"] {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    for (key, _) in scenario.schema() {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let scenario: Scenario = name.parse().expect("subcommands mirror Scenario::ALL");

    let cfg = match build_config(scenario, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = run(&cfg);
    let out_path: Option<PathBuf> = cfg.out.clone();
    if let Some(out) = &outcome.output {
        if let Err(e) = write_output(out, out_path.as_deref()) {
            eprintln!("error: writing output: {e}");
            return ExitCode::from(3);
        }
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.exit_code() as u8)
}
