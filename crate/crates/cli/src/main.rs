use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bcsgl_cli::config::parse_h_list;
use bcsgl_cli::{
    exit, prop_test_suite, run_pipeline, validate_config_with, ConfigIssue, Fault, Overrides,
    Pipeline, RunConfig, StageError, SweepKind,
};

#[derive(Parser)]
#[command(name = "bcsgl", version, about = "BCS to Ginzburg-Landau pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for random multistarts, overriding `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated, strictly decreasing h values, e.g. "0.125,0.0625,0.03125".
    #[arg(long = "h-list", global = true)]
    h_list: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and print it with defaults filled in.
    Validate,
    /// Critical temperature and pair wave function (gap.json).
    Tc,
    /// GL coefficients for the configured D (coeffs.json).
    Coeffs,
    /// GL minimizer for the configured fields (gl.json).
    GlMin,
    /// Trace expansion sweep.
    VerifyThm2,
    /// Pair wave function distance sweep.
    VerifyThm3,
    /// Trial-state energy sweep against E^GL - B3.
    VerifyEnergy,
    /// Property suite with fixed seeds.
    PropTests {
        /// Inject a known defect to check that the suite catches it.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Every stage, report.csv included.
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    G1SignFlip,
}

fn config_error(issues: &[ConfigIssue]) -> ExitCode {
    for i in issues {
        eprintln!("config error: {i}");
    }
    let doc = serde_json::json!({ "status": "config_error", "errors": issues });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    ExitCode::from(exit::CONFIG_ERROR)
}

fn stage_error(out: &std::path::Path, e: &StageError) -> ExitCode {
    eprintln!("{e}");
    let doc = serde_json::json!({ "status": "failed", "error": e });
    let text = serde_json::to_string_pretty(&doc).unwrap();
    if fs::create_dir_all(out).is_ok() {
        let _ = fs::write(out.join("error.json"), format!("{text}\n"));
    }
    println!("{text}");
    ExitCode::from(exit::NUMERICAL_FAILURE)
}

fn load(cli: &Cli) -> Result<RunConfig, Vec<ConfigIssue>> {
    let h_list = match &cli.h_list {
        Some(s) => Some(parse_h_list(s).map_err(|m| {
            vec![ConfigIssue {
                key: "--h-list".into(),
                message: m,
            }]
        })?),
        None => None,
    };
    if cli.workers == Some(0) {
        return Err(vec![ConfigIssue {
            key: "--workers".into(),
            message: "must be at least 1".into(),
        }]);
    }
    let Some(path) = &cli.config else {
        return Err(vec![ConfigIssue {
            key: "--config".into(),
            message: "required for this subcommand".into(),
        }]);
    };
    let overrides = Overrides {
        output: cli.out.clone(),
        seed: cli.seed,
        h_list,
    };
    validate_config_with(path, &overrides)
}

fn print_sweep(p: &mut Pipeline, kind: SweepKind) -> Result<bool, StageError> {
    let s = p.sweep(kind)?;
    let status = if s.passed { "PASS" } else { "FAIL" };
    println!("{} {status}  {}", kind.name(), s.summary);
    Ok(s.passed)
}

fn run_stages(cli: &Cli, config: RunConfig) -> Result<bool, StageError> {
    let mut p = Pipeline::new(config);
    let _ = fs::remove_file(p.out.join("error.json"));
    let out = p.out.display().to_string();
    let passed = match cli.command {
        Command::Tc => {
            let s = p.gap()?;
            println!(
                "T_c = {:.12}  beta_c = {:.12}  kappa_c = {:.6}  residual {:.2e}",
                s.t_c, s.beta_c, s.kappa_c, s.eigen_residual
            );
            true
        }
        Command::Coeffs => {
            let c = p.coeffs()?;
            println!(
                "B1 = {:?}  B2 = {:.9}  B3 = {:.9}  normalization residual {:.2e}",
                c.coefficients.b1, c.coefficients.b2, c.coefficients.b3, c.normalization_residual
            );
            true
        }
        Command::GlMin => {
            let s = p.gl()?;
            println!(
                "E_GL = {:.12}  |grad| = {:.2e}  iterations {}  start {}",
                s.energy, s.gradient_norm, s.iterations, s.start
            );
            true
        }
        Command::VerifyThm2 => print_sweep(&mut p, SweepKind::Trace)?,
        Command::VerifyThm3 => print_sweep(&mut p, SweepKind::Alpha)?,
        Command::VerifyEnergy => print_sweep(&mut p, SweepKind::Energy)?,
        Command::All => {
            p = run_pipeline(p.config.clone())?;
            for kind in SweepKind::ALL {
                print_sweep(&mut p, kind)?;
            }
            p.all_passed()
        }
        Command::Validate | Command::PropTests { .. } => unreachable!(),
    };
    if !matches!(cli.command, Command::All) {
        p.write_report()?;
    }
    if !p.cache_hits.is_empty() {
        eprintln!("cache hits: {}", p.cache_hits.join(", "));
    }
    eprintln!("artifacts in {out}");
    Ok(passed)
}

fn prop_tests(cli: &Cli, fault: Option<FaultArg>) -> ExitCode {
    let fault = match fault {
        Some(FaultArg::G1SignFlip) => Fault::G1SignFlip,
        None => Fault::None,
    };
    let results = prop_test_suite(cli.seed.unwrap_or(0), fault);
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        if !r.passed {
            failed += 1;
        }
        println!(
            "{status} {:<13} {:<55} worst {:.3e} (tol {:.1e}, {} cases)",
            r.module, r.property, r.worst, r.tolerance, r.cases
        );
        if !r.passed {
            println!("     witness: {}", r.witness);
        }
    }
    println!(
        "{} of {} properties passed",
        results.len() - failed,
        results.len()
    );
    if let Some(out) = &cli.out {
        let text = serde_json::to_string_pretty(&results).unwrap();
        if let Err(e) = fs::create_dir_all(out)
            .and_then(|_| fs::write(out.join("prop_tests.json"), format!("{text}\n")))
        {
            eprintln!("cannot write prop_tests.json: {e}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(exit::ACCEPTANCE_REGRESSION)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("cannot size the worker pool: {e}");
        }
    }
    if let Command::PropTests { inject_fault } = cli.command {
        return prop_tests(&cli, inject_fault);
    }
    let config = match load(&cli) {
        Ok(c) => c,
        Err(issues) => return config_error(&issues),
    };
    if let Command::Validate = cli.command {
        println!("{}", serde_json::to_string_pretty(&config).unwrap());
        return ExitCode::SUCCESS;
    }
    let out = config.output.clone();
    match run_stages(&cli, config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(exit::ACCEPTANCE_REGRESSION),
        Err(e) => stage_error(&out, &e),
    }
}
