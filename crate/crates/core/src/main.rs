use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ap_psystem::harness::{
    csv_string, emit_csv, format_float, load_config, record_from_run, run_study, scheme_config_from_entries,
    write_plot_tables, Entries, StudySpec,
};
use ap_psystem::parallel::{with_threads, Execution};
use ap_psystem::schemes::run;
use ap_psystem::verification::{format_rows, rows_csv, Suite};
use ap_psystem::Error;

/// Asymptotic-preserving solver for the linearized p-system.
#[derive(Parser, Debug)]
#[command(name = "ap-psystem", version)]
struct Cli {
    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single simulation and report its errors.
    Run(RunArgs),
    /// Run a convergence study and write CSV.
    Study(StudyArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
}

/// Flags shared by `run` and `study`. In `study` the scheme, eps and nx
/// flags take comma-separated lists.
#[derive(Args, Debug, Default)]
struct SimFlags {
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    cfl_hat: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    /// Lax-Friedrichs viscosity of the baselines: wave_speed or classical.
    #[arg(long)]
    viscosity: Option<String>,
    /// Ghost-cell policy: reflection or extrapolation.
    #[arg(long)]
    ghosts: Option<String>,
    /// Output CSV path (standard output when absent).
    #[arg(long, value_name = "FILE")]
    out: Option<String>,
}

impl SimFlags {
    fn overlay(&self, entries: &mut Entries) {
        let pairs = [
            ("scheme", &self.scheme),
            ("case", &self.case),
            ("eps", &self.eps),
            ("nx", &self.nx),
            ("cfl_hat", &self.cfl_hat),
            ("t_final", &self.t_final),
            ("viscosity", &self.viscosity),
            ("ghosts", &self.ghosts),
            ("out", &self.out),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                entries.insert(k.to_string(), v.clone());
            }
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    flags: SimFlags,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Study specification in `key = value` form.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[command(flatten)]
    flags: SimFlags,
    /// Directory for per-(scheme, eps) `nx error` tables.
    #[arg(long, value_name = "DIR")]
    emit_plot_table: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// consistency_v, consistency_u, multiscale, conditioning, splitting or all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Also write the results as CSV.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solve(_) | Error::Step { .. } | Error::NonFinite(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn entries_from(config: Option<&Path>, extra: Option<&Path>) -> Result<Entries, Failure> {
    let mut entries = Entries::new();
    for path in [config, extra].into_iter().flatten() {
        entries.extend(load_config(path)?);
    }
    Ok(entries)
}

fn write_output(out: Option<&str>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Usage(Error::io(path, e).to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(config: Option<&Path>, args: &RunArgs) -> Result<(), Failure> {
    let mut entries = entries_from(config, None)?;
    args.flags.overlay(&mut entries);
    let cfg = scheme_config_from_entries(&entries)?;
    let result = run(&cfg)?;
    let rec = record_from_run(&cfg, &result)?;
    eprintln!(
        "{} {} eps={} nx={} steps={} dt={} err_v={:e} err_u={:e} err_combined={:e} max_cond={:e}",
        cfg.kind,
        cfg.case,
        format_float(cfg.eps),
        cfg.n_cells,
        result.steps_taken,
        result.dt_used,
        rec.err_v,
        rec.err_u,
        rec.err_combined,
        result.max_condition_estimate()
    );
    write_output(entries.get("out").map(String::as_str), &csv_string(std::slice::from_ref(&rec)))?;
    if !rec.flags.is_empty() {
        let tokens: Vec<&str> = rec.flags.iter().map(|f| f.token()).collect();
        return Err(Failure::Numerical(format!("run flagged: {}", tokens.join(";"))));
    }
    Ok(())
}

fn cmd_study(config: Option<&Path>, args: &StudyArgs) -> Result<(), Failure> {
    let mut entries = entries_from(config, args.spec.as_deref())?;
    args.flags.overlay(&mut entries);
    if let Some(d) = &args.emit_plot_table {
        entries.insert("emit_plot_table".into(), d.clone());
    }
    if let Some(t) = &args.threads {
        entries.insert("threads".into(), t.clone());
    }
    let spec = StudySpec::from_entries(&entries)?;
    let records = match entries.get("threads") {
        Some(t) => {
            let n: usize = t
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("threads = '{t}' is not a count")))?;
            with_threads(n, || run_study(&spec, Execution::Parallel))??
        }
        None => run_study(&spec, Execution::Parallel)?,
    };
    match entries.get("out") {
        Some(path) => emit_csv(&records, Path::new(path))?,
        None => print!("{}", csv_string(&records)),
    }
    if let Some(dir) = entries.get("emit_plot_table") {
        let written = write_plot_tables(&records, Path::new(dir))?;
        eprintln!("wrote {} plot tables to {dir}", written.len());
    }
    let flagged = records.iter().filter(|r| !r.flags.is_empty()).count();
    if flagged > 0 {
        eprintln!("{flagged} of {} rows flagged", records.len());
    }
    Ok(())
}

fn cmd_verify(config: Option<&Path>, args: &VerifyArgs) -> Result<(), Failure> {
    let entries = entries_from(config, None)?;
    let suites: Vec<Suite> = if args.suite.trim() == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![args.suite.parse::<Suite>()?]
    };
    let mut rows = Vec::new();
    for s in suites {
        rows.extend(s.run()?);
    }
    print!("{}", format_rows(&rows));
    let out = args
        .out
        .as_ref()
        .map(|p| p.to_string_lossy().into_owned())
        .or_else(|| entries.get("out").cloned());
    if let Some(path) = out {
        write_output(Some(&path), &rows_csv(&rows))?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} of {} checks failed", rows.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let config = cli.config.as_deref();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(config, a),
        Command::Study(a) => cmd_study(config, a),
        Command::Verify(a) => cmd_verify(config, a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
