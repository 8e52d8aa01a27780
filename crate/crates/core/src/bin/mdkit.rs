use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdkit::runner::config::parse_override;
use mdkit::runner::{self, DumpRecord, RunParams};
use mdkit::{Error, Result};

#[derive(Parser)]
#[command(name = "mdkit", version, about = "Maxwell-Dirac solvers and their limiting regimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Start from a named preset.
    #[arg(long)]
    preset: Option<String>,
    /// Override one key, e.g. `--set md.epsilon=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation to its final time.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Refinement study against the exact or a reference solution.
    Converge {
        #[command(flatten)]
        common: Common,
        /// `space` or `time`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated step sizes, coarse to fine.
        #[arg(long)]
        levels: Option<String>,
        /// Run the levels concurrently.
        #[arg(long)]
        parallel_levels: bool,
    },
    /// Compare two regimes over a list of ε or δ values.
    Compare {
        #[command(flatten)]
        common: Common,
        /// `md_vs_wkb`, `md_vs_sp` or `md_vs_md`.
        #[arg(long)]
        pair: Option<String>,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        parallel_levels: bool,
    },
    /// Print the header and value range of a field dump.
    DumpInfo { file: PathBuf },
}

fn load(common: &Common, extra: &[(&str, Option<&String>)]) -> Result<RunParams> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("--threads", e.to_string()))?;
    }
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Some(p) = &common.preset {
        overrides.push(("preset.name".to_string(), p.clone()));
    }
    for s in &common.overrides {
        overrides.push(parse_override(s)?);
    }
    if let Some(o) = &common.output {
        overrides.push(("output.dir".to_string(), o.display().to_string()));
    }
    for (k, v) in extra {
        if let Some(v) = v {
            overrides.push((k.to_string(), v.to_string()));
        }
    }
    RunParams::parse(&text, &overrides)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common } => {
            let p = load(&common, &[])?;
            let summary = runner::run(&p);
            let summary = summary?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            let last = summary.series.rows().last();
            println!("steps {} t {}", summary.steps, summary.final_time);
            if let Some(r) = last {
                println!("charge {:.15e} gauge_residual {:.3e}", r.charge, r.gauge_residual);
                if r.l2_error.is_finite() {
                    println!("l2_error {:.6e} linf_error {:.6e}", r.l2_error, r.linf_error);
                }
            }
            println!("output {}", p.out_dir.display());
        }
        Command::Converge { common, axis, levels, parallel_levels } => {
            let p = load(&common, &[("converge.axis", axis.as_ref()), ("converge.levels", levels.as_ref())])?;
            let rows = runner::convergence_sweep(&p, p.converge_axis, &p.converge_levels, parallel_levels)?;
            let path = runner::write_convergence(&p, &rows)?;
            print!("{}", runner::convergence_csv(&rows));
            eprintln!("wrote {}", path.display());
        }
        Command::Compare { common, pair, values, parallel_levels } => {
            let p = load(&common, &[("compare.pair", pair.as_ref()), ("compare.values", values.as_ref())])?;
            let rows = runner::compare_regimes(&p, p.compare_pair, &p.compare_values, p.compare_t_final, parallel_levels)?;
            let path = runner::write_comparison(&p, &rows)?;
            print!("{}", runner::comparison_csv(&rows));
            for r in rows.iter().filter_map(|r| r.caustic.map(|c| (r.value, c))) {
                eprintln!("caustic for value {} at t = {} (indicator {:.3e})", r.0, r.1.time, r.1.value);
            }
            eprintln!("wrote {}", path.display());
        }
        Command::DumpInfo { file } => {
            let rec = DumpRecord::read_file(&file)?;
            let h = &rec.header;
            println!("name {} kind {:?} components {}", h.name, h.kind, h.components);
            println!("n {:?} lower {:?} upper {:?}", h.n, h.lower, h.upper);
            println!("time {} epsilon {} delta {}", h.time, h.epsilon, h.delta);
            let (lo, hi) = rec.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            println!("values {} min {lo:e} max {hi:e}", rec.values.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
