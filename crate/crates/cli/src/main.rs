use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use ofpc::codegen::{emit_source, lower};
use ofpc::frontend::parse_source;
use ofpc::refinterp::Precision;
use ofpc::region::{interior_of, Extent};
use ofpc::sema::{analyze, CheckedProgram, Severity};
use ofpc::sim::{check_hazards, LaunchConfig};
use ofpc::swdemo::{
    parse_config, parse_extent, read_field_csv, run, wave_advance_program, write_diagnostics_csv, write_field_csv,
    Engine, FieldCsv, SWConfig, SWState, HALO,
};

#[derive(Parser)]
#[command(name = "ofpc", version, about = "Region/halo kernel compiler, simulator and shallow-water demo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and analyze a kernel source file.
    Check { source: PathBuf },
    /// Write one OpenCL-C file per kernel.
    Emit {
        source: PathBuf,
        #[arg(long, default_value = "16x8", value_parser = parse_extent)]
        group: Extent,
        #[arg(long, default_value = "f32")]
        precision: Precision,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
    /// Run the shallow-water demo from a config file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "sim")]
        engine: Engine,
        #[arg(short, long, default_value = "run")]
        output: PathBuf,
        /// Check the lowered kernel for barrier hazards before running.
        #[arg(long)]
        checked: bool,
    },
    /// Compare the final fields of two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        rtol: f64,
    },
    /// Time each engine over a list of interior widths; CSV on stdout.
    Bench {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "native,ref,sim")]
        engines: Vec<Engine>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Overrides the step count of the config.
        #[arg(long)]
        steps: Option<usize>,
    },
}

/// `Domain` exits 1, `Usage` exits 2.
enum Failure {
    Domain(String),
    Usage(String),
}

type CliResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Analyzes every kernel, printing all diagnostics; fails if any is an error.
fn checked_kernels(source: &Path) -> Result<Vec<CheckedProgram>, Failure> {
    let text = read(source)?;
    let module = parse_source(&text).map_err(|e| Failure::Usage(format!("{}: {e}", source.display())))?;
    let mut programs = Vec::new();
    let mut errors = 0;
    for k in &module.kernels {
        match analyze(k) {
            Ok(cp) => {
                for w in &cp.warnings {
                    println!("{}: {w}", source.display());
                }
                programs.push(cp);
            }
            Err(diags) => {
                for d in &diags {
                    println!("{}: {d}", source.display());
                }
                errors += diags.iter().filter(|d| d.severity == Severity::Error).count();
            }
        }
    }
    if errors > 0 {
        return Err(Failure::Domain(format!("{errors} error(s)")));
    }
    Ok(programs)
}

fn cmd_check(source: &Path) -> CliResult {
    checked_kernels(source).map(|_| ())
}

fn cmd_emit(source: &Path, group: Extent, precision: Precision, dir: &Path) -> CliResult {
    let programs = checked_kernels(source)?;
    create_dir(dir)?;
    for cp in programs {
        let ir = lower(&cp, group).map_err(|e| Failure::Domain(format!("{}: {e}", cp.program.name)))?;
        write(&dir.join(format!("{}.cl", ir.name)), &emit_source(&ir, precision))?;
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<SWConfig, Failure> {
    parse_config(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_state(dir: &Path, suffix: &str, s: &SWState) -> CliResult {
    for (name, f) in [("h", &s.h), ("u", &s.u), ("v", &s.v)] {
        write(&dir.join(format!("{name}{suffix}.csv")), &write_field_csv(f, HALO))?;
    }
    Ok(())
}

fn cmd_run(config: &Path, engine: Engine, dir: &Path, checked: bool) -> CliResult {
    let cfg = load_config(config)?;
    if checked && engine == Engine::Sim {
        let domain = |e: String| Failure::Domain(e);
        let ir = lower(&wave_advance_program().map_err(|e| domain(e.to_string()))?, cfg.group)
            .map_err(|e| domain(e.to_string()))?;
        let hazards = check_hazards(&ir, &LaunchConfig::new(cfg.interior, cfg.group, cfg.precision));
        if let Some(h) = hazards.first() {
            return Err(domain(format!("{} hazard(s), first: {h}", hazards.len())));
        }
    }
    let result = run(&cfg, engine).map_err(|e| Failure::Domain(e.to_string()))?;
    create_dir(dir)?;
    write_state(dir, "_initial", &result.initial)?;
    write_state(dir, "", &result.state)?;
    write(&dir.join("diagnostics.csv"), &write_diagnostics_csv(&result.diagnostics))?;
    println!(
        "{engine}: {} steps on {}, total {:.3} s, mean step {:.3} ms",
        cfg.steps,
        cfg.interior,
        result.elapsed.as_secs_f64(),
        ms(result.mean_step_time())
    );
    Ok(())
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

struct Worst {
    field: &'static str,
    x: usize,
    y: usize,
    a: f64,
    b: f64,
    rel: f64,
}

/// Each interior cell's `|a - b|` is scaled by the largest `|b|` of its field.
fn cmd_compare(a: &Path, b: &Path, rtol: f64) -> CliResult {
    let mut worst: Option<Worst> = None;
    for field in ["h", "u", "v"] {
        let load = |dir: &Path| -> Result<FieldCsv, Failure> {
            let p = dir.join(format!("{field}.csv"));
            read_field_csv(&read(&p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        };
        let (fa, fb) = (load(a)?, load(b)?);
        if fa.field.full != fb.field.full || fa.halo != fb.halo {
            return Err(Failure::Usage(format!(
                "{field}: shapes differ ({} halo {} vs {} halo {})",
                fa.field.full, fa.halo, fb.field.full, fb.halo
            )));
        }
        let rect = interior_of(fb.field.full, fb.halo).map_err(|e| Failure::Usage(e.to_string()))?;
        let scale = rect.cells().map(|(x, y)| fb.field.get(x, y).abs()).fold(0.0, f64::max);
        for (x, y) in rect.cells() {
            let (va, vb) = (fa.field.get(x, y), fb.field.get(x, y));
            let diff = (va - vb).abs();
            let rel = if diff == 0.0 {
                0.0
            } else if scale > 0.0 {
                diff / scale
            } else {
                f64::INFINITY
            };
            // NaN compares false, so treat it as the worst possible
            let rel = if rel.is_nan() { f64::INFINITY } else { rel };
            if worst.as_ref().is_none_or(|w| rel > w.rel) {
                worst = Some(Worst { field, x, y, a: va, b: vb, rel });
            }
        }
    }
    let Some(w) = worst else { return Ok(()) };
    let line = format!(
        "worst: {} at ({},{}): {:e} vs {:e}, relative difference {:e}",
        w.field, w.x, w.y, w.a, w.b, w.rel
    );
    if w.rel <= rtol {
        println!("{line} (within rtol {rtol:e})");
        Ok(())
    } else {
        Err(Failure::Domain(format!("{line} exceeds rtol {rtol:e}")))
    }
}

fn cmd_bench(config: &Path, sizes: &[usize], engines: &[Engine], repeats: usize, steps: Option<usize>) -> CliResult {
    let base = load_config(config)?;
    if repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    println!("size,engine,mean_step_ms");
    for &n in sizes {
        let mut cfg = base.clone();
        cfg.interior = Extent::new(n, n);
        cfg.center = (n as f64 * cfg.dx / 2.0, n as f64 * cfg.dy / 2.0);
        if let Some(s) = steps {
            cfg.steps = s;
        }
        for &engine in engines {
            let mut times = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let r = run(&cfg, engine).map_err(|e| Failure::Domain(format!("size {n}, {engine}: {e}")))?;
                times.push(ms(r.mean_step_time()));
            }
            times.sort_by(f64::total_cmp);
            println!("{n},{engine},{:.6}", times[times.len() / 2]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { source } => cmd_check(source),
        Command::Emit {
            source,
            group,
            precision,
            output,
        } => cmd_emit(source, *group, *precision, output),
        Command::Run {
            config,
            engine,
            output,
            checked,
        } => cmd_run(config, *engine, output, *checked),
        Command::Compare { a, b, rtol } => cmd_compare(a, b, *rtol),
        Command::Bench {
            config,
            sizes,
            engines,
            repeats,
            steps,
        } => cmd_bench(config, sizes, engines, *repeats, *steps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
