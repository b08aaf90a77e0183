use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fsrg::config::{self, LoadedRun, ReportFormat};
use fsrg::error::Result;
use fsrg::model::{verify_hypotheses, ModelSpec};
use fsrg::pipeline::{
    analyticity_probe, exit_code_for, property_suite, quadratic_control, run_pipeline, sweep_g, write_run,
};

#[derive(Parser, Debug)]
#[command(name = "fsrg", version, about = "Feshbach-Schur renormalization for symmetric atoms in a quantized field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run or model config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Report format printed to stdout and written to disk.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Kv,
    Digest,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline: hypotheses, RG iteration, eigenvectors, oracle comparison.
    Run(Common),
    /// Check the model hypotheses only.
    Verify(Common),
    /// Contour, Cauchy-Riemann and reflection probes of the eigenvalue in s.
    ProbeAnalyticity(Common),
    /// Coupling-strength sweep of the eigenvalue shift and eigenspace distance.
    SweepG {
        #[command(flatten)]
        common: Common,
        /// Require the upper exponent bound as well.
        #[arg(long)]
        two_sided: bool,
    },
    /// Seeded invariant suite.
    Suite(Common),
}

struct Ctx {
    run: LoadedRun,
    spec: ModelSpec,
    name: String,
    out: PathBuf,
    seed: u64,
    formats: Vec<ReportFormat>,
}

fn prepare(c: &Common) -> Result<Ctx> {
    let run = config::load(&c.config)?;
    let spec = ModelSpec::from_config(&run.model)?;
    let out = match &c.out {
        Some(o) => o.clone(),
        None => c.config.parent().unwrap_or(Path::new(".")).join(&run.run.output_dir),
    };
    let formats = match c.format {
        Some(Format::Kv) => vec![ReportFormat::Kv],
        Some(Format::Digest) => vec![ReportFormat::Digest],
        None => run.run.formats.clone(),
    };
    let seed = c.seed.unwrap_or(run.run.seed);
    Ok(Ctx { name: spec.name.clone(), run, spec, out, seed, formats })
}

fn emit(ctx: &Ctx, stem: &str, kv: &str, digest: &str) -> Result<()> {
    std::fs::create_dir_all(&ctx.out)?;
    for f in &ctx.formats {
        let (ext, body) = match f {
            ReportFormat::Kv => ("kv", kv),
            ReportFormat::Digest => ("txt", digest),
        };
        std::fs::write(ctx.out.join(format!("{stem}.{ext}")), body)?;
        print!("{body}");
    }
    Ok(())
}

fn status(pass: bool) -> i32 {
    if pass {
        0
    } else {
        2
    }
}

fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Run(c) => {
            let ctx = prepare(c)?;
            let report = run_pipeline(&ctx.spec, &ctx.run.run.rg)?;
            write_run(&report, &ctx.out, &ctx.formats)?;
            for f in &ctx.formats {
                match f {
                    ReportFormat::Kv => print!("{}", report.to_kv()),
                    ReportFormat::Digest => print!("{}", report.to_digest()),
                }
            }
            Ok(status(report.all_pass()))
        }
        Command::Verify(c) => {
            let ctx = prepare(c)?;
            let rep = verify_hypotheses(&ctx.spec);
            let mut kv = format!("model = {}\n", ctx.name);
            let mut digest = format!("{}: hypotheses\n", ctx.name);
            for it in &rep.items {
                kv.push_str(&format!("hypothesis.{}.pass = {}\nhypothesis.{}.value = {:.12e}\n", it.name, it.pass, it.name, it.value));
                digest.push_str(&format!("  {:<24} {}  {}\n", it.name, if it.pass { "pass" } else { "FAIL" }, it.note));
            }
            kv.push_str(&format!("status = {}\n", if rep.all_pass() { "pass" } else { "fail" }));
            emit(&ctx, "verify", &kv, &digest)?;
            Ok(status(rep.all_pass()))
        }
        Command::ProbeAnalyticity(c) => {
            let ctx = prepare(c)?;
            let rep = analyticity_probe(&ctx.spec, &ctx.run.run.rg, &ctx.run.run.probes)?;
            emit(&ctx, "analyticity", &rep.to_kv(&ctx.name), &rep.to_digest(&ctx.name))?;
            Ok(status(rep.all_pass()))
        }
        Command::SweepG { common, two_sided } => {
            let ctx = prepare(common)?;
            let two = *two_sided || quadratic_control(&ctx.spec);
            let rep = sweep_g(&ctx.spec, &ctx.run.run.rg, &ctx.run.run.probes, two)?;
            emit(&ctx, "sweep", &rep.to_kv(&ctx.name), &rep.to_digest(&ctx.name))?;
            std::fs::write(ctx.out.join("sweep.dat"), rep.oracle.to_columns())?;
            Ok(status(rep.all_pass()))
        }
        Command::Suite(c) => {
            let ctx = prepare(c)?;
            let rep = property_suite(&ctx.spec, &ctx.run.run.rg, ctx.seed)?;
            emit(&ctx, "suite", &rep.to_kv(&ctx.name), &rep.to_digest(&ctx.name))?;
            Ok(status(rep.all_pass()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
