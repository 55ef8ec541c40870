//! Certified sub-level set persistence for closed-form functions on the
//! unit cube: builds interval-verified adaptive grids across a threshold
//! schedule, intersects them into a cellular filtration, reduces it over Z₂,
//! and writes the diagram together with an a-posteriori bottleneck bound.

mod spec_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use spec_file::FunctionSpec;
use veriph::filtration::DecimalStep;
use veriph::fourier::generate_fourier;
use veriph::pipeline::{run_pipeline, write_outputs, PipelineConfig, PipelineError};

const EXIT_CONFIG: u8 = 2;
const EXIT_TOTAL_FAILURE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "veriph",
    about = "Certified sub-level set persistence diagrams on [0,1]^N",
    after_help = "Exactly one function source is required: --function FILE or --modes M \
                  (with --seed). Outputs diagram.csv and report.json into --out."
)]
struct Cli {
    /// Function spec file (JSON; kind "fourier" or "expr")
    #[arg(long, value_name = "PATH")]
    function: Option<PathBuf>,

    /// Domain dimension N (the cube is [0,1]^N)
    #[arg(long = "dim", default_value_t = 2)]
    dim: usize,

    /// Threshold spacing, a decimal like 0.05
    #[arg(long, value_name = "REAL")]
    delta: String,

    /// Override the schedule bounds (two values: lo hi)
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    range: Option<Vec<f64>>,

    /// Maximum subdivision depth of the dyadic grids
    #[arg(long = "max-depth", default_value_t = veriph::grid::DEFAULT_MAX_DEPTH)]
    max_depth: usize,

    /// Bisections per axis inside every interval evaluation
    #[arg(long = "eval-subdiv", default_value_t = veriph::grid::DEFAULT_EVAL_SUBDIV)]
    eval_subdiv: usize,

    /// Worker threads for per-threshold grid construction
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Output directory for diagram.csv and report.json
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Seed for the random Fourier generator
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Generate a random Fourier series with this many modes
    #[arg(long, value_name = "M")]
    modes: Option<u32>,

    /// On any failed threshold, retry the whole schedule shifted by delta/2
    /// and keep the run with the smaller certified bound
    #[arg(long = "retry-offset", default_value_t = false)]
    retry_offset: bool,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, String> {
    let delta = DecimalStep::parse(&cli.delta).map_err(|e| e.to_string())?;
    let (function, desc) = match (&cli.function, cli.modes) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            FunctionSpec::parse(&text)?.build()?
        }
        (None, Some(modes)) => {
            if modes < 1 {
                return Err("--modes must be at least 1".into());
            }
            if cli.dim != 2 {
                return Err("generated Fourier series are functions on [0,1]^2; use --dim 2".into());
            }
            (
                generate_fourier(modes, cli.seed),
                format!("fourier modes={modes} seed={}", cli.seed),
            )
        }
        (Some(_), Some(_)) => {
            return Err("--function and --modes are mutually exclusive".into());
        }
        (None, None) => {
            return Err("one of --function or --modes is required".into());
        }
    };
    let range = match &cli.range {
        None => None,
        Some(v) if v.len() == 2 && v[0] < v[1] => Some((v[0], v[1])),
        Some(_) => return Err("--range needs two values with lo < hi".into()),
    };
    let mut cfg = PipelineConfig::new(function, cli.dim, delta);
    cfg.range = range;
    cfg.max_depth = cli.max_depth;
    cfg.eval_subdiv = cli.eval_subdiv;
    cfg.threads = cli.threads;
    cfg.retry_offset = cli.retry_offset;
    cfg.function_desc = desc;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match run_pipeline(&cfg) {
        Ok(result) => result,
        Err(PipelineError::TotalVerificationFailure) => {
            eprintln!("error: no threshold could be verified");
            return ExitCode::from(EXIT_TOTAL_FAILURE);
        }
        Err(e @ (PipelineError::Config(_) | PipelineError::Schedule(_))) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(PipelineError::Io(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match write_outputs(&result, &cli.out) {
        Ok((diagram, report)) => {
            let verified = result.statuses.iter().filter(|s| s.verified).count();
            println!(
                "thresholds: {} verified, {} failed (longest run {})",
                verified,
                result.statuses.len() - verified,
                result.max_failure_run
            );
            println!(
                "certified bottleneck bound: {} (= delta x {})",
                result.epsilon,
                result.max_failure_run + 1
            );
            println!("filtered complex: {} cells", result.filtered_cell_count);
            println!("diagram points: {}", result.diagram.total_points());
            println!("wall time: {} ms", result.wall_time_ms);
            println!("wrote {} and {}", diagram.display(), report.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: cannot write outputs: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
