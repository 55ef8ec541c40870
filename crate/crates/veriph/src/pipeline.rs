//! End-to-end driver: schedule, per-threshold verified grids and cellular
//! approximations (optionally in parallel), the intersected filtration,
//! persistence reduction, and the certified error bound, plus the writers
//! for `diagram.csv` and `report.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cw::cellular_approximation;
use crate::expr::FunctionExpr;
use crate::filtration::{
    a_posteriori_bound, build_schedule, intersect_into_filtration, DecimalStep, LevelOutcome,
    ScheduleError, ThresholdSchedule,
};
use crate::grid::{
    construct_verified_grid_with, partials_of, FailureKind, GridConfig, MAX_DEPTH_LIMIT,
};
use crate::persistence::{reduce, PersistenceDiagram};

/// Everything a pipeline run needs. The function has already been built
/// (from a file, an expression, or a seeded generator) by the caller.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub function: FunctionExpr,
    pub dims: usize,
    pub delta: DecimalStep,
    /// Schedule anchor; thresholds are `anchor + j·delta`. Zero keeps the
    /// origin on the grid.
    pub anchor: f64,
    /// Optional explicit schedule bounds (still validated against the
    /// certified range enclosure).
    pub range: Option<(f64, f64)>,
    pub max_depth: usize,
    pub eval_subdiv: usize,
    pub threads: usize,
    /// Retry the whole schedule once at `anchor + delta/2` if any threshold
    /// failed, keeping whichever run certifies the smaller bound.
    pub retry_offset: bool,
    /// Human-readable description of the function for the report.
    pub function_desc: String,
}

impl PipelineConfig {
    pub fn new(function: FunctionExpr, dims: usize, delta: DecimalStep) -> Self {
        let desc = function.to_string();
        PipelineConfig {
            function,
            dims,
            delta,
            anchor: 0.0,
            range: None,
            max_depth: crate::grid::DEFAULT_MAX_DEPTH,
            eval_subdiv: crate::grid::DEFAULT_EVAL_SUBDIV,
            threads: 1,
            retry_offset: false,
            function_desc: desc,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("no threshold could be verified")]
    TotalVerificationFailure,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-threshold status, as serialized into the report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ThresholdStatus {
    pub threshold: f64,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_cube: Option<String>,
}

/// Configuration echo embedded in the report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub function: String,
    pub dims: usize,
    pub delta: String,
    pub anchor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    pub max_depth: usize,
    pub eval_subdiv: usize,
    pub threads: usize,
    pub retry_offset: bool,
}

/// The serialized run report. `wall_time_ms` is the only field expected to
/// differ between byte-identical reruns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub epsilon: f64,
    pub max_failure_run: usize,
    pub verified_thresholds: usize,
    pub failed_thresholds: usize,
    pub filtered_cell_count: usize,
    pub retried: bool,
    pub statuses: Vec<ThresholdStatus>,
    pub wall_time_ms: u128,
}

/// Outcome of a full pipeline run.
#[derive(Debug)]
pub struct RunResult {
    pub schedule: ThresholdSchedule,
    pub statuses: Vec<ThresholdStatus>,
    pub diagram: PersistenceDiagram,
    pub epsilon: f64,
    pub max_failure_run: usize,
    pub filtered_cell_count: usize,
    pub retried: bool,
    pub wall_time_ms: u128,
    pub config_echo: ConfigEcho,
}

impl RunResult {
    pub fn report(&self) -> Report {
        Report {
            config: self.config_echo.clone(),
            epsilon: self.epsilon,
            max_failure_run: self.max_failure_run,
            verified_thresholds: self.statuses.iter().filter(|s| s.verified).count(),
            failed_thresholds: self.statuses.iter().filter(|s| !s.verified).count(),
            filtered_cell_count: self.filtered_cell_count,
            retried: self.retried,
            statuses: self.statuses.clone(),
            wall_time_ms: self.wall_time_ms,
        }
    }
}

struct Attempt {
    schedule: ThresholdSchedule,
    levels: Vec<LevelOutcome>,
    statuses: Vec<ThresholdStatus>,
    epsilon: f64,
    max_failure_run: usize,
}

fn run_attempt(
    cfg: &PipelineConfig,
    partials: &[FunctionExpr],
    grid_cfg: &GridConfig,
    anchor: f64,
) -> Result<Attempt, PipelineError> {
    let schedule = build_schedule(
        &cfg.function,
        cfg.dims,
        &cfg.delta,
        anchor,
        cfg.range,
        cfg.eval_subdiv,
    )?;
    let thresholds: Vec<f64> = schedule.thresholds().to_vec();
    let levels: Vec<LevelOutcome> = thresholds
        .par_iter()
        .map(|&t| {
            match construct_verified_grid_with(&cfg.function, partials, t, cfg.dims, grid_cfg) {
                Ok(tree) => {
                    let tree = Arc::new(tree);
                    let complex = cellular_approximation(&cfg.function, t, &tree, grid_cfg);
                    LevelOutcome::Verified { tree, complex }
                }
                Err(fail) => LevelOutcome::Failed(fail),
            }
        })
        .collect();
    let statuses: Vec<ThresholdStatus> = levels
        .iter()
        .zip(&thresholds)
        .map(|(level, &t)| match level {
            LevelOutcome::Verified { tree, complex } => ThresholdStatus {
                threshold: t,
                verified: true,
                leaves: Some(tree.leaf_count()),
                cells: Some(complex.cell_count()),
                failure: None,
                failure_cube: None,
            },
            LevelOutcome::Failed(fail) => ThresholdStatus {
                threshold: t,
                verified: false,
                leaves: None,
                cells: None,
                failure: Some(
                    match fail.kind {
                        FailureKind::MaxDepth => "max_depth",
                        FailureKind::UndecidableVertex => "undecidable_vertex",
                    }
                    .to_string(),
                ),
                failure_cube: Some(fail.cube.to_string()),
            },
        })
        .collect();
    let verified: Vec<bool> = statuses.iter().map(|s| s.verified).collect();
    let (epsilon, max_failure_run) = a_posteriori_bound(&cfg.delta, &verified);
    Ok(Attempt {
        schedule,
        levels,
        statuses,
        epsilon,
        max_failure_run,
    })
}

/// Run the full pipeline: schedule, verified grids, filtration, reduction.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunResult, PipelineError> {
    let start = Instant::now();
    if !(1..=3).contains(&cfg.dims) {
        return Err(PipelineError::Config(format!(
            "dimension {} is outside the supported range 1..=3",
            cfg.dims
        )));
    }
    if cfg.function.dims() > cfg.dims {
        return Err(PipelineError::Config(format!(
            "function reads coordinate x{} but the domain has {} axes",
            cfg.function.dims() - 1,
            cfg.dims
        )));
    }
    if cfg.max_depth > MAX_DEPTH_LIMIT {
        return Err(PipelineError::Config(format!(
            "max depth {} exceeds the supported limit {MAX_DEPTH_LIMIT}",
            cfg.max_depth
        )));
    }
    let grid_cfg = GridConfig {
        max_depth: cfg.max_depth,
        eval_subdiv: cfg.eval_subdiv,
    };
    grid_cfg.validate().map_err(PipelineError::Config)?;
    if cfg.threads == 0 {
        return Err(PipelineError::Config("thread count must be positive".into()));
    }
    let partials = partials_of(&cfg.function, cfg.dims);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let mut attempt = pool.install(|| run_attempt(cfg, &partials, &grid_cfg, cfg.anchor))?;
    let mut retried = false;
    if cfg.retry_offset && attempt.max_failure_run > 0 {
        retried = true;
        let offset_anchor = cfg.anchor + cfg.delta.value() / 2.0;
        let second = pool.install(|| run_attempt(cfg, &partials, &grid_cfg, offset_anchor))?;
        if second.epsilon < attempt.epsilon {
            attempt = second;
        }
    }

    if !attempt.levels.iter().any(|l| l.is_verified()) {
        return Err(PipelineError::TotalVerificationFailure);
    }
    let filtered = intersect_into_filtration(&attempt.levels, attempt.schedule.thresholds());
    let diagram = reduce(&filtered.boundary_matrix());

    let config_echo = ConfigEcho {
        function: cfg.function_desc.clone(),
        dims: cfg.dims,
        delta: cfg.delta.to_string(),
        anchor: cfg.anchor,
        range: cfg.range,
        max_depth: cfg.max_depth,
        eval_subdiv: cfg.eval_subdiv,
        threads: cfg.threads,
        retry_offset: cfg.retry_offset,
    };
    Ok(RunResult {
        schedule: attempt.schedule,
        statuses: attempt.statuses,
        diagram,
        epsilon: attempt.epsilon,
        max_failure_run: attempt.max_failure_run,
        filtered_cell_count: filtered.cell_count(),
        retried,
        wall_time_ms: start.elapsed().as_millis(),
        config_echo,
    })
}

/// Serialize the diagram: one `dimension,birth,death` line per point with an
/// `inf` sentinel, ordered by (dimension, birth, death).
pub fn diagram_csv(diagram: &PersistenceDiagram) -> String {
    let mut out = String::new();
    for (d, b, death) in diagram.iter_all() {
        if death.is_infinite() {
            out.push_str(&format!("{d},{b},inf\n"));
        } else {
            out.push_str(&format!("{d},{b},{death}\n"));
        }
    }
    out
}

/// Write `diagram.csv` and `report.json` into `dir`, creating it if needed.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<(PathBuf, PathBuf), PipelineError> {
    std::fs::create_dir_all(dir)?;
    let diagram_path = dir.join("diagram.csv");
    let report_path = dir.join("report.json");
    let mut f = std::fs::File::create(&diagram_path)?;
    f.write_all(diagram_csv(&result.diagram).as_bytes())?;
    let report = serde_json::to_string_pretty(&result.report())
        .expect("report serialization cannot fail");
    std::fs::write(&report_path, report + "\n")?;
    Ok((diagram_path, report_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::fourier_expr;

    fn quick_cfg(f: FunctionExpr, delta: &str) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(f, 2, DecimalStep::parse(delta).unwrap());
        cfg.max_depth = 12;
        cfg.eval_subdiv = 4;
        cfg
    }

    #[test]
    fn monotone_function_single_immortal_class() {
        // f = x0: contractible sub-level sets, one H0 class, empty H1
        let mut cfg = quick_cfg(FunctionExpr::coord(0), "0.25");
        cfg.anchor = 0.125; // keep thresholds off the dyadic vertex values
        let result = run_pipeline(&cfg).unwrap();
        assert_eq!(result.max_failure_run, 0);
        assert_eq!(result.epsilon, 0.25);
        let h0 = result.diagram.points_in_dim(0);
        assert_eq!(h0.len(), 1);
        assert!(h0[0].1.is_infinite());
        // born at the first threshold at or above the minimum of f (0)
        assert!(h0[0].0 >= -0.25 && h0[0].0 <= 0.25);
        assert!(result.diagram.points_in_dim(1).is_empty());
    }

    #[test]
    fn constant_zero_function() {
        // t = 0 is undecidable (exact tie), so it is skipped; the complex
        // appears at the first threshold above zero
        let cfg = quick_cfg(FunctionExpr::constant(0.0), "0.25");
        let result = run_pipeline(&cfg).unwrap();
        let h0 = result.diagram.points_in_dim(0);
        assert_eq!(h0.len(), 1);
        assert_eq!(h0[0], (0.25, f64::INFINITY));
        assert_eq!(result.max_failure_run, 1);
        assert_eq!(result.epsilon, 0.5);
    }

    #[test]
    fn one_dimensional_domain() {
        // sin(2πx) on [0,1]: one component around the minimum at 3/4, and a
        // second piece near x = 0 once t passes 0, merging when the peak at
        // 1/4 submerges; no H1 on an interval
        let f = FunctionExpr::constant(std::f64::consts::TAU)
            .mul(&FunctionExpr::coord(0))
            .sin();
        let mut cfg = PipelineConfig::new(f, 1, DecimalStep::parse("0.25").unwrap());
        cfg.anchor = 0.05;
        cfg.max_depth = 12;
        cfg.eval_subdiv = 4;
        let result = run_pipeline(&cfg).unwrap();
        assert_eq!(result.max_failure_run, 0);
        let h0 = result.diagram.points_in_dim(0);
        assert_eq!(h0.len(), 2);
        let immortal: Vec<_> = h0.iter().filter(|p| p.1.is_infinite()).collect();
        assert_eq!(immortal.len(), 1);
        assert!((immortal[0].0 - (-0.95)).abs() < 1e-12);
        let finite: Vec<_> = h0.iter().filter(|p| p.1.is_finite()).collect();
        assert!((finite[0].0 - 0.05).abs() < 1e-12);
        assert!((finite[0].1 - 1.05).abs() < 1e-12);
        assert!(result.diagram.points_in_dim(1).is_empty());
    }

    #[test]
    fn three_dimensional_domain() {
        // monotone coordinate function on the cube: every threshold verifies
        // at the root, contractible sub-levels throughout
        let mut cfg = PipelineConfig::new(
            FunctionExpr::coord(2),
            3,
            DecimalStep::parse("0.25").unwrap(),
        );
        cfg.anchor = 0.125;
        cfg.max_depth = 8;
        cfg.eval_subdiv = 2;
        let result = run_pipeline(&cfg).unwrap();
        assert_eq!(result.max_failure_run, 0);
        let h0 = result.diagram.points_in_dim(0);
        assert_eq!(h0.len(), 1);
        assert!(h0[0].1.is_infinite());
        assert!(result.diagram.points_in_dim(1).is_empty());
        assert!(result.diagram.points_in_dim(2).is_empty());
    }

    #[test]
    fn dimension_validation() {
        let cfg = PipelineConfig::new(
            FunctionExpr::coord(3),
            2,
            DecimalStep::parse("0.5").unwrap(),
        );
        assert!(matches!(
            run_pipeline(&cfg),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn product_of_sines_diagram_structure() {
        let mut cfg = quick_cfg(fourier_expr(&[(1, 1, 1, 1.0)]), "0.2");
        cfg.anchor = 0.05; // avoid the critical values -1, 0, 1
        let result = run_pipeline(&cfg).unwrap();
        assert_eq!(result.max_failure_run, 0, "statuses: {:?}", result.statuses);
        let h0 = result.diagram.points_in_dim(0);
        // two components born near -1; one merges near 0, one lives forever
        assert_eq!(h0.len(), 2);
        let immortal: Vec<_> = h0.iter().filter(|p| p.1.is_infinite()).collect();
        assert_eq!(immortal.len(), 1);
        assert!((immortal[0].0 - (-0.95)).abs() < 0.21);
        let finite: Vec<_> = h0.iter().filter(|p| p.1.is_finite()).collect();
        assert_eq!(finite.len(), 1);
        assert!((finite[0].0 - (-0.95)).abs() < 0.21);
        assert!(finite[0].1.abs() < 0.21);
        // two holes around the maxima, both dying near 1
        let h1 = result.diagram.points_in_dim(1);
        assert_eq!(h1.len(), 2);
        for p in h1 {
            assert!(p.0.abs() < 0.21);
            assert!((p.1 - 1.0).abs() < 0.21);
        }
    }

    #[test]
    fn outputs_round_trip(){
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_cfg(FunctionExpr::coord(0), "0.25");
        cfg.anchor = 0.125;
        let result = run_pipeline(&cfg).unwrap();
        let (diagram_path, report_path) = write_outputs(&result, dir.path()).unwrap();
        let diagram_text = std::fs::read_to_string(diagram_path).unwrap();
        assert!(diagram_text.contains(",inf"));
        let report: Report =
            serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
        assert_eq!(report.epsilon, result.epsilon);
        assert_eq!(report.statuses.len(), result.statuses.len());
    }

    #[test]
    fn retry_offset_dodges_degenerate_thresholds() {
        // anchor 0 puts thresholds on the critical values of the product of
        // sines; the half-delta retry shifts away from all of them
        let mut cfg = quick_cfg(fourier_expr(&[(1, 1, 1, 1.0)]), "0.5");
        cfg.retry_offset = true;
        let result = run_pipeline(&cfg).unwrap();
        assert!(result.retried);
        assert_eq!(result.max_failure_run, 0);
        assert_eq!(result.epsilon, 0.5);
    }
}
