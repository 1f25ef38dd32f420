//! Parallel execution of experiment cells. Cells carry their own seeds and
//! results come back in cell order, so reports do not depend on scheduling.

use rayon::prelude::*;
use synthanom_core::data::RawDataset;
use synthanom_core::theory::{
    ablation_cell, bound_cell, convergence_cell, discontinuity_cell, summarize_convergence, AblationCell, AblationSpec,
    BoundRecord, BoundSuiteConfig, ConvergenceReport, DiscontinuityConfig, DiscontinuityRecord, ExperimentGrid,
};

use crate::error::{AppError, AppResult};

/// Sets the size of the global pool; `None` keeps rayon's default.
pub fn init_threads(threads: Option<usize>) -> AppResult<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run_convergence(grid: &ExperimentGrid) -> AppResult<ConvergenceReport> {
    grid.validate()?;
    let runs = grid
        .cells()
        .into_par_iter()
        .map(|(n, seed)| convergence_cell(grid, n, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_convergence(grid, runs))
}

pub fn run_discontinuity(cfg: &DiscontinuityConfig) -> AppResult<Vec<DiscontinuityRecord>> {
    cfg.train.validate()?;
    let cells: Vec<(bool, u64)> = [true, false].into_iter().flat_map(|z| cfg.seeds.iter().map(move |&s| (z, s))).collect();
    Ok(cells
        .into_par_iter()
        .map(|(zero_margin, seed)| discontinuity_cell(cfg, zero_margin, seed))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn run_bound_suite(cfg: &BoundSuiteConfig) -> AppResult<Vec<BoundRecord>> {
    cfg.train.validate()?;
    Ok(cfg
        .cells()
        .into_par_iter()
        .map(|(kind, i)| bound_cell(cfg, kind, i))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn run_ablation(spec: &AblationSpec, train: &RawDataset, test: &RawDataset) -> AppResult<Vec<AblationCell>> {
    spec.validate()?;
    Ok(spec.cells().into_par_iter().map(|id| ablation_cell(spec, id, train, test)).collect())
}
