//! Row-parallel depth sweeps. Each pixel depends only on its own inputs and
//! rows are collected in order, so the output does not depend on the number
//! of threads.

use radiant_core::raster::Raster;
use radiant_core::search::Minimum;
use radiant_core::sweep::{DepthResult, DepthSweeper};
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// `threads = None` uses rayon's default (one per available core).
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool, ThreadPoolBuildError> {
    ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()
}

/// Pixels on a regular grid of spacing `stride`, offset to the cell centers.
/// `stride = 1` selects everything.
pub fn stride_mask(width: usize, height: usize, stride: usize) -> Raster<bool> {
    let stride = stride.max(1);
    let offset = stride / 2;
    Raster::from_fn(width, height, |x, y| x % stride == offset && y % stride == offset)
}

/// Sweeps every masked-in reference pixel selected by `subset`.
pub fn reconstruct(sweeper: &DepthSweeper<'_>, pool: &ThreadPool, subset: Option<&Raster<bool>>) -> DepthResult {
    let maps = &sweeper.reference().maps;
    let (width, height) = (maps.width(), maps.height());
    let rows: Vec<Vec<Option<Minimum>>> = pool.install(|| {
        (0..height)
            .into_par_iter()
            .map(|y| {
                (0..width)
                    .map(|x| {
                        let wanted = *maps.mask().get(x, y) && subset.is_none_or(|s| *s.get(x, y));
                        wanted.then(|| sweeper.sweep_pixel(x, y).ok()).flatten()
                    })
                    .collect()
            })
            .collect()
    });
    let outcomes =
        Raster::from_vec(width, height, rows.into_iter().flatten().collect()).expect("one outcome per pixel");
    DepthResult::from_outcomes(&outcomes)
}
