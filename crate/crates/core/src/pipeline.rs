//! Parallel batch helpers over many footprints.
//!
//! Work is spread across a fixed-size thread pool. Every item carries its
//! own derived seed and results are collected in input order, so output
//! never depends on the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Result, TcmError};
use crate::geom_raster::{extract_chip_stack, ChipStack, Polygon, Scene};
use crate::matching::{divergence_series, DivergenceSeries, SeriesConfig};

#[derive(Clone)]
pub struct Workers {
    pool: Arc<ThreadPool>,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| TcmError::Internal(format!("thread pool: {e}")))?;
        Ok(Self {
            pool: Arc::new(pool),
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Maps `f` over `items` on the pool, keeping input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    /// Like [`Workers::map`] but stops at the first error in input order.
    pub fn try_map<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers")
            .field("threads", &self.threads())
            .finish()
    }
}

pub fn chip_stacks(
    workers: &Workers,
    scenes: &[Scene],
    polygons: &[Polygon],
    r: f64,
) -> Result<Vec<ChipStack>> {
    workers.try_map(polygons, |p| extract_chip_stack(scenes, p, r))
}

/// Divergence series of every polygon for one `(k, r)` setting.
pub fn series_batch(
    workers: &Workers,
    scenes: &[Scene],
    polygons: &[Polygon],
    k: usize,
    r: f64,
    config: &SeriesConfig,
    seed: u64,
) -> Result<Vec<DivergenceSeries>> {
    workers.try_map(polygons, |p| {
        let chips = extract_chip_stack(scenes, p, r)?;
        divergence_series(&chips, k, config, seed)
    })
}
