//! Rayon-backed versions of the core reductions. Work is split into fixed
//! cells or blocks and combined in index order, so results do not depend on
//! the number of threads.

use rayon::prelude::*;
use srweyl_core::models::{block_sum, HeatTraceSample, SpectrumModel, BLOCK};
use srweyl_core::polyfield::to_f64;
use srweyl_core::volume::{integrate_box_with, integrate_cell, inverse_v, TupleCatalog, VolumeOptions};
use srweyl_core::{Rational, Result};

/// Worker count from the `--threads` value, then `SRWEYL_THREADS`, else rayon's default.
pub fn thread_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("SRWEYL_THREADS").ok().and_then(|s| s.parse().ok())).filter(|&n| n > 0)
}

/// Runs `f` on a pool capped at `threads` workers.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// `int_box dq / v(q, sqrt t)` with base cells evaluated in parallel.
pub fn volume_integral(catalog: &TupleCatalog, bx: &[(Rational, Rational)], t: f64, opts: &VolumeOptions) -> Result<f64> {
    if bx.len() != catalog.dim {
        return Err(srweyl_core::Error::DimensionMismatch { expected: catalog.dim, found: bx.len() });
    }
    if !(t > 0.0) {
        return Err(srweyl_core::Error::Invalid("t must be positive".into()));
    }
    let f = inverse_v(catalog, t);
    let fbox: Vec<(f64, f64)> = bx.iter().map(|(a, b)| (to_f64(a), to_f64(b))).collect();
    integrate_box_with(&f, &fbox, opts, |cells, budget| {
        cells.par_iter().map(|c| integrate_cell(&f, c, budget)).collect()
    })
}

/// Heat trace with eigenvalue blocks summed in parallel.
pub fn heat_trace(model: &SpectrumModel, t: f64, shift: f64) -> Result<HeatTraceSample> {
    let blocks: Vec<f64> = model.levels().par_chunks(BLOCK).map(|b| block_sum(b, t, shift)).collect();
    model.heat_trace_from_blocks(t, shift, &blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use srweyl_core::polyfield::int;
    use srweyl_core::volume::build_catalog;
    use srweyl_core::Frame;

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let f = Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap();
        let c = build_catalog(&f, 3).unwrap();
        let bx = [(int(-1), int(1)), (int(-1), int(1))];
        let opts = VolumeOptions::default();
        let seq = srweyl_core::volume::volume_integral(&c, &bx, 1e-4, &opts).unwrap();
        for n in [1, 3] {
            let par = with_pool(Some(n), || volume_integral(&c, &bx, 1e-4, &opts).unwrap());
            assert_eq!(seq.to_bits(), par.to_bits());
        }
        let m = SpectrumModel::grushin_sphere(2e4).unwrap();
        let a = m.heat_trace(0.01, 0.25).unwrap();
        let b = with_pool(Some(2), || heat_trace(&m, 0.01, 0.25).unwrap());
        assert_eq!(a, b);
    }
}
