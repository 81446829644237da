//! Centered unitary DFT, axis by axis.
//!
//! With x_j = −L/2 + jΔx and k_m = (2π/L)(m − N/2), the transform
//! ψ̂_m = N^{-1/2} Σ_j ψ_j e^{−i k_m x_j} equals
//! (−1)^m N^{-1/2} FFT[(−1)^j ψ_j]_m for even N/2, which is what is computed.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

/// Lines gathered per batched FFT call.
const BLOCK_LINES: usize = 256;

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let mut p = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new())).lock().unwrap_or_else(|e| e.into_inner());
    if forward {
        p.plan_fft_forward(n)
    } else {
        p.plan_fft_inverse(n)
    }
}

pub(super) fn transform_in_place(grid: &GridSpec, data: &mut [[C64; 4]], forward: bool) {
    for axis in 0..grid.dim {
        transform_axis(grid, data, axis, &plan(grid.n[axis], forward));
    }
}

/// Raw pointer wrapper for disjoint parallel writes.
#[derive(Clone, Copy)]
struct Shared(*mut [C64; 4]);
unsafe impl Send for Shared {}
unsafe impl Sync for Shared {}

fn transform_axis(grid: &GridSpec, data: &mut [[C64; 4]], axis: usize, plan: &Arc<dyn Fft<f64>>) {
    let n = grid.n[axis];
    let stride: usize = grid.n[axis + 1..].iter().product();
    let outer = data.len() / (n * stride);
    let norm = 1.0 / (n as f64).sqrt();
    // Sign pattern (−1)^j folded with the normalisation on the way out.
    let pre: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let post: Vec<f64> = pre.iter().map(|s| s * norm).collect();

    // Lines are indexed (o, inner); a block takes consecutive inner offsets
    // within one o so strided reads stay contiguous across the block.
    let block = BLOCK_LINES.min(stride).max(1);
    let blocks: Vec<(usize, usize, usize)> =
        (0..outer).flat_map(|o| (0..stride).step_by(block).map(move |b| (o, b, block.min(stride - b)))).collect();
    let ptr = Shared(data.as_mut_ptr());
    let len = data.len();

    blocks.par_iter().for_each_init(
        || (Vec::<C64>::new(), vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()]),
        |(buf, scratch), &(o, b, count)| {
            // Rebinding captures the whole Send wrapper, not its raw field.
            #[allow(clippy::redundant_locals)]
            let ptr = ptr;
            let base = o * n * stride + b;
            let lines = 4 * count;
            buf.resize(lines * n, C64::new(0.0, 0.0));
            // SAFETY: blocks touch pairwise disjoint index sets
            // {o·n·stride + j·stride + b + q}, all < len.
            let at = |j: usize, q: usize| unsafe {
                let idx = base + j * stride + q;
                debug_assert!(idx < len);
                &mut *ptr.0.add(idx)
            };
            for j in 0..n {
                for q in 0..count {
                    let v = at(j, q);
                    for c in 0..4 {
                        buf[(4 * q + c) * n + j] = v[c] * pre[j];
                    }
                }
            }
            plan.process_with_scratch(buf, scratch);
            for j in 0..n {
                for q in 0..count {
                    let v = at(j, q);
                    for c in 0..4 {
                        v[c] = buf[(4 * q + c) * n + j] * post[j];
                    }
                }
            }
        },
    );
}
