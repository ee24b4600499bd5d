// SPDX-License-Identifier: Apache-2.0

//! Raw slice kernels shared by the differentiable ops.

use crate::error::{Error, Result};

pub(crate) fn matmul_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize)> {
    match (a, b) {
        ([m, k], [k2, n]) if k == k2 => Ok((*m, *k, *n)),
        _ => Err(Error::dim("matmul", a, b)),
    }
}

/// `c (+)= op(a) · op(b)` where `op(a)` is `m×k` and `op(b)` is `k×n`.
///
/// `a` is stored `m×k` row-major, or `k×m` when `a_t` is set (likewise `b`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_t: bool,
    b: &[f32],
    b_t: bool,
    c: &mut [f32],
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: bounds asserted above; strides describe the stated layouts.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a stride-1, same-padded 2-D convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeom {
    pub fn patch(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub fn pixels(&self) -> usize {
        self.h * self.w
    }
}

/// Unfold one `c_in×h×w` image into a `(c_in·kh·kw) × (h·w)` patch matrix.
pub(crate) fn im2col(g: &ConvGeom, img: &[f32], col: &mut [f32]) {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let p = g.pixels();
    for c in 0..g.c_in {
        let plane = &img[c * p..(c + 1) * p];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = ((c * g.kh + ky) * g.kw + kx) * p;
                let dst = &mut col[row..row + p];
                let (lo, hi) = valid_span(kx, pw, g.w);
                for y in 0..g.h {
                    let sy = y as isize + ky as isize - ph as isize;
                    let line = &mut dst[y * g.w..(y + 1) * g.w];
                    if sy < 0 || sy >= g.h as isize || lo >= hi {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * g.w..(sy as usize + 1) * g.w];
                    line[..lo].fill(0.0);
                    line[hi..].fill(0.0);
                    line[lo..hi].copy_from_slice(&src[lo + kx - pw..hi + kx - pw]);
                }
            }
        }
    }
}

/// Output columns `lo..hi` whose source column `x + kx - pad` is in range.
fn valid_span(kx: usize, pad: usize, w: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kx);
    let hi = (w + pad).saturating_sub(kx).min(w);
    (lo, hi.max(lo))
}

/// Adjoint of [`im2col`]: scatter-add a patch matrix back onto an image.
pub(crate) fn col2im(g: &ConvGeom, col: &[f32], img: &mut [f32]) {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let p = g.pixels();
    for c in 0..g.c_in {
        let plane = &mut img[c * p..(c + 1) * p];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = ((c * g.kh + ky) * g.kw + kx) * p;
                let src = &col[row..row + p];
                let (lo, hi) = valid_span(kx, pw, g.w);
                if lo >= hi {
                    continue;
                }
                for y in 0..g.h {
                    let sy = y as isize + ky as isize - ph as isize;
                    if sy < 0 || sy >= g.h as isize {
                        continue;
                    }
                    let base = sy as usize * g.w;
                    let dst = &mut plane[base + lo + kx - pw..base + hi + kx - pw];
                    for (d, s) in dst.iter_mut().zip(&src[y * g.w + lo..y * g.w + hi]) {
                        *d += s;
                    }
                }
            }
        }
    }
}
