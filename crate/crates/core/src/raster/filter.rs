//! Separable filtering with half-sample symmetric boundary handling.
//!
//! Every forward operator here has an explicit adjoint so losses built on top
//! of them can be differentiated exactly.

use super::Grid;

/// 5-tap binomial kernel `[1, 4, 6, 4, 1] / 16`.
pub const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Maps any integer index onto `0..n` by mirroring about the half-sample
/// boundary (`... c b a | a b c | c b a ...`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Sampled Gaussian truncated at `ceil(4 sigma)` and normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves rows then columns with the same odd-length kernel.
pub fn convolve_separable(src: &Grid, kernel: &[f64]) -> Grid {
    let tmp = convolve_axis(src, kernel, Axis::X);
    convolve_axis(&tmp, kernel, Axis::Y)
}

/// Adjoint of [`convolve_separable`] under the standard inner product.
pub fn convolve_separable_adjoint(src: &Grid, kernel: &[f64]) -> Grid {
    let tmp = convolve_axis_adjoint(src, kernel, Axis::Y);
    convolve_axis_adjoint(&tmp, kernel, Axis::X)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

pub fn convolve_axis(src: &Grid, kernel: &[f64], axis: Axis) -> Grid {
    let (w, h) = (src.width(), src.height());
    let r = (kernel.len() / 2) as isize;
    let mut out = Grid::zeros(w, h);
    let s = src.data();
    let o = out.data_mut();
    match axis {
        Axis::X => {
            for y in 0..h {
                let row = &s[y * w..(y + 1) * w];
                for x in 0..w {
                    let mut acc = 0.0;
                    for (k, kv) in kernel.iter().enumerate() {
                        acc += kv * row[reflect(x as isize + k as isize - r, w)];
                    }
                    o[y * w + x] = acc;
                }
            }
        }
        Axis::Y => {
            for y in 0..h {
                for (k, kv) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + k as isize - r, h);
                    let src_row = &s[sy * w..(sy + 1) * w];
                    let dst = &mut o[y * w..(y + 1) * w];
                    for x in 0..w {
                        dst[x] += kv * src_row[x];
                    }
                }
            }
        }
    }
    out
}

pub fn convolve_axis_adjoint(src: &Grid, kernel: &[f64], axis: Axis) -> Grid {
    let (w, h) = (src.width(), src.height());
    let r = (kernel.len() / 2) as isize;
    let mut out = Grid::zeros(w, h);
    let s = src.data();
    let o = out.data_mut();
    match axis {
        Axis::X => {
            for y in 0..h {
                for x in 0..w {
                    let g = s[y * w + x];
                    if g == 0.0 {
                        continue;
                    }
                    for (k, kv) in kernel.iter().enumerate() {
                        o[y * w + reflect(x as isize + k as isize - r, w)] += kv * g;
                    }
                }
            }
        }
        Axis::Y => {
            for y in 0..h {
                for (k, kv) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + k as isize - r, h);
                    for x in 0..w {
                        o[sy * w + x] += kv * s[y * w + x];
                    }
                }
            }
        }
    }
    out
}

/// Blur with [`BINOMIAL5`] then keep every second sample.
pub fn downsample(src: &Grid) -> Grid {
    let blurred = convolve_separable(src, &BINOMIAL5);
    decimate(&blurred)
}

pub fn downsample_adjoint(grad: &Grid, width: usize, height: usize) -> Grid {
    let up = decimate_adjoint(grad, width, height);
    convolve_separable_adjoint(&up, &BINOMIAL5)
}

fn decimate(src: &Grid) -> Grid {
    let w = src.width().div_ceil(2);
    let h = src.height().div_ceil(2);
    let mut out = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out[(x, y)] = src[(2 * x, 2 * y)];
        }
    }
    out
}

fn decimate_adjoint(grad: &Grid, width: usize, height: usize) -> Grid {
    let mut out = Grid::zeros(width, height);
    for y in 0..grad.height() {
        for x in 0..grad.width() {
            out[(2 * x, 2 * y)] = grad[(x, y)];
        }
    }
    out
}

/// Forward difference `v[x+1] - v[x]` along `axis`; the last sample is zero.
pub fn forward_diff(src: &Grid, axis: Axis) -> Grid {
    let (w, h) = (src.width(), src.height());
    let mut out = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out[(x, y)] = match axis {
                Axis::X if x + 1 < w => src[(x + 1, y)] - src[(x, y)],
                Axis::Y if y + 1 < h => src[(x, y + 1)] - src[(x, y)],
                _ => 0.0,
            };
        }
    }
    out
}

pub fn forward_diff_adjoint(grad: &Grid, axis: Axis) -> Grid {
    let (w, h) = (grad.width(), grad.height());
    let mut out = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let g = grad[(x, y)];
            match axis {
                Axis::X if x + 1 < w => {
                    out[(x + 1, y)] += g;
                    out[(x, y)] -= g;
                }
                Axis::Y if y + 1 < h => {
                    out[(x, y + 1)] += g;
                    out[(x, y)] -= g;
                }
                _ => {}
            }
        }
    }
    out
}
