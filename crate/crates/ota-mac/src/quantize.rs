//! Quantization primitives: the stochastic uniform quantizer used by the
//! digital schemes, the randomized Hadamard rotation, and the correlated
//! sampling quantizer that exploits server-side side information.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{keyed_unit, SimRng};

/// Distance (in grid steps) below which an input is treated as sitting
/// exactly on a quantization point and rounds deterministically.
const GRID_SNAP: f64 = 1e-9;

/// Parameters of the `v`-level stochastic coordinate-wise uniform quantizer.
///
/// The quantizer acts on normalized inputs in `[-B/n, B/n]`, where `n` is the
/// per-client divisor (the number of clients whose contributions will be
/// summed). Its grid is `-B/n + z * 2B/(n(v-1))` for `z` in `0..v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuqParams {
    /// Quantization levels v (>= 2).
    pub levels: u64,
    /// Gradient norm bound B.
    pub bound: f64,
    /// Per-client normalizer n.
    pub divisor: u64,
}

impl CuqParams {
    pub fn new(levels: u64, bound: f64, divisor: u64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidConfig(format!(
                "levels must be >= 2, got {levels}"
            )));
        }
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bound must be > 0, got {bound}"
            )));
        }
        if divisor == 0 {
            return Err(Error::InvalidConfig("divisor must be >= 1".into()));
        }
        Ok(Self {
            levels,
            bound,
            divisor,
        })
    }

    /// Lower grid end point `-B/n`.
    pub fn lo(&self) -> f64 {
        -self.bound / self.divisor as f64
    }

    /// Grid step `2B/(n(v-1))`.
    pub fn step(&self) -> f64 {
        2.0 * self.bound / (self.divisor as f64 * (self.levels - 1) as f64)
    }
}

/// Stochastic rounding of `x` onto the quantizer grid.
///
/// Inputs outside `[-B/n, B/n]` are clipped to the boundary first. The index
/// of one of the two bracketing grid points is returned, with probabilities
/// that make the reconstruction an unbiased estimate of `x`; grid-aligned
/// inputs return their exact index.
pub fn cuq_encode(x: f64, params: &CuqParams, rng: &mut SimRng) -> u64 {
    let hi = -params.lo();
    let x = x.clamp(params.lo(), hi);
    let t = (x - params.lo()) / params.step();
    let top = params.levels - 1;
    // Snap near-integer positions so representable grid inputs never split.
    let nearest = t.round();
    if (t - nearest).abs() < GRID_SNAP {
        return (nearest as u64).min(top);
    }
    let low = t.floor();
    let frac = t - low;
    let low = low as u64;
    if low >= top {
        return top;
    }
    if rng.random::<f64>() < frac {
        low + 1
    } else {
        low
    }
}

/// Reconstruction of a *summed* quantizer output: `-B + lambda * 2B/(K(v-1))`
/// per coordinate, where `lambda` holds the digit sums of `K` clients.
pub fn cuq_reconstruct_sum(
    lambda: &[u64],
    levels: u64,
    bound: f64,
    num_clients: usize,
) -> Result<Vec<f64>> {
    if levels < 2 || num_clients == 0 {
        return Err(Error::InvalidConfig(format!(
            "need levels >= 2 and num_clients >= 1, got {levels} and {num_clients}"
        )));
    }
    let max = num_clients as u64 * (levels - 1);
    let step = 2.0 * bound / max as f64;
    lambda
        .iter()
        .map(|&l| {
            if l > max {
                Err(Error::RangeViolation { value: l, max })
            } else {
                Ok(-bound + l as f64 * step)
            }
        })
        .collect()
}

/// Randomized Hadamard rotation `R = (1/sqrt(d_pad)) * H * D'` with a random
/// sign diagonal `D'`. `R` is orthonormal, so it preserves norms, and its
/// inverse is the transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    /// Original dimension before zero padding.
    pub dim: usize,
    /// Sign diagonal entries, one per padded coordinate.
    signs: Vec<f64>,
}

impl Rotation {
    /// Padded power-of-two dimension.
    pub fn padded_dim(&self) -> usize {
        self.signs.len()
    }

    /// Builds a rotation from explicit signs (each +-1); the padded dimension
    /// is `signs.len()` and must be the next power of two above `dim`.
    pub fn from_parts(dim: usize, signs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if signs.len() != dim.next_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two(),
                actual: signs.len(),
            });
        }
        if signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidConfig("signs must be +-1".into()));
        }
        Ok(Self { dim, signs })
    }
}

/// Samples a rotation for dimension `d`: the sign diagonal is i.i.d. uniform
/// `{-1, +1}` from `seed`, and inputs are zero padded to the next power of two.
pub fn make_rotation(dim: usize, seed: u64) -> Result<Rotation> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dim must be >= 1".into()));
    }
    let d_pad = dim.next_power_of_two();
    let signs = (0..d_pad)
        .map(|j| {
            if keyed_unit(seed, 0, 0, j as u64) < 0.5 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    Ok(Rotation { dim, signs })
}

/// In-place fast Walsh-Hadamard transform (Sylvester ordering), unnormalized.
fn fwht(data: &mut [f64]) {
    let n = data.len();
    let mut stride = 1;
    while stride < n {
        for block in (0..n).step_by(stride * 2) {
            for j in block..block + stride {
                let a = data[j];
                let b = data[j + stride];
                data[j] = a + b;
                data[j + stride] = a - b;
            }
        }
        stride *= 2;
    }
}

/// Applies `R`: sign flips, then the fast Walsh-Hadamard transform, then the
/// `1/sqrt(d_pad)` scale. Output has the padded length.
pub fn rotate(r: &Rotation, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != r.dim {
        return Err(Error::DimensionMismatch {
            expected: r.dim,
            actual: x.len(),
        });
    }
    let d_pad = r.padded_dim();
    let mut buf = vec![0.0; d_pad];
    for (b, (v, s)) in buf.iter_mut().zip(x.iter().zip(&r.signs)) {
        *b = v * s;
    }
    fwht(&mut buf);
    let scale = 1.0 / (d_pad as f64).sqrt();
    for b in &mut buf {
        *b *= scale;
    }
    Ok(buf)
}

/// Applies `R^{-1} = R^T` to a padded vector and discards the pad, returning
/// the original `dim` coordinates.
pub fn rotate_inverse(r: &Rotation, y: &[f64]) -> Result<Vec<f64>> {
    let d_pad = r.padded_dim();
    if y.len() != d_pad {
        return Err(Error::DimensionMismatch {
            expected: d_pad,
            actual: y.len(),
        });
    }
    let mut buf = y.to_vec();
    fwht(&mut buf);
    let scale = 1.0 / (d_pad as f64).sqrt();
    for (b, s) in buf.iter_mut().zip(&r.signs) {
        *b *= scale * s;
    }
    buf.truncate(r.dim);
    Ok(buf)
}

/// Parameters of the correlated-sampling quantizer ("boosted DAQ").
///
/// Each client compares its rotated coordinates against `I` shared thresholds
/// drawn uniformly on `[-M, M]`; the server regenerates the identical
/// thresholds from `shared_seed` to form reference counts against the side
/// information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaqParams {
    /// Saturation range M.
    pub range: f64,
    /// Number of comparison samples I per coordinate.
    pub samples: u64,
    /// Seed of the shared threshold stream.
    pub shared_seed: u64,
}

impl DaqParams {
    pub fn new(range: f64, samples: u64, shared_seed: u64) -> Result<Self> {
        if !range.is_finite() || range <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "range must be > 0, got {range}"
            )));
        }
        if samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        Ok(Self {
            range,
            samples,
            shared_seed,
        })
    }

    /// Threshold `U_{k,i}(j)`, uniform on `[-M, M)` and reproducible from the
    /// counter alone.
    #[inline]
    pub fn threshold(&self, client: u64, sample: u64, coord: u64) -> f64 {
        -self.range + 2.0 * self.range * keyed_unit(self.shared_seed, client, sample, coord)
    }
}

/// Counts, per coordinate, how many of client `k`'s thresholds fall at or
/// below the input. Coordinates outside `[-M, M]` saturate at `0` or `I`.
pub fn daq_encode(x_rot: &[f64], params: &DaqParams, client: u64) -> Vec<u64> {
    x_rot
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            (0..params.samples)
                .filter(|&i| params.threshold(client, i, j as u64) <= x)
                .count() as u64
        })
        .collect()
}

/// Server-side counts against the side information `s_rot`, using the exact
/// threshold draws of every client in `clients`.
pub fn daq_reference_counts(s_rot: &[f64], params: &DaqParams, clients: &[u64]) -> Vec<u64> {
    s_rot
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            clients
                .iter()
                .map(|&k| {
                    (0..params.samples)
                        .filter(|&i| params.threshold(k, i, j as u64) <= s)
                        .count() as u64
                })
                .sum()
        })
        .collect()
}

/// Combines decoded counts `lambda`, reference counts `omega`, and the side
/// information into the final estimate
/// `(2M/I) * R^{-1}(lambda - omega) + (K/2) * S`.
///
/// `lambda` and `omega` live in the padded rotated domain; `side_info` has the
/// original dimension.
pub fn daq_reconstruct(
    lambda: &[u64],
    omega: &[u64],
    params: &DaqParams,
    side_info: &[f64],
    num_clients: usize,
    rotation: &Rotation,
) -> Result<Vec<f64>> {
    let max = (num_clients as u64 / 2) * params.samples;
    if lambda.len() != omega.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda.len(),
            actual: omega.len(),
        });
    }
    for &v in lambda.iter().chain(omega) {
        if v > max {
            return Err(Error::RangeViolation { value: v, max });
        }
    }
    let diff: Vec<f64> = lambda
        .iter()
        .zip(omega)
        .map(|(&l, &o)| l as f64 - o as f64)
        .collect();
    let back = rotate_inverse(rotation, &diff)?;
    if side_info.len() != back.len() {
        return Err(Error::DimensionMismatch {
            expected: back.len(),
            actual: side_info.len(),
        });
    }
    let gain = 2.0 * params.range / params.samples as f64;
    let half = num_clients as f64 / 2.0;
    Ok(back
        .iter()
        .zip(side_info)
        .map(|(c, s)| gain * c + half * s)
        .collect())
}
