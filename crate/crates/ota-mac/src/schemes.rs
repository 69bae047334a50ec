//! End-to-end per-round communication schemes.
//!
//! Each scheme maps `K` gradient estimates to a single server-side estimate
//! per optimization round:
//!
//! * **UQ-OTA** — every client normalizes by `K`, quantizes with a `v`-level
//!   stochastic uniform quantizer, packs blocks of `p` digits into base-`w`
//!   lattice integers, and modulates them onto an ASK grid. The server
//!   minimum-distance decodes each superposed block, extracts the digit sums,
//!   and reconstructs an unbiased estimate of the gradient average.
//! * **WZ-OTA** — the first half of the clients builds a preliminary estimate
//!   via the UQ-OTA pipeline; the second half sends correlated-sampling
//!   counts of their rotated gradients, which the server combines with
//!   reference counts against the rotated side information.
//! * **Analog** — linear scaled transmission, one coordinate per channel use.

use rand::Rng;

use crate::channel::{transmit_mac, AskCodebook, ChannelConfig, SumConstellation};
use crate::error::{Error, Result};
use crate::lattice::{lattice_pack, lattice_unpack, partition_blocks, LatticeLayout};
use crate::quantize::{
    cuq_encode, cuq_reconstruct_sum, daq_encode, daq_reconstruct, daq_reference_counts, rotate,
    CuqParams, DaqParams, Rotation,
};
use crate::rng::SimRng;

/// Which scheme a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Uq,
    Wz,
    Analog,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeKind::Uq => "uq",
            SchemeKind::Wz => "wz",
            SchemeKind::Analog => "analog",
        })
    }
}

/// Derived parameters of the UQ-OTA scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UqParams {
    pub num_clients: usize,
    pub dim: usize,
    pub bound: f64,
    /// Quantizer levels v.
    pub levels: u64,
    /// Lattice block size p.
    pub block_size: usize,
    /// Lattice base w = K(v-1)+1.
    pub base: u64,
    /// Per-client ASK size r = (w^p-1)/K + 1.
    pub ask_size: u64,
    /// Channel uses per round, ceil(d/p).
    pub uses_per_round: u64,
}

impl UqParams {
    /// Completes the derived fields from the free choices `(v, p)` and
    /// rejects anything that violates the exact-integer guard.
    pub fn derive(
        num_clients: usize,
        dim: usize,
        bound: f64,
        levels: u64,
        block_size: usize,
    ) -> Result<Self> {
        if num_clients == 0 {
            return Err(Error::InvalidConfig("num_clients must be >= 1".into()));
        }
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bound must be > 0, got {bound}"
            )));
        }
        if levels < 2 {
            return Err(Error::InvalidConfig(format!(
                "levels must be >= 2, got {levels}"
            )));
        }
        let base = num_clients as u64 * (levels - 1) + 1;
        // Validates p in [1, d] and w^p - 1 < 2^52.
        let layout = LatticeLayout::new(dim, block_size, base)?;
        let span = layout.max_packed();
        debug_assert_eq!(span % num_clients as u64, 0);
        let ask_size = span / num_clients as u64 + 1;
        Ok(Self {
            num_clients,
            dim,
            bound,
            levels,
            block_size,
            base,
            ask_size,
            uses_per_round: dim.div_ceil(block_size) as u64,
        })
    }
}

/// Derived parameters of the WZ-OTA scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WzParams {
    pub num_clients: usize,
    pub dim: usize,
    /// Rotated dimension, the next power of two above `dim`.
    pub padded_dim: usize,
    pub bound: f64,
    /// Side-information quantizer levels; the scheme fixes v = 7.
    pub levels: u64,
    /// Side-information block size p.
    pub block_size: usize,
    /// Side-information lattice base w = (K/2)(v-1)+1 = 3K+1.
    pub base: u64,
    /// Side-information ASK size.
    pub ask_size: u64,
    /// Correction-stage block size p'.
    pub wz_block_size: usize,
    /// Correction-stage lattice base w' = (K/2)I + 1.
    pub wz_base: u64,
    /// Correction-stage ASK size.
    pub wz_ask_size: u64,
    /// Correlated-sampling range M.
    pub daq_range: f64,
    /// Correlated-sampling count I.
    pub daq_samples: u64,
    /// Tuning constant used to derive M and I.
    pub c2: f64,
    /// Channel uses per round, ceil(d/p) + ceil(d_pad/p').
    pub uses_per_round: u64,
}

impl WzParams {
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        num_clients: usize,
        dim: usize,
        bound: f64,
        block_size: usize,
        wz_block_size: usize,
        daq_range: f64,
        daq_samples: u64,
        c2: f64,
    ) -> Result<Self> {
        if num_clients < 2 || !num_clients.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "WZ-OTA needs an even number of clients >= 2, got {num_clients}"
            )));
        }
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bound must be > 0, got {bound}"
            )));
        }
        if !daq_range.is_finite() || daq_range <= 0.0 || daq_samples == 0 {
            return Err(Error::InvalidConfig(
                "daq_range must be > 0 and daq_samples >= 1".into(),
            ));
        }
        let half = num_clients as u64 / 2;
        let levels = 7u64;
        let base = half * (levels - 1) + 1;
        let padded_dim = dim.next_power_of_two();
        let layout1 = LatticeLayout::new(dim, block_size, base)?;
        let span1 = layout1.max_packed();
        debug_assert_eq!(span1 % half, 0);
        let wz_base = half * daq_samples + 1;
        let layout2 = LatticeLayout::new(padded_dim, wz_block_size, wz_base)?;
        let span2 = layout2.max_packed();
        debug_assert_eq!(span2 % half, 0);
        Ok(Self {
            num_clients,
            dim,
            padded_dim,
            bound,
            levels,
            block_size,
            base,
            ask_size: span1 / half + 1,
            wz_block_size,
            wz_base,
            wz_ask_size: span2 / half + 1,
            daq_range,
            daq_samples,
            c2,
            uses_per_round: (dim.div_ceil(block_size) + padded_dim.div_ceil(wz_block_size)) as u64,
        })
    }
}

/// The server's estimate for one round plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEstimate {
    /// Decoded gradient estimate, original dimension.
    pub estimate: Vec<f64>,
    /// Channel uses consumed this round.
    pub uses: u64,
    /// False when any minimum-distance decode clamped at a constellation
    /// edge; the clamped estimate is still returned.
    pub decode_ok: bool,
}

/// Largest block size allowed by the selection formula, `floor(log_base(1 + arg))`,
/// clamped into `[1, dim]`.
fn block_size_from_formula(arg: f64, base: u64, dim: usize) -> usize {
    if !arg.is_finite() {
        return dim;
    }
    let raw = (1.0 + arg).ln() / (base as f64).ln();
    if raw.is_nan() {
        return 1;
    }
    (raw.floor().max(1.0) as usize).min(dim)
}

fn check_selection_inputs(num_clients: usize, dim: usize, snr: f64, n_budget: u64) -> Result<()> {
    if num_clients == 0 || dim == 0 {
        return Err(Error::InvalidConfig(
            "num_clients and dim must be >= 1".into(),
        ));
    }
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::InvalidConfig(format!("snr must be > 0, got {snr}")));
    }
    if n_budget == 0 {
        return Err(Error::InvalidConfig("n_budget must be >= 1".into()));
    }
    Ok(())
}

/// UQ-OTA parameter selection: `v = floor(sqrt(d)) + 1`,
/// `p = floor(log_w(1 + sqrt(2*K*SNR / ln(K*N^1.5))))` with `w = K(v-1)+1`,
/// clamped into `[1, d]`.
pub fn select_params_uq(
    num_clients: usize,
    dim: usize,
    snr: f64,
    n_budget: u64,
    bound: f64,
) -> Result<UqParams> {
    check_selection_inputs(num_clients, dim, snr, n_budget)?;
    let levels = (dim as f64).sqrt().floor() as u64 + 1;
    let base = num_clients as u64 * (levels - 1) + 1;
    let denom = (num_clients as f64 * (n_budget as f64).powf(1.5)).ln();
    let arg = if denom > 0.0 {
        (2.0 * num_clients as f64 * snr / denom).sqrt()
    } else {
        f64::INFINITY
    };
    let block_size = block_size_from_formula(arg, base, dim);
    UqParams::derive(num_clients, dim, bound, levels, block_size)
}

/// WZ-OTA parameter selection per the recipe:
/// `v = 7`, `M = c2*B*sqrt(ln(K^1.5*N)) / (K*sqrt(d))`,
/// `I = ceil(c2*sqrt(ln(K^1.5*N)))`, and block sizes
/// `p = floor(log_w(1 + sqrt(K*SNR / (2*ln(K*N^1.5)))))` with `w = 3K+1`,
/// `p'` likewise with `w' = (K/2)*I + 1`.
pub fn select_params_wz(
    num_clients: usize,
    dim: usize,
    snr: f64,
    n_budget: u64,
    bound: f64,
    c2: f64,
) -> Result<WzParams> {
    check_selection_inputs(num_clients, dim, snr, n_budget)?;
    if !num_clients.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "WZ-OTA needs an even number of clients, got {num_clients}"
        )));
    }
    if !c2.is_finite() || c2 <= 0.0 {
        return Err(Error::InvalidConfig(format!("c2 must be > 0, got {c2}")));
    }
    let ln_term = ((num_clients as f64).powf(1.5) * n_budget as f64).ln();
    let daq_range = c2 * bound / (num_clients as f64 * (dim as f64).sqrt()) * ln_term.sqrt();
    let daq_samples = (c2 * ln_term.sqrt()).ceil().max(1.0) as u64;
    let base = 3 * num_clients as u64 + 1;
    let wz_base = (num_clients as u64 / 2) * daq_samples + 1;
    let denom = (num_clients as f64 * (n_budget as f64).powf(1.5)).ln();
    let arg = if denom > 0.0 {
        (num_clients as f64 * snr / (2.0 * denom)).sqrt()
    } else {
        f64::INFINITY
    };
    let block_size = block_size_from_formula(arg, base, dim);
    let wz_block_size = block_size_from_formula(arg, wz_base, dim);
    WzParams::derive(
        num_clients,
        dim,
        bound,
        block_size,
        wz_block_size,
        daq_range,
        daq_samples,
        c2,
    )
}

/// Shared digital pipeline: quantizer digits in, noisy digit sums out.
///
/// `digits[k]` holds one digit per carried coordinate for transmitting client
/// `k`; silent clients contribute all-zero codewords. Returns the recovered
/// digit sums (one per carried coordinate) and whether every block decoded
/// without clamping.
fn lattice_up_down(
    digits: &[Vec<u64>],
    silent_rows: usize,
    carried_dim: usize,
    layout: &LatticeLayout,
    ask_size: u64,
    cfg: &ChannelConfig,
    rng: &mut SimRng,
) -> Result<(Vec<u64>, bool)> {
    let blocks = partition_blocks(carried_dim, layout.block_size);
    let codebook = AskCodebook::new(ask_size, cfg.power)?;
    let num_tx = digits.len();

    let mut rows = Vec::with_capacity(num_tx + silent_rows);
    for client_digits in digits {
        debug_assert_eq!(client_digits.len(), carried_dim);
        let row = blocks
            .iter()
            .map(|b| {
                let tau = lattice_pack(&client_digits[b.clone()], layout)?;
                codebook.amplitude(tau)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    rows.resize(rows.len() + silent_rows, vec![0.0; blocks.len()]);

    let received = transmit_mac(&rows, cfg, rng)?;
    let constellation = SumConstellation::new(ask_size, cfg.power, num_tx)?;

    let mut sums = Vec::with_capacity(carried_dim);
    let mut clean = true;
    for (block, &y) in blocks.iter().zip(&received) {
        let (tau_hat, clamped) = constellation.decode(y);
        clean &= !clamped;
        let unpacked = lattice_unpack(tau_hat, layout)?;
        sums.extend_from_slice(&unpacked[..block.len()]);
    }
    Ok((sums, clean))
}

fn check_gradients(grads: &[Vec<f64>], num_clients: usize, dim: usize) -> Result<()> {
    if grads.len() != num_clients {
        return Err(Error::DimensionMismatch {
            expected: num_clients,
            actual: grads.len(),
        });
    }
    for g in grads {
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: g.len(),
            });
        }
    }
    Ok(())
}

/// One UQ-OTA round: CUQ-encode `g_k / K`, lattice-pack, modulate, transmit,
/// decode the digit sums, and reconstruct the average-gradient estimate.
pub fn uq_ota_round(
    grads: &[Vec<f64>],
    params: &UqParams,
    cfg: &ChannelConfig,
    rng: &mut SimRng,
) -> Result<RoundEstimate> {
    check_gradients(grads, params.num_clients, params.dim)?;
    if cfg.num_clients != params.num_clients {
        return Err(Error::DimensionMismatch {
            expected: params.num_clients,
            actual: cfg.num_clients,
        });
    }
    let cuq = CuqParams::new(params.levels, params.bound, params.num_clients as u64)?;
    let scale = 1.0 / params.num_clients as f64;
    let digits: Vec<Vec<u64>> = grads
        .iter()
        .map(|g| {
            g.iter()
                .map(|&x| cuq_encode(x * scale, &cuq, rng))
                .collect()
        })
        .collect();

    let layout = LatticeLayout::new(params.dim, params.block_size, params.base)?;
    let (sums, decode_ok) =
        lattice_up_down(&digits, 0, params.dim, &layout, params.ask_size, cfg, rng)?;
    let estimate = cuq_reconstruct_sum(&sums, params.levels, params.bound, params.num_clients)?;
    Ok(RoundEstimate {
        estimate,
        uses: params.uses_per_round,
        decode_ok,
    })
}

/// Stage 1 of WZ-OTA: the first `K/2` clients run the UQ-OTA pipeline with
/// normalizer `K/2` (the rest stay silent) and the server rescales the
/// preliminary estimate into the side information `S`.
pub fn wz_side_info_round(
    grads: &[Vec<f64>],
    params: &WzParams,
    cfg: &ChannelConfig,
    rng: &mut SimRng,
) -> Result<(Vec<f64>, u64, bool)> {
    check_gradients(grads, params.num_clients, params.dim)?;
    let half = params.num_clients / 2;
    let cuq = CuqParams::new(params.levels, params.bound, half as u64)?;
    let scale = 1.0 / half as f64;
    let digits: Vec<Vec<u64>> = grads[..half]
        .iter()
        .map(|g| {
            g.iter()
                .map(|&x| cuq_encode(x * scale, &cuq, rng))
                .collect()
        })
        .collect();

    let layout = LatticeLayout::new(params.dim, params.block_size, params.base)?;
    let (sums, ok) = lattice_up_down(
        &digits,
        half,
        params.dim,
        &layout,
        params.ask_size,
        cfg,
        rng,
    )?;
    let preliminary = cuq_reconstruct_sum(&sums, params.levels, params.bound, half)?;
    let side_info = preliminary.iter().map(|v| v * scale).collect();
    Ok((side_info, layout.num_blocks() as u64, ok))
}

/// Stage 2 of WZ-OTA: clients `K/2..K` send correlated-sampling counts of
/// their rotated, rescaled gradients; the server subtracts reference counts
/// against the rotated side information and adds back `(K/2) * S`.
pub fn wz_correction_round(
    grads: &[Vec<f64>],
    side_info: &[f64],
    params: &WzParams,
    cfg: &ChannelConfig,
    rotation: &Rotation,
    shared_seed: u64,
    rng: &mut SimRng,
) -> Result<RoundEstimate> {
    check_gradients(grads, params.num_clients, params.dim)?;
    let half = params.num_clients / 2;
    let daq = DaqParams::new(params.daq_range, params.daq_samples, shared_seed)?;
    let scale = 2.0 / params.num_clients as f64;

    let client_ids: Vec<u64> = (half as u64..params.num_clients as u64).collect();
    let digits: Vec<Vec<u64>> = grads[half..]
        .iter()
        .zip(&client_ids)
        .map(|(g, &k)| {
            let rescaled: Vec<f64> = g.iter().map(|v| v * scale).collect();
            let rotated = rotate(rotation, &rescaled)?;
            Ok(daq_encode(&rotated, &daq, k))
        })
        .collect::<Result<_>>()?;

    let layout = LatticeLayout::new(params.padded_dim, params.wz_block_size, params.wz_base)?;
    let (sums, ok) = lattice_up_down(
        &digits,
        half,
        params.padded_dim,
        &layout,
        params.wz_ask_size,
        cfg,
        rng,
    )?;

    let side_rot = rotate(rotation, side_info)?;
    let omega = daq_reference_counts(&side_rot, &daq, &client_ids);
    let estimate = daq_reconstruct(&sums, &omega, &daq, side_info, params.num_clients, rotation)?;
    Ok(RoundEstimate {
        estimate,
        uses: layout.num_blocks() as u64,
        decode_ok: ok,
    })
}

/// One full WZ-OTA round. The estimate targets the rescaled second-half sum
/// `(2/K) * sum_{k in C2} g_k`, which has the same expectation as the
/// gradient average.
pub fn wz_ota_round(
    grads: &[Vec<f64>],
    params: &WzParams,
    cfg: &ChannelConfig,
    rotation: &Rotation,
    rng: &mut SimRng,
) -> Result<RoundEstimate> {
    check_gradients(grads, params.num_clients, params.dim)?;
    if cfg.num_clients != params.num_clients {
        return Err(Error::DimensionMismatch {
            expected: params.num_clients,
            actual: cfg.num_clients,
        });
    }
    if rotation.dim != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            actual: rotation.dim,
        });
    }
    let (side_info, uses1, ok1) = wz_side_info_round(grads, params, cfg, rng)?;
    let shared_seed = rng.random::<u64>();
    let mut round =
        wz_correction_round(grads, &side_info, params, cfg, rotation, shared_seed, rng)?;
    round.uses += uses1;
    round.decode_ok &= ok1;
    debug_assert_eq!(round.uses, params.uses_per_round);
    Ok(round)
}

/// One analog scaled-transmission round: each client scales its gradient by
/// `sqrt(d*P)/B` and sends it coordinate per channel use; the server rescales
/// the sum back and averages.
pub fn analog_round(
    grads: &[Vec<f64>],
    bound: f64,
    cfg: &ChannelConfig,
    rng: &mut SimRng,
) -> Result<RoundEstimate> {
    let dim = grads.first().map_or(0, Vec::len);
    check_gradients(grads, cfg.num_clients, dim)?;
    if !bound.is_finite() || bound <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "bound must be > 0, got {bound}"
        )));
    }
    let up = (dim as f64 * cfg.power).sqrt() / bound;
    let rows: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| g.iter().map(|v| v * up).collect())
        .collect();
    let received = transmit_mac(&rows, cfg, rng)?;
    let down = 1.0 / (up * cfg.num_clients as f64);
    Ok(RoundEstimate {
        estimate: received.iter().map(|y| y * down).collect(),
        uses: dim as u64,
        decode_ok: true,
    })
}

/// Monte Carlo estimates of the root-mean-square error and bias of a round
/// function against a fixed target gradient.
///
/// `round` draws fresh oracle outputs internally each trial. Returns
/// `(alpha_hat, beta_hat)` where `alpha_hat^2` is the mean squared deviation
/// and `beta_hat` the norm of the mean deviation.
pub fn estimate_alpha_beta<F>(
    mut round: F,
    target: &[f64],
    trials: usize,
    rng: &mut SimRng,
) -> Result<(f64, f64)>
where
    F: FnMut(&mut SimRng) -> Result<Vec<f64>>,
{
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let dim = target.len();
    let mut mean = vec![0.0; dim];
    let mut sq_sum = 0.0;
    for _ in 0..trials {
        let est = round(rng)?;
        if est.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: est.len(),
            });
        }
        let mut sq = 0.0;
        for (j, (e, t)) in est.iter().zip(target).enumerate() {
            let diff = e - t;
            sq += diff * diff;
            mean[j] += e;
        }
        sq_sum += sq;
    }
    let alpha = (sq_sum / trials as f64).sqrt();
    let beta = mean
        .iter()
        .zip(target)
        .map(|(m, t)| {
            let diff = m / trials as f64 - t;
            diff * diff
        })
        .sum::<f64>()
        .sqrt();
    Ok((alpha, beta))
}
