//! Additive Gaussian multiple access channel, ASK constellations, and
//! minimum-distance decoding of the superposed constellation.
//!
//! `K` clients each transmit a real codeword of length `ell` under an average
//! power constraint `P` per channel use; the server observes the coordinate
//! sum plus i.i.d. Gaussian noise. Digital schemes map lattice integers onto
//! an equally spaced amplitude grid in `[-sqrt(P), sqrt(P)]` and the server
//! decodes the *sum* grid, whose points are `-K*sqrt(P) + s * spacing`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Largest integer magnitude we allow for constellation and lattice indices.
/// Every index must be exactly representable as an `f64`.
pub const EXACT_INT_GUARD: u64 = 1 << 52;

/// Relative slack when checking codeword energy against the power constraint,
/// absorbing floating-point accumulation in the caller's norm.
pub const POWER_TOLERANCE: f64 = 1e-12;

/// Channel-level parameters shared by every transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Number of clients K.
    pub num_clients: usize,
    /// Average power budget P per channel use.
    pub power: f64,
    /// Variance of the additive Gaussian noise per channel use.
    pub noise_var: f64,
    /// Master seed for the channel noise stream.
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(num_clients: usize, power: f64, noise_var: f64, seed: u64) -> Result<Self> {
        if num_clients == 0 {
            return Err(Error::InvalidConfig("num_clients must be >= 1".into()));
        }
        if !power.is_finite() || power <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "power must be > 0, got {power}"
            )));
        }
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_var must be >= 0, got {noise_var}"
            )));
        }
        Ok(Self {
            num_clients,
            power,
            noise_var,
            seed,
        })
    }

    /// Signal-to-noise ratio `K * P / noise_var`. Infinite for a noiseless channel.
    pub fn snr(&self) -> f64 {
        if self.noise_var == 0.0 {
            f64::INFINITY
        } else {
            self.num_clients as f64 * self.power / self.noise_var
        }
    }
}

/// Size-`r` amplitude-shift-keying grid on `[-sqrt(P), sqrt(P)]`.
///
/// Point `i` (zero based) sits at `-sqrt(P) + i * 2*sqrt(P)/(r-1)`, so the
/// grid spans the full power interval with uniform spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AskCodebook {
    /// Number of amplitudes r (>= 2).
    pub size: u64,
    /// Power budget P defining the amplitude interval.
    pub power: f64,
}

impl AskCodebook {
    pub fn new(size: u64, power: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidConfig(format!(
                "ASK size must be >= 2, got {size}"
            )));
        }
        if size > EXACT_INT_GUARD {
            return Err(Error::Overflow {
                what: "ASK size - 1",
                value: (size - 1) as u128,
            });
        }
        if !power.is_finite() || power <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "power must be > 0, got {power}"
            )));
        }
        Ok(Self { size, power })
    }

    /// Distance between adjacent amplitudes, `2*sqrt(P)/(r-1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.power.sqrt() / (self.size - 1) as f64
    }

    /// Amplitude of the zero-based `index`.
    pub fn amplitude(&self, index: u64) -> Result<f64> {
        if index >= self.size {
            return Err(Error::IndexOutOfRange {
                index,
                max: self.size - 1,
            });
        }
        Ok(-self.power.sqrt() + index as f64 * self.spacing())
    }
}

/// The constellation of possible *sums* of `num_summed` ASK codewords:
/// `-K*sqrt(P) + s * spacing` for `s` in `0..=K*(r-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumConstellation {
    /// Per-client ASK size r.
    pub size: u64,
    /// Power budget P.
    pub power: f64,
    /// Number of summed codewords (the clients actually transmitting).
    pub num_summed: usize,
}

impl SumConstellation {
    pub fn new(size: u64, power: f64, num_summed: usize) -> Result<Self> {
        let cb = AskCodebook::new(size, power)?;
        if num_summed == 0 {
            return Err(Error::InvalidConfig("num_summed must be >= 1".into()));
        }
        let top = (num_summed as u128) * (size as u128 - 1);
        if top >= EXACT_INT_GUARD as u128 {
            return Err(Error::Overflow {
                what: "K * (r - 1)",
                value: top,
            });
        }
        Ok(Self {
            size: cb.size,
            power: cb.power,
            num_summed,
        })
    }

    /// Largest sum index `K * (r - 1)`.
    pub fn max_index(&self) -> u64 {
        self.num_summed as u64 * (self.size - 1)
    }

    /// Spacing of the sum grid; identical to the per-client ASK spacing.
    pub fn spacing(&self) -> f64 {
        2.0 * self.power.sqrt() / (self.size - 1) as f64
    }

    /// Value of sum point `s`.
    pub fn point(&self, s: u64) -> f64 {
        -(self.num_summed as f64) * self.power.sqrt() + s as f64 * self.spacing()
    }

    /// Nearest sum index to `y` plus a flag for whether `y` had to be clamped
    /// into the constellation range. Ties break toward the smaller index.
    pub fn decode(&self, y: f64) -> (u64, bool) {
        let t = (y + self.num_summed as f64 * self.power.sqrt()) / self.spacing();
        let max = self.max_index();
        if t <= 0.0 {
            // Clamped only if y lies strictly below the bottom point.
            return (0, t < 0.0);
        }
        if t >= max as f64 {
            return (max, t > max as f64);
        }
        let low = t.floor();
        let frac = t - low;
        let s = if frac > 0.5 { low + 1.0 } else { low };
        (s as u64, false)
    }
}

/// Sends `K` codeword rows over the MAC and returns the noisy coordinate sums.
///
/// Every row must satisfy the average power constraint
/// `sum_j row[j]^2 <= ell * P` (up to [`POWER_TOLERANCE`] relative slack).
pub fn transmit_mac(
    codewords: &[Vec<f64>],
    cfg: &ChannelConfig,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    if codewords.len() != cfg.num_clients {
        return Err(Error::DimensionMismatch {
            expected: cfg.num_clients,
            actual: codewords.len(),
        });
    }
    let ell = codewords.first().map_or(0, Vec::len);
    if ell == 0 {
        return Err(Error::InvalidConfig(
            "codewords must have length >= 1".into(),
        ));
    }
    let limit = ell as f64 * cfg.power;
    for (client, row) in codewords.iter().enumerate() {
        if row.len() != ell {
            return Err(Error::DimensionMismatch {
                expected: ell,
                actual: row.len(),
            });
        }
        let energy: f64 = row.iter().map(|x| x * x).sum();
        if energy > limit * (1.0 + POWER_TOLERANCE) {
            return Err(Error::PowerViolation {
                client,
                energy,
                limit,
            });
        }
    }

    let mut out = vec![0.0; ell];
    for row in codewords {
        for (acc, x) in out.iter_mut().zip(row) {
            *acc += x;
        }
    }
    if cfg.noise_var > 0.0 {
        let std = cfg.noise_var.sqrt();
        for y in &mut out {
            let z: f64 = StandardNormal.sample(rng);
            *y += std * z;
        }
    }
    Ok(out)
}

/// Amplitude of the zero-based `index` in `cb`; see [`AskCodebook::amplitude`].
pub fn ask_amplitude(cb: &AskCodebook, index: u64) -> Result<f64> {
    cb.amplitude(index)
}

/// Minimum-distance decoding of a received value against the sum constellation.
/// Out-of-range inputs clamp to the nearest end point.
pub fn md_decode_sum(y: f64, sc: &SumConstellation) -> u64 {
    sc.decode(y).0
}

/// Union bound on the probability that Gaussian noise reaches the
/// constellation spacing in any of `n_uses` channel uses:
/// `min(1, N * exp(-2*K*SNR / (w^p - 1)^2))`.
///
/// `w^p - 1` is the largest sum index of the lattice the grid carries; the
/// bound follows from the sub-Gaussian tail of the per-use noise.
pub fn decode_error_bound(cfg: &ChannelConfig, w: u64, p: u32, n_uses: u64) -> Result<f64> {
    if n_uses == 0 {
        return Err(Error::InvalidConfig("n_uses must be >= 1".into()));
    }
    let span = lattice_span(w, p)?;
    let snr = cfg.snr();
    if snr.is_infinite() {
        return Ok(0.0);
    }
    let exponent = -2.0 * cfg.num_clients as f64 * snr / (span as f64 * span as f64);
    Ok((n_uses as f64 * exponent.exp()).min(1.0))
}

/// `w^p - 1` checked against the exact-integer guard.
pub fn lattice_span(w: u64, p: u32) -> Result<u64> {
    let mut acc: u128 = 1;
    for _ in 0..p {
        acc = acc.checked_mul(w as u128).ok_or(Error::Overflow {
            what: "w^p - 1",
            value: u128::MAX,
        })?;
        if acc > EXACT_INT_GUARD as u128 {
            return Err(Error::Overflow {
                what: "w^p - 1",
                value: acc - 1,
            });
        }
    }
    Ok((acc - 1) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn cfg(k: usize, power: f64, noise_var: f64) -> ChannelConfig {
        ChannelConfig::new(k, power, noise_var, 0xC0FFEE).unwrap()
    }

    #[test]
    fn snr_matches_definition() {
        let c = cfg(4, 2.0, 0.5);
        assert_eq!(c.snr(), 4.0 * 2.0 / 0.5);
        assert!(cfg(4, 2.0, 0.0).snr().is_infinite());
    }

    #[test]
    fn ask_grid_endpoints_and_spacing() {
        let cb = AskCodebook::new(3, 4.0).unwrap();
        assert_eq!(ask_amplitude(&cb, 0).unwrap(), -2.0);
        assert_eq!(ask_amplitude(&cb, 1).unwrap(), 0.0);
        assert_eq!(ask_amplitude(&cb, 2).unwrap(), 2.0);
        assert!(matches!(
            ask_amplitude(&cb, 3),
            Err(Error::IndexOutOfRange { index: 3, max: 2 })
        ));
        // All amplitudes inside [-sqrt(P), sqrt(P)] with uniform spacing.
        let cb = AskCodebook::new(17, 3.0).unwrap();
        let root = 3.0f64.sqrt();
        for i in 0..17 {
            let a = cb.amplitude(i).unwrap();
            assert!(a >= -root - 1e-15 && a <= root + 1e-15);
            if i > 0 {
                let prev = cb.amplitude(i - 1).unwrap();
                assert!((a - prev - cb.spacing()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_superposition_is_exact() {
        let c = cfg(2, 1.0, 0.0);
        let mut rng = stream(c.seed, 0, 0);
        let y = transmit_mac(&[vec![0.3], vec![-0.1]], &c, &mut rng).unwrap();
        assert_eq!(y, vec![0.3 + -0.1]);
    }

    #[test]
    fn noiseless_identity_for_random_matrices() {
        let mut rng = stream(99, 0, 0);
        for trial in 0..1_000u64 {
            let k = 1 + (trial % 4) as usize;
            let ell = 1 + (trial % 8) as usize;
            let c = cfg(k, 1.0, 0.0);
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    (0..ell)
                        .map(|_| (rng.random::<f64>() - 0.5) / (k as f64))
                        .collect()
                })
                .collect();
            let y = transmit_mac(&rows, &c, &mut rng).unwrap();
            for j in 0..ell {
                let mut sum = 0.0;
                for row in &rows {
                    sum += row[j];
                }
                assert_eq!(y[j], sum, "trial {trial} coordinate {j}");
            }
        }
    }

    #[test]
    fn noise_moments_match_gaussian() {
        let c = cfg(1, 1.0, 1.0);
        let mut rng = stream(c.seed, 1, 0);
        let reps = 100_000usize;
        let ell = 3;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let y = transmit_mac(&[vec![0.0; ell]], &c, &mut rng).unwrap();
            for v in y {
                sum += v;
                sum_sq += v * v;
            }
        }
        let n = (reps * ell) as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn power_violation_rejected() {
        let c = cfg(2, 1.0, 0.0);
        let mut rng = stream(0, 0, 0);
        let ell = 4;
        // Row energy 1.1 * ell * P.
        let amp = (1.1f64).sqrt();
        let bad = vec![vec![amp; ell], vec![0.0; ell]];
        match transmit_mac(&bad, &c, &mut rng) {
            Err(Error::PowerViolation { client: 0, .. }) => {}
            other => panic!("expected PowerViolation, got {other:?}"),
        }
    }

    #[test]
    fn wrong_row_count_rejected() {
        let c = cfg(2, 1.0, 0.0);
        let mut rng = stream(0, 0, 0);
        assert!(matches!(
            transmit_mac(&[vec![0.0]], &c, &mut rng),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn md_decode_examples() {
        // K=2, r=3, P=1: sum points {-2,-1,0,1,2}.
        let sc = SumConstellation::new(3, 1.0, 2).unwrap();
        assert_eq!(md_decode_sum(0.4, &sc), 2);
        assert_eq!(md_decode_sum(2.7, &sc), 4); // clamp above the top point
        assert_eq!(md_decode_sum(0.5, &sc), 2); // tie toward the smaller index
        assert_eq!(md_decode_sum(-2.5, &sc), 0); // tie at the bottom edge
        let (s, clamped) = sc.decode(-9.0);
        assert_eq!((s, clamped), (0, true));
    }

    #[test]
    fn md_round_trip_is_exhaustive() {
        for (r, k) in [(3u64, 2usize), (9, 5), (101, 7), (2501, 4)] {
            let sc = SumConstellation::new(r, 2.0, k).unwrap();
            assert!(sc.max_index() <= 10_000);
            for s in 0..=sc.max_index() {
                let (hat, clamped) = sc.decode(sc.point(s));
                assert_eq!(hat, s, "r={r} k={k} s={s}");
                assert!(!clamped);
            }
        }
    }

    #[test]
    fn md_recovers_under_half_spacing_noise() {
        let sc = SumConstellation::new(5, 1.5, 3).unwrap();
        let margin = 0.99 * sc.spacing() / 2.0;
        for s in 0..=sc.max_index() {
            let p = sc.point(s);
            assert_eq!(md_decode_sum(p + margin, &sc), s, "s={s} up");
            assert_eq!(md_decode_sum(p - margin, &sc), s, "s={s} down");
        }
    }

    #[test]
    fn decode_bound_examples() {
        // Exponent -1 by construction: w^p - 1 = sqrt(2 K SNR).
        // K=2, noise_var chosen so SNR = (w^p-1)^2 / (2K) with w=3, p=2 -> span 8.
        let span = 8.0f64;
        let snr = span * span / (2.0 * 2.0);
        let c = ChannelConfig::new(2, 1.0, 2.0 / snr, 0).unwrap();
        assert!((c.snr() - snr).abs() < 1e-12);
        let b = decode_error_bound(&c, 3, 2, 1).unwrap();
        assert!((b - (-1.0f64).exp()).abs() < 1e-12, "got {b}");

        // K=2, SNR=50, w=3, p=2, N=10 -> 10*exp(-200/64).
        let c = ChannelConfig::new(2, 1.0, 2.0 / 50.0, 0).unwrap();
        let b = decode_error_bound(&c, 3, 2, 10).unwrap();
        let expect = 10.0 * (-200.0f64 / 64.0).exp();
        assert!((b - expect).abs() < 1e-12, "got {b} want {expect}");
        assert!((b - 0.439).abs() < 1e-3);

        // Noiseless channel: bound collapses to zero.
        let c = ChannelConfig::new(2, 1.0, 0.0, 0).unwrap();
        assert_eq!(decode_error_bound(&c, 3, 2, 10).unwrap(), 0.0);

        // Very low SNR saturates at 1.
        let c = ChannelConfig::new(2, 1.0, 1e9, 0).unwrap();
        assert_eq!(decode_error_bound(&c, 3, 2, 1_000).unwrap(), 1.0);
    }

    #[test]
    fn lattice_span_guard() {
        assert_eq!(lattice_span(5, 3).unwrap(), 124);
        assert!(matches!(lattice_span(2, 53), Err(Error::Overflow { .. })));
        assert!(matches!(
            lattice_span(1 << 27, 2),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn empirical_margin_event_within_chernoff_bound() {
        // The decoding-failure event of the union bound is "noise magnitude
        // reaches the constellation spacing". Measure it on the real channel.
        let w = 3u64;
        let p = 2u32;
        let span = lattice_span(w, p).unwrap(); // 8
        let k = 2usize;
        // Pick SNR so the per-use bound sits around 1e-2.
        let snr = (span * span) as f64 * (100.0f64).ln() / (2.0 * k as f64);
        let noise_var = k as f64 * 1.0 / snr;
        let c = ChannelConfig::new(k, 1.0, noise_var, 7).unwrap();
        let per_use_bound = decode_error_bound(&c, w, p, 1).unwrap();
        assert!(per_use_bound > 1e-3 && per_use_bound < 1e-1);

        let r = span / k as u64 + 1;
        let sc = SumConstellation::new(r, c.power, k).unwrap();
        let spacing = sc.spacing();
        let mut rng = stream(c.seed, 3, 0);
        let uses = 200_000usize;
        let sent = sc.point(sc.max_index() / 2);
        let mut failures = 0usize;
        for _ in 0..uses {
            let amp = sent / k as f64;
            let y = transmit_mac(&[vec![amp], vec![amp]], &c, &mut rng).unwrap();
            if (y[0] - sent).abs() >= spacing {
                failures += 1;
            }
        }
        let rate = failures as f64 / uses as f64;
        let se = (rate.max(1e-9) * (1.0 - rate) / uses as f64).sqrt();
        assert!(
            rate <= per_use_bound + 3.0 * se,
            "rate {rate} exceeds bound {per_use_bound} + 3*{se}"
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn md_decoding_round_trips(
                r in 2u64..5000,
                k in 1usize..16,
                s_seed in 0u64..u64::MAX,
                power in 0.01f64..100.0,
                offset in -0.99f64..0.99,
            ) {
                let sc = SumConstellation::new(r, power, k).unwrap();
                let s = s_seed % (sc.max_index() + 1);
                // Perturb by strictly less than half the spacing.
                let y = sc.point(s) + offset * sc.spacing() / 2.0;
                prop_assert_eq!(md_decode_sum(y, &sc), s);
            }

            #[test]
            fn decode_never_leaves_the_index_range(
                r in 2u64..100,
                k in 1usize..8,
                y in -1e6f64..1e6,
            ) {
                let sc = SumConstellation::new(r, 1.0, k).unwrap();
                prop_assert!(md_decode_sum(y, &sc) <= sc.max_index());
            }
        }
    }
}
