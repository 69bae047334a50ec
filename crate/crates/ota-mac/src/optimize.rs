//! Projected stochastic gradient descent, projection domains, the
//! deviation-driven learning rate, and gradient oracles.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::schemes::RoundEstimate;

/// Convex feasible set with an exact Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Euclidean ball of the given radius.
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box `center +- half_widths`.
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::Box { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Domain::Ball { center, .. } | Domain::Box { center, .. } => center,
        }
    }

    /// Largest distance between two feasible points.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Box { half_widths, .. } => {
                2.0 * half_widths.iter().map(|h| h * h).sum::<f64>().sqrt()
            }
        }
    }

    /// Closest feasible point to `y`; interior points come back unchanged.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Domain::Ball { center, radius } => {
                let dist: f64 = y
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist <= *radius {
                    y.to_vec()
                } else {
                    let scale = radius / dist;
                    y.iter()
                        .zip(center)
                        .map(|(a, c)| c + (a - c) * scale)
                        .collect()
                }
            }
            Domain::Box {
                center,
                half_widths,
            } => y
                .iter()
                .zip(center.iter().zip(half_widths))
                .map(|(a, (c, h))| a.clamp(c - h, c + h))
                .collect(),
        }
    }
}

/// Which stochastic gradient generator backs an oracle.
#[derive(Debug, Clone, PartialEq)]
enum OracleKind {
    /// Noise-free gradients of `f(x) = 0.5 * ||x - target||^2`.
    Exact { target: Vec<f64> },
    /// Gradients of the same quadratic plus i.i.d. uniform noise.
    QuadraticUniform {
        target: Vec<f64>,
        noise_half_width: f64,
    },
    /// A constant field: `mu` plus i.i.d. uniform noise. Models the
    /// mean-estimation experiments, where the "gradient" is the data vector.
    MeanEstimation { mu: Vec<f64>, noise_half_width: f64 },
}

/// Stochastic gradient generator satisfying the three oracle conditions:
/// unbiasedness, mean-square deviation at most `sigma^2`, and almost-sure
/// norm at most `bound`.
///
/// The norm bound is enforced by clipping. Clipping a raw draw technically
/// perturbs unbiasedness, so the number of clip events is counted and
/// exposed.
#[derive(Debug)]
pub struct GradientOracle {
    pub dim: usize,
    /// Deviation bound sigma.
    pub sigma: f64,
    /// Almost-sure norm bound B.
    pub bound: f64,
    kind: OracleKind,
    clip_events: AtomicU64,
}

impl GradientOracle {
    /// Exact gradients of `f(x) = 0.5 * ||x - target||^2`.
    pub fn exact_quadratic(target: Vec<f64>, bound: f64) -> Self {
        Self {
            dim: target.len(),
            sigma: 0.0,
            bound,
            kind: OracleKind::Exact { target },
            clip_events: AtomicU64::new(0),
        }
    }

    /// Quadratic gradients with coordinate-wise `unif(-w, w)` noise, so
    /// `sigma^2 = d * w^2 / 3`.
    pub fn quadratic_with_uniform_noise(
        target: Vec<f64>,
        noise_half_width: f64,
        bound: f64,
    ) -> Self {
        let dim = target.len();
        Self {
            dim,
            sigma: noise_half_width * (dim as f64 / 3.0).sqrt(),
            bound,
            kind: OracleKind::QuadraticUniform {
                target,
                noise_half_width,
            },
            clip_events: AtomicU64::new(0),
        }
    }

    /// True gradient of the underlying function at `x`.
    pub fn true_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            OracleKind::Exact { target } | OracleKind::QuadraticUniform { target, .. } => {
                x.iter().zip(target).map(|(a, t)| a - t).collect()
            }
            OracleKind::MeanEstimation { mu, .. } => mu.clone(),
        }
    }

    /// Draws one stochastic gradient at `x`, clipped to norm `bound`.
    pub fn sample(&self, x: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let mut g = self.true_gradient(x);
        let half_width = match &self.kind {
            OracleKind::Exact { .. } => 0.0,
            OracleKind::QuadraticUniform {
                noise_half_width, ..
            }
            | OracleKind::MeanEstimation {
                noise_half_width, ..
            } => *noise_half_width,
        };
        if half_width > 0.0 {
            for v in &mut g {
                *v += half_width * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.bound {
            self.clip_events.fetch_add(1, Ordering::Relaxed);
            let scale = self.bound / norm;
            for v in &mut g {
                *v *= scale;
            }
        }
        g
    }

    /// Number of draws clipped to the norm bound so far.
    pub fn clip_events(&self) -> u64 {
        self.clip_events.load(Ordering::Relaxed)
    }

    /// Tightens the norm bound to `bound` when the current one is looser.
    /// Used when a scheme is run with a smaller bound than the oracle's
    /// natural one; the extra clipping shows up in [`Self::clip_events`].
    pub fn clamp_bound(&mut self, bound: f64) {
        if bound < self.bound {
            self.bound = bound;
        }
    }
}

/// The experiment oracle: `mu` plus coordinate-wise `unif(-sigma_prime,
/// sigma_prime)` noise, with `sigma^2 = d * sigma_prime^2 / 3` and a norm
/// bound that the raw draws can never exceed.
pub fn make_mean_estimation_oracle(mu: Vec<f64>, sigma_prime: f64) -> Result<GradientOracle> {
    if !sigma_prime.is_finite() || sigma_prime < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "sigma_prime must be >= 0, got {sigma_prime}"
        )));
    }
    let dim = mu.len();
    if dim == 0 {
        return Err(Error::InvalidConfig("mu must be non-empty".into()));
    }
    let mu_norm: f64 = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(GradientOracle {
        dim,
        sigma: sigma_prime * (dim as f64 / 3.0).sqrt(),
        bound: mu_norm + sigma_prime * (dim as f64).sqrt(),
        kind: OracleKind::MeanEstimation {
            mu,
            noise_half_width: sigma_prime,
        },
        clip_events: AtomicU64::new(0),
    })
}

/// Learning-rate rule for the descent steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `min(1/L, D / (alpha * sqrt(2T)))` with a deviation estimate `alpha`.
    DeviationDriven {
        alpha: f64,
    },
    Fixed(f64),
}

/// `min(1/L, D / (alpha * sqrt(2T)))`; collapses to `1/L` as `alpha -> 0`.
pub fn learning_rate(smoothness: f64, diameter: f64, alpha: f64, iterations: u64) -> f64 {
    let by_smoothness = 1.0 / smoothness;
    if alpha <= 0.0 {
        return by_smoothness;
    }
    by_smoothness.min(diameter / (alpha * (2.0 * iterations as f64).sqrt()))
}

/// Driver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsgdConfig {
    /// Number of gradient queries T.
    pub iterations: u64,
    /// Smoothness constant L of the objective.
    pub smoothness: f64,
    pub eta: EtaRule,
    /// Channel uses each round consumes.
    pub uses_per_round: u64,
    /// Optional total channel-use budget N; the run is rejected up front if
    /// `T * uses_per_round` would exceed it.
    pub budget: Option<u64>,
}

/// Result of a PSGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct PsgdOutput {
    /// Iterate average `(1/T) * sum_{t=1..T} x_t`.
    pub average: Vec<f64>,
    /// The iterates `x_1..x_T`.
    pub iterates: Vec<Vec<f64>>,
    /// Total channel uses consumed.
    pub uses_total: u64,
}

/// Runs projected SGD: `x_{t+1} = project(x_t - eta * psi_t)` where `psi_t`
/// is the scheme's decoded estimate at `x_t`, returning the iterate average
/// and the full trace.
pub fn psgd_run<F>(
    mut round: F,
    domain: &Domain,
    cfg: &PsgdConfig,
    x0: &[f64],
    rng: &mut SimRng,
) -> Result<PsgdOutput>
where
    F: FnMut(&[f64], &mut SimRng) -> Result<RoundEstimate>,
{
    if cfg.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be >= 1".into()));
    }
    if !cfg.smoothness.is_finite() || cfg.smoothness <= 0.0 {
        return Err(Error::InvalidConfig("smoothness must be > 0".into()));
    }
    if let Some(budget) = cfg.budget {
        if cfg.iterations.saturating_mul(cfg.uses_per_round) > budget {
            return Err(Error::BudgetExceeded {
                iterations: cfg.iterations,
                uses_per_round: cfg.uses_per_round,
                budget,
            });
        }
    }
    let projected = domain.project(x0);
    let drift: f64 = projected
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if drift > 1e-9 {
        return Err(Error::InvalidConfig("x0 must lie inside the domain".into()));
    }

    let eta = match cfg.eta {
        EtaRule::DeviationDriven { alpha } => {
            learning_rate(cfg.smoothness, domain.diameter(), alpha, cfg.iterations)
        }
        EtaRule::Fixed(eta) => eta,
    };
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be > 0, got {eta}"
        )));
    }

    let dim = domain.dim();
    let mut x = projected;
    let mut iterates = Vec::with_capacity(cfg.iterations as usize);
    let mut average = vec![0.0; dim];
    let mut uses_total = 0u64;
    for _ in 0..cfg.iterations {
        let out = round(&x, rng)?;
        if out.estimate.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: out.estimate.len(),
            });
        }
        uses_total += out.uses;
        let stepped: Vec<f64> = x
            .iter()
            .zip(&out.estimate)
            .map(|(xi, gi)| xi - eta * gi)
            .collect();
        x = domain.project(&stepped);
        for (a, xi) in average.iter_mut().zip(&x) {
            *a += xi;
        }
        iterates.push(x.clone());
    }
    for a in &mut average {
        *a /= cfg.iterations as f64;
    }
    Ok(PsgdOutput {
        average,
        iterates,
        uses_total,
    })
}

/// Optimality gap of the test quadratic `f(x) = 0.5 * ||x - target||^2`.
pub fn quadratic_gap(x: &[f64], target: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .zip(target)
        .map(|(a, t)| (a - t) * (a - t))
        .sum::<f64>()
}
