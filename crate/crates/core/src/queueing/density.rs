//! Waiting-time densities of joined requests in the impatient queue.

use serde::Serialize;

use super::quadrature::{integrate, integrate_half_line};
use super::{impatient_pmf, join_accept_probs_per_arrival, JoinAccept, QueueParams, TruncationConfig};
use crate::error::{invalid, Result};

/// Densities of the wait of accepted (`f_a`), reneged (`f_r`) and all joined
/// (`f_q`) requests, with their means.
///
/// A request joining at position `k` moves forward at rate `mu + (k-1) alpha`
/// and is accepted from the head at rate `mu`, so its passage time is a sum
/// of `Exp(mu + i alpha)`, `i < k`, with density
/// `Gamma(gamma + k) / (Gamma(gamma) (k-1)!) alpha e^{-mu t} (1 - e^{-alpha t})^{k-1}`.
/// Survival of its own `Exp(alpha)` patience multiplies by `e^{-alpha t}`.
#[derive(Debug, Clone, Serialize)]
pub struct WaitDensities {
    params: QueueParams,
    #[serde(skip)]
    cfg: TruncationConfig,
    /// `a_k = p(k-1) delta^k Gamma(gamma+k) / (Gamma(gamma) (k-1)!)`, index `k - 1`.
    #[serde(skip)]
    coeffs: Vec<f64>,
    pub probs: JoinAccept,
    pub mean_accepted: f64,
    pub mean_reneged: f64,
    pub mean_joined: f64,
}

impl WaitDensities {
    /// Density of the wait of requests that are eventually accepted.
    pub fn f_a(&self, w: f64) -> f64 {
        if w < 0.0 || self.probs.p_accept_and_join <= 0.0 {
            return 0.0;
        }
        let QueueParams {
            service_rate: mu,
            reneging_rate: alpha,
            ..
        } = self.params;
        let x = 1.0 - (-alpha * w).exp();
        // Horner evaluation of sum_k a_k x^{k-1}.
        let series = self.coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a);
        alpha * (-(mu + alpha) * w).exp() * series / self.probs.p_accept_and_join
    }

    /// `g(W) = int_0^W e^{alpha xi} f_a(xi) d xi`.
    pub fn g(&self, w: f64) -> Result<f64> {
        if w <= 0.0 {
            return Ok(0.0);
        }
        let alpha = self.params.reneging_rate;
        integrate(
            &|xi: f64| (alpha * xi).exp() * self.f_a(xi),
            0.0,
            w,
            self.cfg.quadrature_abs_tol,
            self.cfg.quadrature_max_depth,
        )
    }

    /// Density of the wait of requests that renege.
    pub fn f_r(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Ok(0.0);
        }
        let pa = self.probs.p_accept_given_join;
        if pa >= 1.0 {
            return Ok(0.0);
        }
        let alpha = self.params.reneging_rate;
        Ok(alpha * (-alpha * w).exp() * (1.0 - pa * self.g(w)?) / (1.0 - pa))
    }

    /// Density of the time in queue of every joined request.
    pub fn f_q(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Ok(0.0);
        }
        let pa = self.probs.p_accept_given_join;
        let alpha = self.params.reneging_rate;
        let decay = alpha * (-alpha * w).exp();
        Ok(pa * (self.f_a(w) - decay * self.g(w)?) + decay)
    }

    /// Time scale used to panel half-line integrals.
    pub fn time_scale(&self) -> f64 {
        1.0 / self.params.reneging_rate.min(self.params.service_rate)
    }

    pub fn config(&self) -> &TruncationConfig {
        &self.cfg
    }
}

/// Builds the waiting-time densities; requires `alpha > 0`.
pub fn wait_densities(params: &QueueParams, cfg: &TruncationConfig) -> Result<WaitDensities> {
    params.validate()?;
    let alpha = params.reneging_rate;
    if !(alpha > 0.0) {
        return Err(invalid("waiting-time densities need a positive reneging rate"));
    }
    let pmf = impatient_pmf(params, cfg)?;
    let probs = join_accept_probs_per_arrival(params, cfg)?;
    let gamma = params.gamma();
    let delta = params.delta();

    let mut coeffs = Vec::with_capacity(pmf.len());
    // c_k = Gamma(gamma + k) / (Gamma(gamma) (k-1)!): c_1 = gamma, c_{k+1} = c_k (gamma + k) / k.
    let mut c = gamma;
    for (l, &p) in pmf.probs().iter().enumerate() {
        let k = l + 1;
        coeffs.push(p * delta.powi(k as i32) * c);
        c *= (gamma + k as f64) / k as f64;
    }
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }

    let mut d = WaitDensities {
        params: *params,
        cfg: *cfg,
        coeffs,
        probs,
        mean_accepted: 0.0,
        mean_reneged: 0.0,
        mean_joined: 0.0,
    };
    if probs.p_accept_and_join > 0.0 {
        d.mean_accepted = integrate_half_line(
            &|w: f64| w * d.f_a(w),
            d.time_scale(),
            cfg.quadrature_abs_tol,
            cfg.quadrature_max_depth,
        )?;
    }
    let pa = probs.p_accept_given_join;
    d.mean_joined = (1.0 - pa) / alpha;
    d.mean_reneged = if pa < 1.0 {
        1.0 / alpha - pa * d.mean_accepted / (1.0 - pa)
    } else {
        0.0
    };
    Ok(d)
}
