//! Link-level performance measures.

use crate::equilibria::BeamformerProfile;
use crate::error::{Error, Result};
use crate::network::ChannelRealization;

/// Per-link rates in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRates {
    pub per_link: Vec<f64>,
    pub sum: f64,
}

/// `P |v_i^H H_ii w_i|^2 / (sum_{j != i} P |v_i^H H_ij w_j|^2 + sigma_i^2)`.
pub fn sinr(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> f64 {
    let c = r.config();
    let v = &profile.rx[link];
    let power = |j: usize| c.tx_power() * v.dotc(&(r.channel(link, j) * &profile.tx[j])).norm_sqr();
    let interference: f64 = (0..c.n_links()).filter(|&j| j != link).map(power).sum();
    power(link) / (interference + c.noise_power(link))
}

pub fn link_rates(r: &ChannelRealization, profile: &BeamformerProfile) -> LinkRates {
    let per_link: Vec<f64> = (0..r.n_links()).map(|i| (1.0 + sinr(r, profile, i)).log2()).collect();
    let sum = per_link.iter().sum();
    LinkRates { per_link, sum }
}

pub fn sum_rate(r: &ChannelRealization, profile: &BeamformerProfile) -> f64 {
    link_rates(r, profile).sum
}

/// `sum_i sum_{j != i} P |v_i^H H_ij w_j|^2`.
pub fn total_leakage(r: &ChannelRealization, profile: &BeamformerProfile) -> f64 {
    let c = r.config();
    let n = c.n_links();
    let mut total = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            total += c.tx_power() * profile.rx[i].dotc(&(r.channel(i, j) * &profile.tx[j])).norm_sqr();
        }
    }
    total
}

/// Least-squares slope of `(snr_db, rate)` points, in bits per 10 dB.
pub fn slope_bits_per_decade(points: &[(f64, f64)]) -> Result<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(10.0 * sxy / sxx)
}

/// Multiplexing gain implied by a slope in bits per decade: one interference
/// free stream adds `log2(10)` bits per 10 dB.
pub fn multiplexing_gain(slope_bits_per_decade: f64) -> f64 {
    slope_bits_per_decade / 10f64.log2()
}
