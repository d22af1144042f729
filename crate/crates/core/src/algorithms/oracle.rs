//! Exhaustive grid search over two-antenna transmit beamformers.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::equilibria::{max_sinr_receiver, BeamformerProfile};
use crate::error::{Error, Result};
use crate::metrics::sum_rate;
use crate::network::ChannelRealization;
use crate::numerics::{canonical_phase, ComplexVector};

const MAX_PROFILES: u128 = 1 << 40;

/// Best sum rate over transmit beamformers `(cos θ, sin θ e^{jφ})` with `θ` on
/// `grid_density` points of `[0, π/2]` and `φ` on `grid_density` points of
/// `[0, 2π)`; receivers are Max-SINR for every candidate.
pub fn brute_force_sumrate(r: &ChannelRealization, grid_density: usize) -> Result<(f64, BeamformerProfile)> {
    let c = r.config();
    let n = c.n_links();
    if c.n_tx_ant() != 2 {
        return Err(Error::DimensionGuard(format!("needs 2 transmit antennas, got {}", c.n_tx_ant())));
    }
    if !(1..=3).contains(&n) {
        return Err(Error::DimensionGuard(format!("needs 1 to 3 links, got {n}")));
    }
    if grid_density < 2 {
        return Err(Error::DimensionGuard("grid density must be at least 2".into()));
    }
    let grid = grid_vectors(grid_density);
    let g = grid.len();
    if (g as u128).pow(n as u32) > MAX_PROFILES {
        return Err(Error::DimensionGuard(format!("{g}^{n} profiles is too many to enumerate")));
    }

    let nr = c.n_rx_ant();
    // image[i][k][idx * nr..] = H_ik w(idx)
    let image: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let h = r.channel(i, k);
                    grid.iter().flat_map(|w| (&h * w).iter().copied().collect::<Vec<_>>()).collect()
                })
                .collect()
        })
        .collect();
    let eval = Evaluator {
        image: &image,
        nr,
        n,
        p: c.tx_power(),
        noise: c.noise_powers(),
    };

    let (best_rate, best_idx) = (0..g)
        .into_par_iter()
        .map(|first| {
            let mut idx = [first, 0, 0];
            let mut best = (f64::NEG_INFINITY, idx);
            let inner = g.pow(n as u32 - 1);
            for rest in 0..inner {
                let mut k = rest;
                for slot in idx.iter_mut().take(n).skip(1) {
                    *slot = k % g;
                    k /= g;
                }
                let rate = eval.sum_rate(&idx);
                if rate > best.0 {
                    best = (rate, idx);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, [usize::MAX; 3]),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    debug_assert!(best_rate.is_finite());

    let tx: Vec<ComplexVector> = (0..n).map(|i| canonical_phase(grid[best_idx[i]].clone())).collect();
    let mut profile = BeamformerProfile {
        rx: vec![ComplexVector::zeros(nr); n],
        tx,
    };
    profile.rx = (0..n).map(|i| max_sinr_receiver(r, &profile, i)).collect::<Result<_>>()?;
    Ok((sum_rate(r, &profile), profile))
}

fn grid_vectors(density: usize) -> Vec<ComplexVector> {
    let mut out = Vec::with_capacity(density * density);
    for t in 0..density {
        let theta = FRAC_PI_2 * t as f64 / (density - 1) as f64;
        for f in 0..density {
            let phi = TAU * f as f64 / density as f64;
            out.push(ComplexVector::from_vec(vec![
                Complex64::new(theta.cos(), 0.0),
                Complex64::from_polar(theta.sin(), phi),
            ]));
        }
    }
    out
}

struct Evaluator<'a> {
    image: &'a [Vec<Vec<Complex64>>],
    nr: usize,
    n: usize,
    p: f64,
    noise: &'a [f64],
}

impl Evaluator<'_> {
    fn vec(&self, rx: usize, tx: usize, idx: usize) -> &[Complex64] {
        &self.image[rx][tx][idx * self.nr..(idx + 1) * self.nr]
    }

    fn sum_rate(&self, idx: &[usize; 3]) -> f64 {
        (0..self.n).map(|i| (1.0 + self.sinr(i, idx)).log2()).sum()
    }

    /// Max-SINR receiver SINR `P a^H C^{-1} a` through Woodbury:
    /// `(P / σ²) (|a|² - c^H G^{-1} c)` with `B` the interferer images,
    /// `c = B^H a` and `G = (σ²/P) I + B^H B`.
    fn sinr(&self, i: usize, idx: &[usize; 3]) -> f64 {
        let a = self.vec(i, i, idx[i]);
        let s2 = self.noise[i];
        let ratio = s2 / self.p;
        let aa = norm_sqr(a);
        let mut buf = [0usize; 2];
        let mut m = 0;
        for k in (0..self.n).filter(|&k| k != i) {
            buf[m] = k;
            m += 1;
        }
        let correction = match &buf[..m] {
            [] => 0.0,
            [k] => {
                let b = self.vec(i, *k, idx[*k]);
                dotc(b, a).norm_sqr() / (ratio + norm_sqr(b))
            }
            [k1, k2] => {
                let b1 = self.vec(i, *k1, idx[*k1]);
                let b2 = self.vec(i, *k2, idx[*k2]);
                let c1 = dotc(b1, a);
                let c2 = dotc(b2, a);
                let g11 = ratio + norm_sqr(b1);
                let g22 = ratio + norm_sqr(b2);
                let g12 = dotc(b1, b2);
                let det = g11 * g22 - g12.norm_sqr();
                (g22 * c1.norm_sqr() + g11 * c2.norm_sqr() - 2.0 * (c1.conj() * g12 * c2).re) / det
            }
            _ => unreachable!("guarded to at most three links"),
        };
        (self.p / s2) * (aa - correction).max(0.0)
    }
}

fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// `x^H y`.
fn dotc(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}
