//! Interference-alignment diagnostics.

use num_complex::Complex64;

use crate::equilibria::{balanced_response, max_sinr_receiver, BeamformerProfile, LambdaMatrix};
use crate::error::{Error, Result};
use crate::network::ChannelRealization;
use crate::numerics::{canonical_phase, ComplexMatrix, ComplexVector};

const IA_PRECONDITION: f64 = 1e-8;

/// `max_{i, j != i} P |v_i^H H_ij w_j|^2`.
pub fn ia_residual(r: &ChannelRealization, profile: &BeamformerProfile) -> f64 {
    let c = r.config();
    let n = c.n_links();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let leak = c.tx_power() * profile.rx[i].dotc(&(r.channel(i, j) * &profile.tx[j])).norm_sqr();
            worst = worst.max(leak);
        }
    }
    worst
}

/// One DBA iteration from an aligned profile with uniform weights
/// `lambda = -lambda_magnitude`: transmitters are recomputed from the aligned
/// receivers, then receivers by Max-SINR. Returns the new residual.
pub fn ia_stability_probe(r: &ChannelRealization, aligned: &BeamformerProfile, lambda_magnitude: f64) -> Result<f64> {
    aligned.check_against(r)?;
    let before = ia_residual(r, aligned);
    if before > IA_PRECONDITION {
        return Err(Error::Precondition(format!(
            "profile is not aligned (residual {before:e} > {IA_PRECONDITION:e})"
        )));
    }
    if !(lambda_magnitude.is_finite() && lambda_magnitude >= 0.0) {
        return Err(Error::Precondition(format!("lambda magnitude must be finite and >= 0, got {lambda_magnitude}")));
    }
    let n = r.n_links();
    let lambdas = LambdaMatrix::uniform(n, -lambda_magnitude);
    let mut next = aligned.clone();
    next.tx = (0..n).map(|i| balanced_response(r, aligned, i, &lambdas)).collect::<Result<_>>()?;
    next.rx = (0..n).map(|i| max_sinr_receiver(r, &next, i)).collect::<Result<_>>()?;
    Ok(ia_residual(r, &next))
}

/// Closed-form aligned beamformers for three links with two antennas at each
/// end: the two interferers of every receiver arrive along one direction, and
/// `v_i` is orthogonal to it.
pub fn aligned_profile(r: &ChannelRealization) -> Result<BeamformerProfile> {
    let c = r.config();
    if c.n_links() != 3 || c.n_tx_ant() != 2 || c.n_rx_ant() != 2 {
        return Err(Error::DimensionGuard("closed-form alignment needs [N_c, N_t, N_r] = [3, 2, 2]".into()));
    }
    let h = |j: usize, i: usize| r.channel(j, i);
    let inv = |m: ComplexMatrix| m.try_inverse().ok_or(Error::Precondition("channel matrix is singular".into()));
    // w_2 ∝ H_32^{-1} H_31 w_1, w_3 ∝ H_13^{-1} H_12 w_2, and w_1 an eigenvector of
    // H_21^{-1} H_23 H_13^{-1} H_12 H_32^{-1} H_31 so that H_21 w_1 ∥ H_23 w_3.
    let to2 = inv(h(2, 1))? * h(2, 0);
    let to3 = inv(h(0, 2))? * h(0, 1);
    let cycle = inv(h(1, 0))? * h(1, 2) * &to3 * &to2;
    let w1 = eigvec_2x2(&cycle)?;
    let w2 = &to2 * &w1;
    let w3 = &to3 * &w2;
    let tx: Vec<ComplexVector> = [w1, w2, w3].into_iter().map(|w| canonical_phase(w.normalize())).collect();

    let rx = (0..3)
        .map(|i| {
            let j = if i == 0 { 1 } else { 0 };
            let q = h(i, j) * &tx[j];
            let perp = ComplexVector::from_vec(vec![-q[1].conj(), q[0].conj()]);
            canonical_phase(perp.normalize())
        })
        .collect();
    BeamformerProfile::new(tx, rx)
}

fn eigvec_2x2(m: &ComplexMatrix) -> Result<ComplexVector> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_trace = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    let lambda = half_trace + disc;
    // Two candidate null vectors of (m - lambda I); keep the better conditioned.
    let u = ComplexVector::from_vec(vec![b, lambda - a]);
    let v = ComplexVector::from_vec(vec![lambda - d, c]);
    let pick = if u.norm() >= v.norm() { u } else { v };
    if pick.norm() < 1e-300 {
        // m is a multiple of the identity: any vector works.
        return Ok(ComplexVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]));
    }
    Ok(pick.normalize())
}
