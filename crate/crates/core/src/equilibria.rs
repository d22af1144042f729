//! Per-link best responses of the egoistic and altruistic games, the
//! Max-SINR receiver, and the balancing weights that mix the two.
//!
//! Notation follows the usual interference-channel convention: `H_ji` is the
//! channel from transmitter `i` to receiver `j`, `w_i` / `v_i` the unit-norm
//! transmit / receive beamformers of link `i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::{ChannelRealization, NetworkConfig};
use crate::numerics::{
    canonical_phase, dominant_eigvec, least_eigvec, normalized, outer, solve_hpd, ComplexMatrix, ComplexVector,
};

pub(crate) const DEGENERATE_FLOOR: f64 = 1e-14;

/// Transmit and receive beamformers of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerProfile {
    pub tx: Vec<ComplexVector>,
    pub rx: Vec<ComplexVector>,
}

impl BeamformerProfile {
    pub fn new(tx: Vec<ComplexVector>, rx: Vec<ComplexVector>) -> Result<Self> {
        if tx.len() != rx.len() {
            return Err(Error::DimensionMismatch(format!("{} transmitters but {} receivers", tx.len(), rx.len())));
        }
        for v in tx.iter().chain(&rx) {
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::Precondition(format!("beamformer norm {} is not 1", v.norm())));
            }
        }
        Ok(Self { tx, rx })
    }

    pub fn n_links(&self) -> usize {
        self.tx.len()
    }

    pub(crate) fn check_against(&self, r: &ChannelRealization) -> Result<()> {
        let c = r.config();
        if self.tx.len() != c.n_links() || self.rx.len() != c.n_links() {
            return Err(Error::DimensionMismatch("profile has the wrong number of links".into()));
        }
        if self.tx.iter().any(|w| w.len() != c.n_tx_ant()) || self.rx.iter().any(|v| v.len() != c.n_rx_ant()) {
            return Err(Error::DimensionMismatch("beamformer length does not match antenna count".into()));
        }
        Ok(())
    }
}

/// Balancing weights; entry `(j, i)` weighs the altruistic matrix of
/// transmitter `i` towards receiver `j`. The diagonal is unused and zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMatrix(DMatrix<f64>);

impl LambdaMatrix {
    pub fn zeros(n_links: usize) -> Self {
        Self(DMatrix::zeros(n_links, n_links))
    }

    /// Every off-diagonal entry equal to `value` (which must be `<= 0`).
    pub fn uniform(n_links: usize, value: f64) -> Self {
        assert!(value <= 0.0, "balancing weights are non-positive");
        Self(DMatrix::from_fn(n_links, n_links, |j, i| if i == j { 0.0 } else { value }))
    }

    pub fn get(&self, victim: usize, tx: usize) -> f64 {
        self.0[(victim, tx)]
    }

    pub fn n_links(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Which direct gain normalises the noise term of the statistical weights.
///
/// `Ii` uses `sigma_j^2 / (P alpha_ii)` (the form printed with the DBA
/// derivation); `Jj` uses `sigma_j^2 / (P alpha_jj)`. They agree when all direct
/// gains are equal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum LambdaGain {
    #[default]
    Ii,
    Jj,
}

/// `C_Ri = sum_{j != i} P H_ij w_j w_j^H H_ij^H + sigma_i^2 I`.
pub fn interference_covariance(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> ComplexMatrix {
    let c = r.config();
    let mut cov = ComplexMatrix::identity(c.n_rx_ant(), c.n_rx_ant()).scale(c.noise_power(link));
    for j in (0..c.n_links()).filter(|&j| j != link) {
        let u = r.channel(link, j) * &profile.tx[j];
        cov += outer(&u).scale(c.tx_power());
    }
    cov
}

/// `v_i ∝ C_Ri^{-1} H_ii w_i`, unit norm, canonical phase.
pub fn max_sinr_receiver(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> Result<ComplexVector> {
    let h = r.channel(link, link) * &profile.tx[link];
    if h.norm() < DEGENERATE_FLOOR {
        return Err(Error::DegenerateDirection { link });
    }
    let x = solve_hpd(&interference_covariance(r, profile, link), &h)?;
    let v = normalized(&x, f64::MIN_POSITIVE).ok_or(Error::DegenerateDirection { link })?;
    Ok(canonical_phase(v))
}

/// `E_i = H_ii^H v_i v_i^H H_ii`.
pub fn egoistic_matrix(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> ComplexMatrix {
    altruistic_matrix(r, profile, link, link)
}

/// `A_ji = H_ji^H v_j v_j^H H_ji`: interference created by transmitter `tx` at
/// receiver `victim`, as a quadratic form in `w_tx`.
pub fn altruistic_matrix(r: &ChannelRealization, profile: &BeamformerProfile, victim: usize, tx: usize) -> ComplexMatrix {
    let g = r.channel(victim, tx).adjoint() * &profile.rx[victim];
    outer(&g)
}

/// Dominant eigenvector of `E_i`, i.e. `H_ii^H v_i` normalised.
pub fn egoistic_response(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> Result<ComplexVector> {
    let g = r.channel(link, link).adjoint() * &profile.rx[link];
    let w = normalized(&g, DEGENERATE_FLOOR).ok_or(Error::DegenerateDirection { link })?;
    Ok(canonical_phase(w))
}

/// Sum of the altruistic matrices of transmitter `link` over every victim.
pub fn total_altruistic_matrix(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> ComplexMatrix {
    let c = r.config();
    let mut a = ComplexMatrix::zeros(c.n_tx_ant(), c.n_tx_ant());
    for j in (0..c.n_links()).filter(|&j| j != link) {
        a += altruistic_matrix(r, profile, j, link);
    }
    a
}

/// Least eigenvector of `sum_{j != i} A_ji`: minimises the interference link
/// `i` generates.
pub fn altruistic_response(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> Result<ComplexVector> {
    least_eigvec(&total_altruistic_matrix(r, profile, link))
}

/// `S_jk = P |v_j^H H_jk w_k|^2` for every receiver `j` and transmitter `k`.
pub fn coupling_powers(r: &ChannelRealization, profile: &BeamformerProfile) -> DMatrix<f64> {
    let c = r.config();
    let n = c.n_links();
    DMatrix::from_fn(n, n, |j, k| {
        let h = r.channel(j, k);
        c.tx_power() * profile.rx[j].dotc(&(h * &profile.tx[k])).norm_sqr()
    })
}

/// Stationarity weights of the sum rate at the current profile:
///
/// `lambda_ji = -[S_jj / (sum_k S_jk + sigma_j^2)] * [(sum_k S_ik + sigma_i^2) / (sum_{k != j} S_jk + sigma_j^2)]`.
pub fn optimal_lambda(r: &ChannelRealization, profile: &BeamformerProfile) -> LambdaMatrix {
    let c = r.config();
    let n = c.n_links();
    let s = coupling_powers(r, profile);
    let total: Vec<f64> = (0..n).map(|j| s.row(j).sum() + c.noise_power(j)).collect();
    LambdaMatrix(DMatrix::from_fn(n, n, |j, i| {
        if i == j {
            return 0.0;
        }
        let interference_plus_noise = total[j] - s[(j, j)];
        -(s[(j, j)] / total[j]) * (total[i] / interference_plus_noise)
    }))
}

/// Statistical weights (depend on `alpha`, `sigma^2`, `P` only):
/// `lambda_ji = -[1 / (1 + 1/gamma_j)] * [(1 + 1/gamma_i) / (sigma_j^2 / (P alpha_ii))]`.
pub fn heuristic_lambda(config: &NetworkConfig) -> LambdaMatrix {
    heuristic_lambda_with(config, LambdaGain::Ii)
}

pub fn heuristic_lambda_with(config: &NetworkConfig, gain: LambdaGain) -> LambdaMatrix {
    let n = config.n_links();
    let p = config.tx_power();
    LambdaMatrix(DMatrix::from_fn(n, n, |j, i| {
        if i == j {
            return 0.0;
        }
        let gamma_i = config.snr(i);
        let gamma_j = config.snr(j);
        let direct = match gain {
            LambdaGain::Ii => config.alpha(i, i),
            LambdaGain::Jj => config.alpha(j, j),
        };
        let noise_ratio = config.noise_power(j) / (p * direct);
        -(1.0 / (1.0 + 1.0 / gamma_j)) * ((1.0 + 1.0 / gamma_i) / noise_ratio)
    }))
}

/// `E_i + sum_{j != i} lambda_ji A_ji`.
pub fn balanced_matrix(
    r: &ChannelRealization,
    profile: &BeamformerProfile,
    link: usize,
    lambdas: &LambdaMatrix,
) -> ComplexMatrix {
    let mut m = egoistic_matrix(r, profile, link);
    for j in (0..r.n_links()).filter(|&j| j != link) {
        let weight = lambdas.get(j, link);
        if weight != 0.0 {
            m += altruistic_matrix(r, profile, j, link).scale(weight);
        }
    }
    m
}

/// Dominant eigenvector of the balanced matrix.
pub fn balanced_response(
    r: &ChannelRealization,
    profile: &BeamformerProfile,
    link: usize,
    lambdas: &LambdaMatrix,
) -> Result<ComplexVector> {
    dominant_eigvec(&balanced_matrix(r, profile, link, lambdas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sinr;
    use crate::network::{build_scenario, draw_realization, GaussianSource, ScenarioSpec};
    use crate::numerics::{basis_vector, hermitian_eig, quad_form};
    use num_complex::Complex64;

    fn random_profile(r: &ChannelRealization, seed: u64) -> BeamformerProfile {
        let c = r.config();
        let mut src = GaussianSource::new(seed);
        let tx = (0..c.n_links()).map(|_| src.unit_vector(c.n_tx_ant())).collect();
        let rx = (0..c.n_links()).map(|_| src.unit_vector(c.n_rx_ant())).collect();
        BeamformerProfile::new(tx, rx).unwrap()
    }

    fn instance(n: usize, nt: usize, nr: usize, snr_db: f64, seed: u64) -> ChannelRealization {
        let cfg = build_scenario(&ScenarioSpec::symmetric(n, nt, nr, snr_db, 0.0)).unwrap();
        draw_realization(&cfg, seed)
    }

    fn single_link(h: ComplexMatrix, noise: f64) -> ChannelRealization {
        let cfg = NetworkConfig::new(h.ncols(), h.nrows(), DMatrix::from_element(1, 1, 1.0), vec![noise], 1.0).unwrap();
        ChannelRealization::from_parts(cfg, vec![h], 0).unwrap()
    }

    fn same_up_to_phase(a: &ComplexVector, b: &ComplexVector, tol: f64) -> bool {
        (a.dotc(b).norm() - a.norm() * b.norm()).abs() <= tol
    }

    #[test]
    fn covariance_without_interferers_is_scaled_identity() {
        let r = instance(1, 2, 3, 10.0, 1);
        let p = random_profile(&r, 2);
        let cov = interference_covariance(&r, &p, 0);
        assert!((cov - ComplexMatrix::identity(3, 3).scale(0.1)).norm() < 1e-15);
    }

    #[test]
    fn covariance_single_rank_one_term() {
        let r = instance(2, 2, 2, 10.0, 3);
        let p = random_profile(&r, 4);
        let u = r.effective_channel(0, 1).unwrap() * &p.tx[1];
        let want = outer(&u) + ComplexMatrix::identity(2, 2).scale(r.config().noise_power(0));
        assert!((interference_covariance(&r, &p, 0) - want).norm() < 1e-14);
    }

    #[test]
    fn covariance_trace_identity_and_definiteness() {
        let r = instance(4, 3, 2, 5.0, 5);
        let p = random_profile(&r, 6);
        let c = r.config();
        for i in 0..4 {
            let cov = interference_covariance(&r, &p, i);
            let trace: f64 = cov.diagonal().iter().map(|z| z.re).sum();
            let want: f64 = (0..4)
                .filter(|&j| j != i)
                .map(|j| c.tx_power() * (r.effective_channel(i, j).unwrap() * &p.tx[j]).norm_squared())
                .sum::<f64>()
                + 2.0 * c.noise_power(i);
            assert!((trace - want).abs() < 1e-12 * want);
            let least = hermitian_eig(&cov).unwrap().last().unwrap().value;
            assert!(least >= c.noise_power(i) - 1e-12);
        }
    }

    #[test]
    fn receiver_without_interference_is_matched_filter() {
        let r = instance(1, 2, 2, 10.0, 7);
        let p = random_profile(&r, 8);
        let v = max_sinr_receiver(&r, &p, 0).unwrap();
        let mf = canonical_phase((r.effective_channel(0, 0).unwrap() * &p.tx[0]).normalize());
        assert!((v - &mf).norm() < 1e-12);
        // Invariant to the noise level.
        let r2 = r.with_config(r.config().with_noise_scaled(37.0).unwrap()).unwrap();
        assert!((max_sinr_receiver(&r2, &p, 0).unwrap() - mf).norm() < 1e-12);
    }

    #[test]
    fn receiver_beats_random_search() {
        let r = instance(2, 2, 2, 10.0, 9);
        let mut p = random_profile(&r, 10);
        p.rx[0] = max_sinr_receiver(&r, &p, 0).unwrap();
        let best = sinr(&r, &p, 0);
        let mut src = GaussianSource::new(11);
        for _ in 0..10_000 {
            let mut q = p.clone();
            q.rx[0] = src.unit_vector(2);
            assert!(sinr(&r, &q, 0) <= best + 1e-12);
        }
    }

    #[test]
    fn receiver_rejects_zero_direct_channel() {
        let r = single_link(ComplexMatrix::zeros(2, 2), 1.0);
        let p = BeamformerProfile::new(vec![basis_vector(2, 0)], vec![basis_vector(2, 0)]).unwrap();
        assert_eq!(max_sinr_receiver(&r, &p, 0), Err(Error::DegenerateDirection { link: 0 }));
        assert_eq!(egoistic_response(&r, &p, 0), Err(Error::DegenerateDirection { link: 0 }));
    }

    #[test]
    fn egoistic_matrix_structure() {
        let r = instance(3, 3, 2, 10.0, 12);
        let p = random_profile(&r, 13);
        for i in 0..3 {
            let e = egoistic_matrix(&r, &p, i);
            let g = r.effective_channel(i, i).unwrap().adjoint() * &p.rx[i];
            let pairs = hermitian_eig(&e).unwrap();
            assert!(pairs[1].value.abs() < 1e-12 * pairs[0].value);
            let trace: f64 = e.diagonal().iter().map(|z| z.re).sum();
            assert!((trace - g.norm_squared()).abs() < 1e-12 * trace);
            assert!(same_up_to_phase(&pairs[0].vector, &g.normalize(), 1e-12));
            // Rank-one structure: dominant eigenvector is the normalised H^H v.
            assert!((dominant_eigvec(&e).unwrap() - egoistic_response(&r, &p, i).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn egoistic_identity_channel() {
        let r = single_link(ComplexMatrix::identity(2, 2), 1.0);
        let p = BeamformerProfile::new(vec![basis_vector(2, 1)], vec![basis_vector(2, 0)]).unwrap();
        assert!((egoistic_response(&r, &p, 0).unwrap() - basis_vector(2, 0)).norm() < 1e-15);
    }

    #[test]
    fn egoistic_response_is_phase_invariant_and_optimal() {
        let r = instance(3, 2, 2, 10.0, 14);
        let mut p = random_profile(&r, 15);
        let w = egoistic_response(&r, &p, 1).unwrap();
        let mut q = p.clone();
        q.rx[1] *= Complex64::from_polar(1.0, 0.7);
        assert!((egoistic_response(&r, &q, 1).unwrap() - &w).norm() < 1e-12);

        p.tx[1] = w;
        let best = sinr(&r, &p, 1);
        let mut src = GaussianSource::new(16);
        for _ in 0..10_000 {
            let mut q = p.clone();
            q.tx[1] = src.unit_vector(2);
            assert!(sinr(&r, &q, 1) <= best + 1e-12);
        }
    }

    #[test]
    fn altruistic_single_victim_nulls_interference() {
        let r = instance(2, 2, 2, 10.0, 17);
        let p = random_profile(&r, 18);
        let w = altruistic_response(&r, &p, 0).unwrap();
        let g = r.effective_channel(1, 0).unwrap().adjoint() * &p.rx[1];
        assert!(g.dotc(&w).norm() < 1e-12 * g.norm());
    }

    #[test]
    fn altruistic_minimises_generated_interference() {
        let r = instance(3, 2, 2, 10.0, 19);
        let p = random_profile(&r, 20);
        let a = total_altruistic_matrix(&r, &p, 0);
        let w = altruistic_response(&r, &p, 0).unwrap();
        let best = quad_form(&a, &w);
        let least = hermitian_eig(&a).unwrap().last().unwrap().value;
        assert!((best - least).abs() < 1e-10);
        let mut src = GaussianSource::new(21);
        for _ in 0..10_000 {
            assert!(quad_form(&a, &src.unit_vector(2)) >= best - 1e-12);
        }
    }

    #[test]
    fn altruistic_with_spare_antennas_reaches_zero() {
        let r = instance(3, 4, 2, 10.0, 22);
        let p = random_profile(&r, 23);
        for i in 0..3 {
            let w = altruistic_response(&r, &p, i).unwrap();
            assert!(quad_form(&total_altruistic_matrix(&r, &p, i), &w).abs() < 1e-10);
        }
    }

    #[test]
    fn optimal_lambda_arithmetic() {
        // All S_jk = 1, sigma^2 = 1: identity channels and aligned beams.
        let n = 3;
        let cfg = NetworkConfig::new(1, 1, DMatrix::from_element(n, n, 1.0), vec![1.0; n], 1.0).unwrap();
        let one = ComplexMatrix::identity(1, 1);
        let r = ChannelRealization::from_parts(cfg, vec![one; n * n], 0).unwrap();
        let b = basis_vector(1, 0);
        let p = BeamformerProfile::new(vec![b.clone(); n], vec![b; n]).unwrap();
        let l = optimal_lambda(&r, &p);
        for j in 0..n {
            for i in 0..n {
                let want = if i == j { 0.0 } else { -1.0 / 3.0 };
                assert!((l.get(j, i) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn optimal_lambda_zero_direct_signal() {
        let r = instance(2, 2, 2, 10.0, 24);
        let mut p = random_profile(&r, 25);
        // Receiver 1 orthogonal to its own signal.
        let h = r.effective_channel(1, 1).unwrap() * &p.tx[1];
        let perp = ComplexVector::from_vec(vec![-h[1].conj(), h[0].conj()]).normalize();
        p.rx[1] = perp;
        let l = optimal_lambda(&r, &p);
        assert!(l.get(1, 0).abs() < 1e-15);
        assert!(l.get(0, 1) < 0.0);
    }

    fn two_gamma_config(gamma_i: f64, gamma_j: f64) -> NetworkConfig {
        NetworkConfig::new(2, 2, DMatrix::from_element(2, 2, 1.0), vec![1.0 / gamma_i, 1.0 / gamma_j], 1.0).unwrap()
    }

    #[test]
    fn heuristic_lambda_values() {
        let l = heuristic_lambda(&two_gamma_config(10.0, 10.0));
        assert!((l.get(1, 0) + 10.0).abs() < 1e-12);
        let l = heuristic_lambda(&two_gamma_config(10.0, 100.0));
        assert!((l.get(1, 0) + 1.1 / 1.01 * 100.0).abs() < 1e-10);
        assert!((l.get(1, 0) + 108.910_891_089).abs() < 1e-6);
    }

    #[test]
    fn heuristic_lambda_decreases_with_victim_snr() {
        let mut last = 0.0;
        for db in (0..=60).step_by(5) {
            let gamma_j = crate::units::db_to_linear(db as f64);
            let l = heuristic_lambda(&two_gamma_config(10.0, gamma_j)).get(1, 0);
            assert!(l < last);
            last = l;
        }
        assert!(last < -1e5);
    }

    #[test]
    fn heuristic_lambda_invariant_to_joint_power_scaling() {
        let spec = ScenarioSpec {
            family: crate::network::ScenarioFamily::WeakDirect,
            delta_direct_db: 30.0,
            ..ScenarioSpec::symmetric(3, 2, 2, 20.0, 0.0)
        };
        let cfg = build_scenario(&spec).unwrap();
        let scaled = NetworkConfig::new(
            2,
            2,
            cfg.alpha_matrix().clone(),
            cfg.noise_powers().iter().map(|s| s * 7.5).collect(),
            cfg.tx_power() * 7.5,
        )
        .unwrap();
        for gain in [LambdaGain::Ii, LambdaGain::Jj] {
            let a = heuristic_lambda_with(&cfg, gain);
            let b = heuristic_lambda_with(&scaled, gain);
            assert!((a.as_matrix() - b.as_matrix()).abs().max() < 1e-9 * a.as_matrix().abs().max());
        }
    }

    #[test]
    fn heuristic_gain_variants_agree_for_equal_direct_gains() {
        let cfg = two_gamma_config(3.0, 40.0);
        assert_eq!(heuristic_lambda_with(&cfg, LambdaGain::Ii), heuristic_lambda_with(&cfg, LambdaGain::Jj));
    }

    #[test]
    fn balanced_response_limits() {
        let r = instance(3, 3, 2, 10.0, 26);
        let p = random_profile(&r, 27);
        for i in 0..3 {
            let zero = balanced_response(&r, &p, i, &LambdaMatrix::zeros(3)).unwrap();
            assert!((zero - egoistic_response(&r, &p, i).unwrap()).norm() < 1e-10);

            let m = balanced_matrix(&r, &p, i, &LambdaMatrix::uniform(3, -2.5));
            assert!((&m - m.adjoint()).norm() <= 1e-12 * m.norm());

            // N_t = 3 > 2 victims: the altruistic limit nulls all interference.
            let w = balanced_response(&r, &p, i, &LambdaMatrix::uniform(3, -1e9)).unwrap();
            assert!(quad_form(&total_altruistic_matrix(&r, &p, i), &w) <= 1e-6);
        }
    }

    #[test]
    fn responses_invariant_to_receiver_phase() {
        let r = instance(3, 2, 2, 10.0, 28);
        let p = random_profile(&r, 29);
        let mut q = p.clone();
        for (k, v) in q.rx.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, 0.4 + k as f64);
        }
        let l = heuristic_lambda(r.config());
        for i in 0..3 {
            assert!((altruistic_response(&r, &p, i).unwrap() - altruistic_response(&r, &q, i).unwrap()).norm() < 1e-9);
            assert!((balanced_response(&r, &p, i, &l).unwrap() - balanced_response(&r, &q, i, &l).unwrap()).norm() < 1e-9);
        }
    }
}
