//! Iterative transmit/receive coordination schemes.
//!
//! Every scheme alternates a transmit sweep and a receive sweep. Each sweep is
//! Jacobi-style: all links update from the same frozen profile. One iteration
//! is "transmitters from current receivers, then receivers from the new
//! transmitters"; receivers are first computed from the initial transmitters,
//! so the profile in every trace record (and in the result) is consistent.
//!
//! | scheme     | transmit update                                   | receive update          |
//! |------------|---------------------------------------------------|-------------------------|
//! | `Dba`      | `Vmax(E_i + sum lambda_ji A_ji)`, statistical λ   | Max-SINR                |
//! | `SrMax`    | same, λ from the current profile                  | Max-SINR                |
//! | `MaxSinr`  | Max-SINR in the reciprocal network                | Max-SINR                |
//! | `AltMin`   | `Vmin` of the uplink leakage matrix               | `Vmin` of `C_Ri - σ²I`  |
//! | `EgoOnly`  | `Vmax(E_i)`                                       | Max-SINR                |
//! | `AltOnly`  | `Vmin(sum A_ji)`                                  | Max-SINR                |

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::equilibria::{
    altruistic_response, balanced_response, egoistic_response, heuristic_lambda_with, max_sinr_receiver,
    optimal_lambda, BeamformerProfile, LambdaGain, LambdaMatrix, DEGENERATE_FLOOR,
};
use crate::error::{Error, Result};
use crate::metrics::{sum_rate, total_leakage};
use crate::network::{ChannelRealization, GaussianSource, NetworkConfig};
use crate::numerics::{
    basis_vector, canonical_phase, least_eigenspace, normalized, outer, solve_hpd, ComplexMatrix, ComplexVector,
};

mod ia;
mod oracle;

pub use ia::{aligned_profile, ia_residual, ia_stability_probe};
pub use oracle::brute_force_sumrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    Dba,
    SrMax,
    MaxSinr,
    AltMin,
    EgoOnly,
    AltOnly,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        Self::Dba,
        Self::SrMax,
        Self::MaxSinr,
        Self::AltMin,
        Self::EgoOnly,
        Self::AltOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dba => "DBA",
            Self::SrMax => "SRMAX",
            Self::MaxSinr => "MAXSINR",
            Self::AltMin => "ALTMIN",
            Self::EgoOnly => "EGO_ONLY",
            Self::AltOnly => "ALT_ONLY",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation {
                field: "algorithms".into(),
                message: format!("unknown algorithm `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InitMode {
    /// Every transmitter starts at `e_1`.
    #[default]
    FixedBasis,
    /// Isotropic random unit vectors seeded from the realization seed.
    SeededRandom,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::FixedBasis => "fixed_basis",
            Self::SeededRandom => "seeded_random",
        }
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_basis" => Ok(Self::FixedBasis),
            "seeded_random" => Ok(Self::SeededRandom),
            _ => Err(Error::Validation {
                field: "init_mode".into(),
                message: format!("expected fixed_basis or seeded_random, got `{s}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub max_iters: usize,
    /// Stop once the sum rate moves by less than this (bits).
    pub tol_sumrate: f64,
    pub init_mode: InitMode,
    /// Total number of starts; starts after the first are always random.
    pub restarts: usize,
    pub lambda_direct_gain: LambdaGain,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol_sumrate: 1e-3,
            init_mode: InitMode::FixedBasis,
            restarts: 1,
            lambda_direct_gain: LambdaGain::Ii,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Validation {
                field: field.into(),
                message: message.into(),
            })
        };
        if self.max_iters == 0 {
            return bad("max_iters", "must be at least 1");
        }
        if !(self.tol_sumrate.is_finite() && self.tol_sumrate > 0.0) {
            return bad("tol_sumrate", "must be positive");
        }
        if self.restarts == 0 {
            return bad("restarts", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Bits per channel use.
    pub sum_rate: f64,
    pub leakage: f64,
    /// Largest change of any transmit beamformer in this iteration.
    pub max_beamformer_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub profile: BeamformerProfile,
    pub trace: IterationTrace,
    pub converged: bool,
    pub iterations: usize,
    /// Sum rate before the first iteration.
    pub initial_sum_rate: f64,
    pub sum_rate: f64,
    /// Which start produced this result.
    pub restart: usize,
    /// Hash of every start handed to the run.
    pub starts_fingerprint: u64,
}

/// Deterministic initial transmit beamformers for one start.
pub fn initial_transmitters(config: &NetworkConfig, mode: InitMode, seed: u64, restart: usize) -> Vec<ComplexVector> {
    let mode = if restart == 0 { mode } else { InitMode::SeededRandom };
    match mode {
        InitMode::FixedBasis => vec![basis_vector(config.n_tx_ant(), 0); config.n_links()],
        InitMode::SeededRandom => {
            let mut src = GaussianSource::new(splitmix64(seed ^ splitmix64(0xB5AD_4ECE_DA1C_E2A9 ^ restart as u64)));
            (0..config.n_links()).map(|_| src.unit_vector(config.n_tx_ant())).collect()
        }
    }
}

/// Every start a run with `settings` will use on `r`.
pub fn starts_for(r: &ChannelRealization, settings: &RunSettings) -> Vec<Vec<ComplexVector>> {
    (0..settings.restarts)
        .map(|k| initial_transmitters(r.config(), settings.init_mode, r.seed(), k))
        .collect()
}

pub fn fingerprint(starts: &[Vec<ComplexVector>]) -> u64 {
    let mut h = DefaultHasher::new();
    for start in starts {
        for w in start {
            for z in w.iter() {
                z.re.to_bits().hash(&mut h);
                z.im.to_bits().hash(&mut h);
            }
        }
    }
    h.finish()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Runs `alg` from every start in `settings` and keeps the best sum rate.
pub fn run(alg: AlgorithmId, r: &ChannelRealization, settings: &RunSettings) -> Result<RunResult> {
    settings.validate()?;
    run_with_starts(alg, r, settings, &starts_for(r, settings))
}

/// Runs `alg` once per start and keeps the best final sum rate (earliest start
/// on ties).
pub fn run_with_starts(
    alg: AlgorithmId,
    r: &ChannelRealization,
    settings: &RunSettings,
    starts: &[Vec<ComplexVector>],
) -> Result<RunResult> {
    settings.validate()?;
    if starts.is_empty() {
        return Err(Error::Precondition("at least one start is required".into()));
    }
    let fp = fingerprint(starts);
    let mut best: Option<RunResult> = None;
    for (k, start) in starts.iter().enumerate() {
        let mut res = run_from(alg, r, start.clone(), settings)?;
        res.restart = k;
        res.starts_fingerprint = fp;
        if best.as_ref().is_none_or(|b| res.sum_rate > b.sum_rate) {
            best = Some(res);
        }
    }
    Ok(best.expect("non-empty"))
}

pub fn run_dba(r: &ChannelRealization, settings: &RunSettings) -> Result<RunResult> {
    run(AlgorithmId::Dba, r, settings)
}

pub fn run_srmax(r: &ChannelRealization, settings: &RunSettings) -> Result<RunResult> {
    run(AlgorithmId::SrMax, r, settings)
}

pub fn run_maxsinr(r: &ChannelRealization, settings: &RunSettings) -> Result<RunResult> {
    run(AlgorithmId::MaxSinr, r, settings)
}

pub fn run_altmin(r: &ChannelRealization, settings: &RunSettings) -> Result<RunResult> {
    run(AlgorithmId::AltMin, r, settings)
}

/// Single run of `alg` from the given transmit beamformers.
pub fn run_from(
    alg: AlgorithmId,
    r: &ChannelRealization,
    start: Vec<ComplexVector>,
    settings: &RunSettings,
) -> Result<RunResult> {
    settings.validate()?;
    let c = r.config();
    if start.len() != c.n_links() || start.iter().any(|w| w.len() != c.n_tx_ant()) {
        return Err(Error::DimensionMismatch("start does not match the network".into()));
    }
    let start: Vec<ComplexVector> = start
        .into_iter()
        .map(|w| normalized(&w, DEGENERATE_FLOOR).map(canonical_phase))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Precondition("start contains a zero vector".into()))?;
    let fp = fingerprint(std::slice::from_ref(&start));

    let sweeps = Sweeps::new(alg, r, settings);
    let mut profile = BeamformerProfile {
        rx: vec![basis_vector(c.n_rx_ant(), 0); c.n_links()],
        tx: start,
    };
    profile.rx = sweeps.receive(&profile)?;
    let initial_sum_rate = sum_rate(r, &profile);

    let mut previous = initial_sum_rate;
    let mut records = Vec::new();
    let mut converged = false;
    for _ in 0..settings.max_iters {
        let tx = sweeps.transmit(&profile)?;
        let delta = tx.iter().zip(&profile.tx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        profile.tx = tx;
        profile.rx = sweeps.receive(&profile)?;
        let rate = sum_rate(r, &profile);
        records.push(IterationRecord {
            sum_rate: rate,
            leakage: total_leakage(r, &profile),
            max_beamformer_delta: delta,
        });
        if (rate - previous).abs() < settings.tol_sumrate {
            converged = true;
            break;
        }
        previous = rate;
    }

    if alg == AlgorithmId::AltMin {
        // Leakage minimisation never looks at the direct link; report if it
        // ended up with no signal at all.
        for i in 0..c.n_links() {
            let h = r.channel(i, i) * &profile.tx[i];
            if profile.rx[i].dotc(&h).norm() < DEGENERATE_FLOOR {
                return Err(Error::DegenerateDirection { link: i });
            }
        }
    }

    let iterations = records.len();
    let sum_rate = records.last().map_or(initial_sum_rate, |rec| rec.sum_rate);
    Ok(RunResult {
        profile,
        trace: IterationTrace { records },
        converged,
        iterations,
        initial_sum_rate,
        sum_rate,
        restart: 0,
        starts_fingerprint: fp,
    })
}

/// Transmit-side Max-SINR in the reciprocal network:
/// `w_i ∝ (sum_{j != i} P H_ji^H v_j v_j^H H_ji + sigma_i^2 I)^{-1} H_ii^H v_i`.
pub fn uplink_max_sinr_transmitter(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> Result<ComplexVector> {
    let c = r.config();
    let g = r.channel(link, link).adjoint() * &profile.rx[link];
    if g.norm() < DEGENERATE_FLOOR {
        return Err(Error::DegenerateDirection { link });
    }
    let mut cov = ComplexMatrix::identity(c.n_tx_ant(), c.n_tx_ant()).scale(c.noise_power(link));
    for j in (0..c.n_links()).filter(|&j| j != link) {
        let u = r.channel(j, link).adjoint() * &profile.rx[j];
        cov += outer(&u).scale(c.tx_power());
    }
    let x = solve_hpd(&cov, &g)?;
    normalized(&x, f64::MIN_POSITIVE)
        .map(canonical_phase)
        .ok_or(Error::DegenerateDirection { link })
}

/// Downlink leakage at receiver `i`: `sum_{k != i} H_ik w_k w_k^H H_ik^H`.
pub fn downlink_leakage_matrix(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> ComplexMatrix {
    let c = r.config();
    let mut q = ComplexMatrix::zeros(c.n_rx_ant(), c.n_rx_ant());
    for k in (0..c.n_links()).filter(|&k| k != link) {
        q += outer(&(r.channel(link, k) * &profile.tx[k]));
    }
    q
}

/// Uplink leakage of transmitter `i`: `sum_{k != i} H_ki^H v_k v_k^H H_ki`.
pub fn uplink_leakage_matrix(r: &ChannelRealization, profile: &BeamformerProfile, link: usize) -> ComplexMatrix {
    let c = r.config();
    let mut q = ComplexMatrix::zeros(c.n_tx_ant(), c.n_tx_ant());
    for k in (0..c.n_links()).filter(|&k| k != link) {
        q += outer(&(r.channel(k, link).adjoint() * &profile.rx[k]));
    }
    q
}

/// Least eigenvector of `q`; when the least eigenvalue is repeated, the
/// direction in that eigenspace closest to `preferred`.
fn least_leakage_direction(q: &ComplexMatrix, preferred: &ComplexVector) -> Result<ComplexVector> {
    let basis = least_eigenspace(q)?;
    if basis.len() == 1 {
        return Ok(basis.into_iter().next().expect("one vector"));
    }
    let mut proj = ComplexVector::zeros(preferred.len());
    for b in &basis {
        proj += b * b.dotc(preferred);
    }
    Ok(match normalized(&proj, DEGENERATE_FLOOR * preferred.norm().max(1.0)) {
        Some(v) => canonical_phase(v),
        None => basis.into_iter().next().expect("non-empty"),
    })
}

struct Sweeps<'a> {
    alg: AlgorithmId,
    r: &'a ChannelRealization,
    statistical_lambda: Option<LambdaMatrix>,
}

impl<'a> Sweeps<'a> {
    fn new(alg: AlgorithmId, r: &'a ChannelRealization, settings: &RunSettings) -> Self {
        let statistical_lambda =
            (alg == AlgorithmId::Dba).then(|| heuristic_lambda_with(r.config(), settings.lambda_direct_gain));
        Self {
            alg,
            r,
            statistical_lambda,
        }
    }

    fn links(&self) -> std::ops::Range<usize> {
        0..self.r.n_links()
    }

    fn transmit(&self, p: &BeamformerProfile) -> Result<Vec<ComplexVector>> {
        let r = self.r;
        match self.alg {
            AlgorithmId::Dba => {
                let l = self.statistical_lambda.as_ref().expect("DBA weights");
                self.links().map(|i| balanced_response(r, p, i, l)).collect()
            }
            AlgorithmId::SrMax => {
                let l = optimal_lambda(r, p);
                self.links().map(|i| balanced_response(r, p, i, &l)).collect()
            }
            AlgorithmId::MaxSinr => self.links().map(|i| uplink_max_sinr_transmitter(r, p, i)).collect(),
            AlgorithmId::AltMin => self
                .links()
                .map(|i| {
                    let preferred = r.channel(i, i).adjoint() * &p.rx[i];
                    least_leakage_direction(&uplink_leakage_matrix(r, p, i), &preferred)
                })
                .collect(),
            AlgorithmId::EgoOnly => self.links().map(|i| egoistic_response(r, p, i)).collect(),
            AlgorithmId::AltOnly => self.links().map(|i| altruistic_response(r, p, i)).collect(),
        }
    }

    fn receive(&self, p: &BeamformerProfile) -> Result<Vec<ComplexVector>> {
        let r = self.r;
        match self.alg {
            AlgorithmId::AltMin => self
                .links()
                .map(|i| {
                    let preferred = r.channel(i, i) * &p.tx[i];
                    least_leakage_direction(&downlink_leakage_matrix(r, p, i), &preferred)
                })
                .collect(),
            _ => self.links().map(|i| max_sinr_receiver(r, p, i)).collect(),
        }
    }
}
