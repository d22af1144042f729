//! Network statistics, channel draws and the built-in scenario families.
//!
//! Channel matrices are `H_ji = sqrt(alpha_ji) * Hbar_ji` (receiver `j`,
//! transmitter `i`) with `Hbar_ji` i.i.d. standard circularly-symmetric complex
//! Gaussian. Only `Hbar` is stored; the scaled channel is rebuilt on demand.
//!
//! # Random number generation
//!
//! Draws come from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). Each
//! uniform is `(next_u64() >> 11) * 2^-53` in `[0, 1)`, and each complex
//! Gaussian consumes two uniforms `u1, u2` through Box-Muller:
//! `sqrt(-ln(1 - u1)) * exp(j 2 pi u2)`, which has `E|z|^2 = 1`. Matrices are
//! filled receiver-major, then transmitter, then row, then column.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{canonical_phase, ComplexMatrix, ComplexVector};
use crate::units::db_to_linear;

/// Static description of a coordination cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    n_links: usize,
    n_tx_ant: usize,
    n_rx_ant: usize,
    alpha: DMatrix<f64>,
    noise_power: Vec<f64>,
    tx_power: f64,
}

impl NetworkConfig {
    /// `alpha[(j, i)]` is the average power gain from transmitter `i` to
    /// receiver `j`.
    pub fn new(
        n_tx_ant: usize,
        n_rx_ant: usize,
        alpha: DMatrix<f64>,
        noise_power: Vec<f64>,
        tx_power: f64,
    ) -> Result<Self> {
        let n_links = alpha.nrows();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if n_links == 0 || n_tx_ant == 0 || n_rx_ant == 0 {
            return bad("link and antenna counts must be positive".into());
        }
        if alpha.ncols() != n_links {
            return bad(format!("alpha must be square, got {}x{}", alpha.nrows(), alpha.ncols()));
        }
        if noise_power.len() != n_links {
            return bad(format!("expected {n_links} noise powers, got {}", noise_power.len()));
        }
        for j in 0..n_links {
            for i in 0..n_links {
                let a = alpha[(j, i)];
                if !a.is_finite() || a < 0.0 || (i == j && a <= 0.0) {
                    return bad(format!("alpha[{j}][{i}] = {a} out of range"));
                }
            }
        }
        if let Some((i, s)) = noise_power.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
            return bad(format!("noise power of link {i} must be positive, got {s}"));
        }
        if !(tx_power.is_finite() && tx_power > 0.0) {
            return bad(format!("transmit power must be positive, got {tx_power}"));
        }
        Ok(Self {
            n_links,
            n_tx_ant,
            n_rx_ant,
            alpha,
            noise_power,
            tx_power,
        })
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn n_tx_ant(&self) -> usize {
        self.n_tx_ant
    }

    pub fn n_rx_ant(&self) -> usize {
        self.n_rx_ant
    }

    pub fn alpha(&self, rx: usize, tx: usize) -> f64 {
        self.alpha[(rx, tx)]
    }

    pub fn alpha_matrix(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn noise_power(&self, link: usize) -> f64 {
        self.noise_power[link]
    }

    pub fn noise_powers(&self) -> &[f64] {
        &self.noise_power
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    /// Average SNR `P alpha_ii / sigma_i^2` (linear).
    pub fn snr(&self, link: usize) -> f64 {
        self.tx_power * self.alpha[(link, link)] / self.noise_power[link]
    }

    /// `alpha_ii / sum_{j != i} alpha_ij` (linear); infinite without interferers.
    pub fn sir(&self, link: usize) -> f64 {
        let interference: f64 = (0..self.n_links).filter(|&j| j != link).map(|j| self.alpha[(link, j)]).sum();
        self.alpha[(link, link)] / interference
    }

    /// Same network with every noise power multiplied by `factor`.
    pub fn with_noise_scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n_tx_ant,
            self.n_rx_ant,
            self.alpha.clone(),
            self.noise_power.iter().map(|s| s * factor).collect(),
            self.tx_power,
        )
    }
}

/// One draw of every normalised channel matrix of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    config: NetworkConfig,
    /// Receiver-major: index `rx * n_links + tx`.
    h_bar: Vec<ComplexMatrix>,
    seed: u64,
}

impl ChannelRealization {
    /// Builds a realization from explicit normalised channels, laid out
    /// receiver-major (`h_bar[rx * n_links + tx]`).
    pub fn from_parts(config: NetworkConfig, h_bar: Vec<ComplexMatrix>, seed: u64) -> Result<Self> {
        let n = config.n_links();
        if h_bar.len() != n * n {
            return Err(Error::DimensionMismatch(format!("expected {} channel matrices, got {}", n * n, h_bar.len())));
        }
        for h in &h_bar {
            if h.nrows() != config.n_rx_ant() || h.ncols() != config.n_tx_ant() {
                return Err(Error::DimensionMismatch(format!(
                    "channel is {}x{}, expected {}x{}",
                    h.nrows(),
                    h.ncols(),
                    config.n_rx_ant(),
                    config.n_tx_ant()
                )));
            }
            if !crate::numerics::all_finite(h.iter()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { config, h_bar, seed })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_links(&self) -> usize {
        self.config.n_links
    }

    pub fn h_bar(&self, rx: usize, tx: usize) -> &ComplexMatrix {
        &self.h_bar[rx * self.config.n_links + tx]
    }

    /// `sqrt(alpha_{rx,tx}) * Hbar_{rx,tx}`.
    pub fn effective_channel(&self, rx: usize, tx: usize) -> Result<ComplexMatrix> {
        let n = self.config.n_links;
        if rx >= n {
            return Err(Error::IndexOutOfRange { what: "rx", index: rx, limit: n });
        }
        if tx >= n {
            return Err(Error::IndexOutOfRange { what: "tx", index: tx, limit: n });
        }
        Ok(self.channel(rx, tx))
    }

    pub(crate) fn channel(&self, rx: usize, tx: usize) -> ComplexMatrix {
        self.h_bar(rx, tx).scale(self.config.alpha[(rx, tx)].sqrt())
    }

    /// Same channel draw under different statistics (antenna counts must match).
    pub fn with_config(&self, config: NetworkConfig) -> Result<Self> {
        if config.n_links != self.config.n_links
            || config.n_tx_ant != self.config.n_tx_ant
            || config.n_rx_ant != self.config.n_rx_ant
        {
            return Err(Error::DimensionMismatch("replacement config changes network dimensions".into()));
        }
        Ok(Self {
            config,
            h_bar: self.h_bar.clone(),
            seed: self.seed,
        })
    }

    /// Replaces one normalised channel matrix.
    pub fn with_h_bar(&self, rx: usize, tx: usize, h: ComplexMatrix) -> Result<Self> {
        let mut h_bar = self.h_bar.clone();
        let n = self.config.n_links;
        if rx >= n || tx >= n {
            return Err(Error::IndexOutOfRange { what: "link", index: rx.max(tx), limit: n });
        }
        h_bar[rx * n + tx] = h;
        Self::from_parts(self.config.clone(), h_bar, self.seed)
    }
}

/// Seeded source of uniforms and standard complex Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha8Rng,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `CN(0, 1)` via Box-Muller.
    pub fn complex_normal(&mut self) -> Complex64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        Complex64::new(r * theta.cos(), r * theta.sin())
    }

    pub fn complex_matrix(&mut self, rows: usize, cols: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = self.complex_normal();
            }
        }
        m
    }

    /// Isotropically distributed unit vector, canonical phase.
    pub fn unit_vector(&mut self, dim: usize) -> ComplexVector {
        let v = ComplexVector::from_iterator(dim, (0..dim).map(|_| self.complex_normal()));
        canonical_phase(v.normalize())
    }
}

/// Draws every `Hbar_ji` i.i.d. `CN(0, 1)`; a pure function of `(config, seed)`.
pub fn draw_realization(config: &NetworkConfig, seed: u64) -> ChannelRealization {
    let mut src = GaussianSource::new(seed);
    let n = config.n_links;
    let h_bar = (0..n * n)
        .map(|_| src.complex_matrix(config.n_rx_ant, config.n_tx_ant))
        .collect();
    ChannelRealization {
        config: config.clone(),
        h_bar,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioFamily {
    Symmetric,
    /// One link suffers stronger noise / out-of-cluster interference.
    AsymNoise,
    /// Noise asymmetry plus per-link in-cluster SIR.
    AsymSir,
    /// One link has a weaker direct channel.
    WeakDirect,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 4] = [Self::Symmetric, Self::AsymNoise, Self::AsymSir, Self::WeakDirect];

    pub fn name(self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::AsymNoise => "asym_noise",
            Self::AsymSir => "asym_sir",
            Self::WeakDirect => "weak_direct",
        }
    }
}

impl fmt::Display for ScenarioFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub family: ScenarioFamily,
    pub n_links: usize,
    pub n_tx_ant: usize,
    pub n_rx_ant: usize,
    /// Reference per-link SNR.
    pub snr_db: f64,
    /// Per-link in-cluster SIR.
    pub sir_db: Vec<f64>,
    /// Extra noise on the victim link (`AsymNoise`, `AsymSir`).
    pub delta_noise_db: f64,
    /// Direct-gain attenuation of the victim link (`WeakDirect`).
    pub delta_direct_db: f64,
    /// Zero-based.
    pub victim_link: usize,
}

impl ScenarioSpec {
    /// Symmetric network with the same SIR on every link.
    pub fn symmetric(n_links: usize, n_tx_ant: usize, n_rx_ant: usize, snr_db: f64, sir_db: f64) -> Self {
        Self {
            family: ScenarioFamily::Symmetric,
            n_links,
            n_tx_ant,
            n_rx_ant,
            snr_db,
            sir_db: vec![sir_db; n_links],
            delta_noise_db: 0.0,
            delta_direct_db: 0.0,
            victim_link: 0,
        }
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        Self { snr_db, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_links == 0 || self.n_tx_ant == 0 || self.n_rx_ant == 0 {
            return bad("link and antenna counts must be positive".into());
        }
        if self.sir_db.len() != self.n_links {
            return bad(format!("expected {} SIR values, got {}", self.n_links, self.sir_db.len()));
        }
        if !self.snr_db.is_finite() || self.sir_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR and SIR values must be finite".into());
        }
        if !self.delta_noise_db.is_finite() || !self.delta_direct_db.is_finite() {
            return bad("offsets must be finite".into());
        }
        if self.victim_link >= self.n_links {
            return bad(format!("victim link {} out of range for {} links", self.victim_link + 1, self.n_links));
        }
        let (noise_active, direct_active) = match self.family {
            ScenarioFamily::Symmetric => (false, false),
            ScenarioFamily::AsymNoise | ScenarioFamily::AsymSir => (true, false),
            ScenarioFamily::WeakDirect => (false, true),
        };
        if !noise_active && self.delta_noise_db != 0.0 {
            return bad(format!("delta_noise_db is not used by family {}", self.family));
        }
        if !direct_active && self.delta_direct_db != 0.0 {
            return bad(format!("delta_direct_db is not used by family {}", self.family));
        }
        if self.family == ScenarioFamily::Symmetric && self.sir_db.windows(2).any(|w| w[0] != w[1]) {
            return bad("symmetric family needs the same SIR on every link".into());
        }
        Ok(())
    }
}

/// Builds network statistics for a scenario.
///
/// Direct gains are 1 except the weak-direct victim (`10^(-delta_direct/10)`).
/// Each receiver's in-cluster interference gain is split equally over its
/// `N_c - 1` interferers so that `SIR_i` is met exactly. Transmit power is 1 and
/// every receiver has noise `1 / snr` (relative to the unit reference gain),
/// raised by `delta_noise_db` on the victim of the noise-asymmetric families.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<NetworkConfig> {
    spec.validate()?;
    let n = spec.n_links;
    let tx_power = 1.0;
    let mut alpha = DMatrix::zeros(n, n);
    for i in 0..n {
        let direct = if spec.family == ScenarioFamily::WeakDirect && i == spec.victim_link {
            db_to_linear(-spec.delta_direct_db)
        } else {
            1.0
        };
        alpha[(i, i)] = direct;
        if n > 1 {
            let cross = direct / ((n - 1) as f64 * db_to_linear(spec.sir_db[i]));
            for j in (0..n).filter(|&j| j != i) {
                alpha[(i, j)] = cross;
            }
        }
    }
    let base_noise = tx_power / db_to_linear(spec.snr_db);
    let noise = (0..n)
        .map(|i| {
            let noisy = matches!(spec.family, ScenarioFamily::AsymNoise | ScenarioFamily::AsymSir);
            if noisy && i == spec.victim_link {
                base_noise * db_to_linear(spec.delta_noise_db)
            } else {
                base_noise
            }
        })
        .collect();
    NetworkConfig::new(spec.n_tx_ant, spec.n_rx_ant, alpha, noise, tx_power)
}
