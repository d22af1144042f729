//! Seeded Monte-Carlo sweeps over (algorithm × SNR × trial) and their CSV form.
//!
//! Within a trial the normalised channels are drawn once from
//! `base_seed + trial` and reused at every SNR point (only the noise powers
//! change); every algorithm starts from the same transmit beamformers.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{fingerprint, ia_residual, run_with_starts, starts_for, AlgorithmId, InitMode, RunSettings};
use crate::equilibria::LambdaGain;
use crate::error::{Error, Result};
use crate::metrics::total_leakage;
use crate::network::{build_scenario, draw_realization, ScenarioFamily, ScenarioSpec};

pub const CSV_HEADER: &str = "scenario,algorithm,snr_db,trial,seed,iterations,converged,sum_rate_bits,leakage,ia_residual";

/// Names of the built-in presets.
pub const PRESETS: [&str; 4] = ["fig3", "fig4", "fig6", "fig7"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Value of the `scenario` CSV column.
    pub name: String,
    /// Template; its `snr_db` is replaced by each grid point.
    pub scenario: ScenarioSpec,
    pub snr_grid_db: Vec<f64>,
    pub algorithms: Vec<AlgorithmId>,
    pub trials: usize,
    pub base_seed: u64,
    pub settings: RunSettings,
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| {
            Err(Error::Validation {
                field: field.into(),
                message,
            })
        };
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return bad("name", format!("`{}` must be non-empty and use only [A-Za-z0-9_-]", self.name));
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db", "must not be empty".into());
        }
        if let Some(x) = self.snr_grid_db.iter().find(|x| !x.is_finite()) {
            return bad("snr_grid_db", format!("{x} is not finite"));
        }
        if self.algorithms.is_empty() {
            return bad("algorithms", "must not be empty".into());
        }
        for (k, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..k].contains(a) {
                return bad("algorithms", format!("{a} listed twice"));
            }
        }
        if self.base_seed.checked_add(self.trials as u64 - 1).is_none() {
            return bad("base_seed", "base_seed + trials overflows".into());
        }
        self.scenario.validate()?;
        self.settings.validate()
    }

    /// The config as a document `parse_config` accepts.
    pub fn to_toml(&self) -> String {
        let s = &self.scenario;
        let raw = RawConfig {
            scenario: RawScenario {
                name: Some(self.name.clone()),
                family: Some(s.family.name().into()),
                n_links: Some(s.n_links as i64),
                n_tx_ant: Some(s.n_tx_ant as i64),
                n_rx_ant: Some(s.n_rx_ant as i64),
                sir_db: Some(OneOrMany::Many(s.sir_db.clone())),
                delta_noise_db: Some(s.delta_noise_db),
                delta_direct_db: Some(s.delta_direct_db),
                victim_link: Some(s.victim_link as i64 + 1),
            },
            sweep: RawSweep {
                snr_grid_db: Some(self.snr_grid_db.clone()),
                algorithms: Some(self.algorithms.iter().map(|a| a.name().to_string()).collect()),
                trials: Some(self.trials as i64),
                base_seed: Some(self.base_seed as i64),
                output_path: self.output_path.as_ref().map(|p| p.display().to_string()),
            },
            settings: Some(RawSettings {
                max_iters: Some(self.settings.max_iters as i64),
                tol_sumrate: Some(self.settings.tol_sumrate),
                init_mode: Some(self.settings.init_mode.name().into()),
                restarts: Some(self.settings.restarts as i64),
                lambda_direct_gain: Some(gain_name(self.settings.lambda_direct_gain).into()),
            }),
        };
        toml::to_string(&raw).expect("plain tables serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    sweep: RawSweep,
    settings: Option<RawSettings>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    family: Option<String>,
    n_links: Option<i64>,
    n_tx_ant: Option<i64>,
    n_rx_ant: Option<i64>,
    sir_db: Option<OneOrMany>,
    delta_noise_db: Option<f64>,
    delta_direct_db: Option<f64>,
    victim_link: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    snr_grid_db: Option<Vec<f64>>,
    algorithms: Option<Vec<String>>,
    trials: Option<i64>,
    base_seed: Option<i64>,
    output_path: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSettings {
    max_iters: Option<i64>,
    tol_sumrate: Option<f64>,
    init_mode: Option<String>,
    restarts: Option<i64>,
    lambda_direct_gain: Option<String>,
}

fn gain_name(g: LambdaGain) -> &'static str {
    match g {
        LambdaGain::Ii => "ii",
        LambdaGain::Jj => "jj",
    }
}

fn required<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| Error::Validation {
        field: field.into(),
        message: "is required".into(),
    })
}

fn count(value: i64, field: &str, min: i64) -> Result<usize> {
    if value < min {
        return Err(Error::Validation {
            field: field.into(),
            message: format!("must be at least {min}, got {value}"),
        });
    }
    Ok(value as usize)
}

/// Parses and validates a sweep description (TOML with `[scenario]`,
/// `[sweep]` and optional `[settings]` tables).
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;

    let sc = raw.scenario;
    let family: ScenarioFamily = required(sc.family, "family")?.parse().map_err(|_| Error::Validation {
        field: "family".into(),
        message: "expected symmetric, asym_noise, asym_sir or weak_direct".into(),
    })?;
    let n_links = count(required(sc.n_links, "n_links")?, "n_links", 1)?;
    let sir_db = match sc.sir_db.unwrap_or(OneOrMany::One(0.0)) {
        OneOrMany::One(x) => vec![x; n_links],
        OneOrMany::Many(v) => v,
    };
    if sir_db.len() != n_links {
        return Err(Error::Validation {
            field: "sir_db".into(),
            message: format!("expected 1 or {n_links} values, got {}", sir_db.len()),
        });
    }
    let victim = match (sc.victim_link, family) {
        (Some(v), _) => count(v, "victim_link", 1)? - 1,
        (None, ScenarioFamily::Symmetric) => 0,
        (None, _) => return required(None, "victim_link"),
    };
    let scenario = ScenarioSpec {
        family,
        n_links,
        n_tx_ant: count(required(sc.n_tx_ant, "n_tx_ant")?, "n_tx_ant", 1)?,
        n_rx_ant: count(required(sc.n_rx_ant, "n_rx_ant")?, "n_rx_ant", 1)?,
        snr_db: 0.0,
        sir_db,
        delta_noise_db: sc.delta_noise_db.unwrap_or(0.0),
        delta_direct_db: sc.delta_direct_db.unwrap_or(0.0),
        victim_link: victim,
    };

    let sw = raw.sweep;
    let algorithms = required(sw.algorithms, "algorithms")?
        .iter()
        .map(|a| a.parse())
        .collect::<Result<Vec<AlgorithmId>>>()?;
    let base_seed = required(sw.base_seed, "base_seed")?;
    if base_seed < 0 {
        return Err(Error::Validation {
            field: "base_seed".into(),
            message: format!("must be non-negative, got {base_seed}"),
        });
    }

    let st = raw.settings.unwrap_or_default();
    let defaults = RunSettings::default();
    let settings = RunSettings {
        max_iters: st.max_iters.map_or(Ok(defaults.max_iters), |v| count(v, "max_iters", 1))?,
        tol_sumrate: st.tol_sumrate.unwrap_or(defaults.tol_sumrate),
        init_mode: st.init_mode.map_or(Ok(defaults.init_mode), |s| s.parse::<InitMode>())?,
        restarts: st.restarts.map_or(Ok(defaults.restarts), |v| count(v, "restarts", 1))?,
        lambda_direct_gain: match st.lambda_direct_gain.as_deref() {
            None | Some("ii") => LambdaGain::Ii,
            Some("jj") => LambdaGain::Jj,
            Some(other) => {
                return Err(Error::Validation {
                    field: "lambda_direct_gain".into(),
                    message: format!("expected ii or jj, got `{other}`"),
                })
            }
        },
    };

    let cfg = SweepConfig {
        name: sc.name.unwrap_or_else(|| family.name().to_string()),
        scenario,
        snr_grid_db: required(sw.snr_grid_db, "snr_grid_db")?,
        algorithms,
        trials: count(required(sw.trials, "trials")?, "trials", 1)?,
        base_seed: base_seed as u64,
        settings,
        output_path: sw.output_path.map(PathBuf::from),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in reproductions: three links with two antennas at each end, SNR
/// 0–40 dB in 5 dB steps, 100 trials, DBA / SR-Max / Max-SINR / Alt-Min.
///
/// * `fig3`: symmetric, SIR 0 dB.
/// * `fig4`: link 3 has 20 dB more noise, SIR 10 dB on every link.
/// * `fig6`: as `fig4` with SIRs of 10, 10 and -10 dB.
/// * `fig7`: link 1's direct gain is 30 dB weaker, equal noise, all cross
///   gains equal (so link 1's SIR is -30 dB, the others 0 dB).
pub fn preset(name: &str) -> Result<SweepConfig> {
    let base = ScenarioSpec::symmetric(3, 2, 2, 0.0, 0.0);
    let scenario = match name {
        "fig3" => base,
        "fig4" => ScenarioSpec {
            family: ScenarioFamily::AsymNoise,
            sir_db: vec![10.0; 3],
            delta_noise_db: 20.0,
            victim_link: 2,
            ..base
        },
        "fig6" => ScenarioSpec {
            family: ScenarioFamily::AsymSir,
            sir_db: vec![10.0, 10.0, -10.0],
            delta_noise_db: 20.0,
            victim_link: 2,
            ..base
        },
        "fig7" => ScenarioSpec {
            family: ScenarioFamily::WeakDirect,
            // Only H_11 is weakened: the interference reaching receiver 1 keeps
            // the gain it has at every other receiver.
            sir_db: vec![-30.0, 0.0, 0.0],
            delta_direct_db: 30.0,
            victim_link: 0,
            ..base
        },
        _ => {
            return Err(Error::Validation {
                field: "preset".into(),
                message: format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")),
            })
        }
    };
    Ok(SweepConfig {
        name: name.to_string(),
        scenario,
        snr_grid_db: (0..=8).map(|k| 5.0 * k as f64).collect(),
        algorithms: vec![AlgorithmId::Dba, AlgorithmId::SrMax, AlgorithmId::MaxSinr, AlgorithmId::AltMin],
        trials: 100,
        base_seed: 1000,
        settings: RunSettings::default(),
        output_path: None,
    })
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub scenario: String,
    pub algorithm: AlgorithmId,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub sum_rate_bits: f64,
    pub leakage: f64,
    pub ia_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub record: SweepRecord,
    /// Hash of the starts handed to the algorithm.
    pub starts_fingerprint: u64,
    /// Set when the run failed; the numeric columns are then NaN.
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Ordered by algorithm (config order), SNR (grid order), then trial.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Mean sum rate of `alg` at `snr_db` over the successful trials.
    pub fn mean_sum_rate(&self, alg: AlgorithmId, snr_db: f64) -> Option<f64> {
        let rates: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.error.is_none() && r.record.algorithm == alg && r.record.snr_db == snr_db)
            .map(|r| r.record.sum_rate_bits)
            .collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|t| (0..cfg.snr_grid_db.len()).map(move |s| (t, s)))
        .collect();
    let mut keyed: Vec<(RowKey, SweepRow)> = cells
        .par_iter()
        .map(|&(t, s)| run_cell(cfg, t, s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    keyed.sort_by_key(|(k, _)| *k);
    Ok(SweepResult {
        rows: keyed.into_iter().map(|(_, row)| row).collect(),
    })
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(cfg: &SweepConfig, workers: usize) -> Result<SweepResult> {
    if workers == 0 {
        return Err(Error::Validation {
            field: "parallel".into(),
            message: "must be at least 1".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

/// (algorithm index, snr index, trial)
type RowKey = (usize, usize, usize);

fn run_cell(cfg: &SweepConfig, trial: usize, snr_idx: usize) -> Result<Vec<(RowKey, SweepRow)>> {
    let snr_db = cfg.snr_grid_db[snr_idx];
    let seed = cfg.base_seed + trial as u64;
    let network = build_scenario(&cfg.scenario.with_snr_db(snr_db))?;
    // The normalised channels depend only on the dimensions and the seed, so
    // every SNR point of this trial sees the same draw.
    let r = draw_realization(&network, seed);
    let starts = starts_for(&r, &cfg.settings);
    let fp = fingerprint(&starts);

    Ok(cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, &alg)| {
            let mut record = SweepRecord {
                scenario: cfg.name.clone(),
                algorithm: alg,
                snr_db,
                trial,
                seed,
                iterations: 0,
                converged: false,
                sum_rate_bits: f64::NAN,
                leakage: f64::NAN,
                ia_residual: f64::NAN,
            };
            let error = match run_with_starts(alg, &r, &cfg.settings, &starts) {
                Ok(res) => {
                    record.iterations = res.iterations;
                    record.converged = res.converged;
                    record.sum_rate_bits = res.sum_rate;
                    record.leakage = total_leakage(&r, &res.profile);
                    record.ia_residual = ia_residual(&r, &res.profile);
                    None
                }
                Err(e) => {
                    log::warn!("{alg} failed at {snr_db} dB, trial {trial}: {e}");
                    Some(e)
                }
            };
            (
                (a, snr_idx, trial),
                SweepRow {
                    record,
                    starts_fingerprint: fp,
                    error,
                },
            )
        })
        .collect())
}

fn float(x: f64) -> String {
    format!("{x:.9e}")
}

/// CSV text: the fixed header, then one line per row, `\n` terminated.
pub fn to_csv_string(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let r = &row.record;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.algorithm,
            float(r.snr_db),
            r.trial,
            r.seed,
            r.iterations,
            r.converged,
            float(r.sum_rate_bits),
            float(r.leakage),
            float(r.ia_residual)
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    out.write_all(to_csv_string(result).as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

/// Reads CSV produced by [`to_csv_string`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number `{}`", field(i)),
            })
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad integer `{}`", field(i)),
            })
        };
        rows.push(SweepRecord {
            scenario: field(0).to_string(),
            algorithm: field(1).parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?,
            snr_db: num(2)?,
            trial: int(3)? as usize,
            seed: int(4)?,
            iterations: int(5)? as usize,
            converged: field(6).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad flag `{}`", field(6)),
            })?,
            sum_rate_bits: num(7)?,
            leakage: num(8)?,
            ia_residual: num(9)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
family = "symmetric"
n_links = 3
n_tx_ant = 2
n_rx_ant = 2

[sweep]
snr_grid_db = [10]
algorithms = ["DBA"]
trials = 1
base_seed = 7
"#;

    fn small(algorithms: &[AlgorithmId], n_links: usize) -> SweepConfig {
        SweepConfig {
            name: "t".into(),
            scenario: ScenarioSpec::symmetric(n_links, 2, 2, 0.0, 0.0),
            snr_grid_db: vec![0.0, 10.0, 20.0],
            algorithms: algorithms.to_vec(),
            trials: 4,
            base_seed: 5,
            settings: RunSettings::default(),
            output_path: None,
        }
    }

    #[test]
    fn minimal_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.name, "symmetric");
        assert_eq!(cfg.scenario.n_links, 3);
        assert_eq!(cfg.scenario.sir_db, vec![0.0; 3]);
        assert_eq!(cfg.snr_grid_db, vec![10.0]);
        assert_eq!(cfg.algorithms, vec![AlgorithmId::Dba]);
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.settings, RunSettings::default());
        assert_eq!(cfg.output_path, None);
    }

    #[test]
    fn negative_trials_name_the_field() {
        let text = MINIMAL.replace("trials = 1", "trials = -3");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "trials"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misspelled_key_is_a_parse_error_with_line() {
        let text = MINIMAL.replace("trials = 1", "trails = 1");
        match parse_config(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 11);
                assert!(message.contains("trails"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("n_links = 3", "n_links = 3\nsnr_db = 10");
        assert!(matches!(parse_config(&text), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(parse_config("[scenario\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn validation_errors() {
        let field = |text: String| match parse_config(&text) {
            Err(Error::Validation { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(MINIMAL.replace("[10]", "[]")), "snr_grid_db");
        assert_eq!(field(MINIMAL.replace("[\"DBA\"]", "[\"DBA\", \"FOO\"]")), "algorithms");
        assert_eq!(field(MINIMAL.replace("[\"DBA\"]", "[\"DBA\", \"dba\"]")), "algorithms");
        assert_eq!(field(MINIMAL.replace("base_seed = 7", "base_seed = -1")), "base_seed");
        assert_eq!(field(MINIMAL.replace("n_rx_ant = 2\n", "")), "n_rx_ant");
        assert_eq!(field(MINIMAL.replace("\"symmetric\"", "\"asym_noise\"")), "victim_link");
        assert_eq!(field(MINIMAL.replace("n_links = 3", "n_links = 3\nsir_db = [0, 1]")), "sir_db");
        assert_eq!(field(format!("{MINIMAL}\n[settings]\nlambda_direct_gain = \"kk\"\n")), "lambda_direct_gain");
        assert_eq!(field(format!("{MINIMAL}\n[settings]\nmax_iters = 0\n")), "max_iters");
        assert_eq!(field(format!("{MINIMAL}\n[settings]\ntol_sumrate = 0.0\n")), "tol_sumrate");
        assert!(matches!(
            parse_config(&MINIMAL.replace("n_links = 3", "n_links = 3\ndelta_noise_db = 3")),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn full_config() {
        let text = r#"
# noise asymmetry
[scenario]
name = "edge"
family = "asym_sir"
n_links = 3
n_tx_ant = 2
n_rx_ant = 2
sir_db = [10, 10, -10]
delta_noise_db = 20
victim_link = 3

[sweep]
snr_grid_db = [0, 20, 40]
algorithms = ["DBA", "SRMAX", "maxsinr"]
trials = 12
base_seed = 99
output_path = "out.csv"

[settings]
max_iters = 50
tol_sumrate = 1e-4
init_mode = "seeded_random"
restarts = 2
lambda_direct_gain = "jj"
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.name, "edge");
        assert_eq!(cfg.scenario.family, ScenarioFamily::AsymSir);
        assert_eq!(cfg.scenario.victim_link, 2);
        assert_eq!(cfg.scenario.sir_db, vec![10.0, 10.0, -10.0]);
        assert_eq!(cfg.algorithms[2], AlgorithmId::MaxSinr);
        assert_eq!(cfg.output_path, Some(PathBuf::from("out.csv")));
        assert_eq!(
            cfg.settings,
            RunSettings {
                max_iters: 50,
                tol_sumrate: 1e-4,
                init_mode: InitMode::SeededRandom,
                restarts: 2,
                lambda_direct_gain: LambdaGain::Jj,
            }
        );
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn presets_round_trip_through_text() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg, "{name}");
            assert_eq!(cfg.snr_grid_db.len(), 9);
            assert_eq!(cfg.trials, 100);
        }
        assert!(preset("fig5").is_err());
        let fig6 = build_scenario(&preset("fig6").unwrap().scenario.with_snr_db(20.0)).unwrap();
        assert!((fig6.sir(2) - 0.1).abs() < 1e-12);
        assert!((fig6.noise_power(2) / fig6.noise_power(0) - 100.0).abs() < 1e-9);
        let fig7 = build_scenario(&preset("fig7").unwrap().scenario.with_snr_db(20.0)).unwrap();
        assert!((fig7.alpha(0, 0) / fig7.alpha(1, 1) - 1e-3).abs() < 1e-15);
        assert!((fig7.alpha(0, 1) - fig7.alpha(1, 0)).abs() < 1e-15);
        assert!((fig7.noise_power(0) - fig7.noise_power(1)).abs() < 1e-15);
    }

    #[test]
    fn sweep_shape_and_order() {
        let cfg = small(&[AlgorithmId::MaxSinr, AlgorithmId::Dba], 3);
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * 3 * 4);
        let keys: Vec<(AlgorithmId, f64, usize)> =
            res.rows.iter().map(|r| (r.record.algorithm, r.record.snr_db, r.record.trial)).collect();
        let mut want = Vec::new();
        for a in &cfg.algorithms {
            for s in &cfg.snr_grid_db {
                for t in 0..4 {
                    want.push((*a, *s, t));
                }
            }
        }
        assert_eq!(keys, want);
        for row in &res.rows {
            assert_eq!(row.record.seed, 5 + row.record.trial as u64);
            assert!(row.error.is_none());
        }
        assert!(res.mean_sum_rate(AlgorithmId::Dba, 20.0).unwrap() > res.mean_sum_rate(AlgorithmId::Dba, 0.0).unwrap());
        assert_eq!(res.mean_sum_rate(AlgorithmId::AltMin, 20.0), None);
    }

    #[test]
    fn every_algorithm_gets_the_same_starts() {
        let mut cfg = small(&[AlgorithmId::Dba, AlgorithmId::SrMax, AlgorithmId::AltMin], 3);
        cfg.settings.restarts = 3;
        let res = run_sweep(&cfg).unwrap();
        for t in 0..cfg.trials {
            let fps: Vec<u64> = res
                .rows
                .iter()
                .filter(|r| r.record.trial == t)
                .map(|r| r.starts_fingerprint)
                .collect();
            assert_eq!(fps.len(), 9);
            assert!(fps.iter().all(|&f| f == fps[0]));
        }
        let t0 = res.rows.iter().find(|r| r.record.trial == 0).unwrap().starts_fingerprint;
        let t1 = res.rows.iter().find(|r| r.record.trial == 1).unwrap().starts_fingerprint;
        assert_ne!(t0, t1);
    }

    #[test]
    fn channel_is_shared_across_snr_points() {
        let cfg = small(&[AlgorithmId::Dba], 2);
        let low = draw_realization(&build_scenario(&cfg.scenario.with_snr_db(0.0)).unwrap(), 9);
        let high = draw_realization(&build_scenario(&cfg.scenario.with_snr_db(30.0)).unwrap(), 9);
        for j in 0..2 {
            for i in 0..2 {
                assert_eq!(low.h_bar(j, i), high.h_bar(j, i));
            }
        }
    }

    #[test]
    fn single_link_dba_and_maxsinr_agree() {
        let mut cfg = small(&[AlgorithmId::Dba, AlgorithmId::MaxSinr], 1);
        cfg.settings.tol_sumrate = 1e-13;
        cfg.settings.max_iters = 10_000;
        let res = run_sweep(&cfg).unwrap();
        let half = res.rows.len() / 2;
        for (a, b) in res.rows[..half].iter().zip(&res.rows[half..]) {
            assert!((a.record.sum_rate_bits - b.record.sum_rate_bits).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_width_does_not_change_bytes() {
        let cfg = small(&[AlgorithmId::Dba, AlgorithmId::SrMax], 3);
        let one = to_csv_string(&run_sweep_with_workers(&cfg, 1).unwrap());
        let four = to_csv_string(&run_sweep_with_workers(&cfg, 4).unwrap());
        assert_eq!(one, four);
        assert!(run_sweep_with_workers(&cfg, 0).is_err());
    }

    #[test]
    fn failed_runs_become_flagged_rows() {
        // Alt-Min on a single link with a vanishing direct channel is
        // impossible to build from presets, so fake a failing cell directly.
        let mut cfg = small(&[AlgorithmId::Dba], 3);
        cfg.settings.max_iters = 1;
        let mut res = run_sweep(&cfg).unwrap();
        res.rows[0].error = Some(Error::DegenerateDirection { link: 0 });
        res.rows[0].record.sum_rate_bits = f64::NAN;
        let text = to_csv_string(&res);
        let back = parse_csv(&text).unwrap();
        assert!(back[0].sum_rate_bits.is_nan());
        assert!(text.lines().nth(1).unwrap().contains("NaN"));
    }

    #[test]
    fn csv_shapes() {
        let empty = to_csv_string(&SweepResult::default());
        assert_eq!(empty, format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&empty).unwrap().is_empty());

        let mut cfg = small(&[AlgorithmId::Dba], 3);
        cfg.trials = 1;
        cfg.snr_grid_db = vec![10.0];
        let res = run_sweep(&cfg).unwrap();
        let text = to_csv_string(&res);
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
        let line = text.lines().nth(1).unwrap();
        assert!(line.starts_with("t,DBA,1.000000000e1,0,5,"), "{line}");
    }

    #[test]
    fn csv_round_trip() {
        let res = run_sweep(&small(&[AlgorithmId::Dba, AlgorithmId::AltMin], 3)).unwrap();
        let back = parse_csv(&to_csv_string(&res)).unwrap();
        assert_eq!(back.len(), res.rows.len());
        for (a, row) in back.iter().zip(&res.rows) {
            let b = &row.record;
            assert_eq!((&a.scenario, a.algorithm, a.trial, a.seed), (&b.scenario, b.algorithm, b.trial, b.seed));
            assert_eq!((a.iterations, a.converged, a.snr_db), (b.iterations, b.converged, b.snr_db));
            for (x, y) in [(a.sum_rate_bits, b.sum_rate_bits), (a.leakage, b.leakage), (a.ia_residual, b.ia_residual)] {
                assert!((x - y).abs() <= 5e-10 * y.abs(), "{x} vs {y}");
            }
        }
        assert!(matches!(parse_csv("a,b\n"), Err(Error::Parse { line: 1, .. })));
        let bad = format!("{CSV_HEADER}\nt,DBA,x,0,5,1,true,1,1,1\n");
        assert!(matches!(parse_csv(&bad), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn emit_writes_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let res = run_sweep(&small(&[AlgorithmId::Dba], 2)).unwrap();
        emit_csv(&res, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), to_csv_string(&res));
        assert!(matches!(emit_csv(&res, &dir.path().join("missing/out.csv")), Err(Error::Io(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn mean_is_independent_of_trial_order(perm_seed in 0u64..1000) {
                let cfg = small(&[AlgorithmId::Dba], 2);
                let res = run_sweep(&cfg).unwrap();
                let mut rows = res.rows.clone();
                // Deterministic shuffle.
                let mut s = perm_seed;
                for k in (1..rows.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    rows.swap(k, (s >> 33) as usize % (k + 1));
                }
                let shuffled = SweepResult { rows };
                for snr in &cfg.snr_grid_db {
                    let a = res.mean_sum_rate(AlgorithmId::Dba, *snr).unwrap();
                    let b = shuffled.mean_sum_rate(AlgorithmId::Dba, *snr).unwrap();
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs());
                }
            }

        }
    }
}
