//! Line-oriented experiment configuration files.
//!
//! Format: one `key = value` pair per line, `#` starts a comment line, blank
//! lines are ignored. Keys carry explicit unit suffixes (`_db`, `_hz`, `_us`)
//! and the schema is strict: unknown keys are rejected so typos fail loudly.

use super::{
    ChannelModel, Csi, DetectorKind, ExperimentConfig, ExperimentKind, GainEstimator, PilotModel,
};
use crate::channel::PathTap;
use crate::chirp::ChirpKind;
use crate::grid::GridDims;
use crate::modem::PulseSpec;
use crate::pilot::{EpConfig, GuardDoppler, SpConfig};
use crate::{CddmError, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "m_d",
    "n_d",
    "chirp",
    "alpha",
    "t_us",
    "fc_hz",
    "speed_kmh",
    "channel",
    "path",
    "cp_len",
    "csi",
    "detector",
    "estimator",
    "pilot",
    "i_rho",
    "lambda",
    "sigma_p",
    "sigma_p_list",
    "ep_pos",
    "ep_guard_delay",
    "ep_guard_doppler",
    "ep_snr_p_db",
    "ebn0_db",
    "trials",
    "seed",
    "out",
    "pulse",
    "rolloff",
    "span",
    "oversample",
    "nfft",
    "overlap",
    "timing",
    "dump_channels",
];

struct Raw {
    map: BTreeMap<String, String>,
    paths: Vec<String>,
}

fn bad(msg: impl Into<String>) -> CddmError {
    CddmError::BadConfig(msg.into())
}

impl Raw {
    fn parse(text: &str) -> Result<Raw> {
        let mut map = BTreeMap::new();
        let mut paths = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(bad(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if key == "path" {
                paths.push(value);
            } else if map.insert(key.clone(), value).is_some() {
                return Err(bad(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Raw { map, paths })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| bad(format!("missing key `{key}`")))
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse()
            .map_err(|_| bad(format!("key `{key}`: cannot parse `{raw}`")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse_num(key, self.require(key)?)
    }

    fn num_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(raw) => self.parse_num(key, raw),
            None => Ok(default),
        }
    }

    fn list_f64(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| self.parse_num(key, s.trim()))
            .collect()
    }
}

/// Parse a configuration from its text form.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw = Raw::parse(text)?;

    let experiment = match raw.require("experiment")? {
        "ber" => ExperimentKind::Ber,
        "nmse" => ExperimentKind::Nmse,
        "psd" => ExperimentKind::Psd,
        other => return Err(bad(format!("unknown experiment `{other}`"))),
    };
    let dims = GridDims::new(raw.num("m_d")?, raw.num("n_d")?)?;
    let t_symbol_s = raw.num_or("t_us", 66.67)? * 1e-6;
    let fc_hz = raw.num_or("fc_hz", 5.0e9)?;
    let speed_kmh = raw.num_or("speed_kmh", 0.0)?;

    let alpha = match raw.get("alpha") {
        Some(v) => Some(raw.parse_num::<u32>("alpha", v)?),
        None => None,
    };
    let chirp = match raw.get("chirp").unwrap_or("dfnt") {
        "dfnt" => ChirpKind::Dfnt,
        "daft" => {
            let a = alpha.unwrap_or_else(|| {
                crate::channel::max_doppler_tap(fc_hz, speed_kmh, dims.n_d(), t_symbol_s).max(0)
                    as u32
            });
            ChirpKind::Daft { alpha: a }
        }
        other => return Err(bad(format!("unknown chirp kind `{other}`"))),
    };

    let channel = match raw.get("channel").unwrap_or("awgn") {
        "awgn" => ChannelModel::Awgn,
        "eva" => ChannelModel::Eva,
        "fixed" => {
            if raw.paths.is_empty() {
                return Err(bad("channel = fixed needs at least one `path` line"));
            }
            let mut taps = Vec::new();
            for p in &raw.paths {
                let parts: Vec<&str> = p.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(bad(format!("path `{p}`: expected `l k re im`")));
                }
                taps.push(PathTap {
                    delay: raw.parse_num("path", parts[0])?,
                    doppler: raw.parse_num("path", parts[1])?,
                    gain: Complex64::new(
                        raw.parse_num("path", parts[2])?,
                        raw.parse_num("path", parts[3])?,
                    ),
                });
            }
            ChannelModel::Fixed(taps)
        }
        other => return Err(bad(format!("unknown channel model `{other}`"))),
    };

    let csi = match raw.get("csi").unwrap_or("perfect") {
        "perfect" => Csi::Perfect,
        "estimated" => Csi::Estimated,
        other => return Err(bad(format!("unknown csi mode `{other}`"))),
    };
    let detector = match raw.get("detector").unwrap_or("maxpath") {
        "maxpath" => DetectorKind::MaxPath,
        "maxpath_ext" => DetectorKind::MaxPathExtended,
        "mmse_iczt" => DetectorKind::MmseIczt,
        other => return Err(bad(format!("unknown detector `{other}`"))),
    };
    let estimator = match raw.get("estimator").unwrap_or("extended") {
        "basic" => GainEstimator::Basic,
        "extended" => GainEstimator::Extended,
        other => return Err(bad(format!("unknown estimator `{other}`"))),
    };

    let pilot = match raw.get("pilot").unwrap_or("none") {
        "none" => PilotModel::None,
        "sp" => PilotModel::Sp(SpConfig {
            i_rho: raw.num_or("i_rho", dims.n() / 2)?,
            lambda: raw.num_or("lambda", dims.m_d())?,
            sigma_p: raw.num_or("sigma_p", 0.3)?,
            pilot_value: Complex64::new(1.0, 0.0),
        }),
        "ep" => {
            let pos_raw = raw.require("ep_pos")?;
            let parts: Vec<&str> = pos_raw.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(bad("ep_pos: expected `m n`"));
            }
            let guard_doppler = match raw.get("ep_guard_doppler").unwrap_or("full") {
                "full" => GuardDoppler::Full,
                v => GuardDoppler::Half(raw.parse_num("ep_guard_doppler", v)?),
            };
            PilotModel::Ep(EpConfig {
                pilot_pos: (
                    raw.parse_num("ep_pos", parts[0])?,
                    raw.parse_num("ep_pos", parts[1])?,
                ),
                guard_delay: raw.num_or("ep_guard_delay", 0)?,
                guard_doppler,
                snr_p_db: raw.num_or("ep_snr_p_db", 60.0)?,
            })
        }
        other => return Err(bad(format!("unknown pilot scheme `{other}`"))),
    };

    let sigma_p_list = match raw.get("sigma_p_list") {
        Some(_) => Some(raw.list_f64("sigma_p_list")?),
        None => None,
    };

    let pulse = match raw.get("pulse").unwrap_or("none") {
        "none" => None,
        "srrc" => Some(PulseSpec {
            rolloff: raw.num_or("rolloff", 0.1)?,
            span_symbols: raw.num_or("span", 16)?,
            oversample: raw.num_or("oversample", 4)?,
        }),
        other => return Err(bad(format!("unknown pulse `{other}`"))),
    };

    let timing = match raw.get("timing").unwrap_or("off") {
        "off" => false,
        "on" => true,
        other => return Err(bad(format!("timing must be on/off, got `{other}`"))),
    };

    let cfg = ExperimentConfig {
        experiment,
        dims,
        chirp,
        t_symbol_s,
        fc_hz,
        speed_kmh,
        channel,
        cp_len: raw.num_or("cp_len", 0)?,
        csi,
        detector,
        estimator,
        pilot,
        sigma_p_list,
        ebn0_db: if raw.get("ebn0_db").is_some() {
            raw.list_f64("ebn0_db")?
        } else {
            vec![12.0]
        },
        trials: raw.num_or("trials", 100)?,
        seed: raw.num_or("seed", 1)?,
        out: raw.get("out").map(PathBuf::from),
        pulse,
        nfft: raw.num_or("nfft", 4096)?,
        overlap: raw.num_or("overlap", 0.5)?,
        timing,
        dump_channels: raw.get("dump_channels").map(PathBuf::from),
        source_text: Some(text.to_string()),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
experiment = ber
m_d = 16
n_d = 4
channel = awgn
ebn0_db = 4,6
trials = 10
seed = 7
";

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.dims.m_d(), 16);
        assert_eq!(cfg.ebn0_db, vec![4.0, 6.0]);
        assert_eq!(cfg.trials, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL}\nbogus = 3\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{MINIMAL}\ntrials = 11\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let text = MINIMAL.replace("trials = 10", "trials = 0");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn fixed_channel_paths_parse() {
        let text = "\
experiment = ber
m_d = 16
n_d = 4
channel = fixed
path = 0 0 1.0 0.0
path = 2 1 0.5 -0.5
cp_len = 2
ebn0_db = 10
trials = 5
seed = 1
";
        let cfg = parse_config(text).unwrap();
        match &cfg.channel {
            ChannelModel::Fixed(taps) => assert_eq!(taps.len(), 2),
            _ => panic!("expected fixed channel"),
        }
    }

    #[test]
    fn estimated_csi_requires_pilot() {
        let text = MINIMAL.replace("channel = awgn", "channel = awgn\ncsi = estimated");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn daft_alpha_derived_from_speed() {
        let text = "\
experiment = ber
m_d = 512
n_d = 32
chirp = daft
speed_kmh = 500
channel = awgn
ebn0_db = 10
trials = 1
seed = 1
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.chirp, ChirpKind::Daft { alpha: 5 });
    }
}
