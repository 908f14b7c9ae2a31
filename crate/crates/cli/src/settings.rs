//! Run settings: defaults, then a `key = value` config file, then flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use noma_pep::channel::DEFAULT_SIGMA_H_SQ;
use noma_pep::constellation::Constellation;
use noma_pep::optimizer::{ObjectiveScope, SicSpec};
use noma_pep::system::{PowerAllocation, SymbolMode, SystemConfig};
use noma_pep::Symbol;

use crate::CliError;

/// Every key a config file may set; flags use the same names with `-`.
pub const KEYS: &[&str] = &[
    "users",
    "alpha",
    "power",
    "sigma_h_sq",
    "snr_db",
    "seed",
    "trials",
    "workers",
    "sic_mode",
    "sic_pattern",
    "weight_trials",
    "symbols",
    "tx",
    "rx",
    "pth",
    "grid_step",
    "objective",
];

/// Raw string values keyed by setting name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSettings(pub BTreeMap<String, String>);

impl RawSettings {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// keys starting with `meta.` are ignored so manifests load as configs.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected `key = value`", origin.display(), n + 1))
            })?;
            let k = k.trim();
            if k.starts_with("meta.") {
                continue;
            }
            if !KEYS.contains(&k) {
                return Err(CliError::Config(format!(
                    "{}:{}: unknown key `{k}`",
                    origin.display(),
                    n + 1
                )));
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.clone());
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicModeName {
    Perfect,
    Pattern,
    Weighted,
}

impl SicModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            SicModeName::Perfect => "perfect",
            SicModeName::Pattern => "pattern",
            SicModeName::Weighted => "weighted",
        }
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub users: usize,
    pub alpha: Vec<f64>,
    pub power: f64,
    pub sigma_h_sq: f64,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    pub trials: u64,
    pub workers: Option<usize>,
    pub sic_mode: SicModeName,
    /// Per prior user: `(tx, detected)` or `None` for a correct decision.
    pub sic_pattern: Vec<Option<(usize, usize)>>,
    pub weight_trials: u64,
    pub symbols: Option<Vec<usize>>,
    pub tx: Option<usize>,
    pub rx: Option<usize>,
    pub pth: f64,
    pub grid_step: f64,
    pub objective: ObjectiveScope,
}

/// Per-command defaults that differ from the global ones.
#[derive(Debug, Clone, Default)]
pub struct CommandDefaults {
    pub users: Option<usize>,
    pub alpha: Option<&'static str>,
    pub snr_db: Option<&'static str>,
    pub sic_mode: Option<&'static str>,
    pub grid_step: Option<&'static str>,
    pub weight_trials: Option<&'static str>,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',').map(|x| parse_num(key, x)).collect()
}

/// `a,b,c` or `start:step:stop` (inclusive).
pub fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = v.split(':').collect();
    let grid = match parts.as_slice() {
        [single] => parse_list(key, single)?,
        [start, step, stop] => {
            let (start, step, stop): (f64, f64, f64) =
                (parse_num(key, start)?, parse_num(key, step)?, parse_num(key, stop)?);
            if !(step > 0.0) || stop < start {
                return Err(CliError::Config(format!("{key}: bad range `{v}`")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + step * i as f64).collect()
        }
        _ => return Err(CliError::Config(format!("{key}: expected list or start:step:stop, got `{v}`"))),
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("{key}: empty or non-finite grid `{v}`")));
    }
    Ok(grid)
}

fn parse_pattern(v: &str) -> Result<Vec<Option<(usize, usize)>>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|item| {
            let item = item.trim();
            if item == "-" {
                return Ok(None);
            }
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("sic_pattern: expected `tx:det` or `-`, got `{item}`")))?;
            Ok(Some((parse_num("sic_pattern", a)?, parse_num("sic_pattern", b)?)))
        })
        .collect()
}

/// Strictly descending allocation proportional to `2^{L-i}`, or the usual
/// customary values for two and three users.
pub fn default_alpha(users: usize) -> Vec<f64> {
    match users {
        1 => vec![1.0],
        2 => vec![0.8, 0.2],
        3 => vec![0.7, 0.2, 0.1],
        _ => {
            let raw: Vec<f64> = (0..users).map(|i| 2f64.powi((users - i) as i32)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| x / total).collect()
        }
    }
}

impl Settings {
    pub fn resolve(raw: &RawSettings, defaults: &CommandDefaults) -> Result<Self, CliError> {
        let alpha_text = raw.get("alpha").or(if raw.get("users").is_none() { defaults.alpha } else { None });
        let alpha: Option<Vec<f64>> = alpha_text.map(|v| parse_list("alpha", v)).transpose()?;
        let users: usize = match (raw.get("users"), &alpha) {
            (Some(u), _) => parse_num("users", u)?,
            (None, Some(a)) => a.len(),
            (None, None) => defaults.users.unwrap_or(3),
        };
        if users == 0 {
            return Err(CliError::Config("users must be at least 1".into()));
        }
        let alpha = alpha.unwrap_or_else(|| default_alpha(users));
        if alpha.len() != users {
            return Err(CliError::Config(format!(
                "alpha has {} entries but users = {users}",
                alpha.len()
            )));
        }
        let sic_mode = match raw.get("sic_mode").or(defaults.sic_mode).unwrap_or("perfect") {
            "perfect" => SicModeName::Perfect,
            "pattern" => SicModeName::Pattern,
            "weighted" => SicModeName::Weighted,
            other => return Err(CliError::Config(format!("sic_mode must be perfect|pattern|weighted, got `{other}`"))),
        };
        let objective = match raw.get("objective").unwrap_or("average") {
            "average" => ObjectiveScope::AverageOverUsers,
            other => match other.strip_prefix("user:") {
                Some(l) => ObjectiveScope::User(parse_num("objective", l)?),
                None => return Err(CliError::Config(format!("objective must be average or user:N, got `{other}`"))),
            },
        };
        let workers = raw
            .get("workers")
            .map(|v| parse_num::<usize>("workers", v))
            .transpose()?
            .filter(|&w| w > 0);
        let s = Self {
            users,
            alpha,
            power: raw.get("power").map_or(Ok(1.0), |v| parse_num("power", v))?,
            sigma_h_sq: raw.get("sigma_h_sq").map_or(Ok(DEFAULT_SIGMA_H_SQ), |v| parse_num("sigma_h_sq", v))?,
            snr_db: parse_grid("snr_db", raw.get("snr_db").or(defaults.snr_db).unwrap_or("0:5:40"))?,
            seed: raw.get("seed").map_or(Ok(1), |v| parse_num("seed", v))?,
            trials: raw.get("trials").map_or(Ok(1_000_000), |v| parse_num("trials", v))?,
            workers,
            sic_mode,
            sic_pattern: parse_pattern(raw.get("sic_pattern").unwrap_or(""))?,
            weight_trials: parse_num(
                "weight_trials",
                raw.get("weight_trials").or(defaults.weight_trials).unwrap_or("1000000"),
            )?,
            symbols: raw.get("symbols").map(|v| parse_list("symbols", v)).transpose()?,
            tx: raw.get("tx").map(|v| parse_num("tx", v)).transpose()?,
            rx: raw.get("rx").map(|v| parse_num("rx", v)).transpose()?,
            pth: raw.get("pth").map_or(Ok(1e-3), |v| parse_num("pth", v))?,
            grid_step: parse_num("grid_step", raw.get("grid_step").or(defaults.grid_step).unwrap_or("0.01"))?,
            objective,
        };
        if s.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        Ok(s)
    }

    pub fn system(&self) -> Result<SystemConfig, CliError> {
        let cfg = SystemConfig {
            alpha: PowerAllocation::new(self.alpha.clone())?,
            power: self.power,
            sigma_h_sq: self.sigma_h_sq,
            constellation: Constellation::qpsk(self.power)?,
            snr_grid_db: self.snr_db.clone(),
            symbol_mode: match &self.symbols {
                Some(s) => SymbolMode::Fixed(s.clone()),
                None => SymbolMode::UniformRandom,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Prior deltas for user `l` in pattern mode: the first `l-1` entries of
    /// the pattern, padded with zeros.
    pub fn pattern_deltas(&self, user: usize, c: &Constellation) -> Result<Vec<Symbol>, CliError> {
        (0..user - 1)
            .map(|k| match self.sic_pattern.get(k).copied().flatten() {
                None => Ok(Symbol::default()),
                Some((tx, det)) => Ok(c.point(tx)? - c.point(det)?),
            })
            .collect()
    }

    pub fn sic_spec(&self) -> SicSpec {
        match self.sic_mode {
            SicModeName::Weighted => SicSpec::Weighted {
                trials: self.weight_trials,
                seed: self.seed,
            },
            _ => SicSpec::Perfect,
        }
    }

    /// `key = value` lines that reproduce these settings.
    pub fn to_config_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let _ = writeln!(out, "users = {}", self.users);
        let _ = writeln!(out, "alpha = {}", join(&self.alpha));
        let _ = writeln!(out, "power = {}", self.power);
        let _ = writeln!(out, "sigma_h_sq = {}", self.sigma_h_sq);
        let _ = writeln!(out, "snr_db = {}", join(&self.snr_db));
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "trials = {}", self.trials);
        if let Some(w) = self.workers {
            let _ = writeln!(out, "workers = {w}");
        }
        let _ = writeln!(out, "sic_mode = {}", self.sic_mode.as_str());
        let pattern: Vec<String> = self
            .sic_pattern
            .iter()
            .map(|p| p.map_or("-".to_string(), |(a, b)| format!("{a}:{b}")))
            .collect();
        let _ = writeln!(out, "sic_pattern = {}", pattern.join(","));
        let _ = writeln!(out, "weight_trials = {}", self.weight_trials);
        if let Some(s) = &self.symbols {
            let s: Vec<String> = s.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "symbols = {}", s.join(","));
        }
        if let Some(tx) = self.tx {
            let _ = writeln!(out, "tx = {tx}");
        }
        if let Some(rx) = self.rx {
            let _ = writeln!(out, "rx = {rx}");
        }
        let _ = writeln!(out, "pth = {:e}", self.pth);
        let _ = writeln!(out, "grid_step = {}", self.grid_step);
        let objective = match self.objective {
            ObjectiveScope::AverageOverUsers => "average".to_string(),
            ObjectiveScope::User(l) => format!("user:{l}"),
        };
        let _ = writeln!(out, "objective = {objective}");
        out
    }
}

pub fn out_dir(flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned().unwrap_or_else(|| PathBuf::from("out"))
}
