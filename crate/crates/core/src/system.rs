//! Power allocation and system-level configuration shared by the analytic,
//! simulation and optimization paths.

use crate::channel::{ChannelModel, DEFAULT_SIGMA_H_SQ};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::special::db_to_linear;

/// Power coefficients `α_1 > α_2 > … > α_L > 0` with `Σ α = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidConfig("power allocation is empty".into()));
        }
        if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidConfig(format!("power coefficients must be positive: {alpha:?}")));
        }
        if alpha.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "power coefficients must be strictly descending: {alpha:?}"
            )));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("power coefficients sum to {sum}, not 1")));
        }
        Ok(Self(alpha))
    }

    pub fn num_users(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `α_l` for 1-based `l`.
    pub fn coefficient(&self, user: usize) -> f64 {
        self.0[user - 1]
    }

    /// `sqrt(α_l P)` for 1-based `l`.
    pub fn amplitude(&self, user: usize, power: f64) -> f64 {
        (self.0[user - 1] * power).sqrt()
    }
}

/// How the transmitted symbols of each trial are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolMode {
    /// One constellation index per user, identical in every trial.
    Fixed(Vec<usize>),
    UniformRandom,
}

/// Noise variance for a transmit SNR `P/σ_n²` given in dB.
pub fn noise_var_from_snr_db(snr_db: f64, power: f64) -> f64 {
    power / db_to_linear(snr_db)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub alpha: PowerAllocation,
    pub power: f64,
    pub sigma_h_sq: f64,
    pub constellation: Constellation,
    pub snr_grid_db: Vec<f64>,
    pub symbol_mode: SymbolMode,
}

impl SystemConfig {
    /// QPSK with unit power, `h ~ CN(0, 2)` and uniformly random symbols.
    pub fn qpsk(alpha: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            alpha: PowerAllocation::new(alpha)?,
            power: 1.0,
            sigma_h_sq: DEFAULT_SIGMA_H_SQ,
            constellation: Constellation::qpsk(1.0)?,
            snr_grid_db: Vec::new(),
            symbol_mode: SymbolMode::UniformRandom,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_users(&self) -> usize {
        self.alpha.num_users()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidConfig(format!("total power must be positive, got {}", self.power)));
        }
        ChannelModel::new(self.num_users(), self.sigma_h_sq, 1.0)?;
        if let SymbolMode::Fixed(symbols) = &self.symbol_mode {
            if symbols.len() != self.num_users() {
                return Err(Error::InvalidConfig(format!(
                    "fixed symbol list has {} entries for {} users",
                    symbols.len(),
                    self.num_users()
                )));
            }
            if let Some(&bad) = symbols.iter().find(|&&s| s >= self.constellation.len()) {
                return Err(Error::InvalidConfig(format!("fixed symbol index {bad} out of range")));
            }
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("SNR grid contains non-finite values".into()));
        }
        Ok(())
    }

    /// Channel model at transmit SNR `P/σ_n²` (dB).
    pub fn channel_at(&self, snr_db: f64) -> Result<ChannelModel> {
        ChannelModel::new(
            self.num_users(),
            self.sigma_h_sq,
            noise_var_from_snr_db(snr_db, self.power),
        )
    }

    pub fn with_alpha(&self, alpha: PowerAllocation) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}
