//! Monte Carlo link simulator for downlink NOMA with successive interference
//! cancellation and error propagation.
//!
//! Each trial draws ordered gains, superposes the users' symbols, and runs the
//! SIC chain at every user's receiver. Trials are grouped in fixed blocks of
//! [`BLOCK_TRIALS`]; block `k` draws from `ChaCha8Rng::seed_from_u64(seed)`
//! on stream `k`. Block statistics are integer counters merged by addition,
//! so the result depends only on `(cfg, snr_db, trials, seed)` and never on
//! how many worker threads ran the blocks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::draw_ordered_gains;
use crate::constellation::{symbol_difference, Symbol};
use crate::error::{Error, Result};
use crate::pep::DeltaWeights;
use crate::system::{SymbolMode, SystemConfig};

/// Trials per RNG block.
pub const BLOCK_TRIALS: u64 = 1 << 16;

/// Minimum trial count accepted by [`sic_delta_weights`].
pub const MIN_WEIGHT_TRIALS: u64 = 100_000;

/// Estimates backed by fewer events than this are flagged low-confidence.
pub const LOW_CONFIDENCE_EVENTS: u64 = 100;

/// Counters for one user's receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserStats {
    num_symbols: usize,
    /// Trials in which each symbol was transmitted.
    pub tx_counts: Vec<u64>,
    /// Row-major `M×M`: transmitted symbol vs final SIC decision. Rows sum to `tx_counts`.
    pub confusion: Vec<u64>,
    /// Row-major `M×M`: trials in which the post-SIC signal is strictly closer
    /// to the scaled `rx` point than to the scaled `tx` point, ignoring all
    /// other candidates. The diagonal is zero.
    pub pairwise: Vec<u64>,
    pub bit_errors: u64,
    pub symbol_errors: u64,
    /// Encoded prior-user decision patterns (see [`SimStats::decode_pattern`]) and their counts.
    pub sic_patterns: BTreeMap<u64, u64>,
}

impl UserStats {
    fn new(num_symbols: usize) -> Self {
        Self {
            num_symbols,
            tx_counts: vec![0; num_symbols],
            confusion: vec![0; num_symbols * num_symbols],
            pairwise: vec![0; num_symbols * num_symbols],
            bit_errors: 0,
            symbol_errors: 0,
            sic_patterns: BTreeMap::new(),
        }
    }

    pub fn confusion_at(&self, tx: usize, det: usize) -> u64 {
        self.confusion[tx * self.num_symbols + det]
    }

    pub fn pairwise_at(&self, tx: usize, rx: usize) -> u64 {
        self.pairwise[tx * self.num_symbols + rx]
    }

    fn merge(&mut self, other: &UserStats) {
        add_into(&mut self.tx_counts, &other.tx_counts);
        add_into(&mut self.confusion, &other.confusion);
        add_into(&mut self.pairwise, &other.pairwise);
        self.bit_errors += other.bit_errors;
        self.symbol_errors += other.symbol_errors;
        for (k, v) in &other.sic_patterns {
            *self.sic_patterns.entry(*k).or_insert(0) += v;
        }
    }
}

fn add_into(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Merged counters of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub snr_db: f64,
    pub trials: u64,
    pub bits_per_symbol: u32,
    pub users: Vec<UserStats>,
}

impl SimStats {
    fn empty(snr_db: f64, num_users: usize, num_symbols: usize, bits_per_symbol: u32) -> Self {
        Self {
            snr_db,
            trials: 0,
            bits_per_symbol,
            users: (0..num_users).map(|_| UserStats::new(num_symbols)).collect(),
        }
    }

    /// Exact component-wise sum.
    pub fn merge(mut self, other: &SimStats) -> Self {
        self.trials += other.trials;
        for (a, b) in self.users.iter_mut().zip(&other.users) {
            a.merge(b);
        }
        self
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, user: usize) -> Result<&UserStats> {
        if user == 0 || user > self.users.len() {
            return Err(Error::IndexOutOfRange {
                index: user,
                len: self.users.len(),
            });
        }
        Ok(&self.users[user - 1])
    }

    /// Decodes a pattern key of user `l` into `(tx, detected)` per prior
    /// user, `None` where the decision was correct.
    pub fn decode_pattern(&self, user: usize, key: u64) -> Vec<Option<(usize, usize)>> {
        let m = self.users[0].num_symbols as u64;
        let base = m * m + 1;
        let mut rest = key;
        (1..user)
            .map(|_| {
                let digit = rest % base;
                rest /= base;
                (digit > 0).then(|| (((digit - 1) / m) as usize, ((digit - 1) % m) as usize))
            })
            .collect()
    }
}

/// Decisions made at one user's receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SicOutcome {
    /// Decisions on users `1..l-1`, in cancellation order.
    pub prior: Vec<usize>,
    /// Decision on user `l`'s own symbol.
    pub own: usize,
    /// Signal left after subtracting the prior decisions.
    pub residual: Complex64,
}

/// Runs the SIC chain for user `l` on the received sample `r` with channel `h`.
///
/// Users `1..l-1` are detected in order by minimum distance to the alphabet
/// scaled by `sqrt(α_k P) h`, and each decision is subtracted whether right
/// or wrong. User `l`'s own symbol is then detected the same way.
pub fn sic_detect(r: Complex64, h: Complex64, cfg: &SystemConfig, user: usize) -> Result<SicOutcome> {
    let num_users = cfg.num_users();
    if user == 0 || user > num_users {
        return Err(Error::IndexOutOfRange {
            index: user,
            len: num_users,
        });
    }
    let mut residual = r;
    let mut prior = Vec::with_capacity(user - 1);
    for k in 1..user {
        let g = h * cfg.alpha.amplitude(k, cfg.power);
        let d = cfg.constellation.nearest(residual, g);
        residual -= g * cfg.constellation.points()[d];
        prior.push(d);
    }
    let own = cfg.constellation.nearest(residual, h * cfg.alpha.amplitude(user, cfg.power));
    Ok(SicOutcome { prior, own, residual })
}

struct Kernel<'a> {
    cfg: &'a SystemConfig,
    amps: Vec<f64>,
    noise_sd: f64,
    sigma_h: f64,
    bit_diff: Vec<u32>,
    m: usize,
    patterns_only: bool,
}

impl<'a> Kernel<'a> {
    fn new(cfg: &'a SystemConfig, snr_db: f64, patterns_only: bool) -> Result<Self> {
        let model = cfg.channel_at(snr_db)?;
        let m = cfg.constellation.len();
        let mut bit_diff = vec![0; m * m];
        for tx in 0..m {
            for det in 0..m {
                bit_diff[tx * m + det] = cfg.constellation.bit_errors(tx, det)?;
            }
        }
        Ok(Self {
            cfg,
            amps: (1..=cfg.num_users()).map(|l| cfg.alpha.amplitude(l, cfg.power)).collect(),
            noise_sd: (model.noise_var() / 2.0).sqrt(),
            sigma_h: model.sigma_h(),
            bit_diff,
            m,
            patterns_only,
        })
    }

    fn run_block(&self, seed: u64, block: u64, trials: u64, snr_db: f64) -> SimStats {
        let cfg = self.cfg;
        let num_users = cfg.num_users();
        let m = self.m;
        let points = cfg.constellation.points();
        let base = (m * m + 1) as u64;
        let mut stats = SimStats::empty(snr_db, num_users, m, cfg.constellation.bits_per_symbol());
        stats.trials = trials;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let mut gains = vec![Complex64::default(); num_users];
        let mut symbols = vec![0usize; num_users];
        // clean SIC is by far the most common pattern; count it outside the map
        let mut clean = vec![0u64; num_users];
        let first = usize::from(self.patterns_only);
        for _ in 0..trials {
            match &cfg.symbol_mode {
                SymbolMode::Fixed(fixed) => symbols.copy_from_slice(fixed),
                SymbolMode::UniformRandom => {
                    for s in symbols.iter_mut() {
                        *s = rng.random_range(0..m);
                    }
                }
            }
            let tx_signal: Complex64 = symbols
                .iter()
                .zip(&self.amps)
                .map(|(&s, &a)| a * points[s])
                .sum();
            draw_ordered_gains(&mut rng, self.sigma_h, &mut gains);
            for (l, &h) in gains.iter().enumerate().skip(first) {
                let nr: f64 = rng.sample(StandardNormal);
                let ni: f64 = rng.sample(StandardNormal);
                let r = h * tx_signal + Complex64::new(self.noise_sd * nr, self.noise_sd * ni);

                let mut residual = r;
                let mut key = 0u64;
                let mut place = 1u64;
                for (&a, &sent) in self.amps[..l].iter().zip(&symbols[..l]) {
                    let g = h * a;
                    let d = cfg.constellation.nearest(residual, g);
                    residual -= g * points[d];
                    if d != sent {
                        key += place * (1 + (sent * m + d) as u64);
                    }
                    place *= base;
                }
                if l > 0 {
                    if key == 0 {
                        clean[l] += 1;
                    } else {
                        *stats.users[l].sic_patterns.entry(key).or_insert(0) += 1;
                    }
                }
                if self.patterns_only {
                    continue;
                }
                let g = h * self.amps[l];
                let own = cfg.constellation.nearest(residual, g);
                let tx = symbols[l];

                let us = &mut stats.users[l];
                us.tx_counts[tx] += 1;
                us.confusion[tx * m + own] += 1;
                if own != tx {
                    us.symbol_errors += 1;
                    us.bit_errors += u64::from(self.bit_diff[tx * m + own]);
                }
                let d_tx = (residual - g * points[tx]).norm_sqr();
                for (rx, p) in points.iter().enumerate() {
                    if rx != tx && (residual - g * p).norm_sqr() < d_tx {
                        us.pairwise[tx * m + rx] += 1;
                    }
                }
            }
        }
        for (us, &n) in stats.users.iter_mut().zip(&clean) {
            if n > 0 {
                us.sic_patterns.insert(0, n);
            }
        }
        stats
    }
}

/// Simulates `trials` transmissions at transmit SNR `snr_db` on the global
/// rayon pool.
pub fn simulate(cfg: &SystemConfig, snr_db: f64, trials: u64, seed: u64) -> Result<SimStats> {
    simulate_with_workers(cfg, snr_db, trials, seed, None)
}

/// As [`simulate`], on a dedicated pool of `workers` threads when given.
/// The result is identical for every worker count.
pub fn simulate_with_workers(
    cfg: &SystemConfig,
    snr_db: f64,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<SimStats> {
    run_blocks(cfg, snr_db, trials, seed, workers, false)
}

/// Cheaper run that only records the prior-user decision patterns: fills
/// `trials` and `sic_patterns`, every other counter stays zero. Draws differ
/// from [`simulate`] for the same seed, since user 1's receiver is skipped.
pub fn simulate_sic_patterns(cfg: &SystemConfig, snr_db: f64, trials: u64, seed: u64) -> Result<SimStats> {
    run_blocks(cfg, snr_db, trials, seed, None, true)
}

fn run_blocks(
    cfg: &SystemConfig,
    snr_db: f64,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
    patterns_only: bool,
) -> Result<SimStats> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("SNR must be finite, got {snr_db}")));
    }
    cfg.validate()?;
    let m = cfg.constellation.len() as u128;
    if (m * m + 1).checked_pow(cfg.num_users() as u32 - 1).is_none_or(|v| v > u128::from(u64::MAX)) {
        return Err(Error::InvalidConfig(format!(
            "{} users with {m} symbols is too many to track SIC patterns",
            cfg.num_users()
        )));
    }
    let kernel = Kernel::new(cfg, snr_db, patterns_only)?;
    let num_blocks = trials.div_ceil(BLOCK_TRIALS);
    let run = || {
        (0..num_blocks)
            .into_par_iter()
            .map(|b| {
                let n = BLOCK_TRIALS.min(trials - b * BLOCK_TRIALS);
                kernel.run_block(seed, b, n, snr_db)
            })
            .reduce_with(|a, b| a.merge(&b))
            .expect("at least one block")
    };
    let stats = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {n} workers: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(stats)
}

/// A proportion estimate with a Wald 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
    pub events: u64,
    pub trials: u64,
    /// Fewer than [`LOW_CONFIDENCE_EVENTS`] events.
    pub low_confidence: bool,
    /// One-sided 95% upper bound; `3/n` when no event was observed.
    pub upper_bound: f64,
}

impl Estimate {
    pub fn from_counts(events: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = events as f64 / n;
        let half_width = 1.96 * (p * (1.0 - p) / n).sqrt();
        let upper_bound = if events == 0 { 3.0 / n } else { p + half_width };
        Self {
            value: p,
            half_width,
            events,
            trials,
            low_confidence: events < LOW_CONFIDENCE_EVENTS,
            upper_bound,
        }
    }
}

fn check_pair(stats: &SimStats, user: usize, tx: usize, rx: usize) -> Result<&UserStats> {
    let us = stats.user(user)?;
    let m = us.num_symbols;
    for idx in [tx, rx] {
        if idx >= m {
            return Err(Error::IndexOutOfRange { index: idx, len: m });
        }
    }
    if us.tx_counts[tx] == 0 {
        return Err(Error::ZeroConditioning(tx));
    }
    Ok(us)
}

/// Pairwise error rate of user `l`: the fraction of trials with `tx` sent in
/// which the two-hypothesis test between `tx` and `rx` picks `rx`. This is
/// the event whose probability the analytic PEP describes.
pub fn empirical_pep(stats: &SimStats, user: usize, tx: usize, rx: usize) -> Result<Estimate> {
    let us = check_pair(stats, user, tx, rx)?;
    if tx == rx {
        return Err(Error::InvalidHypothesis(format!(
            "tx and rx are the same symbol ({tx}); not a pairwise error event"
        )));
    }
    Ok(Estimate::from_counts(us.pairwise_at(tx, rx), us.tx_counts[tx]))
}

/// Fraction of trials with `tx` sent in which the full SIC receiver decided
/// `det`. Sums to 1 over `det`.
pub fn empirical_detection(stats: &SimStats, user: usize, tx: usize, det: usize) -> Result<Estimate> {
    let us = check_pair(stats, user, tx, det)?;
    Ok(Estimate::from_counts(us.confusion_at(tx, det), us.tx_counts[tx]))
}

pub fn empirical_ber(stats: &SimStats, user: usize) -> Result<Estimate> {
    let us = stats.user(user)?;
    Ok(Estimate::from_counts(us.bit_errors, stats.trials * u64::from(stats.bits_per_symbol)))
}

pub fn empirical_ser(stats: &SimStats, user: usize) -> Result<Estimate> {
    let us = stats.user(user)?;
    Ok(Estimate::from_counts(us.symbol_errors, stats.trials))
}

/// Observed distribution of the residual SIC errors `(Δ_1, …, Δ_{l-1})` at
/// user `l`'s receiver. Patterns that give the same `Δ` vector are pooled.
pub fn sic_delta_weights(stats: &SimStats, user: usize, points: &[Symbol]) -> Result<DeltaWeights> {
    let us = stats.user(user)?;
    if stats.trials < MIN_WEIGHT_TRIALS {
        return Err(Error::InsufficientTrials {
            have: stats.trials,
            need: MIN_WEIGHT_TRIALS,
        });
    }
    if user == 1 {
        return DeltaWeights::new(1, vec![(Vec::new(), 1.0)]);
    }
    let mut pooled: Vec<(Vec<Symbol>, u64)> = Vec::new();
    for (&key, &count) in &us.sic_patterns {
        let deltas: Vec<Symbol> = stats
            .decode_pattern(user, key)
            .into_iter()
            .map(|p| match p {
                None => Symbol::default(),
                Some((tx, det)) => symbol_difference(points[tx], points[det]),
            })
            .collect();
        match pooled.iter_mut().find(|(d, _)| *d == deltas) {
            Some(entry) => entry.1 += count,
            None => pooled.push((deltas, count)),
        }
    }
    let total: u64 = pooled.iter().map(|(_, c)| c).sum();
    let entries = pooled
        .into_iter()
        .map(|(d, c)| (d, c as f64 / total as f64))
        .collect();
    DeltaWeights::new(user, entries)
}

pub const SIM_CSV_HEADER: &str = "snr_db,user,metric,value,ci_half_width,trials";

/// CSV rows for one run: per user `ber`, `ser`, `sic_clean` (fraction of
/// trials with every prior decision correct) and `pep_<tx>_<rx>` for every
/// ordered pair. `trials` is the denominator of each estimate.
pub fn stats_csv_rows(stats: &SimStats) -> String {
    let mut out = String::new();
    let mut row = |user: usize, metric: &str, e: &Estimate| {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{}",
            stats.snr_db, user, metric, e.value, e.half_width, e.trials
        );
    };
    for (i, us) in stats.users.iter().enumerate() {
        let l = i + 1;
        if let Ok(e) = empirical_ber(stats, l) {
            row(l, "ber", &e);
        }
        if let Ok(e) = empirical_ser(stats, l) {
            row(l, "ser", &e);
        }
        let clean = if l == 1 {
            stats.trials
        } else {
            us.sic_patterns.get(&0).copied().unwrap_or(0)
        };
        row(l, "sic_clean", &Estimate::from_counts(clean, stats.trials));
        for tx in 0..us.num_symbols {
            for rx in 0..us.num_symbols {
                if tx == rx {
                    continue;
                }
                if let Ok(e) = empirical_pep(stats, l, tx, rx) {
                    row(l, &format!("pep_{tx}_{rx}"), &e);
                }
            }
        }
    }
    out
}
