//! Pairwise error probability of the `l`-th NOMA user under (im)perfect SIC.
//!
//! After cancelling users `1..l-1`, user `l` sees
//! `r̃ = sqrt(α_l P) h x_l + Σ_{n>l} sqrt(α_n P) h x_n + Σ_{k<l} sqrt(α_k P) h Δ_k + n`
//! and mistakes `x_l` for `x̂_l` with conditional probability `Q(|h| β_l / υ)`,
//! where
//!
//! ```text
//! β_l = sqrt(α_l P)|Δ_l|² + 2 Re{Δ_l Σ_{n>l} sqrt(α_n P) x_n*} + 2 Re{Δ_l Σ_{k<l} sqrt(α_k P) Δ_k*}
//! υ   = sqrt(2) σ_n |Δ_l|
//! ```
//!
//! The unconditional PEP averages that over the ordered density of `|h_l|`.
//! [`pep_quadrature`] integrates it numerically and is the reference
//! evaluator. The closed forms are kept in the literal published form so
//! their offsets can be measured against it (see [`crate::report`]).

use std::collections::HashMap;
use std::fmt;

use crate::channel::{ordered_magnitude_pdf_unchecked, ChannelModel};
use crate::constellation::{symbol_difference, Constellation, Symbol};
use crate::error::{domain, Error, Result};
use crate::quadrature::AdaptiveQuad;
use crate::special::{alternating_sign, binomial, order_statistic_coefficient, q_function};
use crate::system::PowerAllocation;

/// Largest interferer enumeration `M^{L-l}` that [`average_pep`] accepts.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// One conditioning scenario for user `l`: its transmitted and detected
/// symbols, the symbols of the weaker users `l+1..L`, and the residual SIC
/// errors `Δ_k` of users `1..l-1` (zero when cancelled correctly).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHypothesis {
    user: usize,
    tx: Symbol,
    detected: Symbol,
    interferers: Vec<Symbol>,
    prior_deltas: Vec<Symbol>,
}

impl ErrorHypothesis {
    pub fn new(
        user: usize,
        num_users: usize,
        tx: Symbol,
        detected: Symbol,
        interferers: Vec<Symbol>,
        prior_deltas: Vec<Symbol>,
    ) -> Result<Self> {
        if user == 0 || user > num_users {
            return Err(Error::IndexOutOfRange {
                index: user,
                len: num_users,
            });
        }
        if tx == detected {
            return Err(Error::InvalidHypothesis("transmitted and detected symbols coincide".into()));
        }
        if interferers.len() != num_users - user {
            return Err(Error::InvalidHypothesis(format!(
                "user {user} of {num_users} needs {} interferer symbols, got {}",
                num_users - user,
                interferers.len()
            )));
        }
        if prior_deltas.len() != user - 1 {
            return Err(Error::InvalidHypothesis(format!(
                "user {user} needs {} prior SIC deltas, got {}",
                user - 1,
                prior_deltas.len()
            )));
        }
        Ok(Self {
            user,
            tx,
            detected,
            interferers,
            prior_deltas,
        })
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn num_users(&self) -> usize {
        self.user + self.interferers.len()
    }

    pub fn delta(&self) -> Symbol {
        symbol_difference(self.tx, self.detected)
    }

    pub fn interferers(&self) -> &[Symbol] {
        &self.interferers
    }

    pub fn prior_deltas(&self) -> &[Symbol] {
        &self.prior_deltas
    }
}

/// Which evaluator produced a PEP value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Quadrature,
    ChernoffBound,
    Simulated,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::ChernoffBound => "chernoff_bound",
            Method::Simulated => "simulated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PepPoint {
    pub snr_db: f64,
    pub pep: f64,
    pub method: Method,
}

/// PEP values of one user over an SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PepCurve {
    pub user: usize,
    pub points: Vec<PepPoint>,
}

fn check_alpha(alpha: &PowerAllocation, num_users: usize) -> Result<()> {
    if alpha.num_users() != num_users {
        return Err(Error::InvalidHypothesis(format!(
            "{} power coefficients for {num_users} users",
            alpha.num_users()
        )));
    }
    Ok(())
}

/// `β_l` from its ingredients; accepts `Δ_l = 0` (which gives 0).
pub fn beta_from_parts(
    user: usize,
    delta: Symbol,
    interferers: &[Symbol],
    prior_deltas: &[Symbol],
    alpha: &PowerAllocation,
    power: f64,
) -> f64 {
    let own = alpha.amplitude(user, power) * delta.norm_sqr();
    let forward: Symbol = interferers
        .iter()
        .enumerate()
        .map(|(i, x)| alpha.amplitude(user + 1 + i, power) * x.conj())
        .sum();
    let residual: Symbol = prior_deltas
        .iter()
        .enumerate()
        .map(|(k, d)| alpha.amplitude(k + 1, power) * d.conj())
        .sum();
    own + 2.0 * ((delta * forward).re + (delta * residual).re)
}

/// `Γ` of the far user: `sqrt(α_1 P)|Δ_1|² + 2 Re{Δ_1 Σ_{l≥2} sqrt(α_l P) x_l*}`.
pub fn gamma_factor(h: &ErrorHypothesis, alpha: &PowerAllocation, power: f64) -> Result<f64> {
    if h.user != 1 {
        return Err(Error::InvalidHypothesis(format!(
            "Γ is defined for user 1, hypothesis is for user {}",
            h.user
        )));
    }
    beta_factor(h, alpha, power)
}

pub fn beta_factor(h: &ErrorHypothesis, alpha: &PowerAllocation, power: f64) -> Result<f64> {
    check_alpha(alpha, h.num_users())?;
    Ok(beta_from_parts(
        h.user,
        h.delta(),
        &h.interferers,
        &h.prior_deltas,
        alpha,
        power,
    ))
}

/// `υ = sqrt(2) σ_n |Δ|`.
pub fn upsilon(noise_var: f64, delta: Symbol) -> f64 {
    std::f64::consts::SQRT_2 * noise_var.sqrt() * delta.norm()
}

/// `ζ = sqrt(2) |Δ_1| σ_n`, the far-user noise factor. Numerically equal to `υ`.
pub fn zeta_factor(noise_var: f64, delta: Symbol) -> f64 {
    upsilon(noise_var, delta)
}

/// `Q(|h_l| β_l / υ)` for a given channel magnitude.
pub fn conditional_pep(
    h: &ErrorHypothesis,
    alpha: &PowerAllocation,
    power: f64,
    noise_var: f64,
    channel_mag: f64,
) -> Result<f64> {
    if !(channel_mag >= 0.0) {
        return Err(domain(format!("channel magnitude must be non-negative, got {channel_mag}")));
    }
    if !(noise_var > 0.0) {
        return Err(domain(format!("noise variance must be positive, got {noise_var}")));
    }
    let beta = beta_factor(h, alpha, power)?;
    let ups = upsilon(noise_var, h.delta());
    Ok(q_function(channel_mag * beta / ups))
}

/// `1 - x/sqrt(x² + a)` without cancellation for `x > 0`.
#[inline]
fn one_minus_ratio(x: f64, a: f64) -> f64 {
    let root = (x * x + a).sqrt();
    if x > 0.0 {
        a / (root * (root + x))
    } else {
        1.0 - x / root
    }
}

/// Far-user closed form `½(1 − Γσ_h / sqrt(2ζ² + Γ²σ_h²))`.
///
/// This equals the Rayleigh(σ_h²) average of `Q(Γω/(sqrt(2)ζ))`, so it matches
/// [`pep_quadrature`] for `l = 1` when called with `υ = sqrt(2)ζ` and
/// `σ_h → σ_h/sqrt(L)` (the minimum of `L` Rayleigh draws is Rayleigh with
/// parameter `σ_h²/L`).
pub fn pep_user1_closed(gamma: f64, zeta: f64, sigma_h: f64) -> Result<f64> {
    if !(zeta > 0.0) || !(sigma_h > 0.0) {
        return Err(domain(format!("zeta and sigma_h must be positive (zeta={zeta}, sigma_h={sigma_h})")));
    }
    let x = gamma * sigma_h;
    Ok(0.5 * one_minus_ratio(x, 2.0 * zeta * zeta))
}

fn check_user_pair(user: usize, num_users: usize) -> Result<()> {
    if user == 0 || user > num_users {
        return Err(Error::IndexOutOfRange {
            index: user,
            len: num_users,
        });
    }
    Ok(())
}

/// l-th user closed form in its literal published form:
///
/// ```text
/// L!/(σ_h²(l-1)!(L-l)!) Σ_j C(l-1,j) (-1)^{2(l-1)-j} / z_j · (1 − βσ_h / sqrt(β²σ_h² + z_j υ²)),
/// z_j = L − l + j + 1
/// ```
///
/// Integrating the ordered density term by term gives the same sum with
/// prefactor `L!/(2(l-1)!(L-l)!)`, so this evaluates to `2/σ_h²` times the true
/// PEP; [`pep_user_l_series`] is the corrected form.
pub fn pep_user_l_closed(user: usize, num_users: usize, beta: f64, upsilon: f64, sigma_h: f64) -> Result<f64> {
    check_user_pair(user, num_users)?;
    if !(upsilon > 0.0) || !(sigma_h > 0.0) {
        return Err(domain(format!("upsilon and sigma_h must be positive (upsilon={upsilon}, sigma_h={sigma_h})")));
    }
    let prefactor = order_statistic_coefficient(user, num_users) / (sigma_h * sigma_h);
    Ok(prefactor * binomial_series(user, num_users, beta, upsilon, sigma_h))
}

/// Term-by-term integral of the ordered density against `Q(βω/υ)`:
/// `A_l/2 Σ_j C(l-1,j)(-1)^j / z_j · (1 − βσ_h / sqrt(β²σ_h² + z_j υ²))`.
pub fn pep_user_l_series(user: usize, num_users: usize, beta: f64, upsilon: f64, sigma_h: f64) -> Result<f64> {
    check_user_pair(user, num_users)?;
    if !(upsilon > 0.0) || !(sigma_h > 0.0) {
        return Err(domain(format!("upsilon and sigma_h must be positive (upsilon={upsilon}, sigma_h={sigma_h})")));
    }
    let prefactor = 0.5 * order_statistic_coefficient(user, num_users);
    Ok(prefactor * binomial_series(user, num_users, beta, upsilon, sigma_h))
}

fn binomial_series(user: usize, num_users: usize, beta: f64, upsilon: f64, sigma_h: f64) -> f64 {
    let x = beta * sigma_h;
    (0..user)
        .map(|j| {
            let z = (num_users - user + j + 1) as f64;
            let sign = alternating_sign(2 * (user as i64 - 1) - j as i64);
            binomial(user as u32 - 1, j as u32) * sign / z * one_minus_ratio(x, z * upsilon * upsilon)
        })
        .sum()
}

/// Probability mass of the ordered density that [`pep_quadrature`] drops.
const TAIL_MASS: f64 = 1e-17;

/// `∫_0^∞ f_(l)(ω) Q(βω/υ) dω`, integrated adaptively to absolute error
/// 1e-10 and relative error 1e-9.
pub fn pep_quadrature(user: usize, model: &ChannelModel, beta: f64, upsilon: f64) -> Result<f64> {
    model.check_user(user)?;
    if !(upsilon > 0.0) || !beta.is_finite() {
        return Err(domain(format!("need finite beta and positive upsilon (beta={beta}, upsilon={upsilon})")));
    }
    if beta == 0.0 {
        return Ok(0.5);
    }
    let (l, big_l, s2) = (user, model.num_users(), model.sigma_h_sq());
    let cut = model.magnitude_cutoff(TAIL_MASS);
    let s = model.sigma_h();
    let t = upsilon / beta.abs();
    let mut points = vec![0.0, cut];
    points.extend([0.25 * s, 0.5 * s, s, 2.0 * s]);
    points.extend([0.5 * t, t, 2.0 * t, 4.0 * t]);
    points.retain(|p| *p >= 0.0 && *p <= cut);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let ratio = beta / upsilon;
    let quad = AdaptiveQuad::new(1e-10, 1e-9);
    let integral = quad.integrate(
        |w| ordered_magnitude_pdf_unchecked(l, big_l, s2, w) * q_function(ratio * w),
        &points,
    )?;
    Ok(integral.value.clamp(0.0, 1.0))
}

/// Prior-delta patterns `(Δ_1, …, Δ_{l-1})` with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaWeights {
    user: usize,
    entries: Vec<(Vec<Symbol>, f64)>,
}

impl DeltaWeights {
    /// Weights must be non-negative and sum to 1 within 1e-12; every
    /// pattern must have `user - 1` entries.
    pub fn new(user: usize, entries: Vec<(Vec<Symbol>, f64)>) -> Result<Self> {
        if user == 0 {
            return Err(Error::IndexOutOfRange { index: 0, len: 0 });
        }
        if entries.is_empty() {
            return Err(Error::InvalidHypothesis("empty SIC weight table".into()));
        }
        if entries.iter().any(|(p, w)| p.len() != user - 1 || !(*w >= 0.0)) {
            return Err(Error::InvalidHypothesis(format!(
                "SIC weight table for user {user} has malformed patterns or negative weights"
            )));
        }
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidHypothesis(format!("SIC weights sum to {total}, not 1")));
        }
        Ok(Self { user, entries })
    }

    /// Single all-zero pattern (perfect cancellation).
    pub fn perfect(user: usize) -> Self {
        Self {
            user,
            entries: vec![(vec![Symbol::default(); user.saturating_sub(1)], 1.0)],
        }
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn entries(&self) -> &[(Vec<Symbol>, f64)] {
        &self.entries
    }

    /// Weight of the all-zero (correct cancellation) pattern.
    pub fn perfect_weight(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(p, _)| p.iter().all(|d| d.norm_sqr() == 0.0))
            .map(|(_, w)| w)
            .sum()
    }
}

/// How the residual SIC errors `Δ_k` of the stronger users are modelled.
#[derive(Debug, Clone, PartialEq)]
pub enum SicMode {
    /// All `Δ_k = 0`.
    Perfect,
    /// One caller-given pattern `(Δ_1, …, Δ_{l-1})`.
    Pattern(Vec<Symbol>),
    /// Patterns weighted by simulated occurrence frequencies.
    Weighted(DeltaWeights),
}

impl SicMode {
    fn patterns(&self, user: usize) -> Result<Vec<(Vec<Symbol>, f64)>> {
        match self {
            SicMode::Perfect => Ok(DeltaWeights::perfect(user).entries),
            SicMode::Pattern(p) => {
                if p.len() != user - 1 {
                    return Err(Error::InvalidHypothesis(format!(
                        "user {user} needs {} prior deltas, pattern has {}",
                        user - 1,
                        p.len()
                    )));
                }
                Ok(vec![(p.clone(), 1.0)])
            }
            SicMode::Weighted(w) => {
                if w.user != user {
                    return Err(Error::InvalidHypothesis(format!(
                        "SIC weights are for user {}, requested user {user}",
                        w.user
                    )));
                }
                Ok(w.entries.clone())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SicMode::Perfect => "perfect",
            SicMode::Pattern(_) => "pattern",
            SicMode::Weighted(_) => "weighted",
        }
    }
}

/// Memoizes `pep_quadrature` on exact `(β, υ)` bit patterns.
struct PepCache<'a> {
    user: usize,
    model: &'a ChannelModel,
    values: HashMap<(u64, u64), f64>,
}

impl<'a> PepCache<'a> {
    fn new(user: usize, model: &'a ChannelModel) -> Self {
        Self {
            user,
            model,
            values: HashMap::new(),
        }
    }

    fn get(&mut self, beta: f64, upsilon: f64) -> Result<f64> {
        let key = (beta.to_bits(), upsilon.to_bits());
        if let Some(v) = self.values.get(&key) {
            return Ok(*v);
        }
        let v = pep_quadrature(self.user, self.model, beta, upsilon)?;
        self.values.insert(key, v);
        Ok(v)
    }
}

fn enumeration_size(m: usize, exponent: usize) -> u128 {
    (m as u128).checked_pow(exponent as u32).unwrap_or(u128::MAX)
}

/// Visits every tuple in `alphabet^{len}` in lexicographic index order.
fn for_each_tuple(alphabet: &[Symbol], len: usize, mut f: impl FnMut(&[Symbol]) -> Result<()>) -> Result<()> {
    let m = alphabet.len();
    let mut idx = vec![0usize; len];
    let mut tuple: Vec<Symbol> = vec![alphabet[0]; len];
    loop {
        f(&tuple)?;
        let mut pos = len;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < m {
                tuple[pos] = alphabet[idx[pos]];
                break;
            }
            idx[pos] = 0;
            tuple[pos] = alphabet[0];
        }
    }
}

/// PEP of user `l` for the symbol pair `(tx, rx)`, averaged uniformly over
/// every interferer tuple of users `l+1..L` and over the SIC patterns of
/// `sic_mode`.
#[allow(clippy::too_many_arguments)]
pub fn average_pep(
    user: usize,
    tx: usize,
    rx: usize,
    constellation: &Constellation,
    alpha: &PowerAllocation,
    power: f64,
    model: &ChannelModel,
    sic_mode: &SicMode,
) -> Result<f64> {
    let matrix = pep_matrix_for_pairs(user, &[(tx, rx)], constellation, alpha, power, model, sic_mode)?;
    Ok(matrix[0])
}

/// `M×M` matrix of [`average_pep`] values for user `l`; the diagonal is 0.
pub fn pep_matrix(
    user: usize,
    constellation: &Constellation,
    alpha: &PowerAllocation,
    power: f64,
    model: &ChannelModel,
    sic_mode: &SicMode,
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = constellation.error_pairs().collect();
    let values = pep_matrix_for_pairs(user, &pairs, constellation, alpha, power, model, sic_mode)?;
    let m = constellation.len();
    let mut out = vec![vec![0.0; m]; m];
    for ((tx, rx), v) in pairs.into_iter().zip(values) {
        out[tx][rx] = v;
    }
    Ok(out)
}

fn pep_matrix_for_pairs(
    user: usize,
    pairs: &[(usize, usize)],
    constellation: &Constellation,
    alpha: &PowerAllocation,
    power: f64,
    model: &ChannelModel,
    sic_mode: &SicMode,
) -> Result<Vec<f64>> {
    model.check_user(user)?;
    check_alpha(alpha, model.num_users())?;
    let big_l = model.num_users();
    let size = enumeration_size(constellation.len(), big_l - user);
    if size > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            size,
            cap: ENUMERATION_CAP,
        });
    }
    let patterns = sic_mode.patterns(user)?;
    let mut cache = PepCache::new(user, model);
    let mut out = Vec::with_capacity(pairs.len());
    for &(tx, rx) in pairs {
        if tx == rx {
            return Err(Error::InvalidHypothesis(format!(
                "tx and rx are the same symbol ({tx}); not a pairwise error event"
            )));
        }
        let delta = symbol_difference(constellation.point(tx)?, constellation.point(rx)?);
        let ups = upsilon(model.noise_var(), delta);
        let mut total = 0.0;
        for_each_tuple(constellation.points(), big_l - user, |interferers| {
            for (pattern, weight) in &patterns {
                if *weight == 0.0 {
                    continue;
                }
                let beta = beta_from_parts(user, delta, interferers, pattern, alpha, power);
                total += weight * cache.get(beta, ups)?;
            }
            Ok(())
        })?;
        out.push(total / size as f64);
    }
    Ok(out)
}

/// `β_l` for every interferer tuple of users `l+1..L` (lexicographic order)
/// under the prior-delta pattern `prior_deltas`.
pub fn hypothesis_betas(
    user: usize,
    num_users: usize,
    delta: Symbol,
    prior_deltas: &[Symbol],
    constellation: &Constellation,
    alpha: &PowerAllocation,
    power: f64,
) -> Result<Vec<f64>> {
    check_user_pair(user, num_users)?;
    check_alpha(alpha, num_users)?;
    if prior_deltas.len() != user - 1 {
        return Err(Error::InvalidHypothesis(format!(
            "user {user} needs {} prior deltas, got {}",
            user - 1,
            prior_deltas.len()
        )));
    }
    let size = enumeration_size(constellation.len(), num_users - user);
    if size > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            size,
            cap: ENUMERATION_CAP,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    for_each_tuple(constellation.points(), num_users - user, |interferers| {
        out.push(beta_from_parts(user, delta, interferers, prior_deltas, alpha, power));
        Ok(())
    })?;
    Ok(out)
}
