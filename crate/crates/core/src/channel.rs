//! Ordered Rayleigh channel model.
//!
//! Each user sees `h ~ CN(0, 2σ_h²)`, so `|h|` is Rayleigh with parameter
//! `σ_h²` (`f(x) = x/σ_h² · exp(-x²/2σ_h²)`) and `E|h|² = 2σ_h²`. Users are
//! indexed 1..=L by ascending channel magnitude: user 1 is the far user.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::special::{alternating_sign, binomial, order_statistic_coefficient};

/// Default Rayleigh parameter: `h ~ CN(0, 2)`.
pub const DEFAULT_SIGMA_H_SQ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    num_users: usize,
    sigma_h_sq: f64,
    noise_var: f64,
}

impl ChannelModel {
    pub fn new(num_users: usize, sigma_h_sq: f64, noise_var: f64) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::InvalidConfig("at least one user required".into()));
        }
        if !(sigma_h_sq > 0.0 && sigma_h_sq.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma_h_sq must be positive, got {sigma_h_sq}")));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise variance must be positive, got {noise_var}")));
        }
        Ok(Self {
            num_users,
            sigma_h_sq,
            noise_var,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn sigma_h_sq(&self) -> f64 {
        self.sigma_h_sq
    }

    pub fn sigma_h(&self) -> f64 {
        self.sigma_h_sq.sqrt()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Same fading, different noise level.
    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(self.num_users, self.sigma_h_sq, noise_var)
    }

    /// Mean instantaneous SNR `E|h|²/σ_n²` of an unordered user.
    pub fn mean_snr(&self) -> f64 {
        2.0 * self.sigma_h_sq / self.noise_var
    }

    pub(crate) fn check_user(&self, user: usize) -> Result<()> {
        if user == 0 || user > self.num_users {
            return Err(Error::IndexOutOfRange {
                index: user,
                len: self.num_users,
            });
        }
        Ok(())
    }

    /// Magnitude beyond which the density of any ordered user carries less
    /// than `mass` probability. Uses `P(|h|_(l) > w) ≤ L·exp(-w²/2σ_h²)`.
    pub fn magnitude_cutoff(&self, mass: f64) -> f64 {
        let ln = (self.num_users as f64 / mass).ln().max(1.0);
        (2.0 * self.sigma_h_sq * ln).sqrt()
    }
}

/// Rayleigh density with parameter `σ²`.
#[inline]
pub fn rayleigh_pdf(sigma_sq: f64, omega: f64) -> f64 {
    if omega < 0.0 {
        return 0.0;
    }
    omega / sigma_sq * (-omega * omega / (2.0 * sigma_sq)).exp()
}

/// Density of the `user`-th smallest of `L` i.i.d. Rayleigh magnitudes.
pub fn ordered_magnitude_pdf(user: usize, model: &ChannelModel, omega: f64) -> Result<f64> {
    model.check_user(user)?;
    if omega.is_nan() {
        return Err(domain("omega is NaN"));
    }
    Ok(ordered_magnitude_pdf_unchecked(user, model.num_users, model.sigma_h_sq, omega))
}

/// `L!/((l-1)!(L-l)!) f(ω) F(ω)^{l-1} (1-F(ω))^{L-l}` without argument checks.
#[inline]
pub(crate) fn ordered_magnitude_pdf_unchecked(user: usize, num_users: usize, sigma_sq: f64, omega: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let x = omega * omega / (2.0 * sigma_sq);
    let survival = (-x).exp();
    let cdf = -(-x).exp_m1();
    order_statistic_coefficient(user, num_users)
        * (omega / sigma_sq)
        * survival
        * cdf.powi(user as i32 - 1)
        * survival.powi((num_users - user) as i32)
}

/// Ordered density of the instantaneous SNR `γ = |h|²/σ_n²` with mean
/// `gamma_bar`, written as the binomial expansion
/// `A_l Σ_j C(l-1,j) (-1)^j (1/γ̄) exp(-γ/γ̄)^{j+L-l+1}`.
pub fn ordered_snr_pdf(user: usize, num_users: usize, gamma_bar: f64, gamma: f64) -> Result<f64> {
    if user == 0 || user > num_users {
        return Err(Error::IndexOutOfRange {
            index: user,
            len: num_users,
        });
    }
    if !(gamma_bar > 0.0) {
        return Err(domain(format!("gamma_bar must be positive, got {gamma_bar}")));
    }
    if gamma < 0.0 {
        return Ok(0.0);
    }
    let a = order_statistic_coefficient(user, num_users);
    let e = (-gamma / gamma_bar).exp();
    let sum: f64 = (0..user)
        .map(|j| {
            let z = (j + num_users - user + 1) as i32;
            binomial(user as u32 - 1, j as u32) * alternating_sign(j as i64) * e.powi(z)
        })
        .sum();
    Ok(a * sum / gamma_bar)
}

/// Channel magnitudes of one realization, ascending; entry `l-1` belongs to user `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedGains(Vec<f64>);

impl OrderedGains {
    pub fn gains(&self) -> &[f64] {
        &self.0
    }

    pub fn user(&self, user: usize) -> Option<f64> {
        user.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Fills `out` with `out.len()` complex gains `CN(0, 2σ_h²)` sorted by
/// ascending magnitude. Ties keep draw order.
#[inline]
pub fn draw_ordered_gains<R: Rng + ?Sized>(rng: &mut R, sigma_h: f64, out: &mut [Complex64]) {
    for h in out.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *h = Complex64::new(sigma_h * re, sigma_h * im);
    }
    out.sort_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()));
}

/// Seeded stream of ordered channel realizations.
#[derive(Debug, Clone)]
pub struct OrderedChannelSampler {
    model: ChannelModel,
    rng: ChaCha8Rng,
    buf: Vec<Complex64>,
}

impl OrderedChannelSampler {
    pub fn new(model: ChannelModel, seed: u64) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: vec![Complex64::default(); model.num_users],
        }
    }

    pub fn next_gains(&mut self) -> OrderedGains {
        draw_ordered_gains(&mut self.rng, self.model.sigma_h(), &mut self.buf);
        OrderedGains(self.buf.iter().map(|h| h.norm()).collect())
    }
}

/// One ordered realization; identical for identical `(model, seed)`.
pub fn sample_ordered_channels(model: &ChannelModel, seed: u64) -> OrderedGains {
    OrderedChannelSampler::new(*model, seed).next_gains()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::AdaptiveQuad;

    fn model(l: usize, s2: f64) -> ChannelModel {
        ChannelModel::new(l, s2, 1.0).unwrap()
    }

    fn integrate_pdf(user: usize, m: &ChannelModel) -> f64 {
        let cut = m.magnitude_cutoff(1e-18);
        let s = m.sigma_h();
        let pts = [0.0, 0.25 * s, 0.5 * s, s, 2.0 * s, cut];
        AdaptiveQuad::new(1e-13, 1e-13)
            .integrate(|w| ordered_magnitude_pdf(user, m, w).unwrap(), &pts)
            .unwrap()
            .value
    }

    #[test]
    fn single_user_is_rayleigh() {
        for s2 in [0.5, 1.0, 2.3] {
            let m = model(1, s2);
            let s = s2.sqrt();
            let v = ordered_magnitude_pdf(1, &m, s).unwrap();
            assert!((v - (-0.5f64).exp() / s).abs() < 1e-15);
        }
    }

    #[test]
    fn min_of_three_is_rayleigh_with_third_parameter() {
        let s2 = 0.7;
        let m = model(3, s2);
        for i in 0..200 {
            let w = 0.01 * f64::from(i);
            let ordered = ordered_magnitude_pdf(1, &m, w).unwrap();
            let cdf = 1.0 - (-w * w / (2.0 * s2)).exp();
            let direct = 3.0 * rayleigh_pdf(s2, w) * (1.0 - cdf).powi(2);
            let reduced = rayleigh_pdf(s2 / 3.0, w);
            assert!((ordered - direct).abs() < 1e-13);
            assert!((ordered - reduced).abs() < 1e-13);
        }
        // numerical cross-check of the reduction: second moment = 2σ²/3
        let s = m.sigma_h();
        let second = AdaptiveQuad::new(1e-13, 1e-13)
            .integrate(
                |w| w * w * ordered_magnitude_pdf(1, &m, w).unwrap(),
                &[0.0, s, m.magnitude_cutoff(1e-18)],
            )
            .unwrap()
            .value;
        assert!((second - 2.0 * s2 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn densities_integrate_to_one() {
        for big_l in 1..=4 {
            for l in 1..=big_l {
                for s2 in [0.5, 1.0] {
                    let total = integrate_pdf(l, &model(big_l, s2));
                    assert!((total - 1.0).abs() < 1e-8, "l={l} L={big_l}: {total}");
                }
            }
        }
    }

    #[test]
    fn ordered_mixture_recovers_parent() {
        let s2 = 1.0;
        for big_l in 1..=5 {
            let m = model(big_l, s2);
            for i in 0..100 {
                let w = 0.05 * f64::from(i);
                let sum: f64 = (1..=big_l).map(|l| ordered_magnitude_pdf(l, &m, w).unwrap()).sum();
                assert!((sum - big_l as f64 * rayleigh_pdf(s2, w)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn user_out_of_range() {
        let m = model(3, 1.0);
        assert!(matches!(ordered_magnitude_pdf(0, &m, 1.0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(ordered_magnitude_pdf(4, &m, 1.0), Err(Error::IndexOutOfRange { .. })));
        assert!(ordered_snr_pdf(4, 3, 1.0, 1.0).is_err());
        assert!(ordered_snr_pdf(1, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn snr_pdf_single_user_is_exponential() {
        for gb in [0.5, 10.0, 1e3] {
            for i in 0..50 {
                let g = gb * 0.1 * f64::from(i);
                let v = ordered_snr_pdf(1, 1, gb, g).unwrap();
                assert!((v - (-g / gb).exp() / gb).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn snr_pdf_matches_order_statistic_form() {
        let gb = 2.5;
        for i in 0..400 {
            let g = 0.05 * f64::from(i);
            let f = (-g / gb).exp() / gb;
            let cdf = 1.0 - (-g / gb).exp();
            let direct = 6.0 * f * cdf * (1.0 - cdf);
            let v = ordered_snr_pdf(2, 3, gb, g).unwrap();
            assert!((v - direct).abs() < 1e-12, "γ={g}: {v} vs {direct}");
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn snr_pdf_integrates_to_one_and_is_non_negative() {
        for big_l in 1..=4 {
            for l in 1..=big_l {
                let gb = 3.0;
                let cut = gb * (big_l as f64 * 1e18).ln();
                let total = AdaptiveQuad::new(1e-13, 1e-13)
                    .integrate(|g| ordered_snr_pdf(l, big_l, gb, g).unwrap(), &[0.0, gb, cut])
                    .unwrap()
                    .value;
                assert!((total - 1.0).abs() < 1e-8, "l={l} L={big_l}: {total}");
                for i in 0..2000 {
                    let g = 0.01 * f64::from(i);
                    assert!(ordered_snr_pdf(l, big_l, gb, g).unwrap() >= -1e-15);
                }
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_sorted() {
        let m = model(4, 1.0);
        let a = sample_ordered_channels(&m, 42);
        let b = sample_ordered_channels(&m, 42);
        assert_eq!(a, b);
        assert_ne!(a, sample_ordered_channels(&m, 43));
        assert!(a.gains().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.user(1), Some(a.gains()[0]));
        assert_eq!(a.user(0), None);
    }

    #[test]
    fn sampled_second_moments() {
        let trials = 1_000_000;
        for (big_l, s2) in [(3usize, 0.5f64), (1, 0.5)] {
            let m = model(big_l, s2);
            let mut sampler = OrderedChannelSampler::new(m, 7);
            let mean = (0..trials).map(|_| sampler.next_gains().gains()[0].powi(2)).sum::<f64>() / trials as f64;
            let expected = 2.0 * s2 / big_l as f64;
            assert!(((mean - expected) / expected).abs() < 0.01, "L={big_l}: {mean} vs {expected}");
        }
    }

    #[test]
    fn sampled_histogram_matches_ordered_density() {
        let big_l = 3;
        let m = model(big_l, 1.0);
        let trials = 1_000_000usize;
        let width = 0.05;
        let bins = 80;
        let mut counts = vec![vec![0u64; bins]; big_l];
        let mut sampler = OrderedChannelSampler::new(m, 11);
        for _ in 0..trials {
            let g = sampler.next_gains();
            for (l, &w) in g.gains().iter().enumerate() {
                let b = (w / width) as usize;
                if b < bins {
                    counts[l][b] += 1;
                }
            }
        }
        let quad = AdaptiveQuad::new(1e-12, 1e-12);
        for l in 1..=big_l {
            let mut worst = 0.0f64;
            let mut peak = 0.0f64;
            for b in 0..bins {
                let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
                let mass = quad
                    .integrate(|w| ordered_magnitude_pdf(l, &m, w).unwrap(), &[lo, hi])
                    .unwrap()
                    .value;
                let expected = mass / width;
                let observed = counts[l - 1][b] as f64 / trials as f64 / width;
                worst = worst.max((observed - expected).abs());
                peak = peak.max(expected);
            }
            assert!(worst / peak < 0.02, "user {l}: sup-norm {}", worst / peak);
        }
    }
}
