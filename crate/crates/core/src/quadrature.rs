//! Globally adaptive Gauss–Kronrod (G10/K21) integration on finite intervals.
//!
//! Semi-infinite integrals are handled by callers, who truncate at a point
//! where the remaining tail mass is provably below the target tolerance.

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

/// Stopping rule and budget for [`AdaptiveQuad::integrate`].
///
/// Integration stops once the summed error estimate is below `abs_tol` and
/// below `rel_tol · |value|`. Either test is skipped when its tolerance is
/// infinite.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveQuad {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveQuad {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl AdaptiveQuad {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[points[0], points[last]]`. Interior entries of
    /// `points` seed the initial partition; they must be non-decreasing.
    pub fn integrate<F>(&self, f: F, points: &[f64]) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        if points.len() < 2 {
            return Err(Error::Domain("need at least two integration points".into()));
        }
        if points.windows(2).any(|w| !(w[0] <= w[1])) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("integration points not sorted/finite: {points:?}")));
        }
        let span = points[points.len() - 1] - points[0];
        let mut segments: Vec<Segment> = points
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| kronrod21(&f, w[0], w[1]))
            .collect();
        if segments.is_empty() {
            return Ok(Integral {
                value: 0.0,
                abs_error: 0.0,
                intervals: 0,
            });
        }

        loop {
            let value: f64 = segments.iter().map(|s| s.value).sum();
            let error: f64 = segments.iter().map(|s| s.error).sum();
            if !value.is_finite() || !error.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite integrand sum (value {value}, error {error})"
                )));
            }
            if self.converged(value, error) {
                return Ok(Integral {
                    value,
                    abs_error: error,
                    intervals: segments.len(),
                });
            }
            if segments.len() >= self.max_intervals {
                return Err(Error::NumericalFailure(format!(
                    "quadrature did not converge in {} intervals (value {value:e}, error {error:e})",
                    self.max_intervals
                )));
            }
            let (worst, _) = segments
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
                .expect("non-empty");
            let seg = segments.swap_remove(worst);
            let mid = 0.5 * (seg.a + seg.b);
            if (seg.b - seg.a) <= 1e-14 * span.max(f64::MIN_POSITIVE) || mid <= seg.a || mid >= seg.b {
                return Err(Error::NumericalFailure(format!(
                    "interval [{:e}, {:e}] cannot be bisected further (error {error:e})",
                    seg.a, seg.b
                )));
            }
            segments.push(kronrod21(&f, seg.a, mid));
            segments.push(kronrod21(&f, mid, seg.b));
        }
    }

    fn converged(&self, value: f64, error: f64) -> bool {
        let abs_ok = !self.abs_tol.is_finite() || error <= self.abs_tol;
        let rel_ok = !self.rel_tol.is_finite() || error <= self.rel_tol * value.abs() || error == 0.0;
        abs_ok && rel_ok
    }
}

/// 21-point Kronrod rule with the QUADPACK error heuristic.
fn kronrod21<F>(f: &F, a: f64, b: f64) -> Segment
where
    F: Fn(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    let uflow = f64::MIN_POSITIVE;
    if res_abs > uflow / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}
