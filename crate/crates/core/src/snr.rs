//! Blind SNR estimation with the WADA method (Gamma-distributed speech
//! amplitudes plus Gaussian noise) and threshold filtering.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::audio::AudioBuffer;
use crate::math;

pub const MIN_DB: f64 = -20.0;
pub const MAX_DB: f64 = 100.0;

/// Shape parameter of the speech amplitude model.
pub const SPEECH_GAMMA_SHAPE: f64 = 0.4;

/// Samples with smaller magnitude are left out of the statistic.
pub const NEAR_ZERO: f64 = 1e-10;

const BUILTIN_TABLE: &str = include_str!("../data/wada_gain_table.tsv");

#[derive(Debug, Clone, PartialEq)]
pub enum SnrError {
    SilentInput,
    /// Table rows that are not strictly increasing in `g` or fail to parse.
    BadTable(String),
}

impl fmt::Display for SnrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnrError::SilentInput => f.write_str("silent input"),
            SnrError::BadTable(msg) => write!(f, "bad gain table: {msg}"),
        }
    }
}

impl core::error::Error for SnrError {}

/// SNR in dB, always within `[MIN_DB, MAX_DB]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SnrEstimate {
    pub db: f64,
}

impl SnrEstimate {
    pub fn new(db: f64) -> Self {
        let db = if db.is_nan() { MIN_DB } else { db.clamp(MIN_DB, MAX_DB) };
        Self { db }
    }
}

/// Maps the amplitude statistic `g` to SNR. Rows are strictly increasing in
/// both `g` and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    points: Vec<(f64, f64)>,
}

impl GainTable {
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self, SnrError> {
        if points.len() < 2 {
            return Err(SnrError::BadTable("need at least two rows".into()));
        }
        let monotone = points.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
        if !monotone {
            return Err(SnrError::BadTable("rows must increase strictly in g and snr".into()));
        }
        Ok(Self { points })
    }

    /// Parses `snr_db<TAB>g` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SnrError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |c: Option<&str>| c.and_then(|v| v.parse::<f64>().ok());
            match (parse(cols.next()), parse(cols.next())) {
                (Some(db), Some(g)) => points.push((g, db)),
                _ => return Err(SnrError::BadTable(alloc::format!("line {}", lineno + 1))),
            }
        }
        Self::from_points(points)
    }

    /// The committed table evaluated over -20..=100 dB in 1 dB steps.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("committed gain table is valid")
    }

    /// `(g, snr_db)` rows in increasing order.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Linear interpolation; `g` outside the table clamps to the end rows.
    pub fn snr_for(&self, g: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if g <= first.0 {
            return first.1;
        }
        if g >= last.0 {
            return last.1;
        }
        let idx = self.points.partition_point(|p| p.0 <= g);
        let (g0, d0) = self.points[idx - 1];
        let (g1, d1) = self.points[idx];
        d0 + (d1 - d0) * (g - g0) / (g1 - g0)
    }

    /// Evaluates the model statistic at each SNR in `MIN_DB..=MAX_DB` by
    /// nested quadrature.
    pub fn generate(step_db: f64) -> Result<Self, SnrError> {
        let model = WadaModel::new(SPEECH_GAMMA_SHAPE);
        let mut points = Vec::new();
        let mut db = MIN_DB;
        while db <= MAX_DB + 1e-9 {
            points.push((model.g_at(db), db));
            db += step_db;
        }
        Self::from_points(points)
    }
}

/// `g = ln(mean|x|) - mean(ln|x|)` over samples with `|x| >= NEAR_ZERO`.
pub fn amplitude_statistic(samples: &[f32]) -> Option<f64> {
    let (mut sum_abs, mut sum_log, mut n) = (0.0f64, 0.0f64, 0usize);
    for &s in samples {
        let a = math::abs(s as f64);
        if a >= NEAR_ZERO {
            sum_abs += a;
            sum_log += math::ln(a);
            n += 1;
        }
    }
    (n > 0).then(|| math::ln(sum_abs / n as f64) - sum_log / n as f64)
}

pub fn wada_snr(buffer: &AudioBuffer, table: &GainTable) -> Result<SnrEstimate, SnrError> {
    let g = amplitude_statistic(buffer.samples()).ok_or(SnrError::SilentInput)?;
    Ok(SnrEstimate::new(table.snr_for(g)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrThresholds {
    pub min_db: f64,
    pub max_db: f64,
}

impl Default for SnrThresholds {
    fn default() -> Self {
        Self { min_db: 20.0, max_db: 60.0 }
    }
}

impl SnrThresholds {
    pub fn is_valid(&self) -> bool {
        self.min_db < self.max_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrRejection {
    Low,
    High,
}

impl SnrRejection {
    pub fn reason(&self) -> &'static str {
        match self {
            SnrRejection::Low => "snr_low",
            SnrRejection::High => "snr_high",
        }
    }
}

/// Keeps records with `min_db <= db <= max_db`, preserving input order in
/// both outputs.
pub fn filter_by_snr<T>(
    records: Vec<(T, SnrEstimate)>,
    thresholds: &SnrThresholds,
) -> (Vec<(T, SnrEstimate)>, Vec<(T, SnrEstimate, SnrRejection)>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for (rec, est) in records {
        if est.db < thresholds.min_db {
            rejected.push((rec, est, SnrRejection::Low));
        } else if est.db > thresholds.max_db {
            rejected.push((rec, est, SnrRejection::High));
        } else {
            kept.push((rec, est));
        }
    }
    (kept, rejected)
}

/// Numerical evaluation of the generative model: `x = s + n` with `|s|`
/// Gamma(shape, 1) under a random sign and `n ~ N(0, sigma^2)`.
///
/// With `a = |s| / sigma` the statistic reduces to
/// `g = ln E[m(a)] - E[h(a)]`, where `m(a) = E|a + Z|` is closed form and
/// `h(a) = E ln|a + Z|` is tabulated once by quadrature.
struct WadaModel {
    shape: f64,
    h_grid: Vec<f64>,
}

const H_GRID_MAX: f64 = 8.0;
const H_GRID_STEP: f64 = 2e-3;

impl WadaModel {
    fn new(shape: f64) -> Self {
        let n = (H_GRID_MAX / H_GRID_STEP) as usize + 1;
        let h_grid = (0..n).map(|i| log_abs_shifted_normal(i as f64 * H_GRID_STEP)).collect();
        Self { shape, h_grid }
    }

    fn h(&self, a: f64) -> f64 {
        if a >= H_GRID_MAX {
            return log_abs_shifted_normal_asymptotic(a);
        }
        let pos = a / H_GRID_STEP;
        let i = math::floor(pos) as usize;
        let frac = pos - i as f64;
        self.h_grid[i] * (1.0 - frac) + self.h_grid[i + 1] * frac
    }

    fn g_at(&self, snr_db: f64) -> f64 {
        let k = self.shape;
        let signal_power = k * (k + 1.0);
        let sigma = math::sqrt(signal_power / math::powf(10.0, snr_db / 10.0));
        // E[f(G)] with G = exp(w / k): the density becomes exp(-G) e^w dw / Gamma(k + 1)
        let (w_lo, w_hi, dw) = (-30.0, k * math::ln(60.0), 1e-3);
        let n = ((w_hi - w_lo) / dw) as usize;
        let (mut mass, mut e_m, mut e_h) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let w = w_lo + i as f64 * dw;
            let gval = math::exp(w / k);
            let weight = math::exp(w - gval) * if i == 0 || i == n { 0.5 } else { 1.0 };
            let a = gval / sigma;
            mass += weight;
            e_m += weight * abs_shifted_normal_mean(a);
            e_h += weight * self.h(a);
        }
        math::ln(e_m / mass) - e_h / mass
    }
}

/// `E|a + Z|` for standard normal `Z`.
fn abs_shifted_normal_mean(a: f64) -> f64 {
    a * math::erf(a / core::f64::consts::SQRT_2)
        + math::sqrt(2.0 / PI) * math::exp(-a * a / 2.0)
}

fn std_normal_pdf(x: f64) -> f64 {
    math::exp(-x * x / 2.0) / math::sqrt(2.0 * PI)
}

/// `E ln|a + Z|`, integrated as `int_0^inf [phi(u-a) + phi(u+a)] ln u du`
/// after the substitution `u = e^v`, which removes the log singularity.
fn log_abs_shifted_normal(a: f64) -> f64 {
    let (v_lo, v_hi, dv) = (-40.0, math::ln(a + 12.0), 1e-2);
    let n = ((v_hi - v_lo) / dv) as usize;
    let mut acc = 0.0;
    for i in 0..=n {
        let v = v_lo + i as f64 * dv;
        let u = math::exp(v);
        let f = (std_normal_pdf(u - a) + std_normal_pdf(u + a)) * v * u;
        acc += if i == 0 || i == n { 0.5 * f } else { f };
    }
    acc * dv
}

/// Large-`a` expansion `ln a - sum_k (2k-1)!! / (2k a^{2k})`.
fn log_abs_shifted_normal_asymptotic(a: f64) -> f64 {
    let inv2 = 1.0 / (a * a);
    let mut term = 1.0;
    let mut double_fact = 1.0;
    let mut acc = math::ln(a);
    for k in 1..=6 {
        term *= inv2;
        acc -= double_fact * term / (2.0 * k as f64);
        double_fact *= (2 * k + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn h_matches_known_limits() {
        // E ln|Z| = -(gamma + ln 2) / 2
        let h0 = log_abs_shifted_normal(0.0);
        assert!((h0 + (EULER_GAMMA + core::f64::consts::LN_2) / 2.0).abs() < 1e-9, "{h0}");
        // the quadrature and the expansion agree where both are accurate
        for a in [8.0, 9.5, 11.0] {
            let q = log_abs_shifted_normal(a);
            let s = log_abs_shifted_normal_asymptotic(a);
            assert!((q - s).abs() < 1e-8, "{a}: {q} vs {s}");
        }
    }

    #[test]
    fn statistic_limits() {
        let model = WadaModel::new(SPEECH_GAMMA_SHAPE);
        // pure Gaussian: 0.5 ln(2/pi) + (gamma + ln 2) / 2
        let gauss = 0.5 * libm::log(2.0 / PI) + (EULER_GAMMA + core::f64::consts::LN_2) / 2.0;
        assert!((model.g_at(-60.0) - gauss).abs() < 1e-4);
        // clean speech: ln k - digamma(k); digamma(0.4) = -2.561384544585116
        let clean = libm::log(0.4) + 2.561_384_544_585_116;
        let hi = model.g_at(140.0);
        assert!(hi < clean && clean - hi < 5e-3, "{hi} vs {clean}");
    }

    #[test]
    fn builtin_table_spans_range() {
        let t = GainTable::builtin();
        assert_eq!(t.points().len(), 121);
        assert_eq!(t.points()[0].1, MIN_DB);
        assert_eq!(t.points()[120].1, MAX_DB);
        assert_eq!(t.snr_for(0.0), MIN_DB);
        assert_eq!(t.snr_for(10.0), MAX_DB);
    }

    #[test]
    fn table_rejects_non_monotone() {
        assert!(GainTable::from_points(vec![(0.5, 0.0), (0.4, 1.0)]).is_err());
        assert!(GainTable::parse("0 0.4\nx y\n").is_err());
    }

    #[test]
    fn silent_input_is_an_error() {
        let t = GainTable::builtin();
        assert_eq!(wada_snr(&AudioBuffer::silence(100, 16_000), &t), Err(SnrError::SilentInput));
    }

    #[test]
    fn filter_examples() {
        let recs = vec![("a", SnrEstimate::new(15.0)), ("b", SnrEstimate::new(25.0)), ("c", SnrEstimate::new(65.0))];
        let (kept, rejected) = filter_by_snr(recs, &SnrThresholds::default());
        assert_eq!(kept.iter().map(|r| r.0).collect::<Vec<_>>(), vec!["b"]);
        assert_eq!(rejected[0].0, "a");
        assert_eq!(rejected[0].2.reason(), "snr_low");
        assert_eq!(rejected[1].0, "c");
        assert_eq!(rejected[1].2.reason(), "snr_high");
    }

    #[test]
    fn boundaries_are_inclusive() {
        let recs = vec![(1, SnrEstimate::new(20.0)), (2, SnrEstimate::new(60.0))];
        let (kept, rejected) = filter_by_snr(recs, &SnrThresholds::default());
        assert_eq!(kept.len(), 2);
        assert!(rejected.is_empty());
    }
}
