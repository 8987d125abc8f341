//! Gaussian-process synthetic price series with periodic, RBF and noise
//! kernels, calibrated to target summary statistics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calendar::{Commodity, MonthSeries, MonthStamp};
use crate::error::{Error, Result};

/// First month of every synthetic series.
pub const SYNTH_START: MonthStamp = MonthStamp::ym(2000, 1);
pub const DEFAULT_LENGTH: usize = 156;
pub const DEFAULT_PER_COMMODITY: usize = 100;
/// Resampling attempts before giving up on a strictly positive path.
pub const MAX_ATTEMPTS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub sigma_p2: f64,
    pub ell_p: f64,
    pub sigma_r2: f64,
    /// Months.
    pub ell_r: f64,
    pub sigma_n2: f64,
    pub mu: f64,
    pub period: f64,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let vars = [self.sigma_p2, self.sigma_r2, self.sigma_n2];
        if vars.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Generation(format!("negative or non-finite variance in {self:?}")));
        }
        if !(self.ell_p > 0.0 && self.ell_r > 0.0 && self.period > 0.0) {
            return Err(Error::Generation(format!("non-positive length scale in {self:?}")));
        }
        if !self.mu.is_finite() {
            return Err(Error::Generation("non-finite mean".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Periodic,
    Rbf,
    Noise,
    Combined,
}

pub fn kernel_eval(spec: &KernelSpec, kind: KernelKind, t: i64, u: i64) -> f64 {
    let d = (t - u).abs() as f64;
    let periodic = || {
        let s = (PI * d / spec.period).sin();
        spec.sigma_p2 * (-2.0 * s * s / (spec.ell_p * spec.ell_p)).exp()
    };
    let rbf = || spec.sigma_r2 * (-d * d / (2.0 * spec.ell_r * spec.ell_r)).exp();
    let noise = || if t == u { spec.sigma_n2 } else { 0.0 };
    match kind {
        KernelKind::Periodic => periodic(),
        KernelKind::Rbf => rbf(),
        KernelKind::Noise => noise(),
        KernelKind::Combined => periodic() + rbf() + noise(),
    }
}

/// Covariance of the combined kernel over months `0..t`. Exactly symmetric:
/// the kernel depends only on `|i − j|`.
pub fn gram_matrix(spec: &KernelSpec, t: usize) -> DMatrix<f64> {
    let lag: Vec<f64> = (0..t as i64)
        .map(|d| kernel_eval(spec, KernelKind::Combined, d, 0))
        .collect();
    DMatrix::from_fn(t, t, |i, j| lag[i.abs_diff(j)])
}

/// Lower Cholesky factor of `k + jitter·I`, with jitter starting at
/// `1e-8·trace/T` and growing tenfold up to `1e-4·trace/T`.
pub fn jittered_cholesky(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let trace = k.trace();
    if trace == 0.0 {
        return Ok((DMatrix::zeros(n, n), 0.0));
    }
    let base = trace / n as f64;
    let mut jitter = 1e-8 * base;
    while jitter <= 1e-4 * base * (1.0 + 1e-9) {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Generation(format!(
        "covariance not positive definite even with jitter {:.3e}",
        1e-4 * base
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub values: MonthSeries,
    pub spec: KernelSpec,
    pub seed: u64,
    /// Draws taken until the path was strictly positive.
    pub attempts: u32,
}

fn rng_for(seed: u64, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    rng
}

fn draw(l: &DMatrix<f64>, mu: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = l.nrows();
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
    (l * z).iter().map(|v| mu + v).collect()
}

fn sample_with_factor(spec: &KernelSpec, l: &DMatrix<f64>, seed: u64) -> Result<SyntheticSeries> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(seed, attempt);
        let v = draw(l, spec.mu, &mut rng);
        if v.iter().all(|x| *x > 0.0) {
            return Ok(SyntheticSeries {
                values: MonthSeries::new(SYNTH_START, v)?,
                spec: *spec,
                seed,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::Generation(format!(
        "no strictly positive path in {MAX_ATTEMPTS} draws (seed {seed}); try a larger mean level than {}",
        spec.mu
    )))
}

/// One draw `μ + Lz`, resampled on successive streams of `seed` until every
/// value is positive.
pub fn sample_gp(spec: &KernelSpec, t: usize, seed: u64) -> Result<SyntheticSeries> {
    spec.validate()?;
    if t == 0 {
        return Err(Error::Generation("series length must be positive".into()));
    }
    let (l, _) = jittered_cholesky(&gram_matrix(spec, t))?;
    sample_with_factor(spec, &l, seed)
}

// ---------------------------------------------------------------------------
// Statistics

pub fn lag1_autocorrelation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let den: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    if den == 0.0 {
        return 0.0;
    }
    let num: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    num / den
}

/// Range of the one-way month-of-year effects divided by the series mean.
/// `first_month` is the calendar month of `v[0]`.
pub fn seasonal_variation(v: &[f64], first_month: u32) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut sums = [0.0; 12];
    let mut counts = [0usize; 12];
    for (i, x) in v.iter().enumerate() {
        let m = (first_month as usize - 1 + i) % 12;
        sums[m] += x;
        counts[m] += 1;
    }
    let effects: Vec<f64> = (0..12)
        .filter(|m| counts[*m] > 0)
        .map(|m| sums[m] / counts[m] as f64 - mean)
        .collect();
    let hi = effects.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = effects.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / mean
}

/// Standard deviation of monthly log returns scaled by √12. Requires
/// positive values.
pub fn annualized_volatility(v: &[f64]) -> f64 {
    let r: Vec<f64> = v.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = r.len() as f64;
    if r.len() < 2 {
        return 0.0;
    }
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var * 12.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub autocorr: f64,
    pub seasonal: f64,
    pub volatility: f64,
}

impl SeriesStats {
    pub fn of(v: &[f64], first_month: u32) -> Self {
        SeriesStats {
            autocorr: lag1_autocorrelation(v),
            seasonal: seasonal_variation(v, first_month),
            volatility: annualized_volatility(v),
        }
    }
}

// ---------------------------------------------------------------------------
// Calibration

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Distance outside the range in units of its width.
    fn miss(&self, x: f64) -> f64 {
        let w = (self.hi - self.lo).max(1e-12);
        if x < self.lo {
            (self.lo - x) / w
        } else if x > self.hi {
            (x - self.hi) / w
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub autocorr: Range,
    /// Fraction of the series mean.
    pub seasonal: Range,
    pub volatility: Range,
    /// Allowed RBF length scale in months.
    pub trend_length: Range,
    pub draws: usize,
    pub length: usize,
    /// Refinement rounds over all coordinates.
    pub rounds: usize,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            autocorr: Range::new(0.85, 0.95),
            seasonal: Range::new(0.15, 0.25),
            volatility: Range::new(0.20, 0.40),
            trend_length: Range::new(24.0, 60.0),
            draws: 200,
            length: DEFAULT_LENGTH,
            rounds: 6,
        }
    }
}

/// Summary of simulated statistics for one spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub spec: KernelSpec,
    pub median: SeriesStats,
    /// Share of draws with each statistic in range.
    pub autocorr_rate: f64,
    pub seasonal_rate: f64,
    pub volatility_rate: f64,
    /// Share of draws with all three in range.
    pub joint_rate: f64,
}

impl CalibrationFit {
    /// Whether every median statistic and the trend length fall in range.
    pub fn satisfies(&self, t: &CalibrationTargets) -> bool {
        t.autocorr.contains(self.median.autocorr)
            && t.seasonal.contains(self.median.seasonal)
            && t.volatility.contains(self.median.volatility)
            && t.trend_length.contains(self.spec.ell_r)
    }

    fn loss(&self, t: &CalibrationTargets) -> f64 {
        t.autocorr.miss(self.median.autocorr)
            + t.seasonal.miss(self.median.seasonal)
            + t.volatility.miss(self.median.volatility)
            - self.joint_rate
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Statistics of `draws` raw draws (no positivity resampling; paths with a
/// non-positive value count as misses everywhere).
pub fn sample_statistics(spec: &KernelSpec, t: usize, draws: usize, seed: u64) -> Result<Vec<Option<SeriesStats>>> {
    spec.validate()?;
    let (l, _) = jittered_cholesky(&gram_matrix(spec, t))?;
    Ok((0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u32);
            let v = draw(&l, spec.mu, &mut rng);
            v.iter()
                .all(|x| *x > 0.0)
                .then(|| SeriesStats::of(&v, SYNTH_START.month()))
        })
        .collect())
}

pub fn evaluate_spec(spec: &KernelSpec, targets: &CalibrationTargets, seed: u64) -> Result<CalibrationFit> {
    let stats = sample_statistics(spec, targets.length, targets.draws, seed)?;
    let n = stats.len().max(1) as f64;
    let ok: Vec<&SeriesStats> = stats.iter().flatten().collect();
    let rate = |f: &dyn Fn(&SeriesStats) -> bool| ok.iter().filter(|s| f(s)).count() as f64 / n;
    let big = f64::INFINITY;
    let med = |f: fn(&SeriesStats) -> f64| {
        // Failed draws sort last so a mostly negative spec shows a bad median.
        let mut v: Vec<f64> = ok.iter().map(|s| f(s)).collect();
        v.resize(stats.len(), big);
        median(v)
    };
    Ok(CalibrationFit {
        spec: *spec,
        median: SeriesStats {
            autocorr: med(|s| s.autocorr),
            seasonal: med(|s| s.seasonal),
            volatility: med(|s| s.volatility),
        },
        autocorr_rate: rate(&|s| targets.autocorr.contains(s.autocorr)),
        seasonal_rate: rate(&|s| targets.seasonal.contains(s.seasonal)),
        volatility_rate: rate(&|s| targets.volatility.contains(s.volatility)),
        joint_rate: rate(&|s| {
            targets.autocorr.contains(s.autocorr)
                && targets.seasonal.contains(s.seasonal)
                && targets.volatility.contains(s.volatility)
        }),
    })
}

/// Default mean level per commodity ($/bu for grains, cents/lb for cotton).
pub fn default_mean(c: Commodity) -> f64 {
    match c {
        Commodity::Corn => 4.0,
        Commodity::Soybeans => 10.0,
        Commodity::Wheat => 5.5,
        Commodity::Cotton => 65.0,
    }
}

/// Starting point of the search, scaled to `mu`.
pub fn initial_spec(mu: f64) -> KernelSpec {
    KernelSpec {
        sigma_p2: (0.065 * mu).powi(2),
        ell_p: 1.0,
        sigma_r2: (0.25 * mu).powi(2),
        ell_r: 36.0,
        sigma_n2: (0.055 * mu).powi(2),
        mu,
        period: 12.0,
    }
}

fn with_coord(spec: &KernelSpec, k: usize, value: f64) -> KernelSpec {
    let mut s = *spec;
    match k {
        0 => s.sigma_p2 = value,
        1 => s.ell_p = value,
        2 => s.sigma_r2 = value,
        3 => s.ell_r = value,
        _ => s.sigma_n2 = value,
    }
    s
}

fn coord(spec: &KernelSpec, k: usize) -> f64 {
    match k {
        0 => spec.sigma_p2,
        1 => spec.ell_p,
        2 => spec.sigma_r2,
        3 => spec.ell_r,
        _ => spec.sigma_n2,
    }
}

/// Coordinate-wise multiplicative grid refinement starting from `start`.
/// Coordinates listed in `frozen` (0 σ_p², 1 ℓ_p, 2 σ_r², 3 ℓ_r, 4 σ_n²) keep
/// their starting value. Statistics use common random numbers across
/// candidates so comparisons are paired.
pub fn calibrate_from(
    start: KernelSpec,
    targets: &CalibrationTargets,
    frozen: &[usize],
    seed: u64,
) -> Result<CalibrationFit> {
    let clamp_ell_r = |x: f64| x.clamp(targets.trend_length.lo, targets.trend_length.hi);
    let mut best = evaluate_spec(&with_coord(&start, 3, clamp_ell_r(start.ell_r)), targets, seed)?;
    let mut best_loss = best.loss(targets);
    let mut factor: f64 = 2.0;
    for _ in 0..targets.rounds {
        for k in (0..5).filter(|k| !frozen.contains(k)) {
            let base = coord(&best.spec, k);
            for step in [1.0 / factor, factor.sqrt().recip(), factor.sqrt(), factor] {
                let mut v = base * step;
                if k == 3 {
                    v = clamp_ell_r(v);
                }
                if v == base || v <= 0.0 {
                    continue;
                }
                let cand = evaluate_spec(&with_coord(&best.spec, k, v), targets, seed)?;
                let loss = cand.loss(targets);
                if loss < best_loss {
                    best = cand;
                    best_loss = loss;
                }
            }
        }
        if best.satisfies(targets) && best.joint_rate >= 0.9 {
            break;
        }
        factor = factor.sqrt();
    }
    Ok(best)
}

/// Calibrates a spec for mean level `mu`, failing with the nearest miss when
/// the median statistics cannot all be brought into range.
pub fn calibrate(mu: f64, targets: &CalibrationTargets, seed: u64) -> Result<CalibrationFit> {
    let fit = calibrate_from(initial_spec(mu), targets, &[], seed)?;
    if fit.satisfies(targets) {
        Ok(fit)
    } else {
        Err(Error::Calibration(format!(
            "nearest miss: median autocorr {:.3} (target {:.2}-{:.2}), seasonal {:.3} ({:.2}-{:.2}), \
             volatility {:.3} ({:.2}-{:.2}); spec {:?}",
            fit.median.autocorr,
            targets.autocorr.lo,
            targets.autocorr.hi,
            fit.median.seasonal,
            targets.seasonal.lo,
            targets.seasonal.hi,
            fit.median.volatility,
            targets.volatility.lo,
            targets.volatility.hi,
            fit.spec
        )))
    }
}

// ---------------------------------------------------------------------------
// Benchmark

pub fn series_seed(global: u64, commodity: Commodity, id: u32) -> u64 {
    let d = Sha256::digest(format!("synth/{global}/{commodity}/{id}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub commodity: Commodity,
    pub series_id: u32,
    pub seed: u64,
    pub attempts: u32,
    pub length: usize,
    pub mu: f64,
    pub sigma_p2: f64,
    pub ell_p: f64,
    pub sigma_r2: f64,
    pub ell_r: f64,
    pub sigma_n2: f64,
    pub period: f64,
}

impl ManifestEntry {
    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            sigma_p2: self.sigma_p2,
            ell_p: self.ell_p,
            sigma_r2: self.sigma_r2,
            ell_r: self.ell_r,
            sigma_n2: self.sigma_n2,
            mu: self.mu,
            period: self.period,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    /// Ordered by commodity, then series id.
    pub series: Vec<(Commodity, u32, SyntheticSeries)>,
    pub manifest: Vec<ManifestEntry>,
}

impl Benchmark {
    pub fn for_commodity(&self, c: Commodity) -> impl Iterator<Item = (u32, &SyntheticSeries)> {
        self.series.iter().filter(move |s| s.0 == c).map(|s| (s.1, &s.2))
    }
}

pub fn generate_benchmark(
    specs: &BTreeMap<Commodity, KernelSpec>,
    n_per_commodity: usize,
    length: usize,
    seed: u64,
) -> Result<Benchmark> {
    let mut cells = Vec::new();
    for (c, spec) in specs {
        spec.validate()?;
        let (l, _) = jittered_cholesky(&gram_matrix(spec, length))?;
        for id in 1..=n_per_commodity as u32 {
            cells.push((*c, id, *spec, l.clone()));
        }
    }
    let series: Vec<(Commodity, u32, SyntheticSeries)> = cells
        .par_iter()
        .map(|(c, id, spec, l)| {
            sample_with_factor(spec, l, series_seed(seed, *c, *id)).map(|s| (*c, *id, s))
        })
        .collect::<Result<_>>()?;
    let manifest = series
        .iter()
        .map(|(c, id, s)| ManifestEntry {
            commodity: *c,
            series_id: *id,
            seed: s.seed,
            attempts: s.attempts,
            length: s.values.len(),
            mu: s.spec.mu,
            sigma_p2: s.spec.sigma_p2,
            ell_p: s.spec.ell_p,
            sigma_r2: s.spec.sigma_r2,
            ell_r: s.spec.ell_r,
            sigma_n2: s.spec.sigma_n2,
            period: s.spec.period,
        })
        .collect();
    Ok(Benchmark { series, manifest })
}

/// Regenerates one series from its manifest entry.
pub fn regenerate(entry: &ManifestEntry) -> Result<SyntheticSeries> {
    sample_gp(&entry.spec(), entry.length, entry.seed)
}

pub fn write_manifest<W: Write>(entries: &[ManifestEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in entries {
        w.serialize(e)
            .map_err(|e| Error::Generation(format!("writing manifest: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(())
}

pub fn read_manifest<R: Read>(src: R) -> Result<Vec<ManifestEntry>> {
    csv::Reader::from_reader(src)
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                path: "<manifest>".into(),
                line: i as u64 + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Per-commodity synthetic file: the normalized columns preceded by a
/// `series_id` column; every row is a price.
pub fn write_series_file<'a, W: Write, I>(commodity: Commodity, series: I, out: W) -> Result<()>
where
    I: IntoIterator<Item = (u32, &'a MonthSeries)>,
{
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Generation(format!("writing series: {e}"));
    w.write_record(["series_id", "commodity", "year", "month", "field_kind", "value", "vintage"])
        .map_err(err)?;
    for (id, s) in series {
        for (stamp, v) in s.iter() {
            w.write_record([
                id.to_string(),
                commodity.label().to_string(),
                stamp.year().to_string(),
                stamp.month().to_string(),
                "price_received".to_string(),
                v.to_string(),
                String::new(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<series>", e))?;
    Ok(())
}

pub fn read_series_file<R: Read>(src: R) -> Result<Vec<(u32, Commodity, MonthSeries)>> {
    let mut points: BTreeMap<(u32, Commodity), Vec<(MonthStamp, f64)>> = BTreeMap::new();
    for (i, row) in csv::Reader::from_reader(src).records().enumerate() {
        let bad = |m: String| Error::Parse {
            path: "<series>".into(),
            line: i as u64 + 2,
            message: m,
        };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() < 6 {
            return Err(bad(format!("expected 7 columns, found {}", row.len())));
        }
        let id: u32 = row[0].parse().map_err(|_| bad("bad series id".into()))?;
        let c: Commodity = row[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let y: i32 = row[2].parse().map_err(|_| bad("bad year".into()))?;
        let m: u32 = row[3].parse().map_err(|_| bad("bad month".into()))?;
        let v: f64 = row[5].parse().map_err(|_| bad("bad value".into()))?;
        points
            .entry((id, c))
            .or_default()
            .push((MonthStamp::new(y, m).map_err(|e| bad(e.to_string()))?, v));
    }
    points
        .into_iter()
        .map(|((id, c), p)| Ok((id, c, MonthSeries::from_points(p)?)))
        .collect()
}

pub fn save_series_file<'a, I>(commodity: Commodity, series: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = (u32, &'a MonthSeries)>,
{
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_series_file(commodity, series, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> KernelSpec {
        initial_spec(5.0)
    }

    #[test]
    fn kernel_diagonal_and_period() {
        let s = spec();
        assert_eq!(kernel_eval(&s, KernelKind::Periodic, 3, 3), s.sigma_p2);
        assert!((kernel_eval(&s, KernelKind::Periodic, 0, 12) - s.sigma_p2).abs() < 1e-12 * s.sigma_p2);
        assert_eq!(kernel_eval(&s, KernelKind::Noise, 1, 2), 0.0);
        let g = gram_matrix(&s, 1);
        assert_eq!(g[(0, 0)], s.sigma_p2 + s.sigma_r2 + s.sigma_n2);
    }

    #[test]
    fn zero_covariance_is_constant() {
        let mut s = spec();
        s.sigma_p2 = 0.0;
        s.sigma_r2 = 0.0;
        s.sigma_n2 = 0.0;
        let x = sample_gp(&s, 24, 9).unwrap();
        assert!(x.values.values().iter().all(|v| *v == 5.0));
    }

    #[test]
    fn deterministic() {
        let a = sample_gp(&spec(), 60, 11).unwrap();
        let b = sample_gp(&spec(), 60, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_gp(&spec(), 60, 12).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn statistics_on_known_series() {
        let v: Vec<f64> = (0..24).map(|i| if i % 12 == 0 { 12.0 } else { 10.0 }).collect();
        let mean = (2.0 * 12.0 + 22.0 * 10.0) / 24.0;
        assert!((seasonal_variation(&v, 1) - 2.0 / mean).abs() < 1e-12);
        assert_eq!(annualized_volatility(&[1.0, 1.0, 1.0]), 0.0);
        let alt = [1.0, -1.0, 1.0, -1.0];
        assert!((lag1_autocorrelation(&alt) - (-0.75)).abs() < 1e-12);
    }

    #[test]
    fn manifest_round_trip() {
        let specs: BTreeMap<_, _> = [(Commodity::Corn, initial_spec(4.0))].into();
        let b = generate_benchmark(&specs, 3, 36, 1).unwrap();
        let mut buf = Vec::new();
        write_manifest(&b.manifest, &mut buf).unwrap();
        let back = read_manifest(buf.as_slice()).unwrap();
        assert_eq!(back, b.manifest);
        for (e, (_, _, s)) in back.iter().zip(&b.series) {
            assert_eq!(&regenerate(e).unwrap(), s);
        }
    }
}
