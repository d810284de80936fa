//! Summary statistics and heavy-tail diagnostics of off-diagonal similarities.

use std::io::Write;

use serde::Serialize;

use super::SimilarityMatrix;
use crate::error::{Error, Result};

/// Bin count for both the logarithmic density histogram and the linear
/// histogram behind the rank-frequency fit.
pub const HISTOGRAM_BINS: usize = 50;

const MIN_POSITIVE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub percentile_95: f64,
    pub percentile_99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Magnitude of the slope of log(density) against log(bin center).
    pub exponent_alpha: f64,
    pub loglog_r2: f64,
    /// R² of log(bin frequency) against log(frequency rank).
    pub rank_frequency_r2: f64,
    /// R² of log(value) against log(value rank) over every positive value.
    pub rank_value_r2: f64,
    pub positive_values: usize,
    pub loglog_bins: usize,
    pub rank_bins: usize,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics over an arbitrary sample.
pub fn summarize(values: &[f64]) -> Result<DistributionStats> {
    if values.is_empty() {
        return Err(Error::invalid("no values to summarize"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(DistributionStats {
        count: sorted.len(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        median: percentile(&sorted, 0.5),
        std_dev: var.sqrt(),
        percentile_95: percentile(&sorted, 0.95),
        percentile_99: percentile(&sorted, 0.99),
    })
}

/// Statistics over every off-diagonal entry (both `(i, j)` and `(j, i)`).
pub fn similarity_stats(matrix: &SimilarityMatrix) -> Result<DistributionStats> {
    if matrix.len() < 2 {
        return Err(Error::invalid("similarity statistics need at least two terms"));
    }
    summarize(&matrix.off_diagonal())
}

struct LineFit {
    slope: f64,
    r2: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if x.len() < 2 || sxx == 0.0 {
        return Err(Error::Degenerate("regression needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LineFit { slope, r2 })
}

fn bin_of(position: f64, bins: usize) -> usize {
    ((position * bins as f64) as usize).min(bins - 1)
}

/// Heavy-tail fits over a sample; only strictly positive values take part.
///
/// The log-log fit regresses log density (count per unit width) on log bin
/// center across [`HISTOGRAM_BINS`] logarithmic bins, dropping empty bins.
/// The rank-frequency fit ranks the nonempty bins of an equal-width histogram
/// by count and regresses log count on log rank.
pub fn fit_heavy_tail(values: &[f64]) -> Result<PowerLawFit> {
    let mut positive: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.len() < MIN_POSITIVE {
        return Err(Error::Degenerate(format!(
            "need at least {MIN_POSITIVE} positive values, got {}",
            positive.len()
        )));
    }
    positive.sort_by(|a, b| b.total_cmp(a));
    let max = positive[0];
    let min = positive[positive.len() - 1];
    if min == max {
        return Err(Error::Degenerate("all positive values are equal".into()));
    }
    let total = positive.len() as f64;

    let (log_min, log_max) = (min.ln(), max.ln());
    let span = log_max - log_min;
    let mut log_counts = [0usize; HISTOGRAM_BINS];
    let mut lin_counts = [0usize; HISTOGRAM_BINS];
    for &v in &positive {
        log_counts[bin_of((v.ln() - log_min) / span, HISTOGRAM_BINS)] += 1;
        lin_counts[bin_of((v - min) / (max - min), HISTOGRAM_BINS)] += 1;
    }

    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (i, &count) in log_counts.iter().enumerate().filter(|(_, &c)| c > 0) {
        let lo = log_min + span * i as f64 / HISTOGRAM_BINS as f64;
        let hi = log_min + span * (i + 1) as f64 / HISTOGRAM_BINS as f64;
        let width = hi.exp() - lo.exp();
        lx.push((lo + hi) / 2.0);
        ly.push((count as f64 / (total * width)).ln());
    }
    let loglog = least_squares(&lx, &ly)?;

    let mut frequencies: Vec<usize> = lin_counts.iter().copied().filter(|&c| c > 0).collect();
    frequencies.sort_unstable_by(|a, b| b.cmp(a));
    let rx: Vec<f64> = (1..=frequencies.len()).map(|r| (r as f64).ln()).collect();
    let ry: Vec<f64> = frequencies.iter().map(|&c| (c as f64).ln()).collect();
    let rank_frequency = least_squares(&rx, &ry)?;

    let vx: Vec<f64> = (1..=positive.len()).map(|r| (r as f64).ln()).collect();
    let vy: Vec<f64> = positive.iter().map(|v| v.ln()).collect();
    let rank_value = least_squares(&vx, &vy)?;

    Ok(PowerLawFit {
        exponent_alpha: loglog.slope.abs(),
        loglog_r2: loglog.r2,
        rank_frequency_r2: rank_frequency.r2,
        rank_value_r2: rank_value.r2,
        positive_values: positive.len(),
        loglog_bins: lx.len(),
        rank_bins: frequencies.len(),
    })
}

/// [`fit_heavy_tail`] over the matrix's off-diagonal entries.
pub fn heavy_tail_fit(matrix: &SimilarityMatrix) -> Result<PowerLawFit> {
    fit_heavy_tail(&matrix.off_diagonal())
}

/// `(value, fraction of sample <= value)` at each distinct value.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot build a CDF from no values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == v => last.1 = fraction,
            _ => points.push((v, fraction)),
        }
    }
    Ok(points)
}

/// Writes the off-diagonal CDF as `similarity\tcumulative_fraction` rows.
///
/// With `resolution = Some(r)`, values are rounded up to the grid `k / r`
/// first, which bounds the output to `r + 1` rows.
pub fn export_cdf(
    matrix: &SimilarityMatrix,
    resolution: Option<usize>,
    mut out: impl Write,
) -> Result<Vec<(f64, f64)>> {
    if matrix.is_empty() {
        return Err(Error::invalid("empty similarity matrix"));
    }
    let mut values = if matrix.len() == 1 {
        matrix.values().to_vec()
    } else {
        matrix.off_diagonal()
    };
    if let Some(r) = resolution.filter(|&r| r > 0) {
        let r = r as f64;
        values.iter_mut().for_each(|v| *v = (*v * r).ceil() / r);
    }
    let points = empirical_cdf(&values)?;
    writeln!(out, "similarity\tcumulative_fraction")?;
    for (v, f) in &points {
        writeln!(out, "{v}\t{f}")?;
    }
    Ok(points)
}
