//! Histogram chi-square comparison of residual noise against candidate
//! noise families.

use crate::error::{Error, Result};
use crate::noise::{sample_noise, NoiseKind, RngStream};

pub const DEFAULT_BINS: usize = 64;

/// Ordering reported for real model residuals in the reference experiment,
/// best fit first, with the statistics it reported.
pub const REFERENCE_ORDERING: [(&str, f64); 4] = [
    ("brownian", 0.1541),
    ("gaussian", 0.1763),
    ("laplacian", 0.5372),
    ("poisson", 0.8688),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub bins: usize,
    /// Fixed `[lo, hi]`; `None` pools both sample sets' min and max.
    pub range: Option<(f64, f64)>,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            bins: DEFAULT_BINS,
            range: None,
        }
    }
}

impl HistogramSpec {
    pub fn with_bins(bins: usize) -> Self {
        HistogramSpec { bins, range: None }
    }

    fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Parameter(format!("need at least 2 bins, got {}", self.bins)));
        }
        if let Some((lo, hi)) = self.range {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Parameter(format!("invalid histogram range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Relative frequencies on equal-width bins over `[lo, hi]`; values outside
/// the range are dropped, `hi` falls in the last bin.
pub fn histogram(xs: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &x in xs {
        if !(lo..=hi).contains(&x) {
            continue;
        }
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = xs.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// `sum (O_i - E_i)^2 / E_i` over bins with `E_i > 0`, on relative frequencies.
pub fn chi_square(observed: &[f64], expected: &[f64], spec: &HistogramSpec) -> Result<f64> {
    spec.validate()?;
    if observed.is_empty() || expected.is_empty() {
        return Err(Error::Parameter("chi-square needs nonempty samples".into()));
    }
    if observed.iter().chain(expected).any(|x| !x.is_finite()) {
        return Err(Error::Parameter("chi-square samples must be finite".into()));
    }
    let (lo, hi) = match spec.range {
        Some(r) => r,
        None => {
            let (a, b) = min_max(observed);
            let (c, d) = min_max(expected);
            let (lo, hi) = (a.min(c), b.max(d));
            if lo == hi {
                // all samples equal: a single point mass on both sides
                return Ok(0.0);
            }
            (lo, hi)
        }
    };
    let o = histogram(observed, spec.bins, lo, hi);
    let e = histogram(expected, spec.bins, lo, hi);
    let mut any = false;
    let stat = o
        .iter()
        .zip(&e)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| {
            any = true;
            (o - e) * (o - e) / e
        })
        .sum();
    if !any {
        return Err(Error::DegenerateFit);
    }
    Ok(stat)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitEntry {
    pub kind: NoiseKind,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Candidates sorted ascending by statistic (best fit first).
    pub ranking: Vec<FitEntry>,
    pub observed_samples: usize,
    pub candidate_samples: usize,
    pub bins: usize,
}

impl FitReport {
    pub fn best(&self) -> &FitEntry {
        &self.ranking[0]
    }

    pub fn statistic(&self, name: &str) -> Option<f64> {
        self.ranking
            .iter()
            .find(|e| e.kind.name() == name)
            .map(|e| e.statistic)
    }

    /// CSV with header `rank,family,chi_square,samples,bins`, followed by a
    /// `#` comment line giving the reference ordering.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,family,chi_square,samples,bins\n");
        for (i, e) in self.ranking.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                e.kind.name(),
                e.statistic,
                self.observed_samples,
                self.bins
            ));
        }
        let reference: Vec<String> = REFERENCE_ORDERING
            .iter()
            .map(|(name, stat)| format!("{name}={stat}"))
            .collect();
        out.push_str(&format!("# reference ordering for model residuals: {}\n", reference.join(" < ")));
        out
    }
}

/// Brownian(sigma), Gaussian, Laplacian and Poisson.
pub fn default_candidates(sigma: f64) -> Vec<NoiseKind> {
    vec![
        NoiseKind::Brownian { sigma },
        NoiseKind::Gaussian,
        NoiseKind::Laplacian,
        NoiseKind::poisson(),
    ]
}

/// Ranks the default candidate families against `residuals`.
pub fn noise_fit_report(residuals: &[f64], sigma: f64, spec: &HistogramSpec, rng: &RngStream) -> Result<FitReport> {
    noise_fit_report_with(residuals, &default_candidates(sigma), spec, rng)
}

/// Ranks `candidates`; candidate `i` draws a matched-size sample from
/// substream `i` of `rng`.
pub fn noise_fit_report_with(
    residuals: &[f64],
    candidates: &[NoiseKind],
    spec: &HistogramSpec,
    rng: &RngStream,
) -> Result<FitReport> {
    spec.validate()?;
    if residuals.len() < 10 * spec.bins {
        return Err(Error::Parameter(format!(
            "{} samples is fewer than 10 per bin ({} bins)",
            residuals.len(),
            spec.bins
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Parameter("no candidate families".into()));
    }
    let mut ranking = candidates
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut stream = rng.substream(rng.stream_id().wrapping_add(1 + i as u64));
            let sample: Vec<f64> = sample_noise(kind, &[residuals.len()], &mut stream)?;
            Ok(FitEntry {
                kind,
                statistic: chi_square(residuals, &sample, spec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranking.sort_by(|a, b| a.statistic.total_cmp(&b.statistic));
    Ok(FitReport {
        ranking,
        observed_samples: residuals.len(),
        candidate_samples: residuals.len(),
        bins: spec.bins,
    })
}
