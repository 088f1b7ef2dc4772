//! Statistics applied to experiment outputs.

use rlabm_core::RngStream;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Trailing mean over `window` points; the first `window - 1` positions,
/// where the window is incomplete, are omitted.
pub fn rolling_mean(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "rolling window must be at least 1");
    if series.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(series.len() + 1 - window);
    let mut sum: f64 = series[..window].iter().sum();
    out.push(sum / window as f64);
    for i in window..series.len() {
        sum += series[i] - series[i - window];
        out.push(sum / window as f64);
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two points.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Pearson correlation, or `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "series lengths differ");
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise Pearson matrix of `series` (one row per agent). The diagonal is
/// 1; pairs involving a constant series get 0.
pub fn correlation_matrix(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = series.len();
    let constant: Vec<bool> = series
        .iter()
        .map(|s| s.iter().all(|&v| v == s.first().copied().unwrap_or(0.0)))
        .collect();
    let flat = constant.iter().filter(|&&c| c).count();
    if flat > 0 {
        log::debug!("{flat} of {n} action series are constant; their correlations are set to 0");
    }
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let r = if constant[i] || constant[j] {
                0.0
            } else {
                pearson(&series[i], &series[j]).unwrap_or(0.0)
            };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

/// Element-wise mean of equally sized matrices.
pub fn average_matrices(ms: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let Some(first) = ms.first() else {
        return Vec::new();
    };
    let mut out = vec![vec![0.0; first.len()]; first.len()];
    for m in ms {
        for (o, r) in out.iter_mut().zip(m) {
            for (a, b) in o.iter_mut().zip(r) {
                *a += b;
            }
        }
    }
    let k = ms.len() as f64;
    out.iter_mut().flatten().for_each(|v| *v /= k);
    out
}

pub fn max_off_diagonal_abs(m: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                best = best.max(v.abs());
            }
        }
    }
    best
}

/// Linear-interpolated quantile of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty data");
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Student-t confidence interval for the mean at `level` (e.g. 0.95).
pub fn mean_ci(xs: &[f64], level: f64) -> MeanCi {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return MeanCi {
            n,
            mean: m,
            std_err: f64::INFINITY,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
    }
    let se = std_dev(xs) / (n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("degrees of freedom are positive")
        .inverse_cdf(0.5 + level / 2.0);
    MeanCi {
        n,
        mean: m,
        std_err: se,
        lo: m - t * se,
        hi: m + t * se,
    }
}

/// Monte Carlo distribution of the statistic used for synchronization:
/// agents act independently with per-agent probabilities `rates` for
/// `seasons` seasons, correlation matrices of `runs` such runs are
/// averaged, and the largest off-diagonal magnitude is kept. Returns one
/// value per draw.
pub fn independent_null_max_corr(rates: &[f64], seasons: usize, runs: usize, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, "analysis/sync-null");
    (0..draws)
        .map(|_| {
            let ms: Vec<Vec<Vec<f64>>> = (0..runs)
                .map(|_| {
                    let series: Vec<Vec<f64>> = rates
                        .iter()
                        .map(|&p| {
                            (0..seasons)
                                .map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 })
                                .collect()
                        })
                        .collect();
                    correlation_matrix(&series)
                })
                .collect();
            max_off_diagonal_abs(&average_matrices(&ms))
        })
        .collect()
}

/// n, mean, sample std, min and max.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    Summary {
        n: xs.len(),
        mean: mean(xs),
        std: std_dev(xs),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}
