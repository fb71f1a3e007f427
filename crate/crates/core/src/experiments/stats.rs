//! Summary statistics and log-log slope fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn summarize(xs: &[f64]) -> Summary {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Summary {
        mean: mean(xs),
        median: quantile_sorted(&s, 0.5),
        q10: quantile_sorted(&s, 0.1),
        q90: quantile_sorted(&s, 0.9),
        min: s[0],
        max: s[s.len() - 1],
    }
}

/// `ln(mean(exp(xs)))` without overflow.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// Ordinary least squares of `ln y` on `ln x` over the points with `x` in
/// `[lo, hi]`.
pub fn fit_loglog_slope(points: &[(f64, f64)], lo: f64, hi: f64) -> Result<SlopeFit> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .copied()
        .collect();
    if sel.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} points in range, need 4", sel.len())));
    }
    if sel.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::DegenerateFit("non-positive coordinate".into()));
    }
    let n = sel.len() as f64;
    let lx: Vec<f64> = sel.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = sel.iter().map(|p| p.1.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-12 * (1.0 + mx * mx) {
        return Err(Error::DegenerateFit("x values not distinct".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if sel.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        stderr,
        intercept,
        r2,
        n: sel.len(),
        x_lo: sel.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        x_hi: sel.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_power_laws() {
        let sq: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64, (k * k) as f64)).collect();
        let f = fit_loglog_slope(&sq, 0.0, 100.0).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let inv: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64, 3.0 / (k as f64).sqrt())).collect();
        assert!((fit_loglog_slope(&inv, 0.0, 100.0).unwrap().slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let same = vec![(2.0, 1.0); 5];
        assert!(matches!(fit_loglog_slope(&same, 0.0, 10.0), Err(Error::DegenerateFit(_))));
        let few = vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert!(fit_loglog_slope(&few, 0.0, 10.0).is_err());
        let neg = vec![(1.0, 1.0), (2.0, -2.0), (3.0, 3.0), (4.0, 4.0)];
        assert!(fit_loglog_slope(&neg, 0.0, 10.0).is_err());
    }

    #[test]
    fn noisy_power_law_within_two_stderr() {
        let mut rng = stream("fit", 0, Purpose::Custom(0));
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut hits = 0;
        for _ in 0..200 {
            let pts: Vec<(f64, f64)> = (0..20)
                .map(|k| {
                    let x = 2f64.powi(k);
                    (x, 5.0 * x.powf(-0.3) * Distribution::<f64>::sample(&noise, &mut rng).exp())
                })
                .collect();
            let f = fit_loglog_slope(&pts, 0.0, f64::INFINITY).unwrap();
            if (f.slope + 0.3).abs() <= 2.0 * f.stderr {
                hits += 1;
            }
        }
        // Nominal coverage of a 2-stderr interval is about 95%.
        assert!(hits >= 180, "{hits}");
    }

    #[test]
    fn summaries() {
        let s = summarize(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!((s.mean, s.median, s.min, s.max), (2.5, 2.5, 1.0, 4.0));
        assert!((log_mean_exp(&[1000.0, 1000.0]) - 1000.0).abs() < 1e-12);
        assert!((log_mean_exp(&[0.0, 2f64.ln()]) - 1.5f64.ln()).abs() < 1e-15);
    }
}
