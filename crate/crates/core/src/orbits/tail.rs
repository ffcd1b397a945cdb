use super::rest::distance;
use super::types::{HeteroclinicOrbit, TailRates};
use crate::{Error, Result};

pub const MIN_TAIL_SAMPLES: usize = 20;

/// Least-squares exponential rates of both tails inside the `basin`.
///
/// `frequencies` are the imaginary parts attached to the slowest departure
/// and approach modes; for spirals the fit window is cut to whole periods.
pub fn tail_rate(orbit: &HeteroclinicOrbit, basin: f64, predicted: (f64, f64), frequencies: (f64, f64)) -> Result<TailRates> {
    let tr = &orbit.trajectory;
    let times = tr.times();
    let states = tr.states();
    let n = tr.len();

    let d_minus: Vec<f64> = states.iter().map(|s| distance(s, &orbit.source_state)).collect();
    let d_plus: Vec<f64> = states.iter().map(|s| distance(s, &orbit.target_state)).collect();

    let head = d_minus.iter().take_while(|&&d| d < basin && d > 0.0).count();
    let tail = d_plus.iter().rev().take_while(|&&d| d < basin && d > 0.0).count();
    if head < MIN_TAIL_SAMPLES || tail < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "tails inside basin {basin:e} have {head} and {tail} samples, need {MIN_TAIL_SAMPLES}"
        )));
    }
    let sm = window(&times[..head], frequencies.0);
    let (gm, nm) = slope(&times[sm.0..sm.1], &d_minus[sm.0..sm.1]);
    let sp = window(&times[n - tail..], frequencies.1);
    let (gp, np) = slope(&times[n - tail + sp.0..n - tail + sp.1], &d_plus[n - tail + sp.0..n - tail + sp.1]);
    if nm < MIN_TAIL_SAMPLES || np < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData("tail window shorter than one oscillation period".into()));
    }
    Ok(TailRates {
        fitted_minus: gm,
        fitted_plus: -gp,
        predicted_minus: predicted.0,
        predicted_plus: predicted.1,
        samples_minus: nm,
        samples_plus: np,
    })
}

/// Index range covering a whole number of periods `2π/ω` from the first sample.
fn window(times: &[f64], omega: f64) -> (usize, usize) {
    let n = times.len();
    if omega <= 1e-12 || n < 2 {
        return (0, n);
    }
    let period = 2.0 * std::f64::consts::PI / omega;
    let (t0, t1) = (times[0], times[n - 1]);
    let span = (t1 - t0).abs();
    let whole = (span / period).floor() * period;
    if whole <= 0.0 {
        return (0, n);
    }
    let end = times.iter().position(|&t| (t - t0).abs() > whole + 1e-12).unwrap_or(n);
    (0, end)
}

/// Slope of `ln d` against `t`, and the number of samples used.
fn slope(t: &[f64], d: &[f64]) -> (f64, usize) {
    let pts: Vec<(f64, f64)> = t.iter().zip(d).filter(|(_, &d)| d > 0.0).map(|(&t, &d)| (t, d.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, pts.len());
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (sxy / sxx, pts.len())
}

/// Symmetric Hausdorff distance between two sampled curves, using
/// point-to-segment distances so that different samplings compare well.
pub fn curve_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    one_sided(a, b).max(one_sided(b, a))
}

fn one_sided(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().map(|p| to_polyline(p, b)).fold(0.0, f64::max)
}

fn to_polyline(p: &[f64], b: &[Vec<f64>]) -> f64 {
    if b.len() == 1 {
        return distance(p, &b[0]);
    }
    let mut best = f64::INFINITY;
    for w in b.windows(2) {
        let (s, e) = (&w[0], &w[1]);
        let mut se2 = 0.0;
        let mut sp = 0.0;
        for i in 0..p.len() {
            let d = e[i] - s[i];
            se2 += d * d;
            sp += (p[i] - s[i]) * d;
        }
        let lam = if se2 > 0.0 { (sp / se2).clamp(0.0, 1.0) } else { 0.0 };
        let mut d2 = 0.0;
        for i in 0..p.len() {
            let q = s[i] + lam * (e[i] - s[i]);
            d2 += (p[i] - q) * (p[i] - q);
        }
        best = best.min(d2);
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_pure_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let d: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let (g, n) = slope(&t, &d);
        assert!((g + 0.7).abs() < 1e-12);
        assert_eq!(n, 50);
    }

    #[test]
    fn window_cuts_whole_periods() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let (a, b) = window(&t, 2.0 * std::f64::consts::PI / 3.0);
        assert_eq!(a, 0);
        assert!((t[b - 1] - 9.0).abs() < 1e-9);
    }

    #[test]
    fn hausdorff_ignores_resampling() {
        let a: Vec<Vec<f64>> = (0..=10).map(|k| vec![k as f64 / 10.0, 0.0]).collect();
        let b: Vec<Vec<f64>> = (0..=3).map(|k| vec![k as f64 / 3.0, 0.0]).collect();
        assert!(curve_distance(&a, &b) < 1e-15);
        let c: Vec<Vec<f64>> = (0..=3).map(|k| vec![k as f64 / 3.0, 0.5]).collect();
        assert!((curve_distance(&a, &c) - 0.5).abs() < 1e-15);
    }
}
