//! Small statistics toolbox shared by the estimators.
//!
//! Every reduction here is sequential over an already ordered slice, so
//! parallel producers that collect in index order get bitwise-stable results.

/// Neumaier compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean (`std / sqrt(n)`, unbiased std).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    /// Chi-square per degree of freedom (weighted fits) or residual variance (unweighted).
    pub chi2_per_dof: f64,
}

/// Least-squares line `y = a + b x`.
///
/// With `sigma = Some(..)` the fit is weighted by `1/sigma^2` and parameter
/// errors come from the weights; otherwise they come from the residual scatter.
pub fn fit_line(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|s| 1.0 / (s * s)).collect(),
        None => vec![1.0; n],
    };
    let sw = compensated_sum(w.iter().copied());
    let sx = compensated_sum(w.iter().zip(x).map(|(w, x)| w * x));
    let sy = compensated_sum(w.iter().zip(y).map(|(w, y)| w * y));
    let xm = sx / sw;
    let ym = sy / sw;
    let sxx = compensated_sum(w.iter().zip(x).map(|(w, x)| w * (x - xm) * (x - xm)));
    if sxx <= 0.0 {
        return None;
    }
    let sxy = compensated_sum(
        w.iter()
            .zip(x.iter().zip(y))
            .map(|(w, (x, y))| w * (x - xm) * (y - ym)),
    );
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2 = compensated_sum(
        w.iter()
            .zip(x.iter().zip(y))
            .map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2)),
    );
    let dof = n.saturating_sub(2);
    let chi2_per_dof = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let scale = match sigma {
        Some(_) => 1.0,
        None => chi2_per_dof,
    };
    let slope_var = scale / sxx;
    let intercept_var = scale * (1.0 / sw + xm * xm / sxx);
    Some(LineFit {
        intercept,
        slope,
        intercept_stderr: intercept_var.max(0.0).sqrt(),
        slope_stderr: slope_var.max(0.0).sqrt(),
        chi2_per_dof,
    })
}

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Median; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Round to 9 significant digits (the output precision of every report).
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|x| 0.5 - 2.0 * x).collect();
        let fit = fit_line(&x, &y, None).unwrap();
        assert!((fit.intercept - 0.5).abs() < 1e-14);
        assert!((fit.slope + 2.0).abs() < 1e-14);
        assert!(fit.intercept_stderr < 1e-12);
    }

    #[test]
    fn wilson_zero_successes() {
        let (lo, hi) = wilson_interval(0, 2000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.003);
    }

    #[test]
    fn sig9_rounds() {
        assert_eq!(sig9(0.346_573_590_279_972_6), 0.346_573_590);
        assert_eq!(sig9(-3.328_427_124_746_19), -3.328_427_12);
    }
}
