//! Robust LOESS: local linear regression with tricube distance weights and
//! bisquare reweighting of outliers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoessError {
    #[error("need at least {need} valid points, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("span must lie in (0, 1], got {0}")]
    BadSpan(f64),
}

/// Result of a LOESS fit over an evenly indexed series.
#[derive(Debug, Clone)]
pub struct LoessFit {
    /// Smoothed value at every index (including invalid inputs).
    pub fitted: Vec<f64>,
    /// Bisquare robustness weight per index from the final pass; invalid
    /// inputs carry weight 0.
    pub robust_weights: Vec<f64>,
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn bisquare(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u;
        t * t
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Weighted linear fit evaluated at `x0`; falls back to the weighted mean
/// when the design is degenerate.
fn local_linear(xs: &[f64], ys: &[f64], ws: &[f64], x0: f64) -> f64 {
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        let w = ws[i];
        if w <= 0.0 {
            continue;
        }
        // Center on x0 for conditioning; the intercept is then the estimate.
        let x = xs[i] - x0;
        sw += w;
        swx += w * x;
        swy += w * ys[i];
        swxx += w * x * x;
        swxy += w * x * ys[i];
    }
    if sw <= 0.0 {
        return f64::NAN;
    }
    let denom = sw * swxx - swx * swx;
    if denom.abs() < 1e-12 * sw * sw.max(1.0) {
        return swy / sw;
    }
    let slope = (sw * swxy - swx * swy) / denom;
    let intercept = (swy - slope * swx) / sw;
    intercept
}

/// Fits a robust LOESS curve to `values` over indices `0..values.len()`.
///
/// `valid[i] == false` excludes index `i` as a data point; fitted values are
/// still produced there. The window holds `ceil(span * len)` nearest valid
/// points. Each robust pass reweights points by the bisquare of
/// residual / (6 * median absolute residual).
pub fn fit_series(
    values: &[f64],
    valid: &[bool],
    span: f64,
    robust_iters: usize,
) -> Result<LoessFit, LoessError> {
    assert_eq!(values.len(), valid.len());
    if !(span > 0.0 && span <= 1.0) {
        return Err(LoessError::BadSpan(span));
    }
    let n = values.len();
    let data: Vec<usize> = (0..n).filter(|&i| valid[i]).collect();
    if data.len() < 3 {
        return Err(LoessError::InsufficientData {
            need: 3,
            have: data.len(),
        });
    }
    let q = ((span * n as f64).ceil() as usize).clamp(3, data.len());

    let mut robust = vec![1.0f64; data.len()];
    let mut fitted = vec![0.0f64; n];

    for pass in 0..=robust_iters {
        for x0 in 0..n {
            // q nearest valid points around x0; `data` is sorted, so scan a
            // two-pointer window.
            let pos = data.partition_point(|&d| d < x0);
            let (mut lo, mut hi) = (pos, pos);
            while hi - lo < q {
                let take_left = if lo == 0 {
                    false
                } else if hi == data.len() {
                    true
                } else {
                    (x0 as f64 - data[lo - 1] as f64) <= (data[hi] as f64 - x0 as f64)
                };
                if take_left {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
            let window = &data[lo..hi];
            let h = window
                .iter()
                .map(|&d| (d as f64 - x0 as f64).abs())
                .fold(0.0, f64::max);
            let xs: Vec<f64> = window.iter().map(|&d| d as f64).collect();
            let ys: Vec<f64> = window.iter().map(|&d| values[d]).collect();
            let ws: Vec<f64> = window
                .iter()
                .enumerate()
                .map(|(k, &d)| {
                    let dist = (d as f64 - x0 as f64).abs();
                    let base = if h > 0.0 { tricube(dist / h) } else { 1.0 };
                    base * robust[lo + k]
                })
                .collect();
            let y = local_linear(&xs, &ys, &ws, x0 as f64);
            fitted[x0] = if y.is_nan() {
                // Window fully down-weighted; fall back to unweighted mean.
                ys.iter().sum::<f64>() / ys.len() as f64
            } else {
                y
            };
        }

        if pass == robust_iters {
            break;
        }
        let residuals: Vec<f64> = data.iter().map(|&d| values[d] - fitted[d]).collect();
        let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        let s = 6.0 * median(&mut abs);
        if s < 1e-9 {
            // Residual scale negligible: the fit has converged, keep the
            // current weights rather than resurrecting down-weighted points.
            break;
        }
        for (k, r) in residuals.iter().enumerate() {
            robust[k] = bisquare(r / s);
        }
    }

    let mut robust_weights = vec![0.0f64; n];
    for (k, &d) in data.iter().enumerate() {
        robust_weights[d] = robust[k];
    }
    Ok(LoessFit {
        fitted,
        robust_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_affine_inputs_for_every_span() {
        let n = 120;
        let values: Vec<f64> = (0..n).map(|i| 12.5 + 0.37 * i as f64).collect();
        let valid = vec![true; n];
        for span in [0.05, 0.15, 0.3, 0.5, 1.0] {
            for iters in [0, 2] {
                let fit = fit_series(&values, &valid, span, iters).unwrap();
                for i in 0..n {
                    assert!(
                        (fit.fitted[i] - values[i]).abs() < 1e-9,
                        "span={span} iters={iters} i={i}"
                    );
                    assert!((fit.robust_weights[i] - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_input_stays_constant() {
        let values = vec![42.0; 50];
        let valid = vec![true; 50];
        let fit = fit_series(&values, &valid, 0.2, 2).unwrap();
        assert!(fit.fitted.iter().all(|&v| (v - 42.0).abs() < 1e-9));
    }

    #[test]
    fn gross_outliers_down_weighted_and_line_recovered() {
        let n = 200;
        let truth: Vec<f64> = (0..n).map(|i| 30.0 + 0.2 * i as f64).collect();
        let mut values = truth.clone();
        // 5% of columns displaced far off the line.
        let outliers = [13usize, 49, 80, 81, 120, 155, 156, 170, 190, 199];
        for &i in &outliers {
            values[i] += 50.0;
        }
        let valid = vec![true; n];
        let fit = fit_series(&values, &valid, 0.15, 2).unwrap();
        for i in 0..n {
            assert!(
                (fit.fitted[i] - truth[i]).abs() < 1.0,
                "i={i}: fitted {} truth {}",
                fit.fitted[i],
                truth[i]
            );
        }
        for &i in &outliers {
            assert!(
                fit.robust_weights[i] < 0.1,
                "outlier {i} kept weight {}",
                fit.robust_weights[i]
            );
        }
    }

    #[test]
    fn insufficient_data_rejected() {
        let values = vec![1.0, 2.0, 3.0, 4.0];
        let valid = vec![true, false, false, true];
        assert!(matches!(
            fit_series(&values, &valid, 0.5, 0),
            Err(LoessError::InsufficientData { .. })
        ));
    }

    #[test]
    fn invalid_points_do_not_influence_fit() {
        let n = 60;
        let mut values: Vec<f64> = (0..n).map(|i| 5.0 + 0.1 * i as f64).collect();
        let mut valid = vec![true; n];
        values[30] = 500.0;
        valid[30] = false;
        let fit = fit_series(&values, &valid, 0.3, 0).unwrap();
        assert!((fit.fitted[30] - (5.0 + 3.0)).abs() < 1e-9);
        assert_eq!(fit.robust_weights[30], 0.0);
    }
}
