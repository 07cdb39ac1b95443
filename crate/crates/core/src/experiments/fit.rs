use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least-squares line `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero when the fit has no residual degrees of freedom.
    pub stderr: f64,
}

pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("a slope fit needs at least two paired points".into()));
    }
    crate::error::ensure_finite("fit data", xs.iter().chain(ys))?;
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("fit abscissae must not all coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit { slope, intercept, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x).collect();
        let fit = fit_slope(&xs, &ys).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.5).abs() < 1e-14);
        assert!(fit.stderr < 1e-14);
    }

    #[test]
    fn noisy_line_stderr() {
        // Residuals ±1 alternate, so SSR = 4 and Sxx = 5.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, -1.0, 1.0];
        let fit = fit_slope(&xs, &ys).unwrap();
        assert!(fit.slope.abs() < 1e-14);
        assert!((fit.stderr - (4.0f64 / 2.0 / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_slope(&[1.0], &[1.0]).is_err());
        assert!(fit_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
