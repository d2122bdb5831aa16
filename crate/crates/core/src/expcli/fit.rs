use serde::Serialize;

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `log y − (intercept + slope · log x)` per point, in input order.
    pub residuals: Vec<f64>,
    pub points: usize,
    /// Set when fewer than three usable points remain (non-positive values are dropped).
    pub degenerate: Option<String>,
}

impl RateFit {
    pub fn degenerate(reason: impl Into<String>, points: usize) -> Self {
        Self {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
            residuals: Vec::new(),
            points,
            degenerate: Some(reason.into()),
        }
    }

    /// Fit with optional per-point weights (e.g. inverse variances of `log y`).
    pub fn log_log(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Self {
        let pts: Vec<(f64, f64, f64)> = x
            .iter()
            .zip(y)
            .enumerate()
            .filter(|(_, (a, b))| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
            .map(|(i, (a, b))| (a.ln(), b.ln(), weights.map_or(1.0, |w| w[i])))
            .collect();
        if pts.len() < 3 {
            return Self::degenerate(format!("{} positive points, need 3", pts.len()), pts.len());
        }
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return Self::degenerate("all abscissae coincide", pts.len());
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let residuals: Vec<f64> = pts.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
        let ss_res: f64 = pts.iter().zip(&residuals).map(|(p, r)| p.2 * r * r).sum();
        let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
        Self {
            slope,
            intercept,
            r_squared,
            residuals,
            points: pts.len(),
            degenerate: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let f = RateFit::log_log(&x, &y, None);
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn too_few_points() {
        let f = RateFit::log_log(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], None);
        assert!(f.degenerate.is_some());
        assert_eq!(f.points, 2);
    }
}
