//! Periodic Catmull–Rom interpolation on uniform grids (d = 1, 2).
//!
//! The interpolant is C¹, so its analytic gradient is continuous; flows built
//! on it are well posed.

/// Weights of the four stencil points at fractional offset `t ∈ [0, 1)`.
#[inline]
fn weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Derivatives of [`weights`] with respect to `t`.
#[inline]
fn dweights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ]
}

/// Uniform periodic sampling: `count` nodes per axis at `origin + j * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSamples {
    pub dim: usize,
    pub count: usize,
    pub origin: f64,
    pub spacing: f64,
    /// Row-major, axis 0 slowest.
    pub values: Vec<f64>,
}

impl PeriodicSamples {
    pub fn new(dim: usize, count: usize, origin: f64, spacing: f64, values: Vec<f64>) -> Self {
        assert!(dim == 1 || dim == 2, "interpolation supports d = 1, 2");
        assert_eq!(values.len(), count.pow(dim as u32));
        Self { dim, count, origin, spacing, values }
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.origin) / self.spacing;
        let fl = s.floor();
        let t = s - fl;
        let n = self.count as i64;
        let i = (fl as i64).rem_euclid(n) as usize;
        (i, t)
    }

    #[inline]
    fn wrap(&self, i: usize, k: i64) -> usize {
        (i as i64 + k).rem_euclid(self.count as i64) as usize
    }

    /// Piecewise-linear value (periodic).
    pub fn linear(&self, x: &[f64]) -> f64 {
        match self.dim {
            1 => {
                let (i, t) = self.locate(x[0]);
                let j = self.wrap(i, 1);
                (1.0 - t) * self.values[i] + t * self.values[j]
            }
            _ => {
                let (i, s) = self.locate(x[0]);
                let (j, t) = self.locate(x[1]);
                let i1 = self.wrap(i, 1);
                let j1 = self.wrap(j, 1);
                let n = self.count;
                let v = |a: usize, b: usize| self.values[a * n + b];
                (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j1)) + s * ((1.0 - t) * v(i1, j) + t * v(i1, j1))
            }
        }
    }

    /// Cubic value and gradient (periodic).
    pub fn cubic(&self, x: &[f64]) -> (f64, [f64; 2]) {
        let inv_h = 1.0 / self.spacing;
        match self.dim {
            1 => {
                let (i, t) = self.locate(x[0]);
                let w = weights(t);
                let dw = dweights(t);
                let mut v = 0.0;
                let mut g = 0.0;
                for k in 0..4 {
                    let s = self.values[self.wrap(i, k as i64 - 1)];
                    v += w[k] * s;
                    g += dw[k] * s;
                }
                (v, [g * inv_h, 0.0])
            }
            _ => {
                let (i, s) = self.locate(x[0]);
                let (j, t) = self.locate(x[1]);
                let wx = weights(s);
                let dwx = dweights(s);
                let wy = weights(t);
                let dwy = dweights(t);
                let n = self.count;
                let mut v = 0.0;
                let mut gx = 0.0;
                let mut gy = 0.0;
                for a in 0..4 {
                    let row = self.wrap(i, a as i64 - 1) * n;
                    let mut rv = 0.0;
                    let mut rd = 0.0;
                    for b in 0..4 {
                        let val = self.values[row + self.wrap(j, b as i64 - 1)];
                        rv += wy[b] * val;
                        rd += dwy[b] * val;
                    }
                    v += wx[a] * rv;
                    gx += dwx[a] * rv;
                    gy += wx[a] * rd;
                }
                (v, [gx * inv_h, gy * inv_h])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_nodes() {
        let n = 16;
        let vals: Vec<f64> = (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).sin()).collect();
        let s = PeriodicSamples::new(1, n, 0.0, 1.0 / n as f64, vals.clone());
        for (j, &v) in vals.iter().enumerate() {
            let (y, _) = s.cubic(&[j as f64 / n as f64]);
            assert!((y - v).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_gradient_converges() {
        let n = 256;
        let vals: Vec<f64> = (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).sin()).collect();
        let s = PeriodicSamples::new(1, n, 0.0, 1.0 / n as f64, vals);
        let x = 0.3137;
        let (v, g) = s.cubic(&[x]);
        assert!((v - (2.0 * PI * x).sin()).abs() < 1e-6);
        assert!((g[0] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-3);
    }

    #[test]
    fn two_dimensional_product() {
        let n = 64;
        let h = 1.0 / n as f64;
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 * h - 0.5, j as f64 * h - 0.5);
                vals.push((2.0 * PI * x).cos() * (2.0 * PI * y).sin());
            }
        }
        let s = PeriodicSamples::new(2, n, -0.5, h, vals);
        let (x, y) = (0.123, -0.321);
        let (v, g) = s.cubic(&[x + 3.0, y - 2.0]);
        assert!((v - (2.0 * PI * x).cos() * (2.0 * PI * y).sin()).abs() < 1e-4);
        assert!((g[1] - 2.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).cos()).abs() < 1e-2);
        let lin = s.linear(&[x, y]);
        assert!((lin - v).abs() < 1e-2);
    }
}
