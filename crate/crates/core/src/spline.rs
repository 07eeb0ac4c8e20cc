//! Natural cubic splines on unit-spaced nodes and their tensor-product use
//! for upsampling grids.

use crate::error::{invalid, Result};

/// Natural cubic spline through `(i, y[i])`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    y: Vec<f64>,
    /// Second derivatives at the nodes; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(invalid("spline needs at least one node"));
        }
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1])
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for j in 0..k {
                let i = j + 1;
                let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
                if j == 0 {
                    c[j] = 1.0 / 4.0;
                    d[j] = rhs / 4.0;
                } else {
                    let w = 4.0 - c[j - 1];
                    c[j] = 1.0 / w;
                    d[j] = (rhs - d[j - 1]) / w;
                }
            }
            m[k] = d[k - 1];
            for j in (0..k - 1).rev() {
                m[j + 1] = d[j] - c[j] * m[j + 2];
            }
        }
        Ok(Self { y: y.to_vec(), m })
    }

    /// Value at `x`; outside the node range the spline continues linearly,
    /// consistent with zero curvature at the ends.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let last = (n - 1) as f64;
        if x <= 0.0 {
            return self.y[0] + x * self.slope(0, 0.0);
        }
        if x >= last {
            return self.y[n - 1] + (x - last) * self.slope(n - 2, 1.0);
        }
        let i = (x.floor() as usize).min(n - 2);
        let t = x - i as f64;
        let u = 1.0 - t;
        u * self.y[i] + t * self.y[i + 1] + ((u * u * u - u) * self.m[i] + (t * t * t - t) * self.m[i + 1]) / 6.0
    }

    fn slope(&self, i: usize, t: f64) -> f64 {
        let u = 1.0 - t;
        self.y[i + 1] - self.y[i] + ((1.0 - 3.0 * u * u) * self.m[i] + (3.0 * t * t - 1.0) * self.m[i + 1]) / 6.0
    }
}

/// Upsamples a row-major `rows x cols` grid by `factor` along each axis.
/// Output sample `(i, j)` sits at node coordinate `(i / factor, j / factor)`,
/// so every input node is reproduced at `(factor * r, factor * c)`.
pub fn upsample_grid(values: &[f64], rows: usize, cols: usize, factor: usize) -> Result<Vec<f64>> {
    if values.len() != rows * cols || rows == 0 || cols == 0 || factor == 0 {
        return Err(invalid("grid dimensions do not match values"));
    }
    let (out_r, out_c) = (rows * factor, cols * factor);
    let f = factor as f64;
    let mut along_cols = vec![0.0; rows * out_c];
    for r in 0..rows {
        let s = NaturalSpline::new(&values[r * cols..(r + 1) * cols])?;
        for j in 0..out_c {
            along_cols[r * out_c + j] = s.eval(j as f64 / f);
        }
    }
    let mut out = vec![0.0; out_r * out_c];
    let mut column = vec![0.0; rows];
    for j in 0..out_c {
        for r in 0..rows {
            column[r] = along_cols[r * out_c + j];
        }
        let s = NaturalSpline::new(&column)?;
        for i in 0..out_r {
            out[i * out_c + j] = s.eval(i as f64 / f);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_free_data_exactly() {
        // a straight line has zero curvature, so the natural spline is exact
        let y: Vec<f64> = (0..9).map(|i| 2.0 + 0.5 * i as f64).collect();
        let s = NaturalSpline::new(&y).unwrap();
        for k in 0..=80 {
            let x = k as f64 / 10.0;
            assert!((s.eval(x) - (2.0 + 0.5 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_continuity() {
        let y = [0.0, 1.0, 0.0, 3.0, 2.0, 2.5];
        let s = NaturalSpline::new(&y).unwrap();
        let h = 1e-4;
        for i in 1..5 {
            let x = i as f64;
            let left = (s.eval(x) - 2.0 * s.eval(x - h) + s.eval(x - 2.0 * h)) / (h * h);
            let right = (s.eval(x + 2.0 * h) - 2.0 * s.eval(x + h) + s.eval(x)) / (h * h);
            assert!((left - right).abs() < 1e-2, "node {i}: {left} vs {right}");
        }
    }
}
