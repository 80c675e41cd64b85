/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// Panics if fewer than two knots or `x` is not strictly increasing;
    /// callers validate their tables first.
    pub fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs matching x/y with >= 2 knots");
        assert!(x.windows(2).all(|w| w[1] > w[0]), "spline knots must increase");

        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let lower = x[i] - x[i - 1];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), m }
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Evaluates inside the knot range; outside it the end cubic is continued.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Second derivative of the interpolant.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let b = (t - self.x[i]) / h;
        (1.0 - b) * self.m[i] + b * self.m[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots() {
        let x: Vec<f64> = (0..20).map(|i| 0.3 * i as f64 + 0.01 * (i * i) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.7).sin()).collect();
        let s = CubicSpline::natural(&x, &y);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_for_lines_and_close_for_smooth_functions() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let s = CubicSpline::natural(&x, &y);
        assert!((s.eval(2.345) - (3.0 * 2.345 - 1.0)).abs() < 1e-12);

        let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let s = CubicSpline::natural(&x, &y);
        assert!((s.eval(2.345) - (-2.345f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn second_derivative_is_continuous() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|v| v.cos()).collect();
        let s = CubicSpline::natural(&x, &y);
        for k in &x[1..29] {
            let left = s.second_derivative(k - 1e-9);
            let right = s.second_derivative(k + 1e-9);
            assert!((left - right).abs() < 1e-6);
            // finite-difference curvature agrees with the analytic one
            let h = 1e-4;
            let fd = (s.eval(k + h) - 2.0 * s.eval(*k) + s.eval(k - h)) / (h * h);
            assert!((fd - s.second_derivative(*k)).abs() < 1e-3);
        }
    }
}
