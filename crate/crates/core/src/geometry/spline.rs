//! Componentwise natural cubic interpolation of 3D control points.

use crate::Vec3;

/// A natural cubic spline through `points` at parameter values `knots`.
///
/// The second derivative vanishes at both ends. Knots must be strictly
/// increasing; callers check this before construction.
#[derive(Debug, Clone)]
pub struct CubicSpline3 {
    knots: Vec<f64>,
    points: Vec<Vec3>,
    second: Vec<Vec3>,
}

impl CubicSpline3 {
    pub fn new(knots: Vec<f64>, points: Vec<Vec3>) -> Self {
        assert_eq!(knots.len(), points.len());
        assert!(knots.len() >= 2);
        let second = natural_second_derivatives(&knots, &points);
        Self {
            knots,
            points,
            second,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Index of the segment containing `t`, clamped to the valid range.
    pub fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        let idx = self.knots.partition_point(|&k| k <= t);
        idx.saturating_sub(1).min(n - 2)
    }

    fn coeffs(&self, t: f64) -> (usize, f64, f64, f64) {
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        (i, h, a, b)
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        let (i, h, a, b) = self.coeffs(t);
        let y0 = self.points[i];
        let y1 = self.points[i + 1];
        let m0 = self.second[i];
        let m1 = self.second[i + 1];
        y0 * a + y1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0)
    }

    pub fn derivative(&self, t: f64) -> Vec3 {
        let (i, h, a, b) = self.coeffs(t);
        let y0 = self.points[i];
        let y1 = self.points[i + 1];
        let m0 = self.second[i];
        let m1 = self.second[i + 1];
        (y1 - y0) / h - m0 * ((3.0 * a * a - 1.0) * h / 6.0) + m1 * ((3.0 * b * b - 1.0) * h / 6.0)
    }

    pub fn second_derivative(&self, t: f64) -> Vec3 {
        let (i, _, a, b) = self.coeffs(t);
        self.second[i] * a + self.second[i + 1] * b
    }
}

/// Thomas algorithm for the natural-spline moment system.
fn natural_second_derivatives(t: &[f64], y: &[Vec3]) -> Vec<Vec3> {
    let n = t.len();
    let mut m = vec![Vec3::zeros(); n];
    if n < 3 {
        return m;
    }
    let interior = n - 2;
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut rhs = vec![Vec3::zeros(); interior];
    for k in 0..interior {
        let i = k + 1;
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0) * 6.0;
    }
    // forward sweep; sub-diagonal entry for row k is h0 of row k
    for k in 1..interior {
        let lower = t[k + 1] - t[k];
        let w = lower / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        let prev = rhs[k - 1];
        rhs[k] -= prev * w;
    }
    let mut x = vec![Vec3::zeros(); interior];
    x[interior - 1] = rhs[interior - 1] / diag[interior - 1];
    for k in (0..interior - 1).rev() {
        x[k] = (rhs[k] - x[k + 1] * upper[k]) / diag[k];
    }
    m[1..(interior + 1)].copy_from_slice(&x);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_spline() -> CubicSpline3 {
        let knots = vec![0.0, 1.0, 2.5, 3.0, 4.2];
        let points = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 2.0, -1.0),
            Vec3::new(2.0, 0.5, 0.0),
            Vec3::new(3.5, 1.0, 2.0),
            Vec3::new(4.0, -1.0, 1.0),
        ];
        CubicSpline3::new(knots, points)
    }

    #[test]
    fn interpolates_at_knots() {
        let s = sample_spline();
        for (k, p) in s.knots().iter().zip(s.points()) {
            assert!((s.eval(*k) - p).norm() < 1e-12);
        }
    }

    #[test]
    fn natural_boundary() {
        let s = sample_spline();
        let (a, b) = s.domain();
        assert!(s.second_derivative(a).norm() < 1e-12);
        assert!(s.second_derivative(b).norm() < 1e-12);
    }

    #[test]
    fn continuous_derivatives_at_interior_knots() {
        let s = sample_spline();
        for &k in &s.knots()[1..4] {
            let eps = 1e-9;
            assert!((s.derivative(k - eps) - s.derivative(k + eps)).norm() < 1e-6);
            assert!((s.second_derivative(k - eps) - s.second_derivative(k + eps)).norm() < 1e-6);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = sample_spline();
        for i in 0..40 {
            let t = 0.05 + i as f64 * 0.1;
            let h = 1e-6;
            let fd = (s.eval(t + h) - s.eval(t - h)) / (2.0 * h);
            assert!((fd - s.derivative(t)).norm() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn collinear_points_give_a_line() {
        let knots: Vec<f64> = (0..6).map(|i| i as f64 * 1.7).collect();
        let points: Vec<Vec3> = knots.iter().map(|&t| Vec3::new(t, 2.0 * t, -t)).collect();
        let s = CubicSpline3::new(knots, points);
        for i in 0..50 {
            let t = i as f64 * 0.17;
            assert!((s.eval(t) - Vec3::new(t, 2.0 * t, -t)).norm() < 1e-12);
        }
    }
}
