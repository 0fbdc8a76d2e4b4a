//! A tube around a midline integrated from curvature in a rotation-minimizing
//! frame.

use nalgebra::Rotation3;

use crate::Vec3;

const STEPS: usize = 4000;

/// Midline samples with their cross-section axes, at uniform arc length.
#[derive(Debug, Clone)]
pub struct Body {
    length: f64,
    points: Vec<Vec3>,
    lateral: Vec<Vec3>,
}

impl Body {
    /// Integrates `curvature(fraction) -> (k1, k2)`, the curvature components
    /// along the two cross-section axes, over a body of the given length.
    pub fn integrate(length: f64, curvature: impl Fn(f64) -> (f64, f64)) -> Self {
        let h = length / STEPS as f64;
        let mut p = Vec3::zeros();
        let mut t = Vec3::x();
        let mut m1 = Vec3::y();
        let mut m2 = Vec3::z();
        let mut points = vec![p];
        let mut lateral = vec![m1];
        for i in 0..STEPS {
            let f = (i as f64 + 0.5) / STEPS as f64;
            let (k1, k2) = curvature(f);
            let rot = Rotation3::from_scaled_axis((m2 * k1 - m1 * k2) * h);
            let t_new = rot * t;
            p += (t + t_new) * (h / 2.0);
            t = t_new;
            m1 = rot * m1;
            // re-orthonormalize against drift
            m1 = (m1 - t * t.dot(&m1)).normalize();
            m2 = t.cross(&m1);
            points.push(p);
            lateral.push(m1);
        }
        let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
        for q in &mut points {
            *q -= centroid;
        }
        Self {
            length,
            points,
            lateral,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Midline point and (lateral, dorsal) axes at a body fraction in [0, 1].
    pub fn frame(&self, fraction: f64) -> (Vec3, Vec3, Vec3) {
        let x = fraction.clamp(0.0, 1.0) * STEPS as f64;
        let i = (x.floor() as usize).min(STEPS - 1);
        let w = x - i as f64;
        let lerp = |v: &[Vec3]| v[i] * (1.0 - w) + v[i + 1] * w;
        let m1 = lerp(&self.lateral);
        let t = self.points[i + 1] - self.points[i];
        let m1 = (m1 - t * (t.dot(&m1) / t.norm_squared())).normalize();
        let m2 = t.normalize().cross(&m1);
        (lerp(&self.points), m1, m2)
    }

    /// Position of body coordinates (fraction, lateral offset, dorsal offset).
    pub fn place(&self, fraction: f64, a: f64, b: f64) -> Vec3 {
        let (c, m1, m2) = self.frame(fraction);
        c + m1 * a + m2 * b
    }

    /// Largest curvature along the sampled midline.
    pub fn max_curvature(&self) -> f64 {
        let h = self.length / STEPS as f64;
        (1..STEPS)
            .map(|i| (self.points[i + 1] - self.points[i] * 2.0 + self.points[i - 1]).norm() / (h * h))
            .fold(0.0, f64::max)
    }
}
