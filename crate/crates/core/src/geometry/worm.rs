use serde::{Deserialize, Serialize};

use super::spline::CubicSpline3;
use super::{GeometryConfig, GeometryError, SeamCellFrame};
use crate::Vec3;

/// Minimum number of seam pairs needed to fit the body splines.
pub const MIN_PAIRS: usize = 4;

/// Width of the golden-section bracket before Newton polishing (μm).
const GOLDEN_TOLERANCE: f64 = 1e-4;
/// Two projection candidates closer than this in distance are ambiguous (μm).
const AMBIGUITY_TOLERANCE: f64 = 1e-4;

// 5-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Orthonormal triad on the midline at arc length `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingFrame {
    pub s: f64,
    pub origin: Vec3,
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
}

/// Inscribed cross-section semi-axes at a midline station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub r_lateral: f64,
    pub r_dorsoventral: f64,
}

/// A point expressed in the straightened body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightenedCoord {
    /// Arc length along the midline (μm).
    pub s: f64,
    /// Offset along the frame normal (μm).
    pub u: f64,
    /// Offset along the frame binormal (μm).
    pub v: f64,
    pub r_lateral: f64,
    pub r_dorsoventral: f64,
    pub inside_body: bool,
    /// The nearest midline point was an endpoint with the query lying past it.
    pub clamped: bool,
    /// Two distinct midline stations were equally near; the smaller `s` was kept.
    pub ambiguous: bool,
}

impl StraightenedCoord {
    pub fn as_vec3(&self) -> Vec3 {
        Vec3::new(self.s, self.u, self.v)
    }

    /// `(u, v)` scaled by the ellipse semi-axes.
    pub fn normalized(&self) -> (f64, f64) {
        (self.u / self.r_lateral, self.v / self.r_dorsoventral)
    }

    pub fn has_warning(&self) -> bool {
        self.clamped || self.ambiguous
    }
}

/// Left, right and midline splines over a shared chord-length knot vector,
/// together with a dense arc-length table and rotation-minimizing frames.
#[derive(Debug, Clone)]
pub struct WormSplines {
    left: CubicSpline3,
    right: CubicSpline3,
    mid: CubicSpline3,
    aspect: f64,
    sample_count: usize,
    // dense table: parameter, arc length, tangent and normal at each node
    table_t: Vec<f64>,
    table_s: Vec<f64>,
    table_tangent: Vec<Vec3>,
    table_normal: Vec<Vec3>,
}

impl WormSplines {
    pub fn fit(seam: &SeamCellFrame, config: &GeometryConfig) -> Result<Self, GeometryError> {
        config.validate()?;
        let pairs = seam.pairs();
        if pairs.len() < MIN_PAIRS {
            return Err(GeometryError::TooFewPairs { found: pairs.len() });
        }
        let mids: Vec<Vec3> = pairs.iter().map(|p| p.midpoint()).collect();
        let mut knots = Vec::with_capacity(mids.len());
        knots.push(0.0);
        for i in 1..mids.len() {
            let chord = (mids[i] - mids[i - 1]).norm();
            if chord <= f64::EPSILON * (1.0 + mids[i].norm()) {
                return Err(GeometryError::DuplicateKnot { index: i });
            }
            knots.push(knots[i - 1] + chord);
        }
        let left = CubicSpline3::new(knots.clone(), pairs.iter().map(|p| p.left).collect());
        let right = CubicSpline3::new(knots.clone(), pairs.iter().map(|p| p.right).collect());
        let mid = CubicSpline3::new(knots.clone(), mids);

        let mut worm = Self {
            left,
            right,
            mid,
            aspect: config.aspect,
            sample_count: config.sample_count,
            table_t: Vec::new(),
            table_s: Vec::new(),
            table_tangent: Vec::new(),
            table_normal: Vec::new(),
        };
        worm.build_table(&knots)?;
        Ok(worm)
    }

    fn build_table(&mut self, knots: &[f64]) -> Result<(), GeometryError> {
        let segments = knots.len() - 1;
        let per_segment = self.sample_count.div_ceil(segments).max(1);
        let mut table_t = Vec::with_capacity(segments * per_segment + 1);
        for w in knots.windows(2) {
            for j in 0..per_segment {
                table_t.push(w[0] + (w[1] - w[0]) * j as f64 / per_segment as f64);
            }
        }
        table_t.push(*knots.last().unwrap());

        let mut table_s = Vec::with_capacity(table_t.len());
        table_s.push(0.0);
        for k in 1..table_t.len() {
            let ds = self.speed_integral(table_t[k - 1], table_t[k]);
            if ds <= 0.0 {
                return Err(GeometryError::DuplicateKnot { index: k });
            }
            table_s.push(table_s[k - 1] + ds);
        }

        let t0 = table_t[0];
        let tangent0 = self.mid.derivative(t0).normalize();
        let normal0 = seed_normal(self.left.eval(t0) - self.right.eval(t0), tangent0);
        let mut tangents = Vec::with_capacity(table_t.len());
        let mut normals = Vec::with_capacity(table_t.len());
        tangents.push(tangent0);
        normals.push(normal0);
        let mut prev_pos = self.mid.eval(t0);
        for &t in &table_t[1..] {
            let pos = self.mid.eval(t);
            let tangent = self.mid.derivative(t).normalize();
            let normal = double_reflection(
                prev_pos,
                *tangents.last().unwrap(),
                *normals.last().unwrap(),
                pos,
                tangent,
            );
            tangents.push(tangent);
            normals.push(normal);
            prev_pos = pos;
        }

        self.table_t = table_t;
        self.table_s = table_s;
        self.table_tangent = tangents;
        self.table_normal = normals;
        Ok(())
    }

    /// ∫ |mid'(t)| dt between two parameters lying in one spline segment.
    fn speed_integral(&self, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let centre = 0.5 * (a + b);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * self.mid.derivative(centre + half * x).norm())
            .sum::<f64>()
            * half
    }

    pub fn total_length(&self) -> f64 {
        *self.table_s.last().unwrap()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn aspect(&self) -> f64 {
        self.aspect
    }

    pub fn left(&self) -> &CubicSpline3 {
        &self.left
    }

    pub fn right(&self) -> &CubicSpline3 {
        &self.right
    }

    pub fn mid(&self) -> &CubicSpline3 {
        &self.mid
    }

    /// Arc length at each seam knot.
    pub fn knot_arc_lengths(&self) -> Vec<f64> {
        self.mid.knots().iter().map(|&t| self.arc_length_at(t)).collect()
    }

    fn table_index(&self, t: f64) -> usize {
        let idx = self.table_t.partition_point(|&x| x <= t);
        idx.saturating_sub(1).min(self.table_t.len() - 2)
    }

    /// Arc length from the tail to knot parameter `t`.
    pub fn arc_length_at(&self, t: f64) -> f64 {
        let (t0, t1) = self.mid.domain();
        let t = t.clamp(t0, t1);
        let k = self.table_index(t);
        self.table_s[k] + self.speed_integral(self.table_t[k], t)
    }

    /// Knot parameter at arc length `s`.
    pub fn parameter_at(&self, s: f64) -> Result<f64, GeometryError> {
        let total = self.total_length();
        let slack = 1e-12 * (1.0 + total);
        if !(s >= -slack && s <= total + slack) {
            return Err(GeometryError::OutOfRange { s, length: total });
        }
        let s = s.clamp(0.0, total);
        let k = self
            .table_s
            .partition_point(|&x| x <= s)
            .saturating_sub(1)
            .min(self.table_s.len() - 2);
        let (mut lo, mut hi) = (self.table_t[k], self.table_t[k + 1]);
        let target = s - self.table_s[k];
        let ds = self.table_s[k + 1] - self.table_s[k];
        let mut t = lo + (hi - lo) * (target / ds);
        for _ in 0..50 {
            let f = self.speed_integral(self.table_t[k], t) - target;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let speed = self.mid.derivative(t).norm();
            let mut next = t - f / speed;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-14 * (1.0 + t.abs()) {
                t = next;
                break;
            }
            t = next;
        }
        Ok(t)
    }

    /// Moving frame at arc length `s`.
    pub fn frame_at(&self, s: f64) -> Result<MovingFrame, GeometryError> {
        let t = self.parameter_at(s)?;
        Ok(self.frame_at_parameter(t, s))
    }

    fn frame_at_parameter(&self, t: f64, s: f64) -> MovingFrame {
        let k = self.table_index(t);
        let origin = self.mid.eval(t);
        let tangent = self.mid.derivative(t).normalize();
        let node_pos = self.mid.eval(self.table_t[k]);
        let raw_normal = if (origin - node_pos).norm_squared() < 1e-24 {
            self.table_normal[k]
        } else {
            double_reflection(
                node_pos,
                self.table_tangent[k],
                self.table_normal[k],
                origin,
                tangent,
            )
        };
        let normal = orthonormalize(raw_normal, tangent);
        let binormal = tangent.cross(&normal);
        MovingFrame {
            s,
            origin,
            tangent,
            normal,
            binormal,
        }
    }

    /// Cross-section ellipse at arc length `s`.
    pub fn ellipse_at(&self, s: f64) -> Result<Ellipse, GeometryError> {
        let t = self.parameter_at(s)?;
        Ok(self.ellipse_at_parameter(t))
    }

    fn ellipse_at_parameter(&self, t: f64) -> Ellipse {
        let r_lateral = 0.5 * (self.left.eval(t) - self.right.eval(t)).norm();
        Ellipse {
            r_lateral,
            r_dorsoventral: self.aspect * r_lateral,
        }
    }

    /// Remaps `p` into (s, u, v) by projecting onto the nearest midline point.
    pub fn straighten_point(&self, p: Vec3) -> Result<StraightenedCoord, GeometryError> {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = self.table_t.len();
        let dist2: Vec<f64> = self
            .table_t
            .iter()
            .map(|&t| (self.mid.eval(t) - p).norm_squared())
            .collect();

        let mut candidates: Vec<(f64, f64)> = Vec::new(); // (t, distance)
        for k in 0..n {
            let left_ok = k == 0 || dist2[k] <= dist2[k - 1];
            let right_ok = k == n - 1 || dist2[k] <= dist2[k + 1];
            if !(left_ok && right_ok) {
                continue;
            }
            let lo = self.table_t[k.saturating_sub(1)];
            let hi = self.table_t[(k + 1).min(n - 1)];
            let t = self.refine_projection(p, lo, hi);
            let d = (self.mid.eval(t) - p).norm();
            if !candidates.iter().any(|(ct, _)| (ct - t).abs() < 1e-6) {
                candidates.push((t, d));
            }
        }

        let best = candidates
            .iter()
            .copied()
            .fold(None::<(f64, f64)>, |acc, c| match acc {
                Some(a) if a.1 <= c.1 => Some(a),
                _ => Some(c),
            })
            .expect("dense scan yields at least one local minimum");
        // ties are resolved toward the tail
        let near: Vec<(f64, f64)> = candidates
            .iter()
            .copied()
            .filter(|c| c.1 - best.1 <= AMBIGUITY_TOLERANCE)
            .collect();
        let ambiguous = near.len() > 1;
        let chosen_t = near.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);

        let (t_min, t_max) = self.mid.domain();
        let s = self.arc_length_at(chosen_t);
        let frame = self.frame_at_parameter(chosen_t, s);
        let offset = p - frame.origin;
        let along = offset.dot(&frame.tangent);
        let clamped = (chosen_t <= t_min && along < -1e-9) || (chosen_t >= t_max && along > 1e-9);
        let u = offset.dot(&frame.normal);
        let v = offset.dot(&frame.binormal);
        let ellipse = self.ellipse_at_parameter(chosen_t);
        let radial =
            (u / ellipse.r_lateral).powi(2) + (v / ellipse.r_dorsoventral).powi(2);
        Ok(StraightenedCoord {
            s,
            u,
            v,
            r_lateral: ellipse.r_lateral,
            r_dorsoventral: ellipse.r_dorsoventral,
            inside_body: !clamped && radial <= 1.0,
            clamped,
            ambiguous,
        })
    }

    /// Golden-section search on squared distance, then Newton on the
    /// stationarity condition (mid(t) - p) · mid'(t) = 0.
    fn refine_projection(&self, p: Vec3, mut lo: f64, mut hi: f64) -> f64 {
        let f = |t: f64| (self.mid.eval(t) - p).norm_squared();
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        while hi - lo > GOLDEN_TOLERANCE {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = f(d);
            }
        }
        // the bracket from golden-section holds the local minimum
        let (t_min, t_max) = self.mid.domain();
        let mut t = 0.5 * (lo + hi);
        let (blo, bhi) = ((lo - GOLDEN_TOLERANCE).max(t_min), (hi + GOLDEN_TOLERANCE).min(t_max));
        for _ in 0..30 {
            let r = self.mid.eval(t) - p;
            let d1 = self.mid.derivative(t);
            let d2 = self.mid.second_derivative(t);
            let g = r.dot(&d1);
            let dg = d1.norm_squared() + r.dot(&d2);
            if dg <= 0.0 {
                break;
            }
            let next = (t - g / dg).clamp(blo, bhi);
            let done = (next - t).abs() <= 1e-14 * (1.0 + t.abs());
            t = next;
            if done {
                break;
            }
        }
        // keep the endpoint if it is at least as close
        for end in [t_min, t_max] {
            if (end - t).abs() <= 2.0 * GOLDEN_TOLERANCE && f(end) < f(t) {
                t = end;
            }
        }
        t
    }
}

fn orthonormalize(v: Vec3, tangent: Vec3) -> Vec3 {
    (v - tangent * v.dot(&tangent)).normalize()
}

/// Initial normal: the left-right axis with its tangential part removed.
fn seed_normal(lateral: Vec3, tangent: Vec3) -> Vec3 {
    let projected = lateral - tangent * lateral.dot(&tangent);
    if projected.norm() > 1e-9 * (1.0 + lateral.norm()) {
        return projected.normalize();
    }
    // left-right axis parallel to the tangent: use the least aligned basis axis
    let axis = [Vec3::x(), Vec3::y(), Vec3::z()]
        .into_iter()
        .min_by(|a, b| a.dot(&tangent).abs().total_cmp(&b.dot(&tangent).abs()))
        .unwrap();
    orthonormalize(axis, tangent)
}

/// One step of the double-reflection rotation-minimizing frame.
fn double_reflection(x0: Vec3, t0: Vec3, r0: Vec3, x1: Vec3, t1: Vec3) -> Vec3 {
    let v1 = x1 - x0;
    let c1 = v1.norm_squared();
    if c1 == 0.0 {
        return orthonormalize(r0, t1);
    }
    let r_l = r0 - v1 * (2.0 / c1 * v1.dot(&r0));
    let t_l = t0 - v1 * (2.0 / c1 * v1.dot(&t0));
    let v2 = t1 - t_l;
    let c2 = v2.norm_squared();
    let r1 = if c2 == 0.0 {
        r_l
    } else {
        r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
    };
    orthonormalize(r1, t1)
}
