//! Incremental Bowyer-Watson tetrahedralization with exact predicates.

use std::collections::HashMap;

use robust::{insphere, orient3d, Coord3D};

use super::GraphError;
use crate::Vec3;

fn coord(p: &Vec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

fn orient(pts: &[Vec3], t: &[usize; 4]) -> f64 {
    orient3d(coord(&pts[t[0]]), coord(&pts[t[1]]), coord(&pts[t[2]]), coord(&pts[t[3]]))
}

/// Rejects inputs whose points span less than three dimensions.
fn check_full_rank(points: &[Vec3]) -> Result<(), GraphError> {
    if points.len() < 4 {
        return Err(GraphError::DegenerateInput(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    let p0 = points[0];
    let far = |f: &dyn Fn(&Vec3) -> f64| {
        points
            .iter()
            .map(|p| (f(p), *p))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    };
    let (d1, p1) = far(&|p| (p - p0).norm());
    if d1 == 0.0 {
        return Err(GraphError::DegenerateInput("all points coincide".into()));
    }
    let axis = (p1 - p0) / d1;
    let (d2, p2) = far(&|p| (p - p0).cross(&axis).norm());
    if d2 <= 1e-9 * d1 {
        return Err(GraphError::DegenerateInput("points are collinear".into()));
    }
    let normal = (p1 - p0).cross(&(p2 - p0)).normalize();
    let (d3, _) = far(&|p| (p - p0).dot(&normal).abs());
    if d3 <= 1e-9 * d1 {
        return Err(GraphError::DegenerateInput("points are coplanar".into()));
    }
    Ok(())
}

/// Delaunay tetrahedra over `points`, each listed with positive orientation.
///
/// Points that duplicate an earlier point are skipped and appear in no
/// tetrahedron.
pub fn delaunay_tetrahedra(points: &[Vec3]) -> Result<Vec<[usize; 4]>, GraphError> {
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GraphError::NonFinite);
    }
    check_full_rank(points)?;
    let n = points.len();
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let center = (lo + hi) / 2.0;
    let extent = (hi - lo).max().max(1.0);
    let big = 1e5 * extent;
    let mut pts = points.to_vec();
    pts.push(center + Vec3::new(-big, -big, -big));
    pts.push(center + Vec3::new(3.0 * big, -big, -big));
    pts.push(center + Vec3::new(-big, 3.0 * big, -big));
    pts.push(center + Vec3::new(-big, -big, 3.0 * big));

    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut first = [n, n + 1, n + 2, n + 3];
    if orient(&pts, &first) < 0.0 {
        first.swap(0, 1);
    }
    tets.push(first);

    for (pi, p) in points.iter().enumerate() {
        let cp = coord(p);
        let (bad, keep): (Vec<[usize; 4]>, Vec<[usize; 4]>) = tets.into_iter().partition(|t| {
            insphere(coord(&pts[t[0]]), coord(&pts[t[1]]), coord(&pts[t[2]]), coord(&pts[t[3]]), cp) > 0.0
        });
        tets = keep;
        if bad.is_empty() {
            continue;
        }
        let mut faces: HashMap<[usize; 3], (usize, [usize; 3])> = HashMap::new();
        for t in &bad {
            for skip in 0..4 {
                let face: [usize; 3] = {
                    let mut f = [0; 3];
                    let mut k = 0;
                    for (idx, v) in t.iter().enumerate() {
                        if idx != skip {
                            f[k] = *v;
                            k += 1;
                        }
                    }
                    f
                };
                let mut key = face;
                key.sort_unstable();
                faces.entry(key).or_insert((0, face)).0 += 1;
            }
        }
        let mut boundary: Vec<[usize; 3]> = faces
            .into_values()
            .filter(|(count, _)| *count == 1)
            .map(|(_, f)| f)
            .collect();
        boundary.sort_unstable();
        for f in boundary {
            let mut t = [f[0], f[1], f[2], pi];
            let o = orient(&pts, &t);
            if o == 0.0 {
                continue;
            }
            if o < 0.0 {
                t.swap(0, 1);
            }
            tets.push(t);
        }
    }
    let mut out: Vec<[usize; 4]> = tets.into_iter().filter(|t| t.iter().all(|&v| v < n)).collect();
    out.sort_unstable();
    Ok(out)
}
