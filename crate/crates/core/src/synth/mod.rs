//! Synthetic coiled embryos with known correspondence.
//!
//! A body is a circular tube around a midline built from a curvature profile.
//! Seam pairs sit on the tube surface at evenly spaced stations, symmetric
//! about the midline. Muscle nuclei live in four longitudinal bands at a
//! fixed fraction of the radius. Each frame moves the nuclei in body
//! coordinates, optionally stretches and bends the body, then places the
//! whole embryo with a random rigid pose.

mod body;

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Unit};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PairName, SeamCellFrame, SeamPair};
use crate::{NucleusRecord, Vec3};

pub use body::Body;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("infeasible synth config: {0}")]
    InfeasibleConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyShape {
    Helix,
    #[default]
    PlanarCoil,
    RandomSpline,
}

/// Coordinated offset of one band, applied on odd frames only so that every
/// consecutive pair sees the full offset. The offset is added after nuclei
/// are kept inside the tube, so a large drift may carry a band outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandDrift {
    /// Band index, 0 for band A.
    pub band: usize,
    /// Offset along the body, laterally, and dorsally (μm).
    pub offset_um: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_frames: usize,
    pub body: BodyShape,
    pub body_length_um: f64,
    pub tube_radius_um: f64,
    /// Upper bound on midline curvature (1/μm).
    pub max_curvature: f64,
    /// Helix twist rate (rad/μm).
    pub helix_torsion: f64,
    /// 10 drops the optional Q pair.
    pub seam_pairs: usize,
    pub n_nuclei: usize,
    /// Band radius as a fraction of the tube radius.
    pub band_radius_fraction: f64,
    /// Smallest allowed spacing between nuclei along a band (μm).
    pub min_spacing_um: f64,
    /// Per-axis frame-to-frame jitter of nuclei in body coordinates (μm).
    pub brownian_sigma_um: f64,
    /// Random rigid pose per frame.
    pub rigid: bool,
    pub max_rotation_deg: f64,
    pub max_translation_um: f64,
    /// Peak lateral deflection of a low-frequency bend added per frame (μm).
    pub warp_amplitude_um: f64,
    /// Fractional length growth per frame.
    pub elongation_rate: f64,
    /// Per-nucleus per-frame disappearance probability (never in frame 0).
    pub dropout_prob: f64,
    /// Per-axis noise on seam-cell positions (μm).
    pub seam_jitter_um: f64,
    /// Shuffle detection order within frames after frame 0.
    pub shuffle: bool,
    pub band_drift: Option<BandDrift>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 10,
            body: BodyShape::PlanarCoil,
            body_length_um: 180.0,
            tube_radius_um: 10.0,
            max_curvature: 0.03,
            helix_torsion: 0.02,
            seam_pairs: 11,
            n_nuclei: 85,
            band_radius_fraction: 0.7,
            min_spacing_um: 3.0,
            brownian_sigma_um: 1.0,
            rigid: true,
            max_rotation_deg: 180.0,
            max_translation_um: 20.0,
            warp_amplitude_um: 0.0,
            elongation_rate: 0.0,
            dropout_prob: 0.0,
            seam_jitter_um: 0.0,
            shuffle: false,
            band_drift: None,
        }
    }
}

const BAND_LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];
const BAND_ANGLES_DEG: [f64; 4] = [45.0, 135.0, 225.0, 315.0];
/// Nuclei occupy this span of body fractions, inside the seam-cell span.
const BAND_SPAN: (f64, f64) = (0.05, 0.95);

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleConfig(m));
        let magnitudes = [
            ("body_length_um", self.body_length_um),
            ("tube_radius_um", self.tube_radius_um),
            ("max_curvature", self.max_curvature),
            ("helix_torsion", self.helix_torsion),
            ("band_radius_fraction", self.band_radius_fraction),
            ("min_spacing_um", self.min_spacing_um),
            ("brownian_sigma_um", self.brownian_sigma_um),
            ("max_rotation_deg", self.max_rotation_deg),
            ("max_translation_um", self.max_translation_um),
            ("warp_amplitude_um", self.warp_amplitude_um),
            ("elongation_rate", self.elongation_rate),
            ("dropout_prob", self.dropout_prob),
            ("seam_jitter_um", self.seam_jitter_um),
        ];
        for (name, v) in magnitudes {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.n_frames == 0 {
            return bad("n_frames must be at least 1".into());
        }
        if !(self.body_length_um > 0.0 && self.tube_radius_um > 0.0) {
            return bad("body length and tube radius must be positive".into());
        }
        if self.seam_pairs != 10 && self.seam_pairs != 11 {
            return bad(format!("seam_pairs must be 10 or 11, got {}", self.seam_pairs));
        }
        if self.dropout_prob > 1.0 {
            return bad(format!("dropout_prob must be at most 1, got {}", self.dropout_prob));
        }
        if self.band_radius_fraction >= 1.0 {
            return bad("band_radius_fraction must be below 1".into());
        }
        if self.max_curvature * self.tube_radius_um >= 0.5 {
            return bad(format!(
                "max_curvature {} is too tight for tube radius {}",
                self.max_curvature, self.tube_radius_um
            ));
        }
        let per_band = self.n_nuclei.div_ceil(4);
        let span = (BAND_SPAN.1 - BAND_SPAN.0) * self.body_length_um;
        if per_band > 0 && span / (per_band as f64) < self.min_spacing_um {
            return bad(format!(
                "{} nuclei need {per_band} per band, more than a {:.1} μm band holds at {} μm spacing",
                self.n_nuclei, span, self.min_spacing_um
            ));
        }
        if let Some(d) = &self.band_drift {
            if d.band >= 4 || d.offset_um.iter().any(|x| !x.is_finite()) {
                return bad("band_drift needs a band below 4 and finite offsets".into());
            }
        }
        Ok(())
    }

    fn band_size(&self, band: usize) -> usize {
        self.n_nuclei / 4 + usize::from(band < self.n_nuclei % 4)
    }
}

/// Identity of each detection in each frame.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruthRow {
    pub frame: usize,
    pub id: String,
    pub detection_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    /// Detections per frame; only frame 0 carries ids.
    pub frames: Vec<Vec<NucleusRecord>>,
    pub seams: Vec<SeamCellFrame>,
    pub truth: Vec<TruthRow>,
    /// Nuclei missing from each frame.
    pub dropouts: Vec<usize>,
}

impl SynthDataset {
    /// Truth id of every detection in `frame`, in detection order.
    pub fn truth_ids(&self, frame: usize) -> Vec<String> {
        let mut ids = vec![String::new(); self.frames[frame].len()];
        for r in self.truth.iter().filter(|r| r.frame == frame) {
            ids[r.detection_index] = r.id.clone();
        }
        ids
    }

    pub fn total_dropouts(&self) -> usize {
        self.dropouts.iter().sum()
    }

    /// Frames with every detection carrying its true id.
    pub fn labeled_frames(&self) -> Vec<Vec<NucleusRecord>> {
        (0..self.frames.len())
            .map(|t| {
                let ids = self.truth_ids(t);
                self.frames[t]
                    .iter()
                    .zip(ids)
                    .map(|(r, id)| NucleusRecord {
                        id: Some(id),
                        ..r.clone()
                    })
                    .collect()
            })
            .collect()
    }
}

struct Nucleus {
    id: String,
    /// Rest position: arc fraction, lateral and dorsal offsets (μm).
    home: Vec3,
    /// Current displacement from home: along-body (μm), lateral, dorsal.
    offset: Vec3,
}

fn gaussian(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn curvature_profile(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Box<dyn Fn(f64, f64) -> (f64, f64)> {
    let kmax = cfg.max_curvature;
    match cfg.body {
        BodyShape::Helix => {
            let tau = cfg.helix_torsion;
            let k = 0.8 * kmax;
            // angle of the curvature vector advances by torsion times arc length
            Box::new(move |f, len| (k * (tau * f * len).cos(), k * (tau * f * len).sin()))
        }
        BodyShape::PlanarCoil => Box::new(move |f, _| (kmax * (0.75 + 0.25 * (TAU * f).sin()), 0.0)),
        BodyShape::RandomSpline => {
            let terms: Vec<(f64, f64, f64, f64)> = (1..=3)
                .map(|h| {
                    (
                        rng.random_range(-1.0..1.0) / h as f64,
                        rng.random_range(0.0..TAU),
                        rng.random_range(-1.0..1.0) / h as f64,
                        rng.random_range(0.0..TAU),
                    )
                })
                .collect();
            let eval = move |f: f64| {
                terms.iter().enumerate().fold((0.3, 0.0), |(a, b), (h, t)| {
                    let w = TAU * (h + 1) as f64 * f;
                    (a + t.0 * (w + t.1).sin(), b + t.2 * (w + t.3).sin())
                })
            };
            let peak = (0..=400)
                .map(|i| {
                    let (a, b) = eval(i as f64 / 400.0);
                    a.hypot(b)
                })
                .fold(f64::MIN_POSITIVE, f64::max);
            let scale = kmax / peak;
            Box::new(move |f, _| {
                let (a, b) = eval(f);
                (a * scale, b * scale)
            })
        }
    }
}

fn random_pose(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Rotation3<f64>, Vec3) {
    if !cfg.rigid {
        return (Rotation3::identity(), Vec3::zeros());
    }
    let axis = Unit::new_normalize(gaussian(rng));
    let angle = rng.random_range(0.0..=cfg.max_rotation_deg.to_radians());
    let t = cfg.max_translation_um;
    let shift = if t > 0.0 {
        Vec3::from_fn(|_, _| rng.random_range(-t..=t))
    } else {
        Vec3::zeros()
    };
    (Rotation3::from_axis_angle(&axis, angle), shift)
}

/// Generates a dataset; deterministic in the config (including its seed).
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let profile = curvature_profile(cfg, &mut rng);
    let radius = cfg.tube_radius_um;
    let band_r = cfg.band_radius_fraction * radius;

    let mut nuclei = Vec::with_capacity(cfg.n_nuclei);
    for (band, letter) in BAND_LETTERS.iter().enumerate() {
        let count = cfg.band_size(band);
        let step = (BAND_SPAN.1 - BAND_SPAN.0) / count.max(1) as f64;
        for k in 0..count {
            let f = BAND_SPAN.0 + step * (k as f64 + 0.5) + rng.random_range(-0.15..0.15) * step;
            let angle = (BAND_ANGLES_DEG[band] + rng.random_range(-8.0..8.0)).to_radians();
            nuclei.push(Nucleus {
                id: format!("{letter}{:02}", k + 1),
                home: Vec3::new(f, band_r * angle.cos(), band_r * angle.sin()),
                offset: Vec3::zeros(),
            });
        }
    }

    let names: Vec<PairName> = PairName::CANONICAL
        .iter()
        .copied()
        .filter(|p| cfg.seam_pairs == 11 || !p.is_optional())
        .collect();
    let warp_k = cfg.warp_amplitude_um * (TAU / cfg.body_length_um).powi(2);

    let mut frames = Vec::with_capacity(cfg.n_frames);
    let mut seams = Vec::with_capacity(cfg.n_frames);
    let mut truth = Vec::new();
    let mut dropouts = Vec::with_capacity(cfg.n_frames);
    for t in 0..cfg.n_frames {
        let length = cfg.body_length_um * (1.0 + cfg.elongation_rate).powi(t as i32);
        let scale = cfg.body_length_um / length;
        let phase = rng.random_range(0.0..TAU);
        let tilt = rng.random_range(0.0..PI);
        let warp = if t > 0 { warp_k } else { 0.0 };
        let body = Body::integrate(length, |f| {
            let (k1, k2) = profile(f, cfg.body_length_um);
            let w = warp * (TAU * f + phase).sin();
            (k1 * scale + w * tilt.cos(), k2 * scale + w * tilt.sin())
        });
        let (rot, shift) = random_pose(cfg, &mut rng);
        let pose = |p: Vec3| rot * p + shift;

        let pairs = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let f = i as f64 / (names.len() - 1) as f64;
                let mut left = body.place(f, radius, 0.0);
                let mut right = body.place(f, -radius, 0.0);
                if cfg.seam_jitter_um > 0.0 {
                    left += gaussian(&mut rng) * cfg.seam_jitter_um;
                    right += gaussian(&mut rng) * cfg.seam_jitter_um;
                }
                SeamPair::new(*name, pose(left), pose(right))
            })
            .collect();
        seams.push(SeamCellFrame::new(t, pairs).expect("generated seam frames are valid"));

        let mut detections: Vec<(String, Vec3)> = Vec::with_capacity(nuclei.len());
        let mut dropped = 0;
        for n in nuclei.iter_mut() {
            if t > 0 && cfg.brownian_sigma_um > 0.0 {
                // random walk with a weak pull home keeps nuclei in their band
                n.offset = n.offset * 0.9 + gaussian(&mut rng) * cfg.brownian_sigma_um;
            }
            let band = BAND_LETTERS.iter().position(|c| n.id.starts_with(*c)).unwrap_or(0);
            let mut along = n.home.x * length + n.offset.x;
            let mut a = n.home.y + n.offset.y;
            let mut b = n.home.z + n.offset.z;
            let r = a.hypot(b);
            if r > 0.95 * radius {
                a *= 0.95 * radius / r;
                b *= 0.95 * radius / r;
            }
            if let Some(d) = &cfg.band_drift {
                if d.band == band && t % 2 == 1 {
                    along += d.offset_um[0];
                    a += d.offset_um[1];
                    b += d.offset_um[2];
                }
            }
            let absent = t > 0 && cfg.dropout_prob > 0.0 && rng.random_bool(cfg.dropout_prob);
            if absent {
                dropped += 1;
                continue;
            }
            detections.push((n.id.clone(), pose(body.place(along / length, a, b))));
        }
        if cfg.shuffle && t > 0 {
            detections.shuffle(&mut rng);
        }
        dropouts.push(dropped);
        let records = detections
            .iter()
            .enumerate()
            .map(|(j, (id, p))| {
                truth.push(TruthRow {
                    frame: t,
                    id: id.clone(),
                    detection_index: j,
                });
                NucleusRecord::new(t, (t == 0).then(|| id.clone()), *p)
            })
            .collect();
        frames.push(records);
    }
    Ok(SynthDataset {
        frames,
        seams,
        truth,
        dropouts,
    })
}
