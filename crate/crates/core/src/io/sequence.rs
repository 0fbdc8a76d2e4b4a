use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_nuclei, parse_seams, read_to_string, IoError};
use crate::geometry::SeamCellFrame;
use crate::NucleusRecord;

/// A time-lapse loaded from disk: frames in ascending frame-number order,
/// with the matching seam frames when a seam table was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub frame_numbers: Vec<usize>,
    pub frames: Vec<Vec<NucleusRecord>>,
    pub seams: Option<Vec<SeamCellFrame>>,
}

impl Sequence {
    /// Pairs each nuclei frame with its seam frame. Seam frames without
    /// nuclei are ignored; nuclei frames without seams are an error.
    pub fn from_tables(
        nuclei: Vec<NucleusRecord>,
        seams: Option<BTreeMap<usize, SeamCellFrame>>,
        seam_source: &str,
    ) -> Result<Self, IoError> {
        let grouped = super::group_by_frame(nuclei);
        let frame_numbers: Vec<usize> = grouped.keys().copied().collect();
        let frames: Vec<Vec<NucleusRecord>> = grouped.into_values().collect();
        let seams = match seams {
            None => None,
            Some(mut by_frame) => {
                let mut out = Vec::with_capacity(frame_numbers.len());
                for f in &frame_numbers {
                    let s = by_frame.remove(f).ok_or_else(|| IoError::Validation {
                        source_name: seam_source.to_string(),
                        message: format!("no seam cells for frame {f}"),
                    })?;
                    out.push(s);
                }
                Some(out)
            }
        };
        Ok(Self {
            frame_numbers,
            frames,
            seams,
        })
    }

    pub fn parse(
        nuclei_text: &str,
        nuclei_source: &str,
        seams: Option<(&str, &str)>,
    ) -> Result<Self, IoError> {
        let nuclei = parse_nuclei(nuclei_text, nuclei_source)?;
        let (seams, seam_source) = match seams {
            Some((text, source)) => (Some(parse_seams(text, source)?), source),
            None => (None, ""),
        };
        Self::from_tables(nuclei, seams, seam_source)
    }

    pub fn load(nuclei_path: &Path, seams_path: Option<&Path>) -> Result<Self, IoError> {
        let nuclei_text = read_to_string(nuclei_path)?;
        let seam_text = seams_path.map(read_to_string).transpose()?;
        let seam_source = seams_path.map(|p| p.display().to_string());
        Self::parse(
            &nuclei_text,
            &nuclei_path.display().to_string(),
            seam_text.as_deref().zip(seam_source.as_deref()),
        )
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
