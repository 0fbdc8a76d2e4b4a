use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::{read_to_string, write_atomic, IoError};
use crate::geometry::{PairName, SeamCellFrame, SeamPair, StraightenedCoord};
use crate::synth::TruthRow;
use crate::tracking::{TrackSet, TrackStatus};
use crate::{NucleusRecord, Vec3};

pub const NUCLEI_HEADER: [&str; 5] = ["frame", "id", "x_um", "y_um", "z_um"];
pub const SEAM_HEADER: [&str; 6] = ["frame", "pair", "side", "x_um", "y_um", "z_um"];
pub const TRACK_HEADER: [&str; 10] = [
    "frame",
    "id",
    "status",
    "detection_index",
    "x_um",
    "y_um",
    "z_um",
    "s_um",
    "u_um",
    "v_um",
];
pub const TRUTH_HEADER: [&str; 3] = ["frame", "id", "detection_index"];
pub const STRAIGHTENED_HEADER: [&str; 14] = [
    "frame",
    "id",
    "x_um",
    "y_um",
    "z_um",
    "s_um",
    "u_um",
    "v_um",
    "r_lateral_um",
    "r_dorsoventral_um",
    "inside_body",
    "clamped",
    "ambiguous",
    "detection_index",
];

const UNIT_SUFFIXES: [&str; 6] = ["_um", "_px", "_vox", "_voxel", "_nm", "_mm"];

fn strip_unit(name: &str) -> &str {
    UNIT_SUFFIXES
        .iter()
        .find_map(|s| name.strip_suffix(s))
        .unwrap_or(name)
}

/// One data row with its 1-based line number.
struct Row<'a> {
    source: &'a str,
    line: u64,
    record: StringRecord,
}

impl Row<'_> {
    fn err(&self, column: Option<usize>, message: impl Into<String>) -> IoError {
        IoError::Parse {
            source_name: self.source.to_string(),
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn raw(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("")
    }

    fn parse<T: FromStr>(&self, idx: usize, name: &str) -> Result<T, IoError> {
        let raw = self.raw(idx);
        raw.parse()
            .map_err(|_| self.err(Some(idx + 1), format!("invalid {name} {raw:?}")))
    }

    fn optional<T: FromStr>(&self, idx: usize, name: &str) -> Result<Option<T>, IoError> {
        if self.raw(idx).is_empty() {
            Ok(None)
        } else {
            self.parse(idx, name).map(Some)
        }
    }

    fn coord(&self, idx: usize, name: &str) -> Result<f64, IoError> {
        let v: f64 = self.parse(idx, name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(Some(idx + 1), format!("non-finite {name}")))
        }
    }

    fn vec3(&self, idx: usize, names: [&str; 3]) -> Result<Vec3, IoError> {
        Ok(Vec3::new(
            self.coord(idx, names[0])?,
            self.coord(idx + 1, names[1])?,
            self.coord(idx + 2, names[2])?,
        ))
    }

    fn optional_vec3(&self, idx: usize, names: [&str; 3]) -> Result<Option<Vec3>, IoError> {
        let empty = (idx..idx + 3).filter(|i| self.raw(*i).is_empty()).count();
        match empty {
            3 => Ok(None),
            0 => self.vec3(idx, names).map(Some),
            _ => Err(self.err(Some(idx + 1), "coordinates must be all present or all empty")),
        }
    }

    fn text(&self, idx: usize) -> Option<String> {
        let raw = self.raw(idx);
        (!raw.is_empty()).then(|| raw.to_string())
    }
}

fn read_rows<'a>(text: &str, source: &'a str, expected: &[&str]) -> Result<Vec<Row<'a>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header_err = |found: String| {
        let expected_s = expected.join(",");
        let found_names: Vec<&str> = found.split(',').map(strip_unit).collect();
        let expected_names: Vec<&str> = expected.iter().map(|s| strip_unit(s)).collect();
        if found_names == expected_names {
            IoError::UnitMismatch {
                source_name: source.to_string(),
                expected: expected_s,
                found,
            }
        } else {
            IoError::Header {
                source_name: source.to_string(),
                expected: expected_s,
                found,
            }
        }
    };
    let headers = rdr.headers().map_err(|e| header_err(e.to_string()))?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(header_err(found.join(",")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        match rec {
            Ok(record) => rows.push(Row {
                source,
                line: record.position().map_or(0, |p| p.line()),
                record,
            }),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                let message = match e.kind() {
                    csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                        format!("expected {expected_len} fields, found {len}")
                    }
                    _ => e.to_string(),
                };
                return Err(IoError::Parse {
                    source_name: source.to_string(),
                    line,
                    column: None,
                    message,
                });
            }
        }
    }
    Ok(rows)
}

fn write_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn validation(source: &str, message: String) -> IoError {
    IoError::Validation {
        source_name: source.to_string(),
        message,
    }
}

fn source_of(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------- nuclei

/// Nuclei in file order. Ids must be unique within a frame.
pub fn parse_nuclei(text: &str, source: &str) -> Result<Vec<NucleusRecord>, IoError> {
    let rows = read_rows(text, source, &NUCLEI_HEADER)?;
    let mut seen = BTreeMap::new();
    rows.iter()
        .map(|row| {
            let frame = row.parse(0, "frame")?;
            let id = row.text(1);
            if let Some(id) = &id {
                if let Some(first) = seen.insert((frame, id.clone()), row.line) {
                    return Err(row.err(Some(2), format!("id {id} already used in frame {frame} on line {first}")));
                }
            }
            Ok(NucleusRecord::new(frame, id, row.vec3(2, ["x_um", "y_um", "z_um"])?))
        })
        .collect()
}

pub fn format_nuclei(records: &[NucleusRecord]) -> String {
    write_rows(
        &NUCLEI_HEADER,
        records.iter().map(|r| {
            vec![
                r.frame.to_string(),
                r.id.clone().unwrap_or_default(),
                num(r.position.x),
                num(r.position.y),
                num(r.position.z),
            ]
        }),
    )
}

pub fn read_nuclei(path: &Path) -> Result<Vec<NucleusRecord>, IoError> {
    parse_nuclei(&read_to_string(path)?, &source_of(path))
}

pub fn write_nuclei(path: &Path, records: &[NucleusRecord]) -> Result<(), IoError> {
    write_atomic(path, format_nuclei(records).as_bytes())
}

/// Groups records by frame number, keeping file order within a frame.
pub fn group_by_frame(records: Vec<NucleusRecord>) -> BTreeMap<usize, Vec<NucleusRecord>> {
    let mut frames: BTreeMap<usize, Vec<NucleusRecord>> = BTreeMap::new();
    for r in records {
        frames.entry(r.frame).or_default().push(r);
    }
    frames
}

// ---------------------------------------------------------------- seams

/// Seam frames keyed by frame number. Every pair needs both sides, and every
/// canonical pair except Q must be present.
pub fn parse_seams(text: &str, source: &str) -> Result<BTreeMap<usize, SeamCellFrame>, IoError> {
    let rows = read_rows(text, source, &SEAM_HEADER)?;
    type Sides = (Option<Vec3>, Option<Vec3>);
    let mut frames: BTreeMap<usize, BTreeMap<PairName, Sides>> = BTreeMap::new();
    for row in &rows {
        let frame = row.parse(0, "frame")?;
        let pair: PairName = row.parse(1, "pair")?;
        let p = row.vec3(3, ["x_um", "y_um", "z_um"])?;
        let entry = frames.entry(frame).or_default().entry(pair).or_default();
        let slot = match row.raw(2) {
            "L" | "l" => &mut entry.0,
            "R" | "r" => &mut entry.1,
            other => return Err(row.err(Some(3), format!("side must be L or R, got {other:?}"))),
        };
        if slot.replace(p).is_some() {
            return Err(row.err(Some(3), format!("duplicate {pair} {} in frame {frame}", row.raw(2))));
        }
    }
    let mut out = BTreeMap::new();
    for (frame, pairs) in frames {
        let mut list = Vec::new();
        for (name, sides) in pairs {
            match sides {
                (Some(left), Some(right)) => list.push(SeamPair::new(name, left, right)),
                (l, _) => {
                    let missing = if l.is_none() { "L" } else { "R" };
                    return Err(validation(source, format!("frame {frame}: pair {name} has no {missing} cell")));
                }
            }
        }
        let seam = SeamCellFrame::new(frame, list).map_err(|e| validation(source, format!("frame {frame}: {e}")))?;
        let missing = seam.missing_required();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|p| p.as_str()).collect();
            return Err(validation(
                source,
                format!("frame {frame}: missing canonical seam pairs {}", names.join(", ")),
            ));
        }
        out.insert(frame, seam);
    }
    Ok(out)
}

pub fn format_seams<'a>(frames: impl IntoIterator<Item = &'a SeamCellFrame>) -> String {
    let mut rows = Vec::new();
    for f in frames {
        for p in f.pairs() {
            for (side, q) in [("L", p.left), ("R", p.right)] {
                rows.push(vec![
                    f.frame_index().to_string(),
                    p.name.to_string(),
                    side.to_string(),
                    num(q.x),
                    num(q.y),
                    num(q.z),
                ]);
            }
        }
    }
    write_rows(&SEAM_HEADER, rows)
}

pub fn read_seams(path: &Path) -> Result<BTreeMap<usize, SeamCellFrame>, IoError> {
    parse_seams(&read_to_string(path)?, &source_of(path))
}

pub fn write_seams<'a>(path: &Path, frames: impl IntoIterator<Item = &'a SeamCellFrame>) -> Result<(), IoError> {
    write_atomic(path, format_seams(frames).as_bytes())
}

// ---------------------------------------------------------------- truth

pub fn parse_truth(text: &str, source: &str) -> Result<Vec<TruthRow>, IoError> {
    let rows = read_rows(text, source, &TRUTH_HEADER)?;
    let mut seen = BTreeMap::new();
    rows.iter()
        .map(|row| {
            let frame = row.parse(0, "frame")?;
            let id = row.text(1).ok_or_else(|| row.err(Some(2), "id is required"))?;
            let detection_index = row.parse(2, "detection_index")?;
            if seen.insert((frame, id.clone()), ()).is_some() {
                return Err(row.err(Some(2), format!("id {id} repeated in frame {frame}")));
            }
            Ok(TruthRow {
                frame,
                id,
                detection_index,
            })
        })
        .collect()
}

pub fn format_truth(rows: &[TruthRow]) -> String {
    write_rows(
        &TRUTH_HEADER,
        rows.iter()
            .map(|r| vec![r.frame.to_string(), r.id.clone(), r.detection_index.to_string()]),
    )
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>, IoError> {
    parse_truth(&read_to_string(path)?, &source_of(path))
}

pub fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<(), IoError> {
    write_atomic(path, format_truth(rows).as_bytes())
}

// ---------------------------------------------------------------- tracks

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Matched,
    Dimmed,
    New,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Matched => "matched",
            RowStatus::Dimmed => "dimmed",
            RowStatus::New => "new",
        }
    }
}

/// One line of a track file: a track's status in a frame, or an unnamed
/// detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: usize,
    pub id: Option<String>,
    pub status: RowStatus,
    pub detection_index: Option<usize>,
    pub position: Option<Vec3>,
    pub straightened: Option<Vec3>,
}

/// Rows for a tracked sequence: per frame, detections in index order
/// (matched or new), then dimmed tracks by id. Tracks not yet present are
/// omitted. `frames[t]` holds position `t` of the track set.
pub fn track_rows(frames: &[Vec<NucleusRecord>], frame_numbers: &[usize], track_set: &TrackSet) -> Vec<TrackRow> {
    let mut rows = Vec::new();
    for (t, records) in frames.iter().enumerate().take(track_set.frame_count()) {
        let frame = frame_numbers.get(t).copied().unwrap_or(t);
        let labels = track_set.frame_labels(t);
        for (j, r) in records.iter().enumerate() {
            let id = labels.get(&j).map(|s| s.to_string());
            rows.push(TrackRow {
                frame,
                status: if id.is_some() { RowStatus::Matched } else { RowStatus::New },
                id,
                detection_index: Some(j),
                position: Some(r.position),
                straightened: r.straightened.map(|c| c.as_vec3()),
            });
        }
        for (id, statuses) in track_set.tracks() {
            if statuses.get(t) == Some(&TrackStatus::Dimmed) {
                rows.push(TrackRow {
                    frame,
                    id: Some(id.clone()),
                    status: RowStatus::Dimmed,
                    detection_index: None,
                    position: None,
                    straightened: None,
                });
            }
        }
    }
    rows
}

pub fn parse_tracks(text: &str, source: &str) -> Result<Vec<TrackRow>, IoError> {
    let rows = read_rows(text, source, &TRACK_HEADER)?;
    rows.iter()
        .map(|row| {
            let status = match row.raw(2) {
                "matched" => RowStatus::Matched,
                "dimmed" => RowStatus::Dimmed,
                "new" => RowStatus::New,
                other => return Err(row.err(Some(3), format!("unknown status {other:?}"))),
            };
            let out = TrackRow {
                frame: row.parse(0, "frame")?,
                id: row.text(1),
                status,
                detection_index: row.optional(3, "detection_index")?,
                position: row.optional_vec3(4, ["x_um", "y_um", "z_um"])?,
                straightened: row.optional_vec3(7, ["s_um", "u_um", "v_um"])?,
            };
            let consistent = match status {
                RowStatus::Matched => out.id.is_some() && out.detection_index.is_some(),
                RowStatus::Dimmed => out.id.is_some() && out.detection_index.is_none(),
                RowStatus::New => out.detection_index.is_some(),
            };
            if !consistent {
                return Err(row.err(None, format!("fields inconsistent with status {}", status.as_str())));
            }
            Ok(out)
        })
        .collect()
}

pub fn format_tracks(rows: &[TrackRow]) -> String {
    write_rows(
        &TRACK_HEADER,
        rows.iter().map(|r| {
            vec![
                r.frame.to_string(),
                r.id.clone().unwrap_or_default(),
                r.status.as_str().to_string(),
                r.detection_index.map(|j| j.to_string()).unwrap_or_default(),
                opt_num(r.position.map(|p| p.x)),
                opt_num(r.position.map(|p| p.y)),
                opt_num(r.position.map(|p| p.z)),
                opt_num(r.straightened.map(|p| p.x)),
                opt_num(r.straightened.map(|p| p.y)),
                opt_num(r.straightened.map(|p| p.z)),
            ]
        }),
    )
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow>, IoError> {
    parse_tracks(&read_to_string(path)?, &source_of(path))
}

pub fn write_tracks(path: &Path, rows: &[TrackRow]) -> Result<(), IoError> {
    write_atomic(path, format_tracks(rows).as_bytes())
}

// ---------------------------------------------------------------- straightened

/// A nucleus with its straightened coordinates, as written by `untwist`.
#[derive(Debug, Clone, PartialEq)]
pub struct StraightenedRow {
    pub record: NucleusRecord,
    pub detection_index: usize,
    pub coord: StraightenedCoord,
}

pub fn format_straightened(rows: &[StraightenedRow]) -> String {
    write_rows(
        &STRAIGHTENED_HEADER,
        rows.iter().map(|r| {
            let c = &r.coord;
            let p = r.record.position;
            vec![
                r.record.frame.to_string(),
                r.record.id.clone().unwrap_or_default(),
                num(p.x),
                num(p.y),
                num(p.z),
                num(c.s),
                num(c.u),
                num(c.v),
                num(c.r_lateral),
                num(c.r_dorsoventral),
                c.inside_body.to_string(),
                c.clamped.to_string(),
                c.ambiguous.to_string(),
                r.detection_index.to_string(),
            ]
        }),
    )
}

pub fn parse_straightened(text: &str, source: &str) -> Result<Vec<StraightenedRow>, IoError> {
    let rows = read_rows(text, source, &STRAIGHTENED_HEADER)?;
    rows.iter()
        .map(|row| {
            let mut record = NucleusRecord::new(row.parse(0, "frame")?, row.text(1), row.vec3(2, ["x_um", "y_um", "z_um"])?);
            let coord = StraightenedCoord {
                s: row.coord(5, "s_um")?,
                u: row.coord(6, "u_um")?,
                v: row.coord(7, "v_um")?,
                r_lateral: row.coord(8, "r_lateral_um")?,
                r_dorsoventral: row.coord(9, "r_dorsoventral_um")?,
                inside_body: row.parse(10, "inside_body")?,
                clamped: row.parse(11, "clamped")?,
                ambiguous: row.parse(12, "ambiguous")?,
            };
            record.straightened = Some(coord);
            Ok(StraightenedRow {
                record,
                detection_index: row.parse(13, "detection_index")?,
                coord,
            })
        })
        .collect()
}

pub fn write_straightened(path: &Path, rows: &[StraightenedRow]) -> Result<(), IoError> {
    write_atomic(path, format_straightened(rows).as_bytes())
}
