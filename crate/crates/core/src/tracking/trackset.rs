use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detection")]
pub enum TrackStatus {
    Matched(usize),
    Dimmed,
    NotYetPresent,
}

/// Per-track status in every frame.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackSet {
    tracks: BTreeMap<String, Vec<TrackStatus>>,
    frame_count: usize,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn tracks(&self) -> &BTreeMap<String, Vec<TrackStatus>> {
        &self.tracks
    }

    pub fn status(&self, id: &str, frame: usize) -> Option<TrackStatus> {
        self.tracks.get(id).and_then(|s| s.get(frame)).copied()
    }

    /// Appends a frame. Known tracks absent from `matched` become dimmed;
    /// tracks first seen here are not present in earlier frames.
    pub fn push_frame(&mut self, matched: BTreeMap<String, TrackStatus>) {
        let frame = self.frame_count;
        for (id, statuses) in self.tracks.iter_mut() {
            statuses.push(matched.get(id).copied().unwrap_or(TrackStatus::Dimmed));
        }
        for (id, status) in matched {
            self.tracks.entry(id).or_insert_with(|| {
                let mut v = vec![TrackStatus::NotYetPresent; frame];
                v.push(status);
                v
            });
        }
        self.frame_count += 1;
    }

    /// Drops frames from `len` on.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.frame_count {
            return;
        }
        self.tracks.retain(|_, s| {
            s.truncate(len);
            s.iter().any(|st| *st != TrackStatus::NotYetPresent)
        });
        self.frame_count = len;
    }

    /// Detection index → track id for one frame.
    pub fn frame_labels(&self, frame: usize) -> BTreeMap<usize, &str> {
        self.tracks
            .iter()
            .filter_map(|(id, s)| match s.get(frame) {
                Some(TrackStatus::Matched(j)) => Some((*j, id.as_str())),
                _ => None,
            })
            .collect()
    }

    pub fn count(&self, frame: usize, pred: impl Fn(&TrackStatus) -> bool) -> usize {
        self.tracks
            .values()
            .filter(|s| s.get(frame).is_some_and(&pred))
            .count()
    }
}
