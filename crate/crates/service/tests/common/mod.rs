#![allow(dead_code)]

use seamtrack_core::geometry::GeometryConfig;
use seamtrack_core::io::Sequence;
use seamtrack_core::synth::{generate, SynthConfig, SynthDataset};
use seamtrack_core::tracking::TrackConfig;
use seamtrack_service::{Session, SessionInit};

pub fn dataset(seed: u64, n_frames: usize) -> SynthDataset {
    generate(&SynthConfig {
        seed,
        n_frames,
        ..SynthConfig::default()
    })
    .expect("default synth config is feasible")
}

pub fn init_from(data: &SynthDataset, config: TrackConfig) -> SessionInit {
    SessionInit {
        sequence: Sequence {
            frame_numbers: (0..data.frames.len()).collect(),
            frames: data.frames.clone(),
            seams: Some(data.seams.clone()),
        },
        config,
        geometry: GeometryConfig::default(),
    }
}

pub fn session(seed: u64, n_frames: usize) -> Session {
    Session::create("s", init_from(&dataset(seed, n_frames), TrackConfig::default())).unwrap()
}
