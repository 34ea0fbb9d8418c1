//! Interpolates expression keyframes into a frame sequence.
//!
//! `cargo run --release --example animate -- out_dir`

use std::path::PathBuf;
use std::sync::Arc;

use semm::edit::{EditSession, Keyframe};
use semm::io::preview_png;
use semm::model::{DetailModel, TrainConfig};
use semm::synth::{Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "animate_out".into()));
    std::fs::create_dir_all(&out)?;
    let corpus = Corpus::generate(&CorpusConfig::new(30, 8, 64, 8))?;
    let model = Arc::new(DetailModel::fit(&corpus, &TrainConfig { steps: 50, ..TrainConfig::default() })?);
    let keys = model.key_expressions();
    let session = EditSession::new(model, corpus.test().next().expect("test sample").sample.clone())?;
    let keyframes = [
        Keyframe { time: 0.0, weights: vec![0.0; 8] },
        Keyframe { time: 0.5, weights: keys[1].clone() },
        Keyframe { time: 1.0, weights: keys[4].clone() },
    ];
    let frames = session.animate(&keyframes, 12.0)?;
    let steps: Vec<f64> = frames
        .windows(2)
        .map(|w| w[0].grid().zip_map(w[1].grid(), |a, b| (a - b).abs()).mean())
        .collect();
    println!("{} frames, largest step {:.2e}, smallest {:.2e}", frames.len(), steps.iter().cloned().fold(0.0, f64::max), steps.iter().cloned().fold(f64::INFINITY, f64::min));
    for (i, f) in frames.iter().enumerate() {
        std::fs::write(out.join(format!("frame_{i:04}.png")), preview_png(f)?)?;
    }
    Ok(())
}
