//! Trains on a synthetic corpus and prints the held-out editing reports.
//!
//! `cargo run --release --example evaluate -- [subjects] [steps]`

use std::sync::Arc;
use std::time::Instant;

use semm::evaluation::evaluate;
use semm::model::{DetailModel, TrainConfig};
use semm::synth::{Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let mut args = std::env::args().skip(1);
    let subjects = args.next().map(|s| s.parse().expect("subject count")).unwrap_or(100);
    let steps = args.next().map(|s| s.parse().expect("step count")).unwrap_or(200);
    let corpus = Corpus::generate(&CorpusConfig::new(subjects, 8, 64, 1))?;
    let t = Instant::now();
    let model = Arc::new(DetailModel::fit(&corpus, &TrainConfig { steps, ..TrainConfig::default() })?);
    println!("trained in {:.1?}", t.elapsed());
    let report = evaluate(model, &corpus, 3)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
