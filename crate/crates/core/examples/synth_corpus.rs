//! Generates a synthetic training corpus on disk.
//!
//! `cargo run --release --example synth_corpus -- out_dir [subjects]`

use std::path::PathBuf;

use semm::synth::{build_corpus, CorpusConfig, Split};

fn main() -> semm::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "corpus".into()));
    let subjects = args.next().map(|s| s.parse().expect("subject count")).unwrap_or(20);
    let corpus = build_corpus(&CorpusConfig::new(subjects, 8, 64, 0), &out)?;
    let ages: Vec<f64> = corpus.samples.iter().map(|s| s.sample.age).collect();
    println!(
        "{} samples, {} train / {} test subjects, ages {:.0}..{:.0}",
        corpus.samples.len(),
        corpus.subject_ids(Split::Train).len(),
        corpus.subject_ids(Split::Test).len(),
        ages.iter().cloned().fold(f64::INFINITY, f64::min),
        ages.iter().cloned().fold(0.0, f64::max),
    );
    println!("written to {}", out.display());
    Ok(())
}
