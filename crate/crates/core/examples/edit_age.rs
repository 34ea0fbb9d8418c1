//! Ages one test subject across the supported range and prints the model's
//! own age estimate and line length along the way.
//!
//! `cargo run --release --example edit_age`

use std::sync::Arc;

use semm::edit::EditSession;
use semm::model::{DetailModel, TrainConfig};
use semm::structure::extract_lines;
use semm::synth::{Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let corpus = Corpus::generate(&CorpusConfig::new(40, 8, 64, 4))?;
    let model = Arc::new(DetailModel::fit(&corpus, &TrainConfig { steps: 100, ..TrainConfig::default() })?);
    let source = &corpus.test().next().expect("test sample").sample;
    println!("source age {:.0}", source.age);
    for target in [20.0, 30.0, 40.0, 50.0, 60.0, 70.0] {
        let mut session = EditSession::new(model.clone(), source.clone())?;
        let out = session.edit_age(target)?;
        println!(
            "target {target:>4.0}: estimated {:>5.1}, line length {:>6.1} px",
            model.estimate_age(&out.code)?,
            extract_lines(&out.sample.disp).total_length()
        );
    }
    Ok(())
}
