//! Moves a neutral sample of a test subject over 40 to each key expression.
//! Each result is compared with the subject's own rendering of that
//! expression, next to the unedited reconstruction.
//!
//! `cargo run --release --example edit_expression`

use std::sync::Arc;

use semm::edit::EditSession;
use semm::losses::perceptual_detail_distance;
use semm::model::{DetailModel, TrainConfig};
use semm::synth::{render_details, Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let cfg = CorpusConfig::new(40, 8, 64, 2);
    let corpus = Corpus::generate(&cfg)?;
    let model = Arc::new(DetailModel::fit(&corpus, &TrainConfig { steps: 100, ..TrainConfig::default() })?);
    let test = corpus.test().find(|s| s.sample.age > 40.0).expect("test sample over 40");
    let subject = cfg.subject(test.subject_id);
    let neutral = render_details(&subject, &[0.0; 8], test.sample.age, 64)?.sample;
    let recon = EditSession::new(model.clone(), neutral.clone())?.current_sample()?.disp;
    for (k, key) in model.key_expressions().iter().enumerate() {
        let mut session = EditSession::new(model.clone(), neutral.clone())?;
        let edited = session.edit_expression(key)?;
        let truth = render_details(&subject, key, test.sample.age, 64)?.sample;
        println!(
            "key {k}: edited {:.3e}, unedited reconstruction {:.3e}",
            perceptual_detail_distance(&edited.sample.disp, &truth.disp)?,
            perceptual_detail_distance(&recon, &truth.disp)?
        );
    }
    Ok(())
}
