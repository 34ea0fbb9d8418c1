//! Fits a model to a fresh corpus and saves it.
//!
//! `cargo run --release --example train_model -- model.semm [subjects] [steps]`

use std::time::Instant;

use semm::model::{DetailModel, TrainConfig};
use semm::synth::{Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "model.semm".into());
    let subjects = args.next().map(|s| s.parse().expect("subject count")).unwrap_or(60);
    let steps = args.next().map(|s| s.parse().expect("step count")).unwrap_or(200);
    let corpus = Corpus::generate(&CorpusConfig::new(subjects, 8, 64, 0))?;
    let t = Instant::now();
    let model = DetailModel::fit(&corpus, &TrainConfig { steps, ..TrainConfig::default() })?;
    let meta = &model.metadata;
    println!("fit {} samples in {:.1?}", meta.train_samples, t.elapsed());
    println!("d = {}, explained variance {:.3}, age head rmse {:.1} yr", model.latent_dim(), meta.explained_variance, meta.age_head_rmse);
    if let Some(l) = &meta.final_losses {
        println!("final losses: total {:.4} rec {:.4} structure {:.4} cycle {:.4}", l.total, l.rec, l.structure, l.cycle);
    }
    model.save(&out)?;
    println!("saved {out}");
    Ok(())
}
