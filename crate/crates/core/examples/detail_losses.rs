//! Compares samples of one subject under the training losses.
//!
//! `cargo run --release --example detail_losses`

use semm::losses::{distance_field_loss, mean_abs_difference, perceptual_detail_distance, reconstruction_loss, LossWeights, RasterPair, ReferenceExtractor};
use semm::synth::{Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let corpus = Corpus::generate(&CorpusConfig::new(2, 4, 64, 1))?;
    let fx = ReferenceExtractor::default();
    let weights = LossWeights::for_resolution(64);
    let first = &corpus.samples[0];
    println!("{:<12} {:>10} {:>10} {:>10} {:>10}", "sample", "df", "perceptual", "mean_abs", "rec");
    for other in &corpus.samples {
        let (a, b) = (&first.sample, &other.sample);
        let df = distance_field_loss(&a.df, &b.df, a.df.truncation())?;
        let rec = reconstruction_loss(RasterPair::new(b.disp.grid(), b.df.grid()), RasterPair::new(a.disp.grid(), a.df.grid()), &fx, &weights)?;
        println!(
            "{:<12} {df:>10.4} {:>10.3e} {:>10.3e} {rec:>10.4}",
            other.id,
            perceptual_detail_distance(&a.disp, &b.disp)?,
            mean_abs_difference(&a.disp, &b.disp)?
        );
    }
    Ok(())
}
