//! Draws a new wrinkle, erases an existing one and undoes both.
//!
//! `cargo run --release --example edit_lines -- out_dir`

use std::path::PathBuf;
use std::sync::Arc;

use semm::edit::EditSession;
use semm::io::{preview_png, save_lines};
use semm::model::{DetailModel, TrainConfig};
use semm::structure::{LineEdit, Stroke};
use semm::synth::{Corpus, CorpusConfig};

fn main() -> semm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "edit_lines_out".into()));
    std::fs::create_dir_all(&out)?;
    let corpus = Corpus::generate(&CorpusConfig::new(30, 8, 64, 6))?;
    let model = Arc::new(DetailModel::fit(&corpus, &TrainConfig { steps: 50, ..TrainConfig::default() })?);
    let mut session = EditSession::new(model, corpus.test().next().expect("test sample").sample.clone())?;
    println!("extracted {} line pixels", session.lines().count());

    let draw = LineEdit::new(vec![Stroke::draw(vec![[10.0, 20.0], [30.0, 24.0], [54.0, 20.0]])]);
    let (drawn, trace) = session.edit_lines_traced(&draw, 200)?;
    println!("draw: {} line pixels, objective {:.4} -> {:.4}", session.lines().count(), trace.initial_objective, trace.final_objective);
    std::fs::write(out.join("drawn.preview.png"), preview_png(&drawn.sample.disp)?)?;

    if let Some(longest) = session.lines().components().into_iter().max_by_key(|c| c.len()) {
        let points = longest.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
        let erased = session.edit_lines(&LineEdit::new(vec![Stroke::erase(points, 2.0)]), 200)?;
        println!("erase: {} line pixels", session.lines().count());
        std::fs::write(out.join("erased.preview.png"), preview_png(&erased.sample.disp)?)?;
    }
    save_lines(out.join("lines.png"), session.lines())?;
    while session.undo() {}
    println!("after undo: {} line pixels, history {}", session.lines().count(), session.history().len());
    Ok(())
}
