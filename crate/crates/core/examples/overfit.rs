//! Trains on the synthetic fixture and reports teacher-forced and free-run F1.
//!
//! `cargo run --release -p dkg-core --example overfit -- [steps] [batch]`

use std::ops::ControlFlow;
use std::time::Instant;

use candle_core::{DType, Device};
use dkg_core::data::{prepare, synth, PreprocessConfig, RuleTokenizer};
use dkg_core::eval::{fr_f1, tf_f1, Greedy};
use dkg_core::nn::{Model, ModelConfig};
use dkg_core::train::{TrainConfig, Trainer};

fn main() -> dkg_core::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let examples = synth::generate(&synth::SynthConfig::default());
    let prepared = prepare(&examples, &PreprocessConfig::default(), &RuleTokenizer)?;
    let model = Model::new(
        ModelConfig::default(),
        prepared.vocab.clone(),
        None,
        0,
        DType::F32,
        &Device::Cpu,
    )?;
    println!("parameters: {}", model.params().parameter_count());
    let max_steps = args.first().copied().unwrap_or(200);
    let config = TrainConfig {
        max_steps,
        batch_size: args.get(1).copied().unwrap_or(64),
        eval_interval: 0,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, config, prepared.rules.clone(), 0)?;
    let start = Instant::now();
    loop {
        let summary = trainer.fit(&prepared.corpus, None, None, |p| {
            if p.stats.step % 100 == 0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        let greedy = Greedy {
            model: trainer.model(),
            max_events: 100,
        };
        let tf = tf_f1(&greedy, &prepared.corpus.datapoints)?;
        let fr = fr_f1(&greedy, &prepared.corpus.trajectories, None)?;
        println!(
            "{:>5} {:>7.1}s loss {:.4} tf {tf:.4} fr {fr:.4}",
            summary.steps,
            start.elapsed().as_secs_f64(),
            summary.losses.last().copied().unwrap_or(f64::NAN)
        );
        if (tf >= 0.95 && fr >= 0.90) || summary.steps >= max_steps {
            break;
        }
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
