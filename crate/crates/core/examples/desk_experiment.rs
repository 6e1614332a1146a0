//! Runs the synthetic desk experiment for a range of seeds and prints the
//! split-mention comparison.
//!
//! cargo run --release --example desk_experiment -- 0 5
//!
//! Training settings can be overridden through the environment: LR1, LR2,
//! EP1, EP2 (stage learning rates and epochs), BS, LAYERS, DM, GQ (general
//! queries), TPQ (triples per query) and DEPTH (re-rank depth).

use std::time::Instant;

use embert::experiment::{run_experiment, split_mention_means, ExperimentConfig};

fn main() -> embert::Result<()> {
    env_logger::init();
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (from, to) = match args.as_slice() {
        [a, b] => (*a, *b),
        [a] => (*a, *a + 1),
        _ => (0, 5),
    };
    let mut gains = Vec::new();
    for seed in from..to {
        let t = Instant::now();
        let mut cfg = ExperimentConfig::desk(seed);
        let env = |k: &str| std::env::var(k).ok().and_then(|v| v.parse::<f64>().ok());
        if let Some(x) = env("LR1") {
            cfg.stage1.learning_rate = x;
        }
        if let Some(x) = env("LR2") {
            cfg.stage2.learning_rate = x;
        }
        if let Some(x) = env("EP1") {
            cfg.stage1.epochs = x as usize;
        }
        if let Some(x) = env("EP2") {
            cfg.stage2.epochs = x as usize;
        }
        if let Some(x) = env("BS") {
            cfg.batch_size = x as usize;
        }
        if let Some(x) = env("LAYERS") {
            cfg.encoder.n_layers = x as usize;
        }
        if let Some(x) = env("GQ") {
            cfg.synth.general_queries = x as usize;
        }
        if let Some(x) = env("TPQ") {
            cfg.synth.triples_per_query = x as usize;
        }
        if let Some(x) = env("DEPTH") {
            cfg.rerank_depth = x as usize;
        }
        if let Some(x) = env("DM") {
            cfg.encoder.d_model = x as usize;
            cfg.encoder.d_ff = 2 * x as usize;
        }
        let out = run_experiment(&cfg)?;
        let (on, off) = split_mention_means(&out);
        gains.push(on - off);
        println!(
            "seed {seed}: bm25 {:.4} entity {:.4} plain {:.4} | split-mention entity {on:.4} plain {off:.4} ({:.1}s)",
            out.first_stage_report.mean(10),
            out.entity.report.mean(10),
            out.plain.report.mean(10),
            t.elapsed().as_secs_f64()
        );
        print!("{}", out.categories.to_tsv());
    }
    println!(
        "mean split-mention gain {:.4}",
        gains.iter().sum::<f64>() / gains.len() as f64
    );
    Ok(())
}
