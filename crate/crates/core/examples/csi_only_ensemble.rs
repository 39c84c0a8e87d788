//! Train without the RSSI input on longer windows, then score the test split
//! per stream and with the median over the six streams of each window.

use nlos_csi::cli::{eval_pipeline, simulate_dataset, train_pipeline, Ensemble, RunConfig, Subset};

pub fn run(epochs: usize) -> nlos_csi::Result<()> {
    let mut cfg = RunConfig { seed: 9, ..Default::default() };
    cfg.simulate.scale = 0.01;
    cfg.window.p = 50;
    cfg.window.stride = Some(25);
    cfg.window.include_rssi = false;
    cfg.train.seed = 9;
    cfg.train.max_epochs = epochs;
    let ds = simulate_dataset(&cfg)?;
    let trained = train_pipeline(&ds, &cfg)?;
    println!("input dimension {}", trained.checkpoint.params.input_dim());

    cfg.eval.subset = Subset::Test;
    for ensemble in [Ensemble::None, Ensemble::Median] {
        cfg.eval.ensemble = ensemble;
        let out = eval_pipeline(&trained.checkpoint, &ds, &cfg)?;
        println!(
            "{ensemble:?}: {} scores, avg rate {:.4}, AUC {:.4}",
            out.scores.len(),
            out.summary.avg_rate,
            out.summary.auc
        );
    }
    Ok(())
}

fn main() {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    if let Err(e) = run(epochs) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
