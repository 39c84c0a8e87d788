//! Train the LSTM classifier on RSSI plus CSI windows and report the test
//! metrics at the threshold picked on the validation set.
//!
//! ```text
//! cargo run --release --example train_classifier -- 100
//! ```
//! The optional argument is the epoch budget (default 5).

use nlos_csi::cli::{simulate_dataset, train_pipeline, RunConfig};

pub fn run(epochs: usize) -> nlos_csi::Result<()> {
    let mut cfg = RunConfig { seed: 3, ..Default::default() };
    cfg.simulate.scale = 0.01;
    cfg.train.seed = 3;
    cfg.train.max_epochs = epochs;
    cfg.train.patience = Some(10);
    let ds = simulate_dataset(&cfg)?;
    let out = train_pipeline(&ds, &cfg)?;

    println!("epoch  train     validation  test");
    for e in &out.report.epochs {
        println!("{:5}  {:.5}  {:.5}     {:.5}", e.epoch, e.train, e.validation, e.test);
    }
    println!("selected epoch {}", out.report.best_epoch);
    let t = out.test;
    println!(
        "test: TPR {:.4}  TNR {:.4}  avg rate {:.4}  AUC {:.4}  threshold {:.4}",
        t.tpr, t.tnr, t.avg_rate, t.auc, t.alpha_star
    );
    Ok(())
}

fn main() {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    if let Err(e) = run(epochs) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
