//! Skewness, kurtosis and phase features over growing window lengths.

use nlos_csi::baselines::FeatureKind;
use nlos_csi::cli::{baseline_pipeline, simulate_dataset, RunConfig};

pub fn run() -> nlos_csi::Result<()> {
    let mut cfg = RunConfig { seed: 5, ..Default::default() };
    cfg.simulate.scale = 0.02;
    cfg.simulate.session_len = 1000;
    let ds = simulate_dataset(&cfg)?;
    println!("feature    P     windows  AUC     avg rate");
    for kind in FeatureKind::ALL {
        for p in [10, 100, 500] {
            cfg.baseline.feature = kind;
            cfg.baseline.p = p;
            cfg.baseline.stride = Some(50);
            let out = baseline_pipeline(&ds, &cfg)?;
            if let Some(s) = out.summary {
                println!("{:<9} {p:4}  {:8}  {:.4}  {:.4}", kind.as_str(), out.rows.len(), s.auc, s.avg_rate);
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
