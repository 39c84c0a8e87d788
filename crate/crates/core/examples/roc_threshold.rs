//! ROC curve, AUC and threshold selection on overlapping Gaussian scores.

use nlos_csi::eval::{confusion, roc, select_threshold, write_roc_csv, Objective, ScoredSample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run() -> nlos_csi::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let los = Normal::new(1.0, 1.0).unwrap();
    let nlos = Normal::new(0.0, 1.0).unwrap();
    // three NLOS windows per LOS window
    let samples: Vec<ScoredSample> = (0..4000)
        .map(|k| {
            if k % 4 == 0 {
                ScoredSample::new(los.sample(&mut rng), 1)
            } else {
                ScoredSample::new(nlos.sample(&mut rng), 0)
            }
        })
        .collect();

    let curve = roc(&samples)?;
    println!("AUC {:.4} over {} ROC points", curve.auc, curve.points.len());
    for objective in [Objective::AvgRate, Objective::Accuracy] {
        let choice = select_threshold(&samples, objective)?;
        let (counts, rates) = confusion(&samples, choice.alpha)?;
        println!(
            "{objective:?}: alpha {:.4}, TPR {:.4}, TNR {:.4}, accuracy {:.4} (tp {} fn {} tn {} fp {})",
            choice.alpha, rates.tpr, rates.tnr, rates.accuracy, counts.tp, counts.fn_, counts.tn, counts.fp
        );
    }

    let mut csv = Vec::new();
    write_roc_csv(&mut csv, &curve)?;
    let text = String::from_utf8_lossy(&csv);
    for line in text.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
