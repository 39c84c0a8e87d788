//! Compare backpropagation-through-time gradients with central finite
//! differences of the loss on a small random LSTM.

use nlos_csi::lstm::{backward, bce_with_logit, forward, predict_logit, LstmParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn loss(params: &LstmParams, xs: &[Vec<f64>], y: f64) -> nlos_csi::Result<f64> {
    Ok(bce_with_logit(predict_logit(params, xs)?, y))
}

pub fn run() -> nlos_csi::Result<()> {
    let (dx, dh, p) = (5, 3, 4);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..LstmParams::num_params(dx, dh)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = LstmParams::from_vec(dx, dh, data)?;
        let xs: Vec<Vec<f64>> = (0..p).map(|_| (0..dx).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y = (seed % 2) as f64;
        let grad = backward(&params, &forward(&params, &xs)?, y)?;
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus.as_mut_slice()[k] += STEP;
            let mut minus = params.clone();
            minus.as_mut_slice()[k] -= STEP;
            let numeric = (loss(&plus, &xs, y)? - loss(&minus, &xs, y)?) / (2.0 * STEP);
            let analytic = grad.as_slice()[k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    println!("{} parameters per model, worst relative error {worst:.2e}", LstmParams::num_params(dx, dh));
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
