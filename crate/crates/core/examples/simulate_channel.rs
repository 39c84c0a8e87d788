//! Simulate one session per channel condition and compare RSSI, the
//! strongest recovered CIR tap and the amplitude flatness of the CSI.
//!
//! ```text
//! cargo run --release --example simulate_channel
//! ```

use nlos_csi::baselines::{normalized_amplitude_spread, recover_cir, stream_window};
use nlos_csi::channel_sim::{simulate_session, ChannelCondition, SimConfig};

pub fn run() -> nlos_csi::Result<()> {
    let cfg = SimConfig::default();
    println!("condition        rssi  peak tap power  amplitude spread");
    for (k, condition) in ChannelCondition::ALL.into_iter().enumerate() {
        let records = simulate_session(&cfg, condition, 500, 40 + k as u64)?;
        let rssi = records.iter().map(|r| r.rssi as f64).sum::<f64>() / records.len() as f64;
        let window = stream_window(&records, 0)?;
        let mut peak = 0.0;
        let mut spread = 0.0;
        for csi in &window {
            let taps = recover_cir(csi, &cfg.subcarriers, cfg.dft_size, cfg.num_taps)?;
            peak += taps.iter().map(|a| a * a).fold(0.0, f64::max);
            spread += normalized_amplitude_spread(csi);
        }
        let n = window.len() as f64;
        println!("{:<15} {rssi:6.1}  {:14.4e}  {:16.3}", format!("{condition:?}"), peak / n, spread / n);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
