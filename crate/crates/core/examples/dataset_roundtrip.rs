//! Write a small simulated campaign to disk, read it back, cut it into
//! windows and split it by session.

use nlos_csi::channel_sim::{simulate_campaign, CampaignPlan, ChannelCondition, SimConfig};
use nlos_csi::dataset::{read_dataset, split, write_dataset, Dataset, WindowOptions, DEFAULT_RATIOS};

pub fn run() -> nlos_csi::Result<()> {
    let cfg = SimConfig::default();
    let plan = CampaignPlan::scaled(0.005, 200);
    let sessions = simulate_campaign(&cfg, &plan, 11)?;
    let ds = Dataset::new(cfg.subcarriers.clone(), cfg.dft_size, cfg.num_streams, sessions)?;

    let dir = std::env::temp_dir().join(format!("nlos-csi-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("campaign.bin");
    write_dataset(&path, &ds)?;
    let size = std::fs::metadata(&path)?.len();
    let back = read_dataset(&path)?;
    std::fs::remove_dir_all(&dir)?;
    assert_eq!(back, ds);
    println!("{} sessions, {} packets, {size} bytes on disk", back.sessions.len(), back.num_records());
    for c in ChannelCondition::ALL {
        println!("  {c:?}: {} packets", back.count(c));
    }

    let windows = back.windows(&WindowOptions::new(10, true))?;
    let dim = windows[0].dim();
    let parts = split(windows, DEFAULT_RATIOS, 11)?;
    println!(
        "windows of 10 packets, input dimension {dim}: train {}, validation {}, test {}",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
