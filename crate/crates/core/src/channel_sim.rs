//! Synthetic WLAN channel generator.
//!
//! Each session models one receiver walk under a fixed channel condition. The
//! channel impulse response is an `M`-tap delay line with an exponential power
//! delay profile; under LOS the first tap carries a fixed-amplitude specular
//! component on top of the diffuse part. Diffuse taps evolve packet to packet
//! as a first-order autoregressive process so that windows of consecutive
//! packets carry a realistic variation pattern.
//!
//! Per packet and spatial stream:
//!
//! ```text
//! h      = generate_cir(state, stream)           unit mean power
//! H(f_n) = sum_m h(m) exp(-j 2 pi f_n m T_s)     n in S
//! Ĥ(f_n) = g * H(f_n) + v_n                      g: session path gain, v_n ~ CN(0, N0)
//! RSSI   = round(10 log10(mean |Ĥ|^2) + offset)
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::{Complex32, Complex64};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier of WLAN channel 11.
pub const CARRIER_FREQUENCY_HZ: f64 = 2.462e9;
/// Walking speed of the receiver.
pub const RECEIVER_SPEED_MPS: f64 = 0.5;
const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// Maximum Doppler shift `v * f_c / c`.
pub fn doppler_hz(speed_mps: f64, carrier_hz: f64) -> f64 {
    speed_mps * carrier_hz / SPEED_OF_LIGHT_MPS
}

/// Gaussian approximation of the Clarke autocorrelation `J0(2 pi f_d dt)`,
/// used as the per-packet AR(1) coefficient.
pub fn ar1_correlation(doppler_hz: f64, dt: f64) -> f64 {
    let x = 2.0 * PI * doppler_hz * dt;
    (-x * x / 2.0).exp()
}

/// Propagation condition of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelCondition {
    Los,
    NlosStructure,
    NlosBody,
}

impl ChannelCondition {
    pub const ALL: [ChannelCondition; 3] =
        [ChannelCondition::Los, ChannelCondition::NlosStructure, ChannelCondition::NlosBody];

    /// Binary label: 1 for LOS, 0 for both NLOS variants.
    pub fn label(self) -> u8 {
        match self {
            ChannelCondition::Los => 1,
            ChannelCondition::NlosStructure | ChannelCondition::NlosBody => 0,
        }
    }

    /// On-disk condition code.
    pub fn code(self) -> u8 {
        match self {
            ChannelCondition::Los => 0,
            ChannelCondition::NlosStructure => 1,
            ChannelCondition::NlosBody => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ChannelCondition::Los),
            1 => Some(ChannelCondition::NlosStructure),
            2 => Some(ChannelCondition::NlosBody),
            _ => None,
        }
    }

    pub fn is_los(self) -> bool {
        self == ChannelCondition::Los
    }
}

/// 802.11n 20 MHz occupied subcarriers: -28..=-1, 1..=28.
pub fn ht20_subcarriers() -> Vec<i32> {
    (-28..=28).filter(|&n| n != 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_taps: usize,
    /// Seconds between CIR taps.
    pub sample_interval: f64,
    pub dft_size: usize,
    pub subcarriers: Vec<i32>,
    /// Specular-to-diffuse power ratio of tap 0 under LOS (linear). May be
    /// `inf` for a purely specular channel.
    pub rician_k_los: f64,
    pub body_shadow_loss_db: f64,
    /// Half-width of the uniform per-session spread around `body_shadow_loss_db`.
    pub body_shadow_spread_db: f64,
    /// Diffuse tap `m` has power proportional to `exp(-tap_decay * m)`.
    pub tap_decay: f64,
    /// Per-subcarrier estimation noise variance `N0`.
    pub noise_var: f64,
    pub packet_interval: f64,
    /// Per-packet AR(1) coefficient of the diffuse taps.
    pub fading_correlation: f64,
    /// Maximum Doppler shift used for the specular phase rotation.
    pub max_doppler_hz: f64,
    pub num_streams: usize,
    pub rssi_offset_db: f64,
    /// Uniform range of the extra per-session path loss of NLOS sessions.
    pub nlos_path_loss_db: [f64; 2],
}

impl Default for SimConfig {
    fn default() -> Self {
        let packet_interval = 0.010;
        let fd = doppler_hz(RECEIVER_SPEED_MPS, CARRIER_FREQUENCY_HZ);
        SimConfig {
            num_taps: 8,
            sample_interval: 50e-9,
            dft_size: 64,
            subcarriers: ht20_subcarriers(),
            rician_k_los: 10.0,
            body_shadow_loss_db: 15.0,
            body_shadow_spread_db: 10.0,
            tap_decay: 0.5,
            noise_var: 1e-3,
            packet_interval,
            fading_correlation: ar1_correlation(fd, packet_interval),
            max_doppler_hz: fd,
            num_streams: 6,
            rssi_offset_db: 50.0,
            nlos_path_loss_db: [5.0, 25.0],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 {
            return Err(Error::config("num_taps must be positive"));
        }
        if self.dft_size == 0 {
            return Err(Error::config("dft_size must be positive"));
        }
        if self.num_taps > self.dft_size {
            return Err(Error::config(format!("num_taps {} exceeds dft_size {}", self.num_taps, self.dft_size)));
        }
        if self.subcarriers.is_empty() {
            return Err(Error::config("subcarrier set is empty"));
        }
        let half = (self.dft_size / 2) as i32;
        for &n in &self.subcarriers {
            if n == 0 {
                return Err(Error::config("subcarrier set must exclude DC (index 0)"));
            }
            if n < -half || n > half {
                return Err(Error::config(format!("subcarrier {n} outside [-{half}, {half}]")));
            }
        }
        if !(self.rician_k_los > 0.0) {
            return Err(Error::config("rician_k_los must be positive"));
        }
        if !(0.0..1.0).contains(&self.fading_correlation) {
            return Err(Error::config("fading_correlation must lie in [0, 1)"));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::config("noise_var must be finite and non-negative"));
        }
        if !(self.tap_decay >= 0.0) || !self.tap_decay.is_finite() {
            return Err(Error::config("tap_decay must be finite and non-negative"));
        }
        if !(self.sample_interval > 0.0) || !(self.packet_interval > 0.0) {
            return Err(Error::config("time intervals must be positive"));
        }
        if self.num_streams == 0 {
            return Err(Error::config("num_streams must be positive"));
        }
        let [lo, hi] = self.nlos_path_loss_db;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config("nlos_path_loss_db must be a finite [lo, hi] range"));
        }
        if !(self.body_shadow_spread_db >= 0.0) || !self.body_shadow_loss_db.is_finite() {
            return Err(Error::config("invalid body shadow loss parameters"));
        }
        if !self.rssi_offset_db.is_finite() || !self.max_doppler_hz.is_finite() {
            return Err(Error::config("rssi_offset_db and max_doppler_hz must be finite"));
        }
        Ok(())
    }

    /// Subcarrier spacing `1 / (N T_s)`.
    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / (self.dft_size as f64 * self.sample_interval)
    }
}

/// Mean tap powers of a session: the specular amplitude on tap 0 and the
/// standard deviation of each diffuse tap. Total mean power is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TapProfile {
    pub dominant_amplitude: f64,
    pub diffuse_std: Vec<f64>,
}

impl TapProfile {
    pub fn new(config: &SimConfig, condition: ChannelCondition, body_loss_db: f64) -> Self {
        let decay: Vec<f64> = (0..config.num_taps).map(|m| (-config.tap_decay * m as f64).exp()).collect();
        let decay_sum: f64 = decay.iter().sum();
        let k = config.rician_k_los;
        let (dominant_power, diffuse_power): (f64, Vec<f64>) = match condition {
            ChannelCondition::NlosStructure => (0.0, decay.iter().map(|q| q / decay_sum).collect()),
            ChannelCondition::Los if k.is_infinite() => (1.0, vec![0.0; decay.len()]),
            ChannelCondition::Los => {
                let c = 1.0 / (k + decay_sum);
                (k * c, decay.iter().map(|q| c * q).collect())
            }
            ChannelCondition::NlosBody => {
                let shadow = 10f64.powf(-body_loss_db / 10.0);
                if k.is_infinite() {
                    (1.0, vec![0.0; decay.len()])
                } else {
                    let dom = k * shadow;
                    let total = dom + decay_sum;
                    (dom / total, decay.iter().map(|q| q / total).collect())
                }
            }
        };
        TapProfile {
            dominant_amplitude: dominant_power.sqrt(),
            diffuse_std: diffuse_power.into_iter().map(f64::sqrt).collect(),
        }
    }
}

/// Per-session fading state: one set of diffuse taps and one specular phase
/// per spatial stream, plus the session's random draws.
#[derive(Debug, Clone)]
pub struct FadingState {
    condition: ChannelCondition,
    profile: TapProfile,
    /// Unit-variance diffuse innovations, `[stream][tap]`.
    diffuse: Vec<Vec<Complex64>>,
    dominant_phase: Vec<f64>,
    /// Specular phase advance per packet (radians).
    doppler_step: f64,
    body_loss_db: f64,
    path_loss_db: f64,
    rng: ChaCha8Rng,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

impl FadingState {
    pub fn new(config: &SimConfig, condition: ChannelCondition, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body_loss_db = match condition {
            ChannelCondition::NlosBody => {
                let spread = config.body_shadow_spread_db;
                config.body_shadow_loss_db + spread * rng.gen_range(-1.0..=1.0)
            }
            _ => 0.0,
        };
        let path_loss_db = if condition.is_los() {
            0.0
        } else {
            let [lo, hi] = config.nlos_path_loss_db;
            lo + (hi - lo) * rng.gen::<f64>()
        };
        let aoa: f64 = rng.gen_range(0.0..2.0 * PI);
        let doppler_step = 2.0 * PI * config.max_doppler_hz * aoa.cos() * config.packet_interval;
        let dominant_phase = (0..config.num_streams).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let diffuse = (0..config.num_streams)
            .map(|_| (0..config.num_taps).map(|_| complex_gaussian(&mut rng)).collect())
            .collect();
        Ok(FadingState {
            condition,
            profile: TapProfile::new(config, condition, body_loss_db),
            diffuse,
            dominant_phase,
            doppler_step,
            body_loss_db,
            path_loss_db,
            rng,
        })
    }

    pub fn condition(&self) -> ChannelCondition {
        self.condition
    }

    pub fn profile(&self) -> &TapProfile {
        &self.profile
    }

    pub fn num_streams(&self) -> usize {
        self.diffuse.len()
    }

    pub fn body_loss_db(&self) -> f64 {
        self.body_loss_db
    }

    pub fn path_loss_db(&self) -> f64 {
        self.path_loss_db
    }

    /// Linear amplitude factor applied to the CSI of this session.
    pub fn path_gain(&self) -> f64 {
        10f64.powf(-self.path_loss_db / 20.0)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Current tap vector of one stream. The mean of `sum |h(m)|^2` is 1.
pub fn generate_cir(config: &SimConfig, state: &FadingState, stream: usize) -> Result<Vec<Complex64>> {
    if config.num_taps == 0 {
        return Err(Error::config("num_taps must be positive"));
    }
    if !(config.rician_k_los > 0.0) {
        return Err(Error::config("rician_k_los must be positive"));
    }
    let diffuse = state.diffuse.get(stream).ok_or_else(|| Error::input(format!("stream {stream} out of range")))?;
    if diffuse.len() != config.num_taps {
        return Err(Error::config("fading state does not match num_taps"));
    }
    let profile = &state.profile;
    let mut h: Vec<Complex64> = diffuse.iter().zip(&profile.diffuse_std).map(|(d, s)| d * *s).collect();
    if profile.dominant_amplitude > 0.0 {
        h[0] += Complex64::from_polar(profile.dominant_amplitude, state.dominant_phase[stream]);
    }
    Ok(h)
}

/// Advance every stream by one packet interval.
pub fn evolve_fading(state: &mut FadingState, config: &SimConfig) {
    let rho = config.fading_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    let FadingState { diffuse, dominant_phase, rng, doppler_step, .. } = state;
    for taps in diffuse.iter_mut() {
        for tap in taps.iter_mut() {
            let w = complex_gaussian(rng);
            *tap = *tap * rho + w * innovation;
        }
    }
    for phase in dominant_phase.iter_mut() {
        *phase = (*phase + *doppler_step).rem_euclid(2.0 * PI);
    }
}

/// Noiseless frequency response on the subcarrier set of `config`:
/// `H(f_n) = sum_m h(m) exp(-j 2 pi f_n m T_s)` with `f_n = n / (N T_s)`.
pub fn cir_to_csi(h: &[Complex64], config: &SimConfig) -> Result<Vec<Complex64>> {
    let n_fft = config.dft_size;
    if h.len() > n_fft {
        return Err(Error::config(format!("tap vector of length {} exceeds dft_size {n_fft}", h.len())));
    }
    let n_fft_i = n_fft as i64;
    Ok(config
        .subcarriers
        .iter()
        .map(|&n| {
            h.iter()
                .enumerate()
                .map(|(m, &tap)| {
                    // reduce n*m modulo N so the phase argument stays exact
                    let k = (n as i64 * m as i64).rem_euclid(n_fft_i);
                    let angle = -2.0 * PI * k as f64 / n_fft as f64;
                    tap * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect())
}

/// `Ĥ = H + v` with `v` i.i.d. circular complex Gaussian of variance `noise_var`.
pub fn add_estimation_noise<R: Rng + ?Sized>(csi: &[Complex64], noise_var: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    if !(noise_var >= 0.0) {
        return Err(Error::config("noise variance must be non-negative"));
    }
    if noise_var == 0.0 {
        return Ok(csi.to_vec());
    }
    let std = noise_var.sqrt();
    Ok(csi.iter().map(|&x| x + complex_gaussian(rng) * std).collect())
}

/// Integer RSSI of one packet from its per-stream CSI.
pub fn compute_rssi<T: AsRef<[Complex64]>>(streams: &[T], rssi_offset_db: f64) -> Result<u16> {
    if streams.is_empty() {
        return Err(Error::input("RSSI needs at least one stream"));
    }
    let mut total = 0.0;
    for s in streams {
        let s = s.as_ref();
        if s.is_empty() {
            return Err(Error::input("RSSI stream has no subcarriers"));
        }
        total += s.iter().map(|x| x.norm_sqr()).sum::<f64>() / s.len() as f64;
    }
    let mean_power = total / streams.len() as f64;
    let db = 10.0 * mean_power.log10() + rssi_offset_db;
    // NaN and -inf both land on 0
    Ok(db.round().clamp(0.0, u16::MAX as f64) as u16)
}

/// One received packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub sequence_number: u32,
    pub condition: ChannelCondition,
    pub rssi: u16,
    /// Estimated CSI per spatial stream, in subcarrier-set order.
    pub csi: Vec<Vec<Complex32>>,
}

impl PacketRecord {
    pub fn num_streams(&self) -> usize {
        self.csi.len()
    }

    /// RSSI of a single stream, computed the same way as the packet RSSI.
    pub fn stream_rssi(&self, stream: usize, rssi_offset_db: f64) -> Result<u16> {
        let csi = self.csi.get(stream).ok_or_else(|| Error::input(format!("stream {stream} out of range")))?;
        let wide: Vec<Complex64> = csi.iter().map(|c| Complex64::new(c.re as f64, c.im as f64)).collect();
        compute_rssi(&[wide], rssi_offset_db)
    }
}

/// Simulate `count` consecutive packets of one session. Deterministic in `seed`.
pub fn simulate_session(
    config: &SimConfig,
    condition: ChannelCondition,
    count: usize,
    seed: u64,
) -> Result<Vec<PacketRecord>> {
    if count == 0 {
        return Err(Error::input("session needs at least one packet"));
    }
    let mut state = FadingState::new(config, condition, seed)?;
    let gain = state.path_gain();
    let mut records = Vec::with_capacity(count);
    for seq in 0..count {
        if seq > 0 {
            evolve_fading(&mut state, config);
        }
        let mut streams = Vec::with_capacity(config.num_streams);
        for stream in 0..config.num_streams {
            let h = generate_cir(config, &state, stream)?;
            let csi: Vec<Complex64> = cir_to_csi(&h, config)?.into_iter().map(|x| x * gain).collect();
            streams.push(add_estimation_noise(&csi, config.noise_var, state.rng_mut())?);
        }
        let rssi = compute_rssi(&streams, config.rssi_offset_db)?;
        records.push(PacketRecord {
            sequence_number: seq as u32,
            condition,
            rssi,
            csi: streams.iter().map(|s| s.iter().map(|c| Complex32::new(c.re as f32, c.im as f32)).collect()).collect(),
        });
    }
    Ok(records)
}

/// Packet counts of the default campaign, per condition.
pub const CAMPAIGN_PACKETS_LOS: usize = 101_197;
pub const CAMPAIGN_PACKETS_NLOS_BODY: usize = 103_547;
pub const CAMPAIGN_PACKETS_NLOS_STRUCTURE: usize = 227_818;

/// How many packets of each condition to simulate and how to cut them into sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub los_packets: usize,
    pub nlos_structure_packets: usize,
    pub nlos_body_packets: usize,
    pub session_len: usize,
}

impl CampaignPlan {
    /// Default campaign proportions scaled by `scale`.
    pub fn scaled(scale: f64, session_len: usize) -> Self {
        let n = |count: usize| (count as f64 * scale).round() as usize;
        CampaignPlan {
            los_packets: n(CAMPAIGN_PACKETS_LOS),
            nlos_structure_packets: n(CAMPAIGN_PACKETS_NLOS_STRUCTURE),
            nlos_body_packets: n(CAMPAIGN_PACKETS_NLOS_BODY),
            session_len,
        }
    }

    pub fn packets(&self, condition: ChannelCondition) -> usize {
        match condition {
            ChannelCondition::Los => self.los_packets,
            ChannelCondition::NlosStructure => self.nlos_structure_packets,
            ChannelCondition::NlosBody => self.nlos_body_packets,
        }
    }
}

/// One contiguous session of packets.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub condition: ChannelCondition,
    pub records: Vec<PacketRecord>,
}

/// Simulate every session of `plan`, LOS first, then NLOS_STRUCTURE, then
/// NLOS_BODY. Each session gets its own seed drawn from a master stream.
pub fn simulate_campaign(config: &SimConfig, plan: &CampaignPlan, seed: u64) -> Result<Vec<Session>> {
    config.validate()?;
    if plan.session_len == 0 {
        return Err(Error::config("session_len must be positive"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut sessions = Vec::new();
    for condition in ChannelCondition::ALL {
        let mut remaining = plan.packets(condition);
        while remaining > 0 {
            let len = remaining.min(plan.session_len);
            let session_seed = master.next_u64();
            sessions.push(Session { condition, records: simulate_session(config, condition, len, session_seed)? });
            remaining -= len;
        }
    }
    Ok(sessions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config_with(f: impl FnOnce(&mut SimConfig)) -> SimConfig {
        let mut c = SimConfig::default();
        f(&mut c);
        c
    }

    #[test]
    fn default_config_is_valid() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.subcarriers.len(), 56);
        assert!((c.fading_correlation - 0.967).abs() < 0.002, "{}", c.fading_correlation);
        assert!((c.max_doppler_hz - 4.1).abs() < 0.05);
        assert_relative_eq!(c.subcarrier_spacing(), 312_500.0, max_relative = 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            config_with(|c| c.num_taps = 0),
            config_with(|c| c.rician_k_los = 0.0),
            config_with(|c| c.rician_k_los = -1.0),
            config_with(|c| c.num_taps = 65),
            config_with(|c| c.subcarriers = vec![0, 1]),
            config_with(|c| c.subcarriers = vec![33]),
            config_with(|c| c.fading_correlation = 1.0),
            config_with(|c| c.noise_var = -0.1),
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        let c = config_with(|c| c.subcarriers = vec![-32, 32]);
        c.validate().unwrap();
    }

    #[test]
    fn pure_specular_los_is_a_single_unit_tap() {
        let config = config_with(|c| c.rician_k_los = f64::INFINITY);
        let state = FadingState::new(&config, ChannelCondition::Los, 3).unwrap();
        let h = generate_cir(&config, &state, 0).unwrap();
        assert_eq!(h.len(), 8);
        assert_relative_eq!(h[0].norm(), 1.0, max_relative = 1e-15);
        assert!(h[1..].iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn generate_cir_reports_bad_stream() {
        let config = SimConfig::default();
        let state = FadingState::new(&config, ChannelCondition::Los, 0).unwrap();
        assert!(matches!(generate_cir(&config, &state, 6), Err(Error::Input(_))));
    }

    #[test]
    fn body_profile_has_attenuated_specular_tap() {
        let config = SimConfig::default();
        let los = TapProfile::new(&config, ChannelCondition::Los, 0.0);
        let body = TapProfile::new(&config, ChannelCondition::NlosBody, 15.0);
        let power = |p: &TapProfile| p.dominant_amplitude.powi(2) + p.diffuse_std.iter().map(|s| s * s).sum::<f64>();
        assert_relative_eq!(power(&los), 1.0, max_relative = 1e-12);
        assert_relative_eq!(power(&body), 1.0, max_relative = 1e-12);
        let k_body = body.dominant_amplitude.powi(2) / body.diffuse_std[0].powi(2);
        assert_relative_eq!(k_body, 10.0 * 10f64.powf(-1.5), max_relative = 1e-12);
    }

    #[test]
    fn unit_delay_is_a_phase_ramp() {
        let config = config_with(|c| c.subcarriers = (-32..32).collect());
        let mut h = vec![Complex64::new(0.0, 0.0); 8];
        h[0] = Complex64::new(1.0, 0.0);
        for v in cir_to_csi(&h, &config).unwrap() {
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
        h[0] = Complex64::new(0.0, 0.0);
        h[1] = Complex64::new(1.0, 0.0);
        let csi = cir_to_csi(&h, &config).unwrap();
        for (&n, v) in config.subcarriers.iter().zip(&csi) {
            let expected = Complex64::from_polar(1.0, -2.0 * PI * n as f64 / 64.0);
            assert!((v - expected).norm() < 1e-15);
        }
        let at16 = csi[config.subcarriers.iter().position(|&n| n == 16).unwrap()];
        assert!((at16 - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn cir_longer_than_dft_is_rejected() {
        let config = config_with(|c| c.dft_size = 4);
        let h = vec![Complex64::new(1.0, 0.0); 5];
        assert!(matches!(cir_to_csi(&h, &config), Err(Error::Config(_))));
    }

    #[test]
    fn zero_noise_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, -0.5)).collect();
        assert_eq!(add_estimation_noise(&h, 0.0, &mut rng).unwrap(), h);
        assert!(matches!(add_estimation_noise(&h, -1.0, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn rssi_examples() {
        let ones = vec![vec![Complex64::new(1.0, 0.0); 56]; 3];
        assert_eq!(compute_rssi(&ones, 45.0).unwrap(), 45);
        let tens = vec![vec![Complex64::new(0.0, 10.0); 56]; 3];
        assert_eq!(compute_rssi(&tens, 45.0).unwrap(), 65);
        let zeros = vec![vec![Complex64::new(0.0, 0.0); 56]];
        assert_eq!(compute_rssi(&zeros, 45.0).unwrap(), 0);
        let empty: Vec<Vec<Complex64>> = vec![];
        assert!(matches!(compute_rssi(&empty, 45.0), Err(Error::Input(_))));
    }

    #[test]
    fn smallest_session() {
        let config = SimConfig::default();
        let recs = simulate_session(&config, ChannelCondition::NlosBody, 1, 9).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].csi.len(), 6);
        assert!(recs[0].csi.iter().all(|s| s.len() == 56));
        assert!(recs[0].csi.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite()));
        assert!(simulate_session(&config, ChannelCondition::Los, 0, 9).is_err());
    }

    #[test]
    fn sessions_are_deterministic() {
        let config = SimConfig::default();
        let a = simulate_session(&config, ChannelCondition::Los, 50, 77).unwrap();
        let b = simulate_session(&config, ChannelCondition::Los, 50, 77).unwrap();
        let c = simulate_session(&config, ChannelCondition::Los, 50, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stream_rssi_matches_single_stream_formula() {
        let config = SimConfig::default();
        let recs = simulate_session(&config, ChannelCondition::Los, 3, 1).unwrap();
        for r in &recs {
            let v = r.stream_rssi(0, config.rssi_offset_db).unwrap();
            assert!((v as i32 - r.rssi as i32).abs() <= 3);
        }
    }

    #[test]
    fn campaign_plan_scales_reference_counts() {
        let plan = CampaignPlan::scaled(0.01, 1000);
        assert_eq!(plan.los_packets, 1012);
        assert_eq!(plan.nlos_body_packets, 1035);
        assert_eq!(plan.nlos_structure_packets, 2278);
    }

    #[test]
    fn campaign_cuts_sessions() {
        let plan = CampaignPlan { los_packets: 25, nlos_structure_packets: 10, nlos_body_packets: 0, session_len: 10 };
        let sessions = simulate_campaign(&SimConfig::default(), &plan, 5).unwrap();
        let lens: Vec<usize> = sessions.iter().map(|s| s.records.len()).collect();
        assert_eq!(lens, vec![10, 10, 5, 10]);
        assert_eq!(sessions[3].condition, ChannelCondition::NlosStructure);
    }
}
