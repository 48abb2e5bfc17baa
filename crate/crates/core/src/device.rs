//! Behavioural Y-Flash cell model.
//!
//! Each pulse moves the conductance along an exponential approach to a rail:
//! program pulses pull toward the low rail, erase pulses toward the high one.
//! Every device carries two lognormal D2D multipliers (one on the erase
//! saturation level, one on the pulse rate) and its own C2C noise stream.
//! Read current comes from a log-log calibration table, so it is nonlinear in
//! conductance, and is zero unless the cell is forward-biased.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeedTree, Stream};

pub const NANO: f64 = 1e-9;
pub const MICRO: f64 = 1e-6;

/// Calibration point of the read table: conductance (S) and current (A) at
/// the table's reference voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadAnchor {
    pub g: f64,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub g_floor: f64,
    pub g_ceiling: f64,
    pub program_rail: f64,
    /// Nominal erase saturation level, scaled per device by `d2d_factor`.
    pub erase_rail: f64,
    /// Rate constants (1/s) of the exponential approach.
    pub k_program: f64,
    pub k_erase: f64,
    pub program_amplitude: f64,
    pub erase_amplitude: f64,
    pub table_voltage: f64,
    pub read_table: Vec<ReadAnchor>,
    /// Conductances at which `c2c_sigma_lcs` and `c2c_sigma_hcs` apply.
    pub c2c_anchor_low: f64,
    pub c2c_anchor_high: f64,
    /// Cycle protocol used by [`DeviceModel::c2c_statistics`].
    pub cycle_program_width: f64,
    pub cycle_erase_width: f64,
    pub cycle_lcs_level: f64,
    pub cycle_hcs_level: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            g_floor: 0.5 * NANO,
            g_ceiling: 2.8 * MICRO,
            program_rail: 0.5 * NANO,
            erase_rail: 2.6 * MICRO,
            k_program: 1100.0,
            k_erase: 180.0,
            program_amplitude: 5.0,
            erase_amplitude: 8.0,
            table_voltage: 2.0,
            read_table: vec![
                ReadAnchor { g: 1.0 * NANO, current: 3.0 * NANO },
                ReadAnchor { g: 2.2 * MICRO, current: 4.5 * MICRO },
                ReadAnchor { g: 2.5 * MICRO, current: 5.0 * MICRO },
            ],
            c2c_anchor_low: 1.0 * NANO,
            c2c_anchor_high: 1.0 * MICRO,
            cycle_program_width: 200e-6,
            cycle_erase_width: 100e-6,
            cycle_lcs_level: 1.0 * NANO,
            cycle_hcs_level: 1.0 * MICRO,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g_floor", self.g_floor),
            ("program_rail", self.program_rail),
            ("erase_rail", self.erase_rail),
            ("k_program", self.k_program),
            ("k_erase", self.k_erase),
            ("table_voltage", self.table_voltage),
            ("c2c_anchor_low", self.c2c_anchor_low),
            ("cycle_program_width", self.cycle_program_width),
            ("cycle_erase_width", self.cycle_erase_width),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("device `{name}` must be positive, got {v}")));
        }
        if self.g_ceiling <= self.g_floor {
            return Err(Error::Config("g_ceiling must exceed g_floor".into()));
        }
        if self.c2c_anchor_high <= self.c2c_anchor_low {
            return Err(Error::Config("c2c_anchor_high must exceed c2c_anchor_low".into()));
        }
        if self.read_table.len() < 2 {
            return Err(Error::Config("read table needs at least two anchors".into()));
        }
        let increasing = self
            .read_table
            .windows(2)
            .all(|w| w[0].g > 0.0 && w[0].current > 0.0 && w[1].g > w[0].g && w[1].current > w[0].current);
        if !increasing {
            return Err(Error::Config("read table must be positive and strictly increasing".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("device config is always serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariabilityConfig {
    pub c2c_sigma_lcs: f64,
    pub c2c_sigma_hcs: f64,
    /// Relative SD of the per-device erase saturation level.
    pub d2d_sigma: f64,
    /// Relative SD of the per-device pulse-rate multiplier.
    pub d2d_rate_sigma: f64,
    pub seed: u64,
}

impl Default for VariabilityConfig {
    fn default() -> Self {
        Self {
            c2c_sigma_lcs: 0.048,
            c2c_sigma_hcs: 0.0074,
            d2d_sigma: 0.027,
            d2d_rate_sigma: 0.18,
            seed: 0,
        }
    }
}

impl VariabilityConfig {
    pub fn none() -> Self {
        Self {
            c2c_sigma_lcs: 0.0,
            c2c_sigma_hcs: 0.0,
            d2d_sigma: 0.0,
            d2d_rate_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.c2c_sigma_lcs, self.c2c_sigma_hcs, self.d2d_sigma, self.d2d_rate_sigma];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("variability sigmas must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Program,
    Erase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub amplitude: f64,
    pub width: f64,
}

impl PulseSpec {
    pub fn new(kind: PulseKind, amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) || !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("pulse needs positive amplitude and width, got {amplitude} V / {width} s")));
        }
        Ok(Self { kind, amplitude, width })
    }

    pub fn program(cfg: &DeviceConfig, width: f64) -> Result<Self> {
        Self::new(PulseKind::Program, cfg.program_amplitude, width)
    }

    pub fn erase(cfg: &DeviceConfig, width: f64) -> Result<Self> {
        Self::new(PulseKind::Erase, cfg.erase_amplitude, width)
    }
}

/// One cell. `stream` identifies its C2C noise sequence and `pulses` counts
/// the pulses it has received, so each pulse draws from a fixed position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub g: f64,
    pub d2d_factor: f64,
    pub rate_factor: f64,
    pub stream: u64,
    pub pulses: u64,
}

impl DeviceState {
    pub fn nominal(g: f64) -> Self {
        Self {
            g,
            d2d_factor: 1.0,
            rate_factor: 1.0,
            stream: 0,
            pulses: 0,
        }
    }
}

/// Devices in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<DeviceState>,
}

impl Population {
    pub fn get(&self, r: usize, c: usize) -> &DeviceState {
        &self.cells[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRun {
    pub state: DeviceState,
    pub pulses: usize,
    pub reached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2cStatistics {
    pub lcs_mean: f64,
    pub lcs_sd: f64,
    pub hcs_mean: f64,
    pub hcs_sd: f64,
}

/// Cycles run before [`DeviceModel::c2c_statistics`] starts recording, so
/// the record does not depend on the starting conductance.
const WARMUP_CYCLES: usize = 10;

/// Words of ChaCha output reserved per pulse in a device's noise stream.
const WORDS_PER_PULSE: u128 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub config: DeviceConfig,
    pub noise: VariabilityConfig,
    c2c_key: [u8; 32],
}

fn lognormal_factor(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

impl DeviceModel {
    pub fn new(config: DeviceConfig, noise: VariabilityConfig) -> Result<Self> {
        config.validate()?;
        noise.validate()?;
        let key = SeedTree::new(noise.seed).key(Stream::C2c, 0);
        let mut c2c_key = [0u8; 32];
        for (i, chunk) in c2c_key.chunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&(key.rotate_left(16 * i as u32) ^ i as u64).to_le_bytes());
        }
        Ok(Self { config, noise, c2c_key })
    }

    pub fn nominal() -> Self {
        Self::new(DeviceConfig::default(), VariabilityConfig::none()).expect("defaults are valid")
    }

    /// Relative C2C sigma at conductance `g`, interpolated in log-conductance
    /// between the two anchors and held constant outside them.
    pub fn c2c_sigma(&self, g: f64) -> f64 {
        let (lo, hi) = (self.config.c2c_anchor_low.ln(), self.config.c2c_anchor_high.ln());
        let t = ((g.max(f64::MIN_POSITIVE).ln() - lo) / (hi - lo)).clamp(0.0, 1.0);
        self.noise.c2c_sigma_lcs + (self.noise.c2c_sigma_hcs - self.noise.c2c_sigma_lcs) * t
    }

    fn c2c_rng(&self, state: &DeviceState) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.c2c_key);
        rng.set_stream(state.stream);
        rng.set_word_pos(u128::from(state.pulses) * WORDS_PER_PULSE);
        rng
    }

    /// Noise-free response to a pulse.
    pub fn nominal_step(&self, state: &DeviceState, pulse: &PulseSpec) -> f64 {
        let cfg = &self.config;
        let (rail, k) = match pulse.kind {
            PulseKind::Program => (cfg.program_rail, cfg.k_program),
            PulseKind::Erase => (cfg.erase_rail * state.d2d_factor, cfg.k_erase),
        };
        rail + (state.g - rail) * (-k * pulse.width * state.rate_factor).exp()
    }

    pub fn apply_pulse(&self, state: &DeviceState, pulse: &PulseSpec) -> DeviceState {
        let mut g = self.nominal_step(state, pulse);
        let sigma = self.c2c_sigma(g);
        if sigma > 0.0 {
            g *= lognormal_factor(&mut self.c2c_rng(state), sigma);
        }
        DeviceState {
            g: g.clamp(self.config.g_floor, self.config.g_ceiling),
            pulses: state.pulses + 1,
            ..*state
        }
    }

    /// Read current (A) at drive voltage `v`. Zero unless forward-biased.
    pub fn read_current(&self, g: f64, v: f64) -> f64 {
        if !(v > 0.0) {
            return 0.0;
        }
        table_current(&self.config.read_table, g) * (v / self.config.table_voltage)
    }

    /// Conductance whose read current at `v` equals `current`.
    pub fn conductance_for_current(&self, current: f64, v: f64) -> f64 {
        let at_table = current * self.config.table_voltage / v;
        table_inverse(&self.config.read_table, at_table)
    }

    /// A fully erased population. Each device saturates at its own erase
    /// level `erase_rail * d2d_factor`.
    pub fn sample_population(&self, rows: usize, cols: usize, seed: u64) -> Result<Population> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("device population"));
        }
        let tree = SeedTree::new(seed);
        let cells = (0..rows * cols)
            .map(|idx| {
                let mut rng = tree.rng(Stream::D2d, 0, idx as u64);
                let d2d_factor = lognormal_factor(&mut rng, self.noise.d2d_sigma);
                let rate_factor = lognormal_factor(&mut rng, self.noise.d2d_rate_sigma);
                let g = (self.config.erase_rail * d2d_factor).clamp(self.config.g_floor, self.config.g_ceiling);
                DeviceState {
                    g,
                    d2d_factor,
                    rate_factor,
                    stream: splice(seed, idx as u64),
                    pulses: 0,
                }
            })
            .collect();
        Ok(Population { rows, cols, cells })
    }

    /// Applies `pulse` until `g` crosses `target` (below it for program,
    /// above it for erase) or `cap` pulses have been spent.
    pub fn pulse_until(&self, state: &DeviceState, pulse: &PulseSpec, target: f64, cap: usize) -> PulseRun {
        let done = |g: f64| match pulse.kind {
            PulseKind::Program => g < target,
            PulseKind::Erase => g > target,
        };
        let mut s = *state;
        let mut pulses = 0;
        while !done(s.g) && pulses < cap {
            s = self.apply_pulse(&s, pulse);
            pulses += 1;
        }
        PulseRun {
            state: s,
            pulses,
            reached: done(s.g),
        }
    }

    /// Cycles one device between the LCS and HCS levels and reports the
    /// conductance reached at the end of each half-cycle.
    pub fn c2c_statistics(&self, n_cycles: usize) -> Result<C2cStatistics> {
        if n_cycles < 100 {
            return Err(Error::Config(format!("c2c_statistics needs at least 100 cycles, got {n_cycles}")));
        }
        let cfg = &self.config;
        let program = PulseSpec::program(cfg, cfg.cycle_program_width)?;
        let erase = PulseSpec::erase(cfg, cfg.cycle_erase_width)?;
        let mut s = DeviceState {
            stream: splice(self.noise.seed, u64::MAX),
            ..DeviceState::nominal(cfg.cycle_hcs_level * 1.01)
        };
        let (mut lcs, mut hcs) = (Vec::with_capacity(n_cycles), Vec::with_capacity(n_cycles));
        for _ in 0..WARMUP_CYCLES {
            s = self.pulse_until(&s, &program, cfg.cycle_lcs_level, 100_000).state;
            s = self.pulse_until(&s, &erase, cfg.cycle_hcs_level, 100_000).state;
        }
        for _ in 0..n_cycles {
            s = self.pulse_until(&s, &program, cfg.cycle_lcs_level, 100_000).state;
            lcs.push(s.g);
            s = self.pulse_until(&s, &erase, cfg.cycle_hcs_level, 100_000).state;
            hcs.push(s.g);
        }
        let (lcs_mean, lcs_sd) = mean_sd(&lcs);
        let (hcs_mean, hcs_sd) = mean_sd(&hcs);
        Ok(C2cStatistics {
            lcs_mean,
            lcs_sd,
            hcs_mean,
            hcs_sd,
        })
    }
}

fn splice(seed: u64, idx: u64) -> u64 {
    SeedTree::new(seed).key(Stream::C2c, idx)
}

/// Population mean and standard deviation (Welford's update, so identical
/// samples give an SD of exactly zero).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, (m2 / xs.len() as f64).sqrt())
}

fn segment(table: &[ReadAnchor], x: f64, key: impl Fn(&ReadAnchor) -> f64) -> usize {
    let last = table.len() - 2;
    (0..=last).find(|&i| x <= key(&table[i + 1])).unwrap_or(last)
}

fn table_current(table: &[ReadAnchor], g: f64) -> f64 {
    if !(g > 0.0) {
        return 0.0;
    }
    let i = segment(table, g, |a| a.g);
    let (a, b) = (table[i], table[i + 1]);
    let t = (g.ln() - a.g.ln()) / (b.g.ln() - a.g.ln());
    (a.current.ln() + t * (b.current.ln() - a.current.ln())).exp()
}

fn table_inverse(table: &[ReadAnchor], current: f64) -> f64 {
    if !(current > 0.0) {
        return 0.0;
    }
    let i = segment(table, current, |a| a.current);
    let (a, b) = (table[i], table[i + 1]);
    let t = (current.ln() - a.current.ln()) / (b.current.ln() - a.current.ln());
    (a.g.ln() + t * (b.g.ln() - a.g.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn read_current_anchors() {
        let m = DeviceModel::nominal();
        assert!(rel(m.read_current(2.5 * MICRO, 2.0), 5.0 * MICRO) < 1e-12);
        assert!(rel(m.read_current(2.2 * MICRO, 2.0), 4.5 * MICRO) < 1e-12);
        assert!(rel(m.read_current(1.0 * NANO, 2.0), 3.0 * NANO) < 1e-12);
        assert!(rel(m.read_current(1.0 * NANO, 1.0), 1.5 * NANO) < 1e-12);
        assert_eq!(m.read_current(2.5 * MICRO, 0.0), 0.0);
        assert_eq!(m.read_current(2.5 * MICRO, -2.0), 0.0);
    }

    #[test]
    fn read_current_inverse() {
        let m = DeviceModel::nominal();
        for g in [0.6 * NANO, 1.0 * NANO, 40.0 * NANO, 1.0 * MICRO, 2.3 * MICRO, 2.7 * MICRO] {
            let i = m.read_current(g, 2.0);
            assert!(rel(m.conductance_for_current(i, 2.0), g) < 1e-9);
        }
    }

    #[test]
    fn pulses_are_monotone_and_clamped() {
        let m = DeviceModel::nominal();
        let p = PulseSpec::program(&m.config, 200e-6).unwrap();
        let e = PulseSpec::erase(&m.config, 100e-6).unwrap();
        let mut s = DeviceState::nominal(1.04 * MICRO);
        for _ in 0..60 {
            let next = m.apply_pulse(&s, &p);
            assert!(next.g < s.g);
            s = next;
        }
        assert!(s.g >= m.config.g_floor);
        for _ in 0..500 {
            let next = m.apply_pulse(&s, &e);
            assert!(next.g >= s.g && next.g <= m.config.g_ceiling);
            s = next;
        }
        assert!(s.g <= m.config.g_ceiling);
    }

    #[test]
    fn pulse_validation() {
        assert!(PulseSpec::new(PulseKind::Program, 5.0, 0.0).is_err());
        assert!(PulseSpec::new(PulseKind::Erase, 0.0, 1e-4).is_err());
        assert!(PulseSpec::new(PulseKind::Erase, 8.0, f64::NAN).is_err());
    }

    #[test]
    fn zero_noise_is_deterministic() {
        let m = DeviceModel::nominal();
        let p = PulseSpec::program(&m.config, 200e-6).unwrap();
        let s = DeviceState::nominal(2.0 * MICRO);
        assert_eq!(m.apply_pulse(&s, &p), m.apply_pulse(&s, &p));
        let st = m.c2c_statistics(100).unwrap();
        assert_eq!(st.lcs_sd, 0.0);
        assert_eq!(st.hcs_sd, 0.0);
    }

    #[test]
    fn noisy_pulse_is_reproducible() {
        let m = DeviceModel::new(DeviceConfig::default(), VariabilityConfig::default().with_seed(4)).unwrap();
        let p = PulseSpec::program(&m.config, 200e-6).unwrap();
        let s = DeviceState { stream: 17, ..DeviceState::nominal(2.0 * MICRO) };
        let a = m.apply_pulse(&s, &p);
        assert_eq!(a, m.apply_pulse(&s, &p));
        let other = DeviceState { stream: 18, ..s };
        assert_ne!(a.g, m.apply_pulse(&other, &p).g);
    }

    #[test]
    fn halving_width_doubles_pulse_count() {
        let m = DeviceModel::nominal();
        let s = DeviceState::nominal(1.04 * MICRO);
        let count = |w: f64| m.pulse_until(&s, &PulseSpec::program(&m.config, w).unwrap(), NANO, 10_000).pulses as f64;
        let ratio = count(100e-6) / count(200e-6);
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
        let lcs = DeviceState::nominal(0.9 * NANO);
        let count = |w: f64| m.pulse_until(&lcs, &PulseSpec::erase(&m.config, w).unwrap(), MICRO, 10_000).pulses as f64;
        let ratio = count(50e-6) / count(100e-6);
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn population_without_d2d_is_uniform() {
        let m = DeviceModel::nominal();
        let pop = m.sample_population(3, 4, 9).unwrap();
        assert!(pop.cells.iter().all(|c| c.d2d_factor == 1.0 && c.rate_factor == 1.0));
        assert_eq!(pop.get(1, 2).g, m.config.erase_rail);
        assert!(m.sample_population(0, 4, 9).is_err());
    }

    #[test]
    fn population_is_seeded() {
        let m = DeviceModel::new(DeviceConfig::default(), VariabilityConfig::default()).unwrap();
        let a = m.sample_population(5, 5, 3).unwrap();
        assert_eq!(a, m.sample_population(5, 5, 3).unwrap());
        assert_ne!(a, m.sample_population(5, 5, 4).unwrap());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = DeviceConfig::default();
        assert_eq!(DeviceConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(DeviceConfig::from_toml("g_floor = 1.0").is_err());
        let bad = cfg.to_toml().replace("k_erase = 180.0", "k_erase = -1.0");
        assert!(matches!(DeviceConfig::from_toml(&bad), Err(Error::Config(_))));
    }
}
