use impact_core::device::{mean_sd, DeviceConfig, DeviceModel, PulseSpec, VariabilityConfig, MICRO, NANO};

fn noisy(seed: u64) -> DeviceModel {
    DeviceModel::new(DeviceConfig::default(), VariabilityConfig::default().with_seed(seed)).unwrap()
}

#[test]
fn c2c_endpoints_over_400_cycles() {
    let st = noisy(11).c2c_statistics(400).unwrap();
    let lcs_rel = st.lcs_sd / st.lcs_mean;
    let hcs_rel = st.hcs_sd / st.hcs_mean;
    println!("lcs {:.4e} ({lcs_rel:.4}), hcs {:.4e} ({hcs_rel:.4})", st.lcs_mean, st.hcs_mean);
    assert!((st.lcs_mean - 0.925 * NANO).abs() <= 0.1 * 0.925 * NANO);
    assert!((0.038..=0.058).contains(&lcs_rel));
    assert!((st.hcs_mean - 1.01 * MICRO).abs() <= 0.1 * 1.01 * MICRO);
    assert!((0.004..=0.011).contains(&hcs_rel));
}

#[test]
fn erased_hcs_spread_over_10k_devices() {
    let m = noisy(5);
    let pop = m.sample_population(100, 100, 77).unwrap();
    let gs: Vec<f64> = pop.cells.iter().map(|c| c.g).collect();
    let (mean, sd) = mean_sd(&gs);
    let expected = 27.6 * NANO / (1.04 * MICRO);
    let ratio = sd / mean;
    println!("erased HCS sd/mean {ratio:.5} vs {expected:.5}");
    assert!((ratio - expected).abs() <= 0.1 * expected);
}

fn count_stats(mut counts: Vec<usize>, lo: usize, hi: usize) -> (usize, f64) {
    counts.sort_unstable();
    let inside = counts.iter().filter(|&&c| (lo..=hi).contains(&c)).count();
    (counts[counts.len() / 2], inside as f64 / counts.len() as f64)
}

#[test]
fn d2d_pulse_counts_match_measured_ranges() {
    let m = noisy(21);
    let program = PulseSpec::program(&m.config, 200e-6).unwrap();
    let erase = PulseSpec::erase(&m.config, 100e-6).unwrap();
    let pop = m.sample_population(12, 8, 3).unwrap();
    let (mut p_counts, mut e_counts) = (Vec::new(), Vec::new());
    for cell in &pop.cells {
        let start = impact_core::device::DeviceState { g: 1.04 * MICRO, ..*cell };
        let down = m.pulse_until(&start, &program, NANO, 1000);
        assert!(down.reached);
        p_counts.push(down.pulses);
        let up = m.pulse_until(&down.state, &erase, MICRO, 1000);
        assert!(up.reached);
        e_counts.push(up.pulses);
    }
    let (p_med, p_in) = count_stats(p_counts, 23, 61);
    let (e_med, e_in) = count_stats(e_counts, 15, 51);
    println!("program median {p_med} ({p_in:.3} in range), erase median {e_med} ({e_in:.3} in range)");
    assert!((23..=61).contains(&p_med) && p_in >= 0.95);
    assert!((15..=51).contains(&e_med) && e_in >= 0.95);
}

#[test]
fn read_current_is_monotone() {
    let m = noisy(1);
    let mut prev = 0.0;
    let mut g = 0.5 * NANO;
    while g < 2.8 * MICRO {
        let i = m.read_current(g, 2.0);
        assert!(i >= prev);
        prev = i;
        g *= 1.05;
    }
}
