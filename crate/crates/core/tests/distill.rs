use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qkdnet_core::channel::{
    click_model, click_model_with_eve, simulate_pulses, transmittance, EveConfig, LinkConfig, Preset, Protocol,
};
use qkdnet_core::distill::{
    privacy_amplify, DistillEvent, DistillationConfig, Distiller, EcMode, HashPath, PaInput, PostProcessing,
    SecureBound,
};
use qkdnet_core::protocols::{estimate_qber, sift, SiftedPair};

fn planted(len: usize, q: f64, seed: u64) -> SiftedPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = SiftedPair::empty("L");
    pair.alice_bits = (0..len).map(|_| rng.gen_range(0..2)).collect();
    pair.bob_bits = pair.alice_bits.clone();
    for i in rand::seq::index::sample(&mut rng, len, (q * len as f64).round() as usize) {
        pair.bob_bits[i] ^= 1;
    }
    pair.classes = vec![0; len];
    pair.slots = (0..len as u64).collect();
    pair
}

fn small_blocks(ec_mode: EcMode) -> DistillationConfig {
    DistillationConfig {
        sifted_block_bits: 20_000,
        min_pa_block_bits: 10_000,
        ec_mode,
        ..DistillationConfig::default()
    }
}

#[test]
fn transmittance_is_multiplicative_over_spans() {
    for (a, b) in [(3.0, 11.5), (0.2, 27.0), (14.5, 14.5)] {
        let whole = transmittance(a + b).unwrap();
        let parts = transmittance(a).unwrap() * transmittance(b).unwrap();
        assert!((whole - parts).abs() < 1e-12 * whole.max(1e-300));
    }
    assert!((transmittance(14.5).unwrap() - 0.035_48).abs() < 1e-5);
    assert!((transmittance(27.0).unwrap() - 0.001_995_3).abs() < 1e-7);
}

#[test]
fn monte_carlo_gain_matches_the_click_model_per_class() {
    for p in Preset::all() {
        let link = p.link().unwrap();
        let model = click_model(&link).unwrap();
        let log = simulate_pulses(&link, 2_000_000, &EveConfig::none(), 31).unwrap();
        let pair = sift(link.protocol, &log).unwrap();
        for (c, t) in pair.class_tally.iter().enumerate() {
            let q = model.classes[c].gain;
            let sigma = (t.pulses * q * (1.0 - q)).sqrt().max(1.0);
            let z = (t.detections as f64 - t.pulses * q) / sigma;
            // Afterpulses correlate neighbouring gates and widen the spread
            // slightly beyond the binomial sigma, hence 4 rather than 3.
            assert!(z.abs() < 4.0, "{} class {c}: z = {z:.2}", p.name);
        }
    }
}

#[test]
fn eavesdropping_raises_errors_and_noise() {
    let link = Preset::builtin("mitsubishi").unwrap().link().unwrap();
    let quiet = click_model(&link).unwrap();
    let ir = click_model_with_eve(&link, &EveConfig::intercept_resend()).unwrap();
    assert!(ir.signal_error > quiet.signal_error);
    let tap = click_model_with_eve(&link, &EveConfig::tap_inject(0.5, 2e4)).unwrap();
    assert!(tap.p_noise_base > quiet.p_noise_base);

    let sim = |eve: &EveConfig| {
        let log = simulate_pulses(&link, 20_000_000, eve, 3).unwrap();
        let pair = sift(link.protocol, &log).unwrap();
        (log.detections.len(), pair.errors() as f64 / pair.len() as f64)
    };
    let (_, q0) = sim(&EveConfig::none());
    let (_, q_ir) = sim(&EveConfig::intercept_resend());
    assert!(q_ir > q0 + 0.1, "{q0} -> {q_ir}");
    let (quiet_clicks, _) = sim(&EveConfig::none());
    let (tap_clicks, _) = sim(&EveConfig::tap_inject(0.0, 2e5));
    assert!(tap_clicks > quiet_clicks, "{quiet_clicks} -> {tap_clicks}");
}

#[test]
fn planted_qber_is_recovered_from_a_ten_percent_sample() {
    let pair = planted(1_000_000, 0.022, 1);
    let (est, reduced) = estimate_qber(&pair, 0.1, 2).unwrap();
    assert_eq!(est.sample_size, 100_000);
    assert_eq!(reduced.len(), 900_000);
    assert!((est.rate - 0.022).abs() <= 0.0015, "{}", est.rate);

    let clean = planted(10_000, 0.0, 3);
    assert_eq!(estimate_qber(&clean, 0.1, 4).unwrap().0.error_count, 0);
}

#[test]
fn qber_estimate_is_unbiased_across_seeds() {
    let pair = planted(100_000, 0.03, 5);
    let mean: f64 = (0..100).map(|s| estimate_qber(&pair, 0.1, s).unwrap().0.rate).sum::<f64>() / 100.0;
    // One sample has sigma 0.0017, so the mean of 100 has 0.00017.
    assert!((mean - 0.03).abs() < 0.0007, "{mean}");
}

#[test]
fn privacy_amplified_output_looks_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bits: Vec<u8> = (0..400_000).map(|_| rng.gen_range(0..2)).collect();
    let input = PaInput { bits: &bits, leakage_bits: 100_000, secure_fraction: 0.25 };
    let out = privacy_amplify(&input, &DistillationConfig::default(), 77, HashPath::Ntt).unwrap();
    assert_eq!(out.len(), 100_000 - 100);
    let mut counts = [0f64; 256];
    for byte in out.chunks_exact(8) {
        let v = byte.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
        counts[v] += 1.0;
    }
    let n: f64 = counts.iter().sum();
    let e = n / 256.0;
    let stat: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(255.0).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square p = {p}");
}

#[test]
fn every_preset_distills_identical_keys_at_both_ends() {
    for p in Preset::all() {
        let link = p.link().unwrap();
        let model = click_model(&link).unwrap();
        let epoch_pulses = (25_000.0 / (0.5 * model.mean_gain)) as u64;
        let mut keys = 0;
        for seed in 0..20u64 {
            let cfg = small_blocks(p.postprocessing.ec_mode);
            let mut d = Distiller::new(&p.name, &link.source, p.postprocessing.clone(), cfg, seed).unwrap();
            for epoch in 0..2u64 {
                let log = simulate_pulses(&link, epoch_pulses, &EveConfig::none(), seed * 100 + epoch).unwrap();
                let pair = sift(link.protocol, &log).unwrap();
                let tel = d.push_epoch(&pair, epoch as f64).unwrap();
                assert!(!tel.aborted, "{} seed {seed}", p.name);
                for e in &tel.events {
                    match e {
                        DistillEvent::Key { alice, bob } => {
                            assert_eq!(alice.bytes, bob.bytes, "{} seed {seed}", p.name);
                            keys += usize::from(alice.bit_length > 0);
                        }
                        DistillEvent::ConfirmFailed { .. } => panic!("{} seed {seed}: confirm failed", p.name),
                        _ => {}
                    }
                }
            }
        }
        assert!(keys > 0, "{} produced no key", p.name);
    }
}

fn ideal_distiller(seed: u64) -> Distiller {
    let link = LinkConfig::ideal(Protocol::Bb84, 0.5);
    let post = PostProcessing { ec_mode: EcMode::Cascade, bound: SecureBound::Entanglement };
    Distiller::new("ideal", &link.source, post, small_blocks(EcMode::Cascade), seed).unwrap()
}

#[test]
fn error_free_link_keeps_all_but_the_disclosed_bits() {
    let mut d = ideal_distiller(1);
    let tel = d.push_epoch(&planted(30_000, 0.0, 6), 1.0).unwrap();
    let key = tel
        .events
        .iter()
        .find_map(|e| match e {
            DistillEvent::Key { alice, bob } => Some((alice.clone(), bob.clone())),
            _ => None,
        })
        .expect("one block");
    assert_eq!(key.0.bytes, key.1.bytes);
    let n = d.block_bits();
    assert_eq!(n, 18_000);
    assert!(key.0.bit_length < n && key.0.bit_length + key.0.provenance.leakage_bits + 100 >= n);
}

#[test]
fn epoch_at_nine_percent_qber_is_aborted() {
    let mut d = ideal_distiller(2);
    let tel = d.push_epoch(&planted(30_000, 0.09, 7), 1.0).unwrap();
    assert!(tel.aborted);
    assert!(matches!(tel.events.as_slice(), [DistillEvent::Aborted { bits: 30_000, .. }]));
    assert_eq!(d.buffered_bits(), 0);
}
