//! Temporary calibration probe (removed before release).

use pufkey::bch::BchCode;
use pufkey::extractor::{register, regenerate_with, RegenMode, RegenOptions};
use pufkey::polar::{sc_decode, transform, DecoderConfig, PolarCode, SoftObservation};
use pufkey::puf::*;
use pufkey::rng::{derive_seed, StreamRng};
use rayon::prelude::*;

fn gather(full: &[u8], idx: &[usize]) -> Vec<u8> {
    idx.iter().map(|&i| full[i]).collect()
}

fn pure_polar_block_error(n: usize, nf: usize, p: f64, trials: u64) -> f64 {
    let code = PolarCode::construct(n, nf, 0.5).unwrap();
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = StreamRng::from_parts(4242, &[t]);
            let u = rng.next_bits(n);
            let mut x = transform(&u).unwrap();
            for b in x.iter_mut() {
                if rng.next_bool(p) {
                    *b ^= 1;
                }
            }
            let obs = SoftObservation::from_bsc_bits(&x, p);
            u64::from(sc_decode(&obs, &gather(&u, code.frozen()), &code) != u)
        })
        .sum();
    errors as f64 / trials as f64
}

fn pipeline_failure(p: f64, scale: f64, mode: RegenMode, decoder: DecoderConfig, trials: u64) -> f64 {
    let (bch, polar) = pufkey::preset::codes();
    let fails: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = StreamRng::from_parts(777, &[t]);
            let bits = rng.next_bits(131);
            let (record, _key) = register(&bits, &bch, &polar).unwrap();
            let mut noisy = bits.clone();
            for b in noisy.iter_mut() {
                if rng.next_bool(p) {
                    *b ^= 1;
                }
            }
            let opts = RegenOptions {
                parity_llr_scale: scale,
                mode,
                ..RegenOptions::new(decoder, p.max(1e-4))
            };
            let res = regenerate_with(&noisy, &record, &bch, &polar, &opts, None).unwrap();
            u64::from(!res.matches)
        })
        .sum();
    fails as f64 / trials as f64
}

fn small_polar_rate(nf: usize, p: f64, trials: u64) -> f64 {
    let code = PolarCode::construct(8, nf, 0.5).unwrap();
    let mut ok = 0u64;
    for t in 0..trials {
        let mut rng = StreamRng::from_parts(808, &[t]);
        let u = rng.next_bits(8);
        let mut x = transform(&u).unwrap();
        for b in x.iter_mut() {
            if rng.next_bool(p) {
                *b ^= 1;
            }
        }
        let obs = SoftObservation::from_bsc_bits(&x, p);
        if sc_decode(&obs, &gather(&u, code.frozen()), &code) == u {
            ok += 1;
        }
    }
    ok as f64 / trials as f64
}

fn synth_scan(pop_mean: f64, pop_sd: f64, read_sd: f64, devices: u64) {
    let params = SyntheticParams { pop_mean, pop_sd, read_sd };
    let (mut flips, mut bits) = (0usize, 0usize);
    let mut min_mask = usize::MAX;
    let mut min_ones = usize::MAX;
    let mut mean_ones = 0usize;
    let mut no_ones = 0u64;
    let mut mask_fail = 0u64;
    for seed in 0..devices {
        let set = simulate_cells(254, 102, &params, 5000 + seed).unwrap();
        let (t1, t2) = compute_thresholds(&set).unwrap();
        let profile = classify_cells(&set, t1, t2).unwrap();
        let ones = profile
            .states
            .iter()
            .filter(|&&s| s == TernaryState::One)
            .count();
        min_ones = min_ones.min(ones);
        mean_ones += ones;
        no_ones += u64::from(ones == 0);
        min_mask = min_mask.min(profile.mask.len());
        if profile.mask.len() < 131 {
            mask_fail += 1;
            continue;
        }
        let a = extract_response(&set, &profile, 0, 131).unwrap();
        let b = extract_response(&set, &profile, 1, 131).unwrap();
        flips += a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count();
        bits += 131;
    }
    println!(
        "synth mean={pop_mean} sd={pop_sd} read_sd={read_sd}: flip={:.4} min_mask={min_mask} min_ones={min_ones} mean_ones={:.1} no_ones={no_ones}/{devices} mask_fail={mask_fail}",
        flips as f64 / bits.max(1) as f64,
        mean_ones as f64 / devices as f64
    );
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args[0].as_str() {
        "polar512" => {
            for p in [0.05, 0.10, 0.15] {
                println!(
                    "pure polar N=512 nf=262 p={p}: block error {:.4}",
                    pure_polar_block_error(512, 262, p, 20_000)
                );
            }
        }
        "pipeline" => {
            let trials = 2000;
            for p in [0.05, 0.10, 0.15] {
                for scale in [1.0, 0.5, 0.25, 0.0] {
                    println!(
                        "pipeline sc p={p} scale={scale}: fail {:.4}",
                        pipeline_failure(p, scale, RegenMode::Principled, DecoderConfig::sc(), trials)
                    );
                }
                println!(
                    "pipeline literal p={p}: fail {:.4}",
                    pipeline_failure(p, 1.0, RegenMode::LiteralSubstitution, DecoderConfig::sc(), trials)
                );
            }
        }
        "pipeline-deep" => {
            for (dec, name) in [(DecoderConfig::sc(), "sc"), (DecoderConfig::bp(60), "bp60")] {
                for scale in [0.0, 1.0] {
                    println!(
                        "deep {name} p=0.15 scale={scale}: fail {:.2e}",
                        pipeline_failure(0.15, scale, RegenMode::Principled, dec, 100_000)
                    );
                }
            }
        }
        "bp-sanity" => {
            // BP vs SC on a plain uniform-BSC polar code, no pipeline
            let code = PolarCode::construct(64, 32, 0.5).unwrap();
            let p = 0.05;
            let trials = 20_000u64;
            let config = DecoderConfig::bp(60);
            let (sc_err, bp_err): (u64, u64) = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = StreamRng::from_parts(2024, &[t]);
                    let u = rng.next_bits(64);
                    let mut x = transform(&u).unwrap();
                    for b in x.iter_mut() {
                        if rng.next_bool(p) {
                            *b ^= 1;
                        }
                    }
                    let obs = SoftObservation::from_bsc_bits(&x, p);
                    let fv = gather(&u, code.frozen());
                    let sc_bad = sc_decode(&obs, &fv, &code) != u;
                    let bp = pufkey::polar::bp_decode(&obs, &fv, &code, &config);
                    (u64::from(sc_bad), u64::from(bp.u_hat != u))
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            println!(
                "uniform N=64 BSC(0.05): sc {:.4} bp {:.4}",
                sc_err as f64 / trials as f64,
                bp_err as f64 / trials as f64
            );
        }
        "bp-diagnose" => {
            let (bch, polar) = pufkey::preset::codes();
            let fails: Vec<(u64, String)> = (0..100_000u64)
                .into_par_iter()
                .filter_map(|t| {
                    let mut rng = StreamRng::from_parts(777, &[t]);
                    let bits = rng.next_bits(131);
                    let (record, _key) = register(&bits, &bch, &polar).unwrap();
                    let mut noisy = bits.clone();
                    for b in noisy.iter_mut() {
                        if rng.next_bool(0.15) {
                            *b ^= 1;
                        }
                    }
                    let opts = RegenOptions {
                        parity_llr_scale: 0.0,
                        ..RegenOptions::new(DecoderConfig::bp(200), 0.15)
                    };
                    let res = regenerate_with(&noisy, &record, &bch, &polar, &opts, None).unwrap();
                    if res.matches {
                        None
                    } else {
                        let flips = bits.iter().zip(&noisy).filter(|(a, b)| a != b).count();
                        Some((t, format!("{:?} flips={flips} iters={}", res.diagnostics.flags, res.diagnostics.decoder_iterations)))
                    }
                })
                .collect();
            for (t, info) in fails {
                println!("bp fail trial {t}: {info}");
            }
        }
        "bp-deep200" => {
            println!(
                "deep bp200 p=0.15 scale=0: fail {:.2e}",
                pipeline_failure(
                    0.15,
                    0.0,
                    RegenMode::Principled,
                    DecoderConfig::bp(200),
                    100_000
                )
            );
        }
        "bp-quick" => {
            for scale in [1.0, 0.25, 0.0] {
                for iters in [60usize, 200] {
                    println!(
                        "bp{iters} scale={scale} p=0.15: fail {:.4}",
                        pipeline_failure(
                            0.15,
                            scale,
                            RegenMode::Principled,
                            DecoderConfig::bp(iters),
                            5000
                        )
                    );
                }
            }
        }
        "highp" => {
            for p in [0.18, 0.20, 0.25, 0.30] {
                for scale in [1.0, 0.0] {
                    println!(
                        "high sc p={p} scale={scale}: fail {:.4}",
                        pipeline_failure(p, scale, RegenMode::Principled, DecoderConfig::sc(), 3000)
                    );
                }
                println!(
                    "high bp60 p={p} scale=1: fail {:.4}",
                    pipeline_failure(p, 1.0, RegenMode::Principled, DecoderConfig::bp(60), 3000)
                );
                println!(
                    "high scl8 p={p} scale=1: fail {:.4}",
                    pipeline_failure(p, 1.0, RegenMode::Principled, DecoderConfig::scl(8), 1000)
                );
                println!(
                    "high literal p={p}: fail {:.4}",
                    pipeline_failure(p, 1.0, RegenMode::LiteralSubstitution, DecoderConfig::sc(), 3000)
                );
            }
        }
        "small" => {
            for nf in [4usize, 5, 6, 7] {
                println!("N=8 nf={nf} p=0.05: success {:.4}", small_polar_rate(nf, 0.05, 100_000));
            }
        }
        "synth" => {
            for (mean, sd) in [(600.0, 5000.0), (900.0, 5000.0), (600.0, 4000.0), (1200.0, 5000.0)]
            {
                for read_sd in [800.0, 1000.0, 1200.0, 1500.0] {
                    synth_scan(mean, sd, read_sd, 400);
                }
            }
        }
        "synth2" => {
            let spec: Vec<f64> = args[1..].iter().map(|s| s.parse().unwrap()).collect();
            synth_scan(spec[0], spec[1], spec[2], spec[3] as u64);
        }
        "states" => {
            // which small seeds give all three states on the default model?
            let params = SyntheticParams::default();
            for seed in 1..=20u64 {
                let set = simulate_cells(254, 102, &params, seed).unwrap();
                let (t1, t2) = compute_thresholds(&set).unwrap();
                let profile = classify_cells(&set, t1, t2).unwrap();
                let count = |s: TernaryState| profile.states.iter().filter(|&&x| x == s).count();
                println!(
                    "seed {seed}: zero={} x={} one={} mask={}",
                    count(TernaryState::Zero),
                    count(TernaryState::X),
                    count(TernaryState::One),
                    profile.mask.len()
                );
            }
        }
        "mixed" => {
            // pipeline-shaped channel: first 255 positions BSC(p), rest certain
            let code = PolarCode::construct(512, 262, 0.5).unwrap();
            for p in [0.05, 0.10, 0.15] {
                let trials = 5000u64;
                let errors: u64 = (0..trials)
                    .into_par_iter()
                    .map(|t| {
                        let mut rng = StreamRng::from_parts(515, &[t]);
                        // u constrained so that x = T(u) has zeros in the tail,
                        // mirroring the padded pipeline
                        let mut x = rng.next_bits(255);
                        x.resize(512, 0);
                        let u = transform(&x).unwrap();
                        let mut y = x.clone();
                        for b in y.iter_mut().take(255) {
                            if rng.next_bool(p) {
                                *b ^= 1;
                            }
                        }
                        let mag = ((1.0 - p) / p).ln();
                        let llr: Vec<f64> = y
                            .iter()
                            .enumerate()
                            .map(|(i, &b)| {
                                let m = if i < 255 { mag } else { 40.0 };
                                if b == 0 { m } else { -m }
                            })
                            .collect();
                        let obs = SoftObservation::new(llr).unwrap();
                        let got = sc_decode(&obs, &gather(&u, code.frozen()), &code);
                        u64::from(got != u)
                    })
                    .sum();
                println!("mixed-channel p={p}: block error {:.4}", errors as f64 / trials as f64);
            }
            let in_upper = code.frozen().iter().filter(|&&i| i < 256).count();
            println!("|F| in upper half [0,256): {in_upper} of 262");
            let in_upper_third = code.frozen().iter().filter(|&&i| i < 128).count();
            println!("|F| in [0,128): {in_upper_third}");
        }
        "attacker" => {
            let (bch, polar) = pufkey::preset::codes();
            let trials = 2000u64;
            let (matches, errs, bchfails): (u64, u64, u64) = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = StreamRng::from_parts(999, &[t]);
                    let bits = rng.next_bits(131);
                    let (record, key) = register(&bits, &bch, &polar).unwrap();
                    let reference = PufResponse { bits: bits.clone(), mask_checksum: 0 };
                    let attacker =
                        make_attacker_response(131, &reference, 0.4, derive_seed(999, &[7, t]))
                            .unwrap();
                    let opts = RegenOptions::new(DecoderConfig::sc(), 0.15);
                    let res = regenerate_with(
                        &attacker.bits,
                        &record,
                        &bch,
                        &polar,
                        &opts,
                        Some(key.raw_bits()),
                    )
                    .unwrap();
                    (
                        u64::from(res.matches),
                        u64::from(res.diagnostics.prehash_bit_errors.unwrap()),
                        u64::from(res.diagnostics.flags.bch_decode_failed),
                    )
                })
                .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
            println!(
                "attacker: matches={matches}/{trials} mean-key-err={:.4} bch-failures={bchfails}",
                errs as f64 / (trials * 250) as f64
            );
        }
        "legit-vs-attacker" => {
            // scan msg design z; report legit failure at p=0.15/0.25 and attacker stats
            let bch = BchCode::new(8, 18).unwrap();
            for z_msg in [0.5, 0.3, 0.2, 0.1, 0.05] {
                let mut base = vec![z_msg; 131];
                base.resize(255, 1.0 - 1e-9);
                base.resize(512, 1e-12);
                let polar = PolarCode::construct_with_channel(&base, 262, z_msg).unwrap();
                let stats = |p: f64, garbage: bool, trials: u64| -> (f64, f64) {
                    let (fails, errs): (u64, u64) = (0..trials)
                        .into_par_iter()
                        .map(|t| {
                            let mut rng = StreamRng::from_parts(31337, &[t]);
                            let bits = rng.next_bits(131);
                            let (record, key) = register(&bits, &bch, &polar).unwrap();
                            let input = if garbage {
                                let reference =
                                    PufResponse { bits: bits.clone(), mask_checksum: 0 };
                                make_attacker_response(
                                    131,
                                    &reference,
                                    0.4,
                                    derive_seed(31337, &[7, t]),
                                )
                                .unwrap()
                                .bits
                            } else {
                                let mut noisy = bits.clone();
                                for b in noisy.iter_mut() {
                                    if rng.next_bool(p) {
                                        *b ^= 1;
                                    }
                                }
                                noisy
                            };
                            let opts = RegenOptions::new(DecoderConfig::sc(), 0.15);
                            let res = regenerate_with(
                                &input,
                                &record,
                                &bch,
                                &polar,
                                &opts,
                                Some(key.raw_bits()),
                            )
                            .unwrap();
                            (
                                u64::from(!res.matches),
                                u64::from(res.diagnostics.prehash_bit_errors.unwrap()),
                            )
                        })
                        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
                    (fails as f64 / trials as f64, errs as f64 / (trials * 250) as f64)
                };
                let (legit15, _) = stats(0.15, false, 2000);
                let (legit25, _) = stats(0.25, false, 1000);
                let (att_fail, att_err) = stats(0.0, true, 1000);
                println!(
                    "z_msg={z_msg}: legit-fail p=.15 {legit15:.4} p=.25 {legit25:.4} attacker-match {:.4} attacker-key-err {att_err:.4}",
                    1.0 - att_fail
                );
            }
        }
        "rank255" => {
            // rank of the (pre-BCH) 255-dim codeword-space -> helper map
            let bch = BchCode::new(8, 18).unwrap();
            let (_, polar) = pufkey::preset::codes();
            let _ = &bch;
            let mut rows: Vec<Vec<u8>> = Vec::new();
            for i in 0..255 {
                let mut w = vec![0u8; 512];
                w[i] = 1;
                let c = transform(&w).unwrap();
                rows.push(polar.frozen().iter().map(|&f| c[f]).collect());
            }
            let mut rank = 0usize;
            let mut pivot_row = 0usize;
            for ccol in 0..262 {
                if let Some(r) = (pivot_row..rows.len()).find(|&r| rows[r][ccol] == 1) {
                    rows.swap(pivot_row, r);
                    let pivot = rows[pivot_row].clone();
                    for (rr, row) in rows.iter_mut().enumerate() {
                        if rr != pivot_row && row[ccol] == 1 {
                            for (a, b) in row.iter_mut().zip(&pivot) {
                                *a ^= b;
                            }
                        }
                    }
                    pivot_row += 1;
                    rank += 1;
                }
            }
            println!("rank(255-dim codeword space -> helper) = {rank} of 255");
        }
        "rank" => {
            // ranks of the msg -> helper and msg -> key linear maps under
            // the preset pipeline, plus functional liveness/duplication
            let (bch, polar) = pufkey::preset::codes();
            let mut helper_rows: Vec<Vec<u8>> = Vec::new();
            let mut key_rows: Vec<Vec<u8>> = Vec::new();
            // functionals as 131-bit columns: full c-position functionals
            let mut c_columns: Vec<Vec<u8>> = vec![vec![0u8; 131]; 512];
            for i in 0..131 {
                let mut m = vec![0u8; 131];
                m[i] = 1;
                let (rec, key) = register(&m, &bch, &polar).unwrap();
                for (pos, &f) in polar.frozen().iter().enumerate() {
                    c_columns[f][i] = rec.helper_bits[pos];
                }
                for (pos, &u) in polar.unfrozen().iter().enumerate() {
                    c_columns[u][i] = key.raw_bits()[pos];
                }
                helper_rows.push(rec.helper_bits.clone());
                key_rows.push(key.raw_bits().to_vec());
            }
            let rank = |mut rows: Vec<Vec<u8>>| -> usize {
                let cols = rows[0].len();
                let mut rank = 0usize;
                let mut pivot_row = 0usize;
                for c in 0..cols {
                    if let Some(r) = (pivot_row..rows.len()).find(|&r| rows[r][c] == 1) {
                        rows.swap(pivot_row, r);
                        let pivot = rows[pivot_row].clone();
                        for (rr, row) in rows.iter_mut().enumerate() {
                            if rr != pivot_row && row[c] == 1 {
                                for (a, b) in row.iter_mut().zip(&pivot) {
                                    *a ^= b;
                                }
                            }
                        }
                        pivot_row += 1;
                        rank += 1;
                    }
                }
                rank
            };
            println!("rank(msg->helper) = {} of 131", rank(helper_rows));
            println!("rank(msg->key)    = {} of 131", rank(key_rows));
            let zero_cols = c_columns.iter().filter(|c| c.iter().all(|&b| b == 0)).count();
            println!("constant transform positions: {zero_cols} of 512");
            // helper/key functional collisions would show up as |rho| = 1
            let mut collisions = 0usize;
            for &f in polar.frozen() {
                for &u in polar.unfrozen() {
                    if c_columns[f] == c_columns[u]
                        && c_columns[f].iter().any(|&b| b == 1)
                    {
                        collisions += 1;
                    }
                }
            }
            println!("helper/key functional collisions: {collisions}");
        }
        other => eprintln!("unknown probe {other}"),
    }
}

fn _unused(seed: u64) -> u64 {
    derive_seed(seed, &[0])
}
