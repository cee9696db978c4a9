//! Monte Carlo experiment engine: failure-probability estimation, bit-error
//! sweeps, attacker runs, decoder comparisons, and timing.
//!
//! Every experiment is a pure function of its [`ExperimentSpec`]: per-trial
//! seeds derive from `(seed, experiment, p, trial)`, trials run in parallel,
//! and aggregation uses integer counters only, so results are identical
//! regardless of thread scheduling. Each trial enrolls a fresh synthetic
//! device, which keeps trials independent and matches the i.i.d. bit-flip
//! channel the flip model applies on top.
//!
//! Rare failure rates are reported with a one-sided 95% Wilson upper bound
//! rather than a bare point estimate; at desk scale a zero count bounds the
//! rate, it does not measure it.

pub mod plot;

use crate::bch::BchCode;
use crate::extractor::{
    register_with_mask, regenerate_with, EnrollmentRecord, ExtractorError, RegenMode,
    RegenOptions, SecretKey,
};
use crate::polar::{DecoderConfig, PolarCode};
use crate::puf::{
    classify_cells, compute_thresholds, extract_response, flip_bits, make_attacker_response,
    simulate_cells, PufError, PufResponse, SyntheticParams,
};
use crate::rng::derive_seed;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Extractor(#[from] ExtractorError),
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error("could not enroll a synthetic device with enough stable cells")]
    EnrollmentExhausted,
}

/// Which experiment a spec drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    FailureMc,
    BerSweep,
    Attacker,
    DecoderCompare,
    Timing,
}

/// Full description of an experiment run.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub trials: usize,
    pub p_values: Vec<f64>,
    pub decoders: Vec<DecoderConfig>,
    pub seed: u64,
    pub mode: RegenMode,
    pub parity_llr_scale: f64,
    /// Response-consistency refusal threshold passed to regeneration.
    pub gate_fraction: f64,
    /// Minimum inter-device Hamming distance fraction for attacker
    /// responses.
    pub attacker_min_hd: f64,
    pub synthetic: SyntheticParams,
    pub num_cells: usize,
    /// Readings simulated per cell for each per-trial device. Enrollment
    /// only needs enough pooled readings for stable thresholds.
    pub num_readings: usize,
    /// Fixed channel assumption for the decoders; `None` tells each sweep
    /// point to use its own flip probability.
    pub channel_p_override: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            trials: 1000,
            p_values: vec![0.15],
            decoders: vec![DecoderConfig::sc()],
            seed: 1,
            mode: RegenMode::Principled,
            parity_llr_scale: crate::preset::PARITY_LLR_SCALE,
            gate_fraction: crate::extractor::DEFAULT_GATE_FRACTION,
            attacker_min_hd: 0.4,
            synthetic: SyntheticParams::default(),
            num_cells: 254,
            num_readings: 8,
            channel_p_override: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::InvalidSpec("trials must be >= 1".into()));
        }
        if self.p_values.is_empty() {
            return Err(ExperimentError::InvalidSpec("at least one p value".into()));
        }
        if let Some(&p) = self.p_values.iter().find(|p| !(0.0..=0.5).contains(*p)) {
            return Err(ExperimentError::InvalidSpec(format!("p={p} outside [0, 0.5]")));
        }
        if self.decoders.is_empty() {
            return Err(ExperimentError::InvalidSpec("at least one decoder".into()));
        }
        for d in &self.decoders {
            d.validate().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    fn channel_p_for(&self, p: f64) -> f64 {
        self.channel_p_override.unwrap_or(p)
    }
}

/// Failure counts for one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct FailureStats {
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub wilson95_upper: f64,
    pub mean_bch_corrections: f64,
    pub mean_decoder_iterations: f64,
}

#[derive(Clone, Debug)]
pub struct FailureRow {
    pub p: f64,
    pub stats: FailureStats,
}

#[derive(Clone, Debug)]
pub struct BerRow {
    pub p: f64,
    pub trials: usize,
    /// Mean pre-hash key bit-error percentage for the legitimate device.
    pub percent_key_error_legit: f64,
    /// Same for attacker responses at the configured distance bound.
    pub percent_key_error_attacker: f64,
}

#[derive(Clone, Debug)]
pub struct CompareRow {
    pub p: f64,
    pub decoder: String,
    pub trials: usize,
    pub block_errors: usize,
    pub block_error_rate: f64,
    pub mean_runtime_us: f64,
}

#[derive(Clone, Debug)]
pub struct TimingRow {
    pub decoder: String,
    pub trials: usize,
    pub mean_us: f64,
    pub median_of_means_us: f64,
}

/// One-sided 95% Wilson score upper bound on a binomial proportion.
pub fn wilson_upper_95(failures: usize, trials: usize) -> f64 {
    const Z: f64 = 1.644_853_626_951_472_2;
    if trials == 0 {
        return 1.0;
    }
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = Z * Z;
    ((p + z2 / (2.0 * n) + Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n))
        .min(1.0)
}

/// Everything a trial needs from enrollment.
struct TrialSetup {
    record: EnrollmentRecord,
    key: SecretKey,
    response: PufResponse,
}

/// Enroll a fresh synthetic device. The classification very occasionally
/// yields fewer stable cells than the response width; those devices are
/// redrawn deterministically from the attempt counter.
fn enroll_trial_device(
    spec: &ExperimentSpec,
    bch: &BchCode,
    polar: &PolarCode,
    trial_seed: u64,
) -> Result<TrialSetup, ExperimentError> {
    let width = bch.k();
    for attempt in 0..16u64 {
        let set = simulate_cells(
            spec.num_cells,
            spec.num_readings,
            &spec.synthetic,
            derive_seed(trial_seed, &[10, attempt]),
        )?;
        let (t1, t2) = compute_thresholds(&set)?;
        let profile = classify_cells(&set, t1, t2)?;
        if profile.mask.len() < width {
            continue;
        }
        let response = extract_response(&set, &profile, 0, width)?;
        let mask: Vec<u16> = profile.mask[..width].iter().map(|&i| i as u16).collect();
        let (record, key) = register_with_mask(&response.bits, &mask, bch, polar)?;
        return Ok(TrialSetup { record, key, response });
    }
    Err(ExperimentError::EnrollmentExhausted)
}

fn regen_options(spec: &ExperimentSpec, decoder: &DecoderConfig, p: f64) -> RegenOptions {
    RegenOptions {
        decoder: *decoder,
        channel_p: spec.channel_p_for(p),
        mode: spec.mode,
        parity_llr_scale: spec.parity_llr_scale,
        gate_fraction: spec.gate_fraction,
    }
}

/// Per-point failure-probability estimation: enroll, flip with probability
/// `p`, regenerate with the first configured decoder, count hash
/// mismatches.
pub fn run_failure_mc(spec: &ExperimentSpec) -> Result<Vec<FailureRow>, ExperimentError> {
    spec.validate()?;
    let decoder = spec.decoders[0];
    let (bch, polar) = build_codes(spec)?;
    let mut rows = Vec::with_capacity(spec.p_values.len());
    for &p in &spec.p_values {
        let opts = regen_options(spec, &decoder, p);
        let (failures, corrections, iterations) = (0..spec.trials)
            .into_par_iter()
            .map(|trial| {
                let trial_seed = trial_seed_for(spec.seed, trial);
                let setup = enroll_trial_device(spec, &bch, &polar, trial_seed)
                    .expect("synthetic enrollment");
                let noisy = flip_bits(&setup.response, p, derive_seed(trial_seed, &[20]))
                    .expect("valid p");
                let res =
                    regenerate_with(&noisy.bits, &setup.record, &bch, &polar, &opts, None)
                        .expect("regeneration");
                (
                    u64::from(!res.matches),
                    u64::from(res.diagnostics.bch_corrections),
                    u64::from(res.diagnostics.decoder_iterations),
                )
            })
            .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        let failures = failures as usize;
        rows.push(FailureRow {
            p,
            stats: FailureStats {
                trials: spec.trials,
                failures,
                failure_rate: failures as f64 / spec.trials as f64,
                wilson95_upper: wilson_upper_95(failures, spec.trials),
                mean_bch_corrections: corrections as f64 / spec.trials as f64,
                mean_decoder_iterations: iterations as f64 / spec.trials as f64,
            },
        });
    }
    Ok(rows)
}

/// Pre-hash key bit-error sweep for legitimate noisy responses and for
/// attacker responses at the configured inter-distance bound.
pub fn run_ber_sweep(spec: &ExperimentSpec) -> Result<Vec<BerRow>, ExperimentError> {
    spec.validate()?;
    let decoder = spec.decoders[0];
    let (bch, polar) = build_codes(spec)?;
    let key_bits = polar.num_unfrozen();
    let mut rows = Vec::with_capacity(spec.p_values.len());
    for &p in &spec.p_values {
        let opts = regen_options(spec, &decoder, p);
        let (legit_errs, attacker_errs) = (0..spec.trials)
            .into_par_iter()
            .map(|trial| {
                let trial_seed = trial_seed_for(spec.seed, trial);
                let setup = enroll_trial_device(spec, &bch, &polar, trial_seed)
                    .expect("synthetic enrollment");
                let truth = setup.key.raw_bits();
                let noisy = flip_bits(&setup.response, p, derive_seed(trial_seed, &[20]))
                    .expect("valid p");
                let legit = regenerate_with(
                    &noisy.bits,
                    &setup.record,
                    &bch,
                    &polar,
                    &opts,
                    Some(truth),
                )
                .expect("regeneration");
                let attacker_resp = make_attacker_response(
                    setup.response.bits.len(),
                    &setup.response,
                    spec.attacker_min_hd,
                    derive_seed(trial_seed, &[30]),
                )
                .expect("attacker bound");
                let attacker = regenerate_with(
                    &attacker_resp.bits,
                    &setup.record,
                    &bch,
                    &polar,
                    &opts,
                    Some(truth),
                )
                .expect("regeneration");
                (
                    u64::from(legit.diagnostics.prehash_bit_errors.unwrap()),
                    u64::from(attacker.diagnostics.prehash_bit_errors.unwrap()),
                )
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let denom = (spec.trials * key_bits) as f64;
        rows.push(BerRow {
            p,
            trials: spec.trials,
            percent_key_error_legit: 100.0 * legit_errs as f64 / denom,
            percent_key_error_attacker: 100.0 * attacker_errs as f64 / denom,
        });
    }
    Ok(rows)
}

/// Attacker-only run: hash matches (should be none) and mean pre-hash key
/// error fraction across attacker regenerations at one sweep point.
pub struct AttackerStats {
    pub trials: usize,
    pub hash_matches: usize,
    pub mean_key_error_fraction: f64,
}

pub fn run_attacker(spec: &ExperimentSpec) -> Result<AttackerStats, ExperimentError> {
    spec.validate()?;
    let decoder = spec.decoders[0];
    let (bch, polar) = build_codes(spec)?;
    let p = spec.p_values[0];
    let opts = regen_options(spec, &decoder, p);
    let key_bits = polar.num_unfrozen();
    let (matches, errs) = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = trial_seed_for(spec.seed, trial);
            let setup =
                enroll_trial_device(spec, &bch, &polar, trial_seed).expect("synthetic enrollment");
            let attacker_resp = make_attacker_response(
                setup.response.bits.len(),
                &setup.response,
                spec.attacker_min_hd,
                derive_seed(trial_seed, &[30]),
            )
            .expect("attacker bound");
            let res = regenerate_with(
                &attacker_resp.bits,
                &setup.record,
                &bch,
                &polar,
                &opts,
                Some(setup.key.raw_bits()),
            )
            .expect("regeneration");
            (
                u64::from(res.matches),
                u64::from(res.diagnostics.prehash_bit_errors.unwrap()),
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(AttackerStats {
        trials: spec.trials,
        hash_matches: matches as usize,
        mean_key_error_fraction: errs as f64 / (spec.trials * key_bits) as f64,
    })
}

/// Paired-noise decoder comparison: identical devices and flip patterns per
/// trial index across decoders. Runtime is wall clock, reported only.
pub fn run_decoder_compare(spec: &ExperimentSpec) -> Result<Vec<CompareRow>, ExperimentError> {
    spec.validate()?;
    let (bch, polar) = build_codes(spec)?;
    let mut rows = Vec::new();
    for &p in &spec.p_values {
        for decoder in &spec.decoders {
            let opts = regen_options(spec, decoder, p);
            let (errors, runtime_ns) = (0..spec.trials)
                .into_par_iter()
                .map(|trial| {
                    let trial_seed = trial_seed_for(spec.seed, trial);
                    let setup = enroll_trial_device(spec, &bch, &polar, trial_seed)
                        .expect("synthetic enrollment");
                    let noisy = flip_bits(&setup.response, p, derive_seed(trial_seed, &[20]))
                        .expect("valid p");
                    let start = Instant::now();
                    let res =
                        regenerate_with(&noisy.bits, &setup.record, &bch, &polar, &opts, None)
                            .expect("regeneration");
                    let elapsed = start.elapsed().as_nanos() as u64;
                    (u64::from(!res.matches), elapsed)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            rows.push(CompareRow {
                p,
                decoder: decoder.id(),
                trials: spec.trials,
                block_errors: errors as usize,
                block_error_rate: errors as f64 / spec.trials as f64,
                mean_runtime_us: runtime_ns as f64 / 1000.0 / spec.trials as f64,
            });
        }
    }
    Ok(rows)
}

/// Regeneration latency per decoder: median of group means over at least
/// 100 measured trials after warmup, single-threaded.
pub fn run_timing(spec: &ExperimentSpec) -> Result<Vec<TimingRow>, ExperimentError> {
    spec.validate()?;
    let (bch, polar) = build_codes(spec)?;
    let trials = spec.trials.max(100);
    let p = spec.p_values[0];
    let trial_seed = trial_seed_for(spec.seed, 0);
    let setup = enroll_trial_device(spec, &bch, &polar, trial_seed)?;
    let noisy = flip_bits(&setup.response, p, derive_seed(trial_seed, &[20]))?;
    let mut rows = Vec::new();
    for decoder in &spec.decoders {
        let opts = regen_options(spec, decoder, p);
        let warmup = (trials / 10).clamp(10, 200);
        for _ in 0..warmup {
            let _ = regenerate_with(&noisy.bits, &setup.record, &bch, &polar, &opts, None)?;
        }
        let mut samples_us = Vec::with_capacity(trials);
        for _ in 0..trials {
            let start = Instant::now();
            let _ = regenerate_with(&noisy.bits, &setup.record, &bch, &polar, &opts, None)?;
            samples_us.push(start.elapsed().as_nanos() as f64 / 1000.0);
        }
        let mean = samples_us.iter().sum::<f64>() / samples_us.len() as f64;
        let groups = 10.min(samples_us.len());
        let group_len = samples_us.len() / groups;
        let mut means: Vec<f64> = samples_us
            .chunks(group_len)
            .take(groups)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if means.len() % 2 == 1 {
            means[means.len() / 2]
        } else {
            0.5 * (means[means.len() / 2 - 1] + means[means.len() / 2])
        };
        rows.push(TimingRow {
            decoder: decoder.id(),
            trials,
            mean_us: mean,
            median_of_means_us: median,
        });
    }
    Ok(rows)
}

fn build_codes(spec: &ExperimentSpec) -> Result<(BchCode, PolarCode), ExperimentError> {
    spec.validate()?;
    Ok(crate::preset::codes())
}

/// Trial seeds depend on the trial index only: the same trial shares its
/// device and flip uniforms across sweep points and decoders, which couples
/// the flip sets monotonically in p and pairs decoder comparisons.
fn trial_seed_for(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &[1, trial as u64])
}

// --- CSV output -------------------------------------------------------------

/// CSV schema identifiers; bump the version when a column changes.
pub const CSV_KIND_FAILURE: &str = "mc_failure";
pub const CSV_KIND_BER: &str = "ber_sweep";
pub const CSV_KIND_COMPARE: &str = "decoder_compare";
pub const CSV_KIND_TIMING: &str = "timing";

fn csv_header(kind: &str) -> String {
    format!("# pufkey-csv {kind} v1\n")
}

pub fn failure_csv(rows: &[FailureRow]) -> String {
    let mut out = csv_header(CSV_KIND_FAILURE);
    out.push_str(
        "p,trials,failures,failure_rate,wilson95_upper,mean_bch_corrections,mean_decoder_iterations\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6e},{:.6e},{:.4},{:.4}",
            r.p,
            r.stats.trials,
            r.stats.failures,
            r.stats.failure_rate,
            r.stats.wilson95_upper,
            r.stats.mean_bch_corrections,
            r.stats.mean_decoder_iterations
        );
    }
    out
}

pub fn ber_csv(rows: &[BerRow]) -> String {
    let mut out = csv_header(CSV_KIND_BER);
    out.push_str("p,trials,percent_key_error_legit,percent_key_error_attacker\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4}",
            r.p, r.trials, r.percent_key_error_legit, r.percent_key_error_attacker
        );
    }
    out
}

/// `zero_runtime` writes 0 in the runtime column for byte-reproducible
/// output; wall-clock timings are inherently run-dependent.
pub fn compare_csv(rows: &[CompareRow], zero_runtime: bool) -> String {
    let mut out = csv_header(CSV_KIND_COMPARE);
    out.push_str("p,decoder,trials,block_errors,block_error_rate,mean_runtime_us\n");
    for r in rows {
        let runtime = if zero_runtime { 0.0 } else { r.mean_runtime_us };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6e},{:.2}",
            r.p, r.decoder, r.trials, r.block_errors, r.block_error_rate, runtime
        );
    }
    out
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = csv_header(CSV_KIND_TIMING);
    out.push_str("decoder,trials,mean_us,median_of_means_us\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.2},{:.2}", r.decoder, r.trials, r.mean_us, r.median_of_means_us);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(scenario: Scenario) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(scenario);
        spec.trials = 20;
        spec.num_readings = 4;
        spec.seed = 99;
        spec
    }

    #[test]
    fn wilson_bound_known_values() {
        // 0 failures in 1e5 trials: z^2 / (n + z^2)
        let ub = wilson_upper_95(0, 100_000);
        assert!((ub - 2.7055e-5).abs() < 1e-8, "ub {ub}");
        assert!(ub <= 3.7e-5);
        // always at least the point estimate
        for (f, n) in [(0usize, 100usize), (3, 100), (50, 100), (100, 100)] {
            assert!(wilson_upper_95(f, n) >= f as f64 / n as f64);
        }
    }

    #[test]
    fn zero_noise_never_fails() {
        let mut spec = tiny_spec(Scenario::FailureMc);
        spec.trials = 100;
        spec.p_values = vec![0.0];
        let rows = run_failure_mc(&spec).unwrap();
        assert_eq!(rows[0].stats.failures, 0);
        assert!(rows[0].stats.wilson95_upper > 0.0);
    }

    #[test]
    fn failure_mc_is_reproducible() {
        let mut spec = tiny_spec(Scenario::FailureMc);
        spec.p_values = vec![0.15];
        let a = failure_csv(&run_failure_mc(&spec).unwrap());
        let b = failure_csv(&run_failure_mc(&spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn ber_sweep_reports_both_series() {
        let mut spec = tiny_spec(Scenario::BerSweep);
        spec.p_values = vec![0.05];
        let rows = run_ber_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].percent_key_error_legit, 0.0);
        assert!(rows[0].percent_key_error_attacker > 30.0);
    }

    #[test]
    fn scl1_matches_sc_on_paired_noise() {
        let mut spec = tiny_spec(Scenario::DecoderCompare);
        spec.trials = 30;
        spec.p_values = vec![0.2];
        spec.decoders = vec![DecoderConfig::sc(), DecoderConfig::scl(1)];
        let rows = run_decoder_compare(&spec).unwrap();
        assert_eq!(rows[0].block_errors, rows[1].block_errors);
    }

    #[test]
    fn compare_csv_has_one_row_per_pair() {
        let mut spec = tiny_spec(Scenario::DecoderCompare);
        spec.trials = 5;
        spec.p_values = vec![0.1, 0.2];
        spec.decoders = vec![DecoderConfig::sc(), DecoderConfig::bp(20)];
        let rows = run_decoder_compare(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        let csv = compare_csv(&rows, true);
        assert_eq!(csv.lines().count(), 2 + 4);
    }

    #[test]
    fn spec_validation_catches_nonsense() {
        let mut spec = tiny_spec(Scenario::FailureMc);
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let mut spec = tiny_spec(Scenario::FailureMc);
        spec.p_values = vec![0.7];
        assert!(spec.validate().is_err());
        let mut spec = tiny_spec(Scenario::FailureMc);
        spec.decoders.clear();
        assert!(spec.validate().is_err());
    }

    /// Coupled flips make match rate statistically non-increasing in p.
    #[test]
    fn match_rate_degrades_monotonically() {
        let mut spec = tiny_spec(Scenario::FailureMc);
        spec.trials = 60;
        spec.p_values = vec![0.05, 0.2, 0.35, 0.5];
        let rows = run_failure_mc(&spec).unwrap();
        let rates: Vec<f64> = rows.iter().map(|r| 1.0 - r.stats.failure_rate).collect();
        for w in rates.windows(2) {
            assert!(w[1] <= w[0] + 0.05, "match rate increased: {rates:?}");
        }
    }
}
