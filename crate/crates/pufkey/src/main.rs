//! Thin command-line front end over the `pufkey` library.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/configuration error,
//! 3 regeneration hash mismatch (`regen` only).

use pufkey::experiments::{
    self, plot::emit_plot, plot::PlotKind, ExperimentSpec, Scenario,
};
use pufkey::extractor::{
    self, deserialize_record, hex, regenerate_with, serialize_record, EnrollmentRecord,
    RegenMode, RegenOptions,
};
use pufkey::polar::DecoderConfig;
use pufkey::puf::{
    classify_cells, compute_thresholds, extract_response, extract_response_with_mask, flip_bits,
    parse_measurement_csv, simulate_cells, write_measurement_csv, CellMeasurementSet,
    SyntheticParams,
};
use pufkey::preset;
use std::collections::HashMap;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    ExitCode::from(run(&args))
}

fn run(args: &[String]) -> u8 {
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return EXIT_USAGE;
    };
    let rest = &args[1..];
    let result = match command.as_str() {
        "enroll" => cmd_enroll(rest),
        "regen" => cmd_regen(rest),
        "simulate-cells" => cmd_simulate_cells(rest),
        "mc-failure" => cmd_mc_failure(rest),
        "ber-sweep" => cmd_ber_sweep(rest),
        "decoder-compare" => cmd_decoder_compare(rest),
        "timing" => cmd_timing(rest),
        "plot" => cmd_plot(rest),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            return EXIT_OK;
        }
        other => {
            eprintln!("unknown command: {other}\n{USAGE}");
            return EXIT_USAGE;
        }
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n{USAGE}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
    }
}

const USAGE: &str = "pufkey - exact keys from noisy resistive-cell fingerprints

usage: pufkey <command> [flags]

commands:
  enroll           derive helper data + key hash from cell readings
                   (--input <csv> | --synthetic) --record <path>
                   [--seed N] [--cells N] [--readings N] [--reading IDX]
  regen            regenerate the key from noisy readings and a record
                   --record <path> (--input <csv> | --synthetic)
                   [--seed N] [--reading IDX] [--flip-p P] [--flip-seed N]
                   [--decoder sc|scl:<L>|bp:<iters>] [--hash-aided]
                   [--channel-p P] [--literal-substitution]
                   [--parity-llr-scale X]
  simulate-cells   write a synthetic measurement CSV
                   --out <csv> [--cells N] [--readings N] [--seed N]
                   [--pop-mean X] [--pop-sd X] [--read-sd X]
  mc-failure       Monte Carlo failure probability per flip probability
                   --p LIST --trials N [--decoder D] [--seed N] [--csv PATH]
  ber-sweep        legitimate vs attacker pre-hash key error curves
                   --p LIST --trials N [--decoder D] [--seed N] [--csv PATH]
                   [--attacker-hd F]
  decoder-compare  paired block-error and runtime across decoders
                   --p LIST --trials N --decoder D [--decoder D ...]
                   [--seed N] [--csv PATH] [--no-runtime]
  timing           regeneration latency per decoder (median of means)
                   --decoder D [--decoder D ...] [--trials N] [--p P]
                   [--seed N] [--csv PATH]
  plot             render an experiment CSV as a deterministic SVG
                   --csv <in> --out <svg>
                   [--kind mc-failure|ber-sweep|decoder-compare|timing]

shared flags: --p takes comma-separated values (e.g. --p 0.05,0.15);
--decoder is sc, scl:<list-size>, or bp:<max-iterations>;
--literal-substitution selects the hard helper-substitution decode path;
--parity-llr-scale rescales parity-position LLRs (default 1.0).

exit codes: 0 ok, 1 usage, 2 data error, 3 regeneration mismatch";

enum CliError {
    Usage(String),
    Data(String),
}

fn usage_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn data_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Data(msg.into()))
}

/// Minimal flag parser: every `--flag` either takes one value or is
/// boolean; repeats accumulate.
struct Flags {
    values: HashMap<String, Vec<String>>,
    bools: Vec<String>,
}

fn parse_flags(args: &[String], boolean: &[&str], valued: &[&str]) -> Result<Flags, CliError> {
    let mut flags = Flags { values: HashMap::new(), bools: Vec::new() };
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let Some(name) = arg.strip_prefix("--") else {
            return usage_err(format!("unexpected argument {arg:?}"));
        };
        if boolean.contains(&name) {
            flags.bools.push(name.to_string());
            i += 1;
        } else if valued.contains(&name) {
            let Some(value) = args.get(i + 1) else {
                return usage_err(format!("--{name} needs a value"));
            };
            flags.values.entry(name.to_string()).or_default().push(value.clone());
            i += 2;
        } else {
            return usage_err(format!("unknown flag --{name}"));
        }
    }
    Ok(flags)
}

impl Flags {
    fn has(&self, name: &str) -> bool {
        self.bools.iter().any(|b| b == name)
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).and_then(|v| v.last()).map(String::as_str)
    }

    fn get_all(&self, name: &str) -> Vec<&str> {
        self.values.get(name).map(|v| v.iter().map(String::as_str).collect()).unwrap_or_default()
    }

    fn parse<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T, CliError> {
        match self.get(name) {
            None => Ok(default),
            Some(s) => {
                s.parse().map_err(|_| CliError::Usage(format!("--{name}: bad value {s:?}")))
            }
        }
    }

    fn require(&self, name: &str) -> Result<&str, CliError> {
        self.get(name).ok_or_else(|| CliError::Usage(format!("--{name} is required")))
    }
}

fn parse_p_list(flags: &Flags) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for chunk in flags.get_all("p") {
        for piece in chunk.split(',') {
            let p: f64 = piece
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--p: bad value {piece:?}")))?;
            out.push(p);
        }
    }
    Ok(out)
}

fn parse_decoders(flags: &Flags) -> Result<Vec<DecoderConfig>, CliError> {
    let mut out = Vec::new();
    for spec in flags.get_all("decoder") {
        out.push(parse_decoder(spec, flags.has("hash-aided"))?);
    }
    Ok(out)
}

fn parse_decoder(spec: &str, hash_aided: bool) -> Result<DecoderConfig, CliError> {
    let config = if spec == "sc" {
        DecoderConfig::sc()
    } else if let Some(l) = spec.strip_prefix("scl:") {
        let list: usize =
            l.parse().map_err(|_| CliError::Usage(format!("bad list size {l:?}")))?;
        if hash_aided {
            DecoderConfig::scl_hash_aided(list)
        } else {
            DecoderConfig::scl(list)
        }
    } else if let Some(it) = spec.strip_prefix("bp:") {
        let iters: usize =
            it.parse().map_err(|_| CliError::Usage(format!("bad iteration count {it:?}")))?;
        DecoderConfig::bp(iters)
    } else {
        return usage_err(format!("bad decoder {spec:?} (want sc, scl:<L>, or bp:<iters>)"));
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn load_cells(flags: &Flags, default_seed: u64) -> Result<CellMeasurementSet, CliError> {
    let synthetic = flags.has("synthetic");
    match (flags.get("input"), synthetic) {
        (Some(_), true) => usage_err("--input and --synthetic are mutually exclusive"),
        (Some(path), false) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{path}: {e}")))?;
            parse_measurement_csv(&text).map_err(|e| CliError::Data(e.to_string()))
        }
        (None, true) => {
            let cells = flags.parse("cells", 254usize)?;
            let readings = flags.parse("readings", 102usize)?;
            let seed = flags.parse("seed", default_seed)?;
            let params = synthetic_params(flags)?;
            simulate_cells(cells, readings, &params, seed)
                .map_err(|e| CliError::Data(e.to_string()))
        }
        (None, false) => usage_err("need --input <csv> or --synthetic"),
    }
}

fn synthetic_params(flags: &Flags) -> Result<SyntheticParams, CliError> {
    let d = SyntheticParams::default();
    Ok(SyntheticParams {
        pop_mean: flags.parse("pop-mean", d.pop_mean)?,
        pop_sd: flags.parse("pop-sd", d.pop_sd)?,
        read_sd: flags.parse("read-sd", d.read_sd)?,
    })
}

fn load_record(flags: &Flags) -> Result<EnrollmentRecord, CliError> {
    let path = flags.require("record")?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    deserialize_record(&bytes).map_err(|e| CliError::Data(e.to_string()))
}

fn write_output(path: &str, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("{path}: {e}")))
}

// --- commands ---------------------------------------------------------------

fn cmd_enroll(args: &[String]) -> Result<u8, CliError> {
    let flags = parse_flags(
        args,
        &["synthetic"],
        &["input", "record", "seed", "cells", "readings", "reading", "pop-mean", "pop-sd", "read-sd"],
    )?;
    let record_path = flags.require("record")?.to_string();
    let reading_index = flags.parse("reading", 0usize)?;
    let set = load_cells(&flags, 1)?;
    let (bch, polar) = preset::codes();
    let (t1, t2) = compute_thresholds(&set).map_err(|e| CliError::Data(e.to_string()))?;
    let profile = classify_cells(&set, t1, t2).map_err(|e| CliError::Data(e.to_string()))?;
    if profile.mask.len() < bch.k() {
        return data_err(format!(
            "only {} of {} cells are stable; enrollment needs {}",
            profile.mask.len(),
            set.cells.len(),
            bch.k()
        ));
    }
    let response = extract_response(&set, &profile, reading_index, bch.k())
        .map_err(|e| CliError::Data(e.to_string()))?;
    let mask: Vec<u16> = profile.mask[..bch.k()].iter().map(|&i| i as u16).collect();
    let (record, key) = extractor::register_with_mask(&response.bits, &mask, &bch, &polar)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_output(&record_path, &serialize_record(&record))?;
    println!("record: {record_path}");
    println!("helper-bits: {}", record.helper_bits.len());
    println!("key-bits: {}", key.raw_bits().len());
    println!("key-hash: {}", key.hash_hex());
    Ok(EXIT_OK)
}

fn cmd_regen(args: &[String]) -> Result<u8, CliError> {
    let flags = parse_flags(
        args,
        &["synthetic", "literal-substitution", "hash-aided"],
        &[
            "input", "record", "seed", "cells", "readings", "reading", "flip-p", "flip-seed",
            "decoder", "channel-p", "parity-llr-scale", "gate-fraction", "pop-mean", "pop-sd",
            "read-sd",
        ],
    )?;
    let record = load_record(&flags)?;
    let (bch, polar) =
        extractor::rebuild_codes(&record).map_err(|e| CliError::Data(e.to_string()))?;
    if record.mask.len() < bch.k() {
        return data_err("record carries no usable cell mask");
    }
    // regeneration defaults to reading 1: a different read than the
    // enrollment default, so the synthetic path exercises real read noise
    let reading_index = flags.parse("reading", 1usize)?;
    let set = load_cells(&flags, 1)?;
    let (t1, t2) = compute_thresholds(&set).map_err(|e| CliError::Data(e.to_string()))?;
    let mask: Vec<usize> = record.mask.iter().map(|&m| m as usize).collect();
    let mut response = extract_response_with_mask(&set, t1, t2, &mask, reading_index, bch.k())
        .map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(p) = flags.get("flip-p") {
        let p: f64 = p.parse().map_err(|_| CliError::Usage(format!("--flip-p: bad {p:?}")))?;
        let flip_seed = flags.parse("flip-seed", 7u64)?;
        response =
            flip_bits(&response, p, flip_seed).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let decoder = parse_decoder(flags.get("decoder").unwrap_or("sc"), flags.has("hash-aided"))?;
    let opts = RegenOptions {
        decoder,
        channel_p: flags.parse("channel-p", preset::DEFAULT_CHANNEL_P)?,
        mode: if flags.has("literal-substitution") {
            RegenMode::LiteralSubstitution
        } else {
            RegenMode::Principled
        },
        parity_llr_scale: flags.parse("parity-llr-scale", preset::PARITY_LLR_SCALE)?,
        gate_fraction: flags.parse("gate-fraction", extractor::DEFAULT_GATE_FRACTION)?,
    };
    let result = regenerate_with(&response.bits, &record, &bch, &polar, &opts, None)
        .map_err(|e| CliError::Data(e.to_string()))?;
    println!("decoder: {}", result.diagnostics.decoder);
    println!("bch-corrections: {}", result.diagnostics.bch_corrections);
    println!("decoder-iterations: {}", result.diagnostics.decoder_iterations);
    if result.diagnostics.flags.bch_decode_failed {
        println!("flag: bch-decode-failed");
    }
    if result.diagnostics.flags.response_rejected {
        println!("flag: response-rejected");
    }
    if result.diagnostics.flags.decoder_nonconverged {
        println!("flag: decoder-nonconverged");
    }
    if result.diagnostics.flags.scl_predicate_fallback {
        println!("flag: scl-predicate-fallback");
    }
    println!("regenerated-hash: {}", hex(&result.key_hash));
    println!("match: {}", result.matches);
    Ok(if result.matches { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_simulate_cells(args: &[String]) -> Result<u8, CliError> {
    let flags = parse_flags(
        args,
        &[],
        &["out", "cells", "readings", "seed", "pop-mean", "pop-sd", "read-sd"],
    )?;
    let out = flags.require("out")?.to_string();
    let cells = flags.parse("cells", 254usize)?;
    let readings = flags.parse("readings", 102usize)?;
    let seed = flags.parse("seed", 1u64)?;
    let params = synthetic_params(&flags)?;
    let set =
        simulate_cells(cells, readings, &params, seed).map_err(|e| CliError::Data(e.to_string()))?;
    write_output(&out, write_measurement_csv(&set).as_bytes())?;
    println!("wrote {cells} cells x {readings} readings to {out}");
    Ok(EXIT_OK)
}

fn experiment_spec(flags: &Flags, scenario: Scenario) -> Result<ExperimentSpec, CliError> {
    let mut spec = ExperimentSpec::new(scenario);
    let p_values = parse_p_list(flags)?;
    if !p_values.is_empty() {
        spec.p_values = p_values;
    }
    let decoders = parse_decoders(flags)?;
    if !decoders.is_empty() {
        spec.decoders = decoders;
    }
    spec.trials = flags.parse("trials", spec.trials)?;
    spec.seed = flags.parse("seed", spec.seed)?;
    spec.num_cells = flags.parse("cells", spec.num_cells)?;
    spec.num_readings = flags.parse("readings", spec.num_readings)?;
    spec.parity_llr_scale = flags.parse("parity-llr-scale", spec.parity_llr_scale)?;
    spec.gate_fraction = flags.parse("gate-fraction", spec.gate_fraction)?;
    spec.attacker_min_hd = flags.parse("attacker-hd", spec.attacker_min_hd)?;
    if flags.has("literal-substitution") {
        spec.mode = RegenMode::LiteralSubstitution;
    }
    if let Some(p) = flags.get("channel-p") {
        let p: f64 =
            p.parse().map_err(|_| CliError::Usage(format!("--channel-p: bad {p:?}")))?;
        spec.channel_p_override = Some(p);
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

const EXPERIMENT_FLAGS: &[&str] = &[
    "p", "trials", "decoder", "seed", "csv", "cells", "readings", "channel-p",
    "parity-llr-scale", "gate-fraction", "attacker-hd",
];

fn cmd_mc_failure(args: &[String]) -> Result<u8, CliError> {
    let flags =
        parse_flags(args, &["literal-substitution", "hash-aided"], EXPERIMENT_FLAGS)?;
    let spec = experiment_spec(&flags, Scenario::FailureMc)?;
    let rows = experiments::run_failure_mc(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    for r in &rows {
        println!(
            "p={:<6} trials={} failures={} rate={:.3e} wilson95<={:.3e}",
            r.p, r.stats.trials, r.stats.failures, r.stats.failure_rate, r.stats.wilson95_upper
        );
    }
    if let Some(path) = flags.get("csv") {
        write_output(path, experiments::failure_csv(&rows).as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn cmd_ber_sweep(args: &[String]) -> Result<u8, CliError> {
    let flags =
        parse_flags(args, &["literal-substitution", "hash-aided"], EXPERIMENT_FLAGS)?;
    let spec = experiment_spec(&flags, Scenario::BerSweep)?;
    let rows = experiments::run_ber_sweep(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    for r in &rows {
        println!(
            "p={:<6} trials={} legit-key-error={:.3}% attacker-key-error={:.3}%",
            r.p, r.trials, r.percent_key_error_legit, r.percent_key_error_attacker
        );
    }
    if let Some(path) = flags.get("csv") {
        write_output(path, experiments::ber_csv(&rows).as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn cmd_decoder_compare(args: &[String]) -> Result<u8, CliError> {
    let flags = parse_flags(
        args,
        &["literal-substitution", "hash-aided", "no-runtime"],
        EXPERIMENT_FLAGS,
    )?;
    let spec = experiment_spec(&flags, Scenario::DecoderCompare)?;
    let rows =
        experiments::run_decoder_compare(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    for r in &rows {
        println!(
            "p={:<6} decoder={:<8} trials={} block-errors={} rate={:.3e} mean-runtime={:.1}us",
            r.p, r.decoder, r.trials, r.block_errors, r.block_error_rate, r.mean_runtime_us
        );
    }
    if let Some(path) = flags.get("csv") {
        write_output(
            path,
            experiments::compare_csv(&rows, flags.has("no-runtime")).as_bytes(),
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_timing(args: &[String]) -> Result<u8, CliError> {
    let flags = parse_flags(args, &["literal-substitution"], EXPERIMENT_FLAGS)?;
    let spec = experiment_spec(&flags, Scenario::Timing)?;
    let rows = experiments::run_timing(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    for r in &rows {
        println!(
            "decoder={:<8} trials={} mean={:.1}us median-of-means={:.1}us",
            r.decoder, r.trials, r.mean_us, r.median_of_means_us
        );
    }
    if let Some(path) = flags.get("csv") {
        write_output(path, experiments::timing_csv(&rows).as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn cmd_plot(args: &[String]) -> Result<u8, CliError> {
    let flags = parse_flags(args, &[], &["csv", "out", "kind"])?;
    let csv_path = flags.require("csv")?;
    let out_path = flags.require("out")?.to_string();
    let kind = match flags.get("kind") {
        None => PlotKind::Auto,
        Some("mc-failure") => PlotKind::FailureRate,
        Some("ber-sweep") => PlotKind::BerSweep,
        Some("decoder-compare") => PlotKind::DecoderCompare,
        Some("timing") => PlotKind::Timing,
        Some(other) => return usage_err(format!("unknown plot kind {other:?}")),
    };
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| CliError::Data(format!("{csv_path}: {e}")))?;
    let svg = emit_plot(&text, kind).map_err(|e| CliError::Data(e.to_string()))?;
    write_output(&out_path, svg.as_bytes())?;
    println!("wrote {out_path}");
    Ok(EXIT_OK)
}
