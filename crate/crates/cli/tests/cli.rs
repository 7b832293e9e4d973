use qrnglab::modulator::settle_mask;
use qrnglab::pipeline::PipelineConfig;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qrnglab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrnglab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

const SMALL: &str = "[extraction]\nn_samples = 131072\nhmin = 1.0\ndecompose_samples = 65536\n\
                     [suite]\nraw_bits = 100000\nextracted_bits = 100000\n";

#[test]
fn simulate_writes_header_plus_payload_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrnglab(&["simulate", "--out", "a"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = dir.path().join("a/lit.vqrn");
    assert_eq!(fs::metadata(&a).unwrap().len(), 8_388_640);
    assert!(dir.path().join("a/manifest.txt").exists());
    assert_eq!(code(&qrnglab(&["simulate", "--out", "b"], dir.path())), 0);
    assert_eq!(sha(&a), sha(&dir.path().join("b/lit.vqrn")));
    assert_eq!(
        code(&qrnglab(&["simulate", "--out", "c", "--seed", "7"], dir.path())),
        0
    );
    assert_ne!(sha(&a), sha(&dir.path().join("c/lit.vqrn")));
}

#[test]
fn dark_capture_round_trips_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrnglab(&["simulate", "--dark", "--samples", "70000", "--out", "."], dir.path());
    assert_eq!(code(&o), 0);
    let bytes = fs::read(dir.path().join("dark.vqrn")).unwrap();
    assert_eq!(bytes[7] & 1, 0);
    let o = qrnglab(&["ingest", "dark.vqrn"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("n_samples = 70000"));
    assert!(text.contains("lit = false"));
}

#[test]
fn corrupt_captures_give_format_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&qrnglab(&["simulate", "--samples", "1000", "--out", "."], dir.path())),
        0
    );
    let good = fs::read(dir.path().join("lit.vqrn")).unwrap();
    fs::write(dir.path().join("short.vqrn"), &good[..good.len() - 10]).unwrap();
    let o = qrnglab(&["ingest", "short.vqrn"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
    let mut bad = good.clone();
    bad[0] = b'X';
    fs::write(dir.path().join("magic.vqrn"), &bad).unwrap();
    assert_eq!(code(&qrnglab(&["ingest", "magic.vqrn"], dir.path())), 3);
    assert_eq!(code(&qrnglab(&["ingest", "missing.vqrn"], dir.path())), 1);
}

#[test]
fn config_errors_give_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[adc]\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&qrnglab(&["show-config", "--config", "bad.toml"], dir.path())), 2);
    assert_eq!(code(&qrnglab(&["show-config", "--profile", "nope"], dir.path())), 2);
    let o = qrnglab(&["show-config", "--profile", "transmitter-tdm-2020"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let back = PipelineConfig::from_toml_str(&text, None).unwrap();
    assert_eq!(back, PipelineConfig::transmitter_tdm_2020());
}

#[test]
fn pipeline_small_run_and_digest_stability() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    for out in ["r1", "r2"] {
        let o = qrnglab(&["pipeline", "--config", "small.toml", "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "key.bin",
        "seed.tsee",
        "extracted_suite.csv",
        "raw_suite.csv",
        "entropy.csv",
        "manifest.txt",
    ] {
        let a = dir.path().join("r1").join(f);
        assert!(a.exists(), "{f}");
        if f != "manifest.txt" {
            assert_eq!(sha(&a), sha(&dir.path().join("r2").join(f)), "{f}");
        }
    }
    let manifest = fs::read_to_string(dir.path().join("r1/manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("seed_master = 2020"));
}

#[test]
fn zero_entropy_gives_insufficient_entropy_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h0.toml"), SMALL.replace("hmin = 1.0", "hmin = 0.0")).unwrap();
    assert_eq!(
        code(&qrnglab(&["pipeline", "--config", "h0.toml", "--out", "o"], dir.path())),
        4
    );
}

#[test]
fn failing_floor_gives_suite_exit_code_after_writing_reports() {
    let dir = tempfile::tempdir().unwrap();
    let doc = format!("{SMALL}max_failures = 0\n[suite.params]\nalpha = 0.5\n");
    fs::write(dir.path().join("strict.toml"), doc).unwrap();
    assert_eq!(
        code(&qrnglab(
            &["pipeline", "--config", "strict.toml", "--out", "o"],
            dir.path()
        )),
        5
    );
    assert!(dir.path().join("o/extracted_suite.csv").exists());
}

#[test]
fn tdm_trace_matches_mask_arithmetic_and_empty_mask_exits() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrnglab(
        &[
            "tdm-trace",
            "--profile",
            "transmitter-tdm-2020",
            "--stride",
            "4096",
            "--out",
            "t",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = PipelineConfig::transmitter_tdm_2020();
    let tdm = cfg.tdm.unwrap();
    let mask = settle_mask(&tdm.frame, &tdm.modulator, tdm.options.settle_fraction).unwrap();
    let text = fs::read_to_string(dir.path().join("t/mask.txt")).unwrap();
    assert!(text.contains(&format!("valid_samples = {}", mask.valid_count())));
    let trace = fs::read_to_string(dir.path().join("t/trace.csv")).unwrap();
    assert!(trace.starts_with("time_s,monitor,tia,valid_flag"));

    fs::write(
        dir.path().join("tight.toml"),
        "[tdm.frame]\nperiod_s = 150e-6\nguard_s = 20e-6\n",
    )
    .unwrap();
    let o = qrnglab(
        &[
            "tdm-trace",
            "--profile",
            "transmitter-tdm-2020",
            "--config",
            "tight.toml",
            "--out",
            "u",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 6, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&qrnglab(&["tdm-trace", "--out", "v"], dir.path())), 2);
}

#[test]
fn keyrate_for_receiver_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrnglab(&["keyrate"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("keys_per_s = 1.953125e7"));
}

#[test]
fn suite_output_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<u8> = (0u32..140_000)
        .map(|i| (i.wrapping_mul(2_654_435_761) >> 13) as u8)
        .collect();
    fs::write(dir.path().join("bits.bin"), bytes).unwrap();
    for (jobs, out) in [("1", "j1"), ("3", "j3")] {
        let o = qrnglab(&["suite", "bits.bin", "--jobs", jobs, "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        sha(&dir.path().join("j1/suite.csv")),
        sha(&dir.path().join("j3/suite.csv"))
    );
}

#[test]
fn extract_and_entropy_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let run = |args: &[&str]| qrnglab(args, dir.path());
    assert_eq!(code(&run(&["simulate", "--config", "small.toml", "--out", "."])), 0);
    assert_eq!(
        code(&run(&["simulate", "--config", "small.toml", "--dark", "--out", "."])),
        0
    );
    let o = run(&[
        "entropy",
        "--config",
        "small.toml",
        "--dark",
        "dark.vqrn",
        "--lit",
        "lit.vqrn",
        "--out",
        "e",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(dir.path().join("e/entropy.csv"))
        .unwrap()
        .starts_with("key,value\n"));
    let o = run(&["extract", "--config", "small.toml", "lit.vqrn", "--out", "x"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let key = fs::read(dir.path().join("x/key.bin")).unwrap();
    assert_eq!(key.len(), (131072 - 67usize).div_ceil(8));
    let o = run(&[
        "extract",
        "--config",
        "small.toml",
        "lit.vqrn",
        "--seed-file",
        "x/seed.tsee",
        "--out",
        "y",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(dir.path().join("y/key.bin")).unwrap(), key);
}

#[test]
fn qpsk_ber_curve_and_power_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrnglab(
        &[
            "qpsk-ber",
            "--ebn0",
            "4,8",
            "--bits",
            "200000",
            "--constellation",
            "500",
            "--out",
            "q",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let points = fs::read_to_string(dir.path().join("q/constellation.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 2 * 500);
    let csv = fs::read_to_string(dir.path().join("q/ber.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let o = qrnglab(&["qpsk-ber", "--power-dbm", "-20", "--out", "p"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("power_map"));
    fs::write(
        dir.path().join("map.toml"),
        "[power_map]\nesn0_db_at_0dbm = 30.0\nslope_db_per_db = 1.0\n",
    )
    .unwrap();
    let o = qrnglab(
        &[
            "qpsk-ber",
            "--config",
            "map.toml",
            "--power-dbm",
            "-22,-20",
            "--bits",
            "200000",
            "--out",
            "p",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
