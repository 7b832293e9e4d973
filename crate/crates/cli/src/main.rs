//! Command-line driver: simulate or ingest captures, run the extraction
//! pipeline, the statistical battery, QPSK experiments and TDM traces.
//!
//! Exit codes: 0 success, 1 I/O error, 2 configuration or usage error,
//! 3 file format error, 4 insufficient entropy, 5 extracted suite below the
//! configured floor, 6 empty TDM validity mask.

use clap::{Args, Parser, Subcommand};
use qrnglab::bits::Bitstream;
use qrnglab::entropy::{key_rate, ExtractionPlan};
use qrnglab::error::{Error, Result};
use qrnglab::extractor::{extract_stream, read_seed, seed_new, serialize_block, write_seed, KeyManifest};
use qrnglab::frontend::{psd_estimate, read_capture, simulate_block, SampleBlock};
use qrnglab::modulator::{bias_tone_spectrum, settle_mask, simulate_tx_frame, tdm_schedule};
use qrnglab::pipeline::{estimate_entropy, run_manifest, run_pipeline, sub_seed, text_to_csv, PipelineConfig};
use qrnglab::qpsk::{ber_csv, ber_curve, ebn0_for_ber, esn0_to_ebn0_db, threshold_search, FEC_THRESHOLD};
use qrnglab::statests::{run_suite, summarize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qrnglab",
    version,
    about = "Vacuum-noise QRNG simulation, extraction and testing"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML document merged over the selected profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides seeds.master.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Built-in profile: receiver-2020 or transmitter-tdm-2020.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Omit the leftover-hash security deduction from the output length.
    #[arg(long, global = true)]
    paper_mode: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated capture file.
    Simulate {
        /// Simulate with the local oscillator off.
        #[arg(long)]
        dark: bool,
        /// Sample count; defaults to extraction.n_samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Parse and validate a capture file and print its statistics.
    Ingest { file: PathBuf },
    /// Full chain: capture, entropy estimate, extraction, suite, reports.
    Pipeline,
    /// Welch power spectral density of a capture (simulated when no input is given).
    Psd {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        dark: bool,
        #[arg(long, default_value_t = 4096)]
        segment: usize,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Variance decomposition and min-entropy from a dark/lit pair.
    Entropy {
        #[arg(long, requires = "lit")]
        dark: Option<PathBuf>,
        #[arg(long, requires = "dark")]
        lit: Option<PathBuf>,
    },
    /// Toeplitz extraction of lit captures with the configured plan.
    Extract {
        /// Lit captures, one per block.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Existing seed file; a fresh seed is drawn otherwise.
        #[arg(long)]
        seed_file: Option<PathBuf>,
    },
    /// Run the statistical battery on a bit file.
    Suite {
        input: PathBuf,
        /// Treat the input as ASCII '0'/'1' text instead of packed bytes.
        #[arg(long)]
        ascii: bool,
        /// Test at most this many leading bits.
        #[arg(long)]
        bits: Option<usize>,
    },
    /// QPSK bit-error-rate curve and FEC threshold.
    QpskBer {
        /// Comma-separated Eb/N0 grid in dB.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 4.0, 6.0, 8.0])]
        ebn0: Vec<f64>,
        /// Comma-separated received powers in dBm; needs a power_map section.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "ebn0")]
        power_dbm: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        bits: usize,
        /// Also search the Eb/N0 at which BER equals this target.
        #[arg(long)]
        threshold: Option<f64>,
        /// Also export this many recovered symbols per polarization at the first grid point.
        #[arg(long)]
        constellation: Option<usize>,
    },
    /// Time trace of one transmitter frame plus bias-tone harmonics.
    TdmTrace {
        #[arg(long)]
        dark: bool,
        /// Keep every n-th sample in the trace CSV.
        #[arg(long, default_value_t = 64)]
        stride: usize,
        /// Bias-tone amplitude as a fraction of V_pi.
        #[arg(long, default_value_t = 0.05)]
        tone_amp_vpi: f64,
        #[arg(long, default_value_t = 1e3)]
        tone_hz: f64,
    },
    /// Key rate for the configured sample rate, entropy and duty cycle.
    Keyrate {
        #[arg(long)]
        hmin: Option<f64>,
        #[arg(long)]
        duty: Option<f64>,
        #[arg(long, default_value_t = 256)]
        key_bits: u32,
    },
    /// Print the resolved configuration.
    ShowConfig,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Config(_) | Error::Domain(_) | Error::Ambiguity(_) | Error::TooShort { .. } => 2,
        Error::Format(_) | Error::Truncated { .. } | Error::LengthMismatch { .. } => 3,
        Error::InsufficientEntropy(_) | Error::Estimation(_) => 4,
        Error::SuiteBelowFloor { .. } => 5,
        Error::EmptyMask { .. } => 6,
    }
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::from_file(p, g.profile.as_deref())?,
        None => PipelineConfig::from_toml_str("", g.profile.as_deref())?,
    };
    if let Some(s) = g.seed {
        cfg.seeds.master = s;
    }
    if let Some(o) = &g.out {
        cfg.output.dir = o.clone();
    }
    if g.paper_mode {
        cfg.extraction.mode = qrnglab::entropy::LengthMode::Paper;
    }
    Ok(cfg)
}

/// Collects output files and finishes with a manifest.
struct Outputs<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a PipelineConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output.dir)?;
        Ok(Self {
            cfg,
            dir: cfg.output.dir.clone(),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written
            .push((name.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(path)
    }

    fn finish(self, command: &str) -> Result<()> {
        fs::write(
            self.dir.join("manifest.txt"),
            run_manifest(self.cfg, command, &self.written),
        )?;
        Ok(())
    }
}

fn read_block(path: &Path, cfg: &PipelineConfig) -> Result<SampleBlock> {
    let f = fs::File::open(path)?;
    read_capture(std::io::BufReader::new(f), cfg.adc().full_scale_v, &cfg.frontend.tag())
}

fn capture_bytes(block: &SampleBlock) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    qrnglab::frontend::write_capture(&mut buf, block)?;
    Ok(buf)
}

fn block_stats(block: &SampleBlock) -> String {
    let n = block.len() as f64;
    let mean = block.samples().iter().map(|&s| s as f64).sum::<f64>() / n;
    let mut out = String::new();
    let _ = writeln!(out, "n_samples = {}", block.len());
    let _ = writeln!(out, "bits = {}", block.adc().bits);
    let _ = writeln!(out, "sample_rate_hz = {}", block.adc().sample_rate_hz);
    let _ = writeln!(out, "lit = {}", block.lit());
    let _ = writeln!(out, "mean_lsb = {mean:.6}");
    let _ = writeln!(out, "variance_v2 = {:e}", block.variance_v2());
    let _ = writeln!(out, "clip_fraction = {:.6}", block.clip_fraction());
    out
}

fn simulated(cfg: &PipelineConfig, lit: bool, n: usize) -> Result<SampleBlock> {
    let label = if lit { "lit-0" } else { "dark" };
    simulate_block(
        &cfg.frontend,
        &cfg.sidechannel,
        &cfg.adc(),
        n,
        lit,
        sub_seed(cfg, label),
    )
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::ShowConfig => print!("{}", cfg.to_toml()),
        Command::Simulate { dark, samples } => {
            let n = samples.unwrap_or(cfg.extraction.n_samples as usize);
            let block = simulated(&cfg, !dark, n)?;
            let mut out = Outputs::new(&cfg)?;
            let name = if dark { "dark.vqrn" } else { "lit.vqrn" };
            let path = out.put(name, &capture_bytes(&block)?)?;
            out.finish("simulate")?;
            println!("{}", path.display());
            if block.clip_warning() {
                eprintln!("warning: more than 1% of samples clipped");
            }
        }
        Command::Ingest { file } => print!("{}", block_stats(&read_block(&file, &cfg)?)),
        Command::Pipeline => {
            let outcome = run_pipeline(&cfg)?;
            outcome.write_bundle(&cfg.output.dir)?;
            let raw = summarize(&outcome.raw_report);
            let ext = summarize(&outcome.extracted_report);
            println!("raw suite: {} pass, {} fail, {} na", raw.n_pass, raw.n_fail, raw.n_na);
            println!(
                "extracted suite: {} pass, {} fail, {} na",
                ext.n_pass, ext.n_fail, ext.n_na
            );
            println!("key bits: {}", outcome.key.len());
            println!("reports: {}", cfg.output.dir.display());
            outcome.check_floor()?;
        }
        Command::Psd {
            input,
            dark,
            segment,
            samples,
        } => {
            let block = match input {
                Some(p) => read_block(&p, &cfg)?,
                None => simulated(&cfg, !dark, samples.unwrap_or(1 << 20))?,
            };
            let psd = psd_estimate(&block, segment)?;
            let mut out = Outputs::new(&cfg)?;
            out.put("psd.csv", psd.to_csv().as_bytes())?;
            out.finish("psd")?;
        }
        Command::Entropy { dark, lit } => {
            let (d, l) = match (dark, lit) {
                (Some(d), Some(l)) => (read_block(&d, &cfg)?, read_block(&l, &cfg)?),
                _ => {
                    let n = cfg.extraction.decompose_samples;
                    (simulated(&cfg, false, n)?, simulated(&cfg, true, n)?)
                }
            };
            let e = estimate_entropy(&d, &l)?;
            let dd = &e.decomposition;
            let mut text = String::new();
            let _ = writeln!(text, "sigma2_total_v2 = {:e}", dd.sigma2_total);
            let _ = writeln!(text, "sigma2_electrical_v2 = {:e}", dd.sigma2_electrical);
            let _ = writeln!(text, "sigma2_quantum_v2 = {:e}", dd.sigma2_quantum);
            let _ = writeln!(text, "clearance_db = {:.4}", dd.clearance_db);
            let _ = writeln!(text, "sigma_quantum_lsb = {:.4}", e.sigma_quantum_lsb);
            let _ = writeln!(text, "hmin_centred_bits = {:.6}", e.hmin_centred);
            let _ = writeln!(text, "hmin_worst_case_bits = {:.6}", e.hmin_worst);
            print!("{text}");
            let mut out = Outputs::new(&cfg)?;
            out.put("entropy.txt", text.as_bytes())?;
            out.put("entropy.csv", text_to_csv(&text).as_bytes())?;
            out.finish("entropy")?;
        }
        Command::Extract { inputs, seed_file } => {
            let blocks = inputs.iter().map(|p| read_block(p, &cfg)).collect::<Result<Vec<_>>>()?;
            let ex = &cfg.extraction;
            let hmin = ex
                .hmin
                .ok_or_else(|| Error::Config("extract needs extraction.hmin".into()))?;
            let n = blocks[0].len() as u64;
            let mut plan = ExtractionPlan::new(n, cfg.adc.bits, hmin, ex.hmin_convention, ex.epsilon, ex.mode)?;
            if let Some(m) = ex.output_bits {
                if m > plan.m_out {
                    return Err(Error::InsufficientEntropy(format!(
                        "requested {m} output bits, the entropy budget allows {}",
                        plan.m_out
                    )));
                }
                plan.m_out = m;
            }
            let seed = match seed_file {
                Some(p) => read_seed(std::io::BufReader::new(fs::File::open(p)?))?,
                None => seed_new(
                    plan.input_bits() as usize,
                    plan.m_out as usize,
                    sub_seed(&cfg, "toeplitz"),
                )?,
            };
            let key = extract_stream(&blocks, &plan, &seed)?;
            let serialized: Vec<Bitstream> = blocks.iter().map(serialize_block).collect();
            let manifest = KeyManifest::new(&plan, &seed, &serialized, &key);
            let mut seed_bytes = Vec::new();
            write_seed(&mut seed_bytes, &seed)?;
            let mut out = Outputs::new(&cfg)?;
            out.put("key.bin", key.as_bytes())?;
            out.put("seed.tsee", &seed_bytes)?;
            out.put("key.manifest", manifest.to_text().as_bytes())?;
            out.finish("extract")?;
            println!("key bits: {}", key.len());
        }
        Command::Suite { input, ascii, bits } => {
            let bytes = fs::read(&input)?;
            let stream = if ascii {
                let text = String::from_utf8(bytes).map_err(|_| Error::Format("ASCII bit file is not UTF-8".into()))?;
                let clean: String = text.chars().filter(|c| !c.is_whitespace()).collect();
                Bitstream::from_ascii(&clean)?
            } else {
                Bitstream::from_byte_vec(bytes)
            };
            let stream = stream.prefix(bits.unwrap_or(stream.len()).min(stream.len()));
            let report = run_suite(&stream, &cfg.suite.params)?;
            print!("{}", report.summary_text());
            let mut out = Outputs::new(&cfg)?;
            out.put("suite.csv", report.to_csv().as_bytes())?;
            out.put("suite.txt", report.summary_text().as_bytes())?;
            out.finish("suite")?;
        }
        Command::QpskBer {
            ebn0,
            power_dbm,
            bits,
            threshold,
            constellation,
        } => {
            let grid = if power_dbm.is_empty() {
                ebn0
            } else {
                let map = cfg
                    .power_map
                    .ok_or_else(|| Error::Config("--power-dbm needs a [power_map] section".into()))?;
                power_dbm.iter().map(|&p| esn0_to_ebn0_db(map.esn0_db(p))).collect()
            };
            let seed = sub_seed(&cfg, "qpsk");
            let reports = ber_curve(&cfg.qpsk, &grid, bits, seed)?;
            let mut out = Outputs::new(&cfg)?;
            let csv = ber_csv(&reports);
            print!("{csv}");
            out.put("ber.csv", csv.as_bytes())?;
            if let (Some(n), Some(&first)) = (constellation, grid.first()) {
                let pts = qrnglab::qpsk::constellation(&cfg.qpsk.clone().with_ebn0_db(first), n, seed)?;
                out.put("constellation.csv", qrnglab::qpsk::constellation_csv(&pts).as_bytes())?;
            }
            if let Some(target) = threshold {
                let measured = threshold_search(target, &cfg.qpsk, bits, seed)?;
                let theory = ebn0_for_ber(target)?;
                let mut text = String::new();
                let _ = writeln!(text, "target_ber = {target:e}");
                let _ = writeln!(text, "ebn0_measured_db = {measured:.3}");
                let _ = writeln!(text, "ebn0_theory_db = {theory:.3}");
                if let Some(map) = cfg.power_map {
                    let esn0 = qrnglab::qpsk::ebn0_to_esn0_db(measured);
                    let _ = writeln!(text, "power_dbm = {:.3}", map.power_dbm(esn0)?);
                }
                if target == FEC_THRESHOLD {
                    text.push_str("note = hard-decision FEC threshold\n");
                }
                print!("{text}");
                out.put("threshold.txt", text.as_bytes())?;
            }
            out.finish("qpsk-ber")?;
        }
        Command::TdmTrace {
            dark,
            stride,
            tone_amp_vpi,
            tone_hz,
        } => {
            let tdm = cfg.tdm.as_ref().ok_or_else(|| {
                Error::Config("tdm-trace needs a [tdm] section (try --profile transmitter-tdm-2020)".into())
            })?;
            if stride == 0 {
                return Err(Error::Config("--stride must be at least 1".into()));
            }
            let frame = simulate_tx_frame(
                &cfg.frontend,
                &tdm.modulator,
                &tdm.frame,
                &cfg.adc(),
                &tdm.options,
                !dark,
                sub_seed(&cfg, if dark { "dark-frame-0" } else { "lit-frame-0" }),
            )?;
            let mask = settle_mask(&tdm.frame, &tdm.modulator, tdm.options.settle_fraction)?;
            let mut sched = String::from("slot,start_s,end_s\n");
            for s in tdm_schedule(&tdm.frame)? {
                let _ = writeln!(sched, "{:?},{:e},{:e}", s.kind, s.start_s, s.end_s);
            }
            let mut text = String::new();
            let _ = writeln!(text, "samples_per_period = {}", mask.samples_per_period);
            let _ = writeln!(text, "valid_start = {}", mask.start);
            let _ = writeln!(text, "valid_end = {}", mask.end);
            let _ = writeln!(text, "valid_samples = {}", mask.valid_count());
            let _ = writeln!(text, "valid_fraction = {:.6}", mask.valid_fraction());
            let _ = writeln!(text, "settle_time_s = {:e}", mask.t_settle_s);
            print!("{text}");
            let amp = tone_amp_vpi * tdm.modulator.v_pi;
            let harmonics = bias_tone_spectrum(&tdm.modulator, amp, tone_hz, true)?;
            let mut out = Outputs::new(&cfg)?;
            out.put("trace.csv", frame.to_csv(stride).as_bytes())?;
            out.put("schedule.csv", sched.as_bytes())?;
            out.put("mask.txt", text.as_bytes())?;
            out.put("harmonics.csv", harmonics.to_csv().as_bytes())?;
            out.finish("tdm-trace")?;
        }
        Command::Keyrate { hmin, duty, key_bits } => {
            let h = hmin
                .or(cfg.extraction.hmin)
                .ok_or_else(|| Error::Config("keyrate needs --hmin or extraction.hmin".into()))?;
            let duty = match (duty, &cfg.tdm) {
                (Some(d), _) => d,
                (None, Some(t)) => settle_mask(&t.frame, &t.modulator, t.options.settle_fraction)?.valid_fraction(),
                (None, None) => 1.0,
            };
            let rate = key_rate(cfg.adc.sample_rate_hz, h, key_bits, duty)?;
            println!("keys_per_s = {rate:e}");
            println!("bits_per_s = {:e}", rate * key_bits as f64);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
