//! End-to-end run: simulate or ingest, decompose, plan, extract, test.
//!
//! A run is described by one TOML document. Named profiles supply every
//! field; a user document is deep-merged over the chosen profile, so it only
//! needs the keys it changes.

use crate::bits::Bitstream;
use crate::entropy::{
    key_rate, min_entropy_per_sample, variance_decompose, EntropyConvention, ExtractionPlan, LengthMode,
    VarianceDecomposition,
};
use crate::error::{config, Error, Result};
use crate::extractor::{extract_stream, seed_new, serialize_block, write_seed, KeyManifest, ToeplitzSeed};
use crate::frontend::{
    calibrate_band, calibrate_electrical_noise_at, default_full_scale, read_capture, simulate_block, write_capture,
    AdcConfig, FrontendConfig, Mode, SampleBlock, SidechannelConfig,
};
use crate::modulator::{settle_mask, simulate_tx_frame, ModulatorConfig, SettleMask, TdmFrame, TxFrameOptions};
use crate::qpsk::{LinkConfig, PowerMap};
use crate::rng::derive_seed;
use crate::statests::{run_suite, summarize, SuiteParams, SuiteReport};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const PROFILES: [&str; 2] = ["receiver-2020", "transmitter-tdm-2020"];
pub const DEFAULT_PROFILE: &str = "receiver-2020";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcSection {
    pub sample_rate_hz: f64,
    pub bits: u32,
    /// Omitted: sixteen times the lit noise standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale_v: Option<f64>,
    pub interleave_spur_dbc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub clearance_db: f64,
    /// Spectral clearance at this frequency; omitted means band clearance at the ADC rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_hz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdmSection {
    pub modulator: ModulatorConfig,
    pub frame: TdmFrame,
    #[serde(default)]
    pub options: TxFrameOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSection {
    pub n_samples: u64,
    pub blocks: usize,
    /// Fixed min-entropy; omitted means the estimate from the variance decomposition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmin: Option<f64>,
    pub hmin_convention: EntropyConvention,
    pub worst_case_offset: bool,
    pub epsilon: f64,
    pub mode: LengthMode,
    /// Output length per block; omitted means the leftover-hash maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_bits: Option<u64>,
    pub decompose_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    pub raw_bits: usize,
    pub extracted_bits: usize,
    /// Extracted-suite failures tolerated before the run fails.
    pub max_failures: usize,
    #[serde(default)]
    pub params: SuiteParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub dark: PathBuf,
    pub lit: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub write_captures: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub master: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub profile: String,
    pub frontend: FrontendConfig,
    pub sidechannel: SidechannelConfig,
    pub adc: AdcSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tdm: Option<TdmSection>,
    pub extraction: ExtractionSection,
    pub suite: SuiteSection,
    #[serde(default)]
    pub qpsk: LinkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_map: Option<PowerMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSection>,
    pub output: OutputSection,
    pub seeds: SeedSection,
}

impl PipelineConfig {
    /// Coherent receiver at 40 GSa/s with the interleaving spur and the
    /// worst-case 9.5 dB CMRR; 8 Mi samples at 1/8 bit each per block.
    pub fn receiver_2020() -> Self {
        Self {
            profile: "receiver-2020".into(),
            frontend: FrontendConfig::receiver_2020(),
            sidechannel: SidechannelConfig::receiver_2020(),
            adc: AdcSection {
                sample_rate_hz: 40e9,
                bits: 8,
                full_scale_v: None,
                interleave_spur_dbc: -20.0,
            },
            calibration: None,
            tdm: None,
            extraction: ExtractionSection {
                n_samples: 8_388_608,
                blocks: 1,
                hmin: Some(0.125),
                hmin_convention: EntropyConvention::PerSample,
                worst_case_offset: true,
                epsilon: 1e-10,
                mode: LengthMode::Secure,
                output_bits: None,
                decompose_samples: 1 << 20,
            },
            suite: SuiteSection {
                raw_bits: 1 << 20,
                extracted_bits: 1 << 20,
                max_failures: 3,
                params: SuiteParams::default(),
            },
            qpsk: LinkConfig::default(),
            power_map: None,
            input: None,
            output: OutputSection {
                dir: "out".into(),
                write_captures: false,
            },
            seeds: SeedSection { master: 2020 },
        }
    }

    /// Modulator-based transmitter in time-division operation at 614.4 MSa/s;
    /// 5.4 M valid samples give one 1 Mibit block.
    pub fn transmitter_tdm_2020() -> Self {
        let frame = TdmFrame::paper_2020();
        Self {
            profile: "transmitter-tdm-2020".into(),
            frontend: FrontendConfig::transmitter_2020(frame.sample_rate_hz),
            sidechannel: SidechannelConfig::disabled(),
            adc: AdcSection {
                sample_rate_hz: frame.sample_rate_hz,
                bits: 8,
                full_scale_v: None,
                interleave_spur_dbc: f64::NEG_INFINITY,
            },
            tdm: Some(TdmSection {
                modulator: ModulatorConfig::pmiq_2020(),
                frame,
                options: TxFrameOptions::default(),
            }),
            extraction: ExtractionSection {
                n_samples: 5_400_000,
                hmin: None,
                output_bits: Some(1 << 20),
                ..Self::receiver_2020().extraction
            },
            ..Self::receiver_2020()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "receiver-2020" => Ok(Self::receiver_2020()),
            "transmitter-tdm-2020" => Ok(Self::transmitter_tdm_2020()),
            other => Err(config(format!(
                "unknown profile {other:?}; known: {}",
                PROFILES.join(", ")
            ))),
        }
    }

    /// Parses a document and merges it over its profile. `profile_override`
    /// wins over a `profile` key in the document.
    pub fn from_toml_str(doc: &str, profile_override: Option<&str>) -> Result<Self> {
        let user: toml::Table = doc.parse().map_err(|e| config(format!("invalid TOML: {e}")))?;
        let name = match (profile_override, user.get("profile")) {
            (Some(p), _) => p.to_string(),
            (None, Some(toml::Value::String(p))) => p.clone(),
            (None, Some(_)) => return Err(config("profile must be a string")),
            (None, None) => DEFAULT_PROFILE.to_string(),
        };
        let mut base = toml::Value::try_from(Self::profile(&name)?).map_err(|e| config(e.to_string()))?;
        deep_merge(&mut base, toml::Value::Table(user));
        if let toml::Value::Table(t) = &mut base {
            t.insert("profile".into(), toml::Value::String(name));
        }
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| config(e.to_string()))?;
        cfg.resolve()
    }

    pub fn from_file(path: &Path, profile_override: Option<&str>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?, profile_override)
    }

    /// Applies the calibration section and validates.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(cal) = &self.calibration {
            self.frontend.electrical_noise_psd = match cal.at_hz {
                Some(f) => calibrate_electrical_noise_at(cal.clearance_db, &self.frontend, f)?,
                None => calibrate_band(cal.clearance_db, &self.frontend, self.adc.sample_rate_hz)?,
            };
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate().map_err(as_config)?;
        self.sidechannel.validate().map_err(as_config)?;
        self.adc().validate().map_err(as_config)?;
        self.suite.params.validate().map_err(as_config)?;
        self.qpsk.validate().map_err(as_config)?;
        if let Some(tdm) = &self.tdm {
            if self.frontend.mode != Mode::Transmitter {
                return Err(config("a [tdm] section needs a transmitter-mode front-end"));
            }
            tdm.modulator.validate().map_err(as_config)?;
            tdm.frame.validate().map_err(as_config)?;
            if (tdm.frame.sample_rate_hz - self.adc.sample_rate_hz).abs() > 1e-9 * self.adc.sample_rate_hz {
                return Err(config("tdm.frame.sample_rate_hz must equal adc.sample_rate_hz"));
            }
        }
        let e = &self.extraction;
        if e.n_samples == 0 || e.blocks == 0 {
            return Err(config("extraction needs n_samples > 0 and blocks > 0"));
        }
        if !(e.epsilon > 0.0 && e.epsilon < 1.0) {
            return Err(config(format!(
                "extraction.epsilon must be in (0, 1), got {}",
                e.epsilon
            )));
        }
        if self.suite.raw_bits == 0 || self.suite.extracted_bits == 0 {
            return Err(config("suite bit counts must be positive"));
        }
        if let Some(input) = &self.input {
            if input.lit.len() != e.blocks {
                return Err(config(format!(
                    "input.lit lists {} captures but extraction.blocks = {}",
                    input.lit.len(),
                    e.blocks
                )));
            }
        }
        Ok(())
    }

    pub fn adc(&self) -> AdcConfig {
        AdcConfig {
            sample_rate_hz: self.adc.sample_rate_hz,
            bits: self.adc.bits,
            full_scale_v: self
                .adc
                .full_scale_v
                .unwrap_or_else(|| default_full_scale(&self.frontend, self.adc.sample_rate_hz)),
            interleave_spur_dbc: self.adc.interleave_spur_dbc,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the resolved document.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

/// Recursively overlays `over` on `base`; tables merge, everything else is replaced.
pub fn deep_merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Entropy figures derived from the dark/lit pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyEstimate {
    pub decomposition: VarianceDecomposition,
    pub sigma_quantum_lsb: f64,
    pub hmin_centred: f64,
    pub hmin_worst: f64,
}

pub fn estimate_entropy(dark: &SampleBlock, lit: &SampleBlock) -> Result<EntropyEstimate> {
    let decomposition = variance_decompose(dark, lit)?;
    let adc = lit.adc();
    let sigma_q = decomposition.sigma2_quantum.sqrt();
    if sigma_q == 0.0 {
        return Err(Error::InsufficientEntropy(
            "no quantum variance above the dark floor".into(),
        ));
    }
    Ok(EntropyEstimate {
        decomposition,
        sigma_quantum_lsb: sigma_q / adc.lsb(),
        hmin_centred: min_entropy_per_sample(sigma_q, adc, false)?,
        hmin_worst: min_entropy_per_sample(sigma_q, adc, true)?,
    })
}

/// Valid TDM samples per frame and how many frames were simulated.
#[derive(Clone, Debug, PartialEq)]
pub struct TdmAccounting {
    pub mask: SettleMask,
    pub frames: usize,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub config: PipelineConfig,
    pub adc: AdcConfig,
    pub entropy: EntropyEstimate,
    pub plan: ExtractionPlan,
    pub key_rate_per_s: f64,
    pub duty: f64,
    pub tdm: Option<TdmAccounting>,
    pub raw_report: SuiteReport,
    pub extracted_report: SuiteReport,
    pub seed: ToeplitzSeed,
    pub key: Bitstream,
    pub key_manifest: KeyManifest,
    pub dark: SampleBlock,
    pub lit: Vec<SampleBlock>,
    pub clip_warning: bool,
}

impl PipelineOutcome {
    /// Fails when the extracted suite exceeds the tolerated failure count.
    pub fn check_floor(&self) -> Result<()> {
        let s = summarize(&self.extracted_report);
        if s.n_fail > self.config.suite.max_failures {
            return Err(Error::SuiteBelowFloor {
                failed: s.n_fail,
                total: self.extracted_report.instances.len(),
                floor: self.config.suite.max_failures,
            });
        }
        Ok(())
    }

    pub fn entropy_text(&self) -> String {
        let d = &self.entropy.decomposition;
        let mut out = String::new();
        let _ = writeln!(out, "sigma2_total_v2 = {:e}", d.sigma2_total);
        let _ = writeln!(out, "sigma2_electrical_v2 = {:e}", d.sigma2_electrical);
        let _ = writeln!(out, "sigma2_quantum_v2 = {:e}", d.sigma2_quantum);
        let _ = writeln!(out, "clearance_db = {:.4}", d.clearance_db);
        let _ = writeln!(out, "sigma_quantum_lsb = {:.4}", self.entropy.sigma_quantum_lsb);
        let _ = writeln!(out, "hmin_centred_bits = {:.6}", self.entropy.hmin_centred);
        let _ = writeln!(out, "hmin_worst_case_bits = {:.6}", self.entropy.hmin_worst);
        let _ = writeln!(out, "hmin_used_per_sample = {}", self.plan.hmin_per_sample);
        let _ = writeln!(out, "n_samples = {}", self.plan.n_samples);
        let _ = writeln!(out, "input_bits = {}", self.plan.input_bits());
        let _ = writeln!(out, "output_bits_per_block = {}", self.plan.m_out);
        let _ = writeln!(out, "duty = {:.6}", self.duty);
        let _ = writeln!(out, "key_rate_256_per_s = {:e}", self.key_rate_per_s);
        if let Some(t) = &self.tdm {
            let _ = writeln!(out, "tdm_valid_samples_per_frame = {}", t.mask.valid_count());
            let _ = writeln!(out, "tdm_settle_time_s = {:e}", t.mask.t_settle_s);
            let _ = writeln!(out, "tdm_frames = {}", t.frames);
        }
        if self.clip_warning {
            out.push_str("warning = more than 1% of lit samples clipped\n");
        }
        out
    }

    /// The entropy report as `key,value` rows.
    pub fn entropy_csv(&self) -> String {
        text_to_csv(&self.entropy_text())
    }

    /// Writes the report bundle and returns (file name, sha256) pairs.
    pub fn write_bundle(&self, dir: &Path) -> Result<Vec<(String, String)>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
            fs::write(dir.join(name), bytes)?;
            written.push((name.to_string(), hex::encode(Sha256::digest(bytes))));
            Ok(())
        };
        put("config.toml", self.config.to_toml().as_bytes())?;
        put("raw_suite.csv", self.raw_report.to_csv().as_bytes())?;
        put("raw_suite.txt", self.raw_report.summary_text().as_bytes())?;
        put("extracted_suite.csv", self.extracted_report.to_csv().as_bytes())?;
        put("extracted_suite.txt", self.extracted_report.summary_text().as_bytes())?;
        put("entropy.txt", self.entropy_text().as_bytes())?;
        put("entropy.csv", self.entropy_csv().as_bytes())?;
        put("key.bin", self.key.as_bytes())?;
        put("key.manifest", self.key_manifest.to_text().as_bytes())?;
        let mut seed = Vec::new();
        write_seed(&mut seed, &self.seed)?;
        put("seed.tsee", &seed)?;
        if self.config.output.write_captures {
            let mut buf = Vec::new();
            write_capture(&mut buf, &self.dark)?;
            put("dark.vqrn", &buf)?;
            for (i, b) in self.lit.iter().enumerate() {
                let mut buf = Vec::new();
                write_capture(&mut buf, b)?;
                put(&format!("lit_{i}.vqrn"), &buf)?;
            }
        }
        let manifest = run_manifest(&self.config, "pipeline", &written);
        fs::write(dir.join("manifest.txt"), manifest)?;
        written.push(("manifest.txt".into(), String::new()));
        Ok(written)
    }
}

/// Converts `key = value` lines into a two-column CSV.
pub fn text_to_csv(text: &str) -> String {
    let mut out = String::from("key,value\n");
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            let _ = writeln!(out, "{k},{v}");
        }
    }
    out
}

/// Text manifest: tool version, command, config digest, seeds and output digests.
pub fn run_manifest(cfg: &PipelineConfig, command: &str, outputs: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool = qrnglab {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "command = {command}");
    let _ = writeln!(out, "profile = {}", cfg.profile);
    let _ = writeln!(out, "config_sha256 = {}", cfg.digest());
    let _ = writeln!(out, "seed_master = {}", cfg.seeds.master);
    let _ = writeln!(out, "frontend_tag = {}", cfg.frontend.tag());
    for (name, digest) in outputs {
        let _ = writeln!(out, "output {name} sha256 = {digest}");
    }
    out
}

/// Named sub-seeds of a run.
pub fn sub_seed(cfg: &PipelineConfig, label: &str) -> u64 {
    derive_seed(cfg.seeds.master, label)
}

fn codes_from_volts(v: &[f64], adc: &AdcConfig) -> Vec<i16> {
    v.iter().map(|x| (x / adc.lsb()).round() as i16).collect()
}

/// Dark and lit blocks from time-division frames: valid samples of
/// consecutive frames are concatenated until each block is full.
fn tdm_blocks(
    cfg: &PipelineConfig,
    tdm: &TdmSection,
    adc: &AdcConfig,
) -> Result<(SampleBlock, Vec<SampleBlock>, TdmAccounting)> {
    let mask = settle_mask(&tdm.frame, &tdm.modulator, tdm.options.settle_fraction)?;
    let tag = cfg.frontend.tag();
    let n = cfg.extraction.n_samples as usize;
    let needed = n * cfg.extraction.blocks;
    let frames = needed.div_ceil(mask.valid_count());
    let run = |lit: bool, k: usize| -> Result<Vec<i16>> {
        let label = format!("{}-frame-{k}", if lit { "lit" } else { "dark" });
        let f = simulate_tx_frame(
            &cfg.frontend,
            &tdm.modulator,
            &tdm.frame,
            adc,
            &tdm.options,
            lit,
            sub_seed(cfg, &label),
        )?;
        Ok(codes_from_volts(f.valid_tia(), adc))
    };
    use rayon::prelude::*;
    let lit_frames: Vec<Vec<i16>> = (0..frames)
        .into_par_iter()
        .map(|k| run(true, k))
        .collect::<Result<_>>()?;
    let mut lit_samples: Vec<i16> = lit_frames.into_iter().flatten().collect();
    lit_samples.truncate(needed);
    let lit = lit_samples
        .chunks(n)
        .map(|c| SampleBlock::new(c.to_vec(), adc.clone(), tag.clone(), true, cfg.seeds.master))
        .collect::<Result<Vec<_>>>()?;
    let mut dark = run(false, 0)?;
    dark.truncate(cfg.extraction.decompose_samples.max(crate::entropy::MIN_DECOMPOSE_LEN));
    let dark = SampleBlock::new(dark, adc.clone(), tag, false, cfg.seeds.master)?;
    Ok((dark, lit, TdmAccounting { mask, frames }))
}

/// Runs the whole chain. Reports are produced even when the extracted suite
/// misses the floor; call [`PipelineOutcome::check_floor`] for the verdict.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let adc = cfg.adc();
    let ex = &cfg.extraction;
    let tag = cfg.frontend.tag();
    let (dark, lit, tdm, decompose_lit) = if let Some(input) = &cfg.input {
        let read = |p: &Path| -> Result<SampleBlock> {
            let f = fs::File::open(p)?;
            read_capture(std::io::BufReader::new(f), adc.full_scale_v, &tag)
        };
        let dark = read(&input.dark)?;
        let lit = input.lit.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
        (dark, lit, None, None)
    } else if let Some(tdm) = &cfg.tdm {
        let (dark, lit, acct) = tdm_blocks(cfg, tdm, &adc)?;
        (dark, lit, Some(acct), None)
    } else {
        let n = ex.n_samples as usize;
        let lit = (0..ex.blocks)
            .map(|i| {
                simulate_block(
                    &cfg.frontend,
                    &cfg.sidechannel,
                    &adc,
                    n,
                    true,
                    sub_seed(cfg, &format!("lit-{i}")),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let m = ex.decompose_samples;
        let dark = simulate_block(&cfg.frontend, &cfg.sidechannel, &adc, m, false, sub_seed(cfg, "dark"))?;
        let lit_ref = simulate_block(
            &cfg.frontend,
            &cfg.sidechannel,
            &adc,
            m,
            true,
            sub_seed(cfg, "lit-decompose"),
        )?;
        (dark, lit, None, Some(lit_ref))
    };
    let entropy = estimate_entropy(&dark, decompose_lit.as_ref().unwrap_or(&lit[0]))?;

    let (hmin, convention) = match ex.hmin {
        Some(h) => (h, ex.hmin_convention),
        None => (
            if ex.worst_case_offset {
                entropy.hmin_worst
            } else {
                entropy.hmin_centred
            },
            EntropyConvention::PerSample,
        ),
    };
    let mut plan = ExtractionPlan::new(ex.n_samples, adc.bits, hmin, convention, ex.epsilon, ex.mode)?;
    if let Some(out_bits) = ex.output_bits {
        if out_bits > plan.m_out {
            return Err(Error::InsufficientEntropy(format!(
                "requested {out_bits} output bits, the entropy budget allows {}",
                plan.m_out
            )));
        }
        plan.m_out = out_bits;
        plan.validate()?;
    }
    let duty = tdm.as_ref().map_or(1.0, |t| t.mask.valid_fraction());
    let key_rate_per_s = key_rate(adc.sample_rate_hz, plan.hmin_per_sample, 256, duty)?;

    let raw_bits = serialize_block(&lit[0]);
    let raw_report = run_suite(
        &raw_bits.prefix(cfg.suite.raw_bits.min(raw_bits.len())),
        &cfg.suite.params,
    )?;

    let seed = seed_new(
        plan.input_bits() as usize,
        plan.m_out as usize,
        sub_seed(cfg, "toeplitz"),
    )?;
    let key = extract_stream(&lit, &plan, &seed)?;
    let extracted_report = run_suite(&key.prefix(cfg.suite.extracted_bits.min(key.len())), &cfg.suite.params)?;
    let inputs: Vec<Bitstream> = lit.iter().map(serialize_block).collect();
    let key_manifest = KeyManifest::new(&plan, &seed, &inputs, &key);
    let clip_warning = lit.iter().any(SampleBlock::clip_warning);
    Ok(PipelineOutcome {
        config: cfg.clone(),
        adc,
        entropy,
        plan,
        key_rate_per_s,
        duty,
        tdm,
        raw_report,
        extracted_report,
        seed,
        key,
        key_manifest,
        dark,
        lit,
        clip_warning,
    })
}
