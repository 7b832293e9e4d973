//! SP800-22 rev1a statistical battery, 188 instances at the 1 Mibit defaults.

mod cusum;
mod dft;
mod excursions;
mod frequency;
mod linear_complexity;
mod rank;
mod runs;
mod serial;
mod templates;
mod universal;

pub use cusum::cumulative_sums;
pub use dft::dft;
pub use excursions::{Walk, EXCURSION_STATES, VARIANT_STATES};
pub use frequency::{block_frequency, frequency};
pub use linear_complexity::{berlekamp_massey, linear_complexity};
pub use rank::rank;
pub use runs::{longest_run, runs};
pub use serial::{approximate_entropy, serial};
pub use templates::{aperiodic_templates, non_overlapping, overlapping};
pub use universal::universal;

use crate::bits::Bitstream;
use crate::error::{domain, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Instances per full run.
pub const SUITE_INSTANCES: usize = 188;
/// Minimum cycle count for the random-excursion tests.
pub const MIN_EXCURSION_CYCLES: usize = 500;

pub(crate) fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper regularized incomplete gamma Q(a, x).
pub(crate) fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(a, x).clamp(0.0, 1.0)
}

pub(crate) fn check_nonempty(bits: &[u8]) -> Result<()> {
    if bits.is_empty() {
        Err(domain("empty bit sequence"))
    } else {
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn parse_bits(s: &str) -> Vec<u8> {
    s.bytes().map(|c| c - b'0').collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteParams {
    pub block_frequency_m: usize,
    pub non_overlapping_m: usize,
    pub non_overlapping_blocks: usize,
    pub overlapping_m: usize,
    pub overlapping_block: usize,
    pub universal_l: usize,
    pub universal_q: usize,
    pub approximate_entropy_m: usize,
    pub serial_m: usize,
    pub linear_complexity_m: usize,
    pub alpha: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            block_frequency_m: 128,
            non_overlapping_m: 9,
            non_overlapping_blocks: 8,
            overlapping_m: 9,
            overlapping_block: 1032,
            universal_l: 7,
            universal_q: 1280,
            approximate_entropy_m: 10,
            serial_m: 16,
            linear_complexity_m: 500,
            alpha: 0.01,
        }
    }
}

impl SuiteParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.non_overlapping_m != 9 || self.overlapping_m != 9 {
            return Err(domain("template length 9 is required for the 148-template battery"));
        }
        if !(1..=16).contains(&self.universal_l) || !(2..=24).contains(&self.serial_m) {
            return Err(domain("universal L must be 1..=16 and serial m 2..=24"));
        }
        if self.approximate_entropy_m == 0 || self.approximate_entropy_m > 23 {
            return Err(domain("approximate-entropy m must be 1..=23"));
        }
        for (name, v) in [
            ("block_frequency_m", self.block_frequency_m),
            ("non_overlapping_blocks", self.non_overlapping_blocks),
            ("overlapping_block", self.overlapping_block),
            ("linear_complexity_m", self.linear_complexity_m),
        ] {
            if v == 0 {
                return Err(domain(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One row of the scorecard. `p_value` is `None` when the instance is not applicable.
#[derive(Clone, Debug, PartialEq)]
pub struct TestInstance {
    pub test: &'static str,
    pub label: String,
    pub p_value: Option<f64>,
    pub na_reason: Option<String>,
}

impl TestInstance {
    fn value(test: &'static str, label: impl Into<String>, p: f64) -> Self {
        Self {
            test,
            label: label.into(),
            p_value: Some(p.clamp(0.0, 1.0)),
            na_reason: None,
        }
    }

    fn na(test: &'static str, label: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            test,
            label: label.into(),
            p_value: None,
            na_reason: Some(reason.into()),
        }
    }

    /// `test` or `test[label]`.
    pub fn name(&self) -> String {
        if self.label.is_empty() {
            self.test.to_string()
        } else {
            format!("{}[{}]", self.test, self.label)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "NA",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub n_bits: usize,
    pub alpha: f64,
    pub instances: Vec<TestInstance>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteSummary {
    pub n_pass: usize,
    pub n_fail: usize,
    pub n_na: usize,
    pub failed: Vec<String>,
}

impl SuiteReport {
    pub fn verdict(&self, inst: &TestInstance) -> Verdict {
        match inst.p_value {
            None => Verdict::NotApplicable,
            Some(p) if p >= self.alpha => Verdict::Pass,
            Some(_) => Verdict::Fail,
        }
    }

    pub fn failed_tests(&self) -> impl Iterator<Item = &TestInstance> {
        self.instances.iter().filter(|i| self.verdict(i) == Verdict::Fail)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,instance,p,verdict\n");
        for inst in &self.instances {
            let p = inst.p_value.map_or_else(|| "NA".to_string(), |p| format!("{p:.6}"));
            let _ = writeln!(out, "{},{},{p},{}", inst.test, inst.label, self.verdict(inst).as_str());
        }
        out
    }

    /// Human-readable block with counts and the failing instances.
    pub fn summary_text(&self) -> String {
        let s = summarize(self);
        let mut out = format!(
            "bits: {}\nalpha: {}\ninstances: {}\npassed: {}\nfailed: {}\nnot applicable: {}\n",
            self.n_bits,
            self.alpha,
            self.instances.len(),
            s.n_pass,
            s.n_fail,
            s.n_na
        );
        if !s.failed.is_empty() {
            out.push_str("failed instances:\n");
            for name in &s.failed {
                let _ = writeln!(out, "  {name}");
            }
        }
        for inst in self.instances.iter().filter(|i| i.p_value.is_none()) {
            let _ = writeln!(out, "NA {}: {}", inst.name(), inst.na_reason.as_deref().unwrap_or(""));
        }
        out
    }
}

pub fn summarize(report: &SuiteReport) -> SuiteSummary {
    let mut s = SuiteSummary {
        n_pass: 0,
        n_fail: 0,
        n_na: 0,
        failed: Vec::new(),
    };
    for inst in &report.instances {
        match report.verdict(inst) {
            Verdict::Pass => s.n_pass += 1,
            Verdict::Fail => {
                s.n_fail += 1;
                s.failed.push(inst.name());
            }
            Verdict::NotApplicable => s.n_na += 1,
        }
    }
    s.failed.sort();
    s
}

#[derive(Clone, Copy)]
enum Job {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    Runs,
    LongestRun,
    Rank,
    Dft,
    NonOverlapping,
    Overlapping,
    Universal,
    ApproximateEntropy,
    Excursions,
    Serial,
    LinearComplexity,
}

const JOBS: [Job; 14] = [
    Job::Frequency,
    Job::BlockFrequency,
    Job::CumulativeSums,
    Job::Runs,
    Job::LongestRun,
    Job::Rank,
    Job::Dft,
    Job::NonOverlapping,
    Job::Overlapping,
    Job::Universal,
    Job::ApproximateEntropy,
    Job::Excursions,
    Job::Serial,
    Job::LinearComplexity,
];

fn single(test: &'static str, min_len: usize, n: usize, f: impl FnOnce() -> Result<f64>) -> Vec<TestInstance> {
    if n < min_len {
        return vec![TestInstance::na(
            test,
            "",
            format!("needs at least {min_len} bits, got {n}"),
        )];
    }
    vec![match f() {
        Ok(p) => TestInstance::value(test, "", p),
        Err(e) => TestInstance::na(test, "", e.to_string()),
    }]
}

fn run_job(job: Job, bits: &[u8], p: &SuiteParams) -> Vec<TestInstance> {
    let n = bits.len();
    let log2n = (n as f64).log2().floor() as usize;
    match job {
        Job::Frequency => single("Frequency", 100, n, || frequency(bits)),
        Job::BlockFrequency => single("BlockFrequency", 100.max(p.block_frequency_m), n, || {
            block_frequency(bits, p.block_frequency_m)
        }),
        Job::CumulativeSums => {
            if n < 100 {
                return ["forward", "reverse"]
                    .map(|l| TestInstance::na("CumulativeSums", l, format!("needs at least 100 bits, got {n}")))
                    .to_vec();
            }
            vec![
                TestInstance::value(
                    "CumulativeSums",
                    "forward",
                    cumulative_sums(bits, false).expect("non-empty"),
                ),
                TestInstance::value(
                    "CumulativeSums",
                    "reverse",
                    cumulative_sums(bits, true).expect("non-empty"),
                ),
            ]
        }
        Job::Runs => single("Runs", 100, n, || runs(bits)),
        Job::LongestRun => single("LongestRun", 128, n, || longest_run(bits)),
        Job::Rank => single("Rank", 38_912, n, || rank(bits)),
        Job::Dft => single("DFT", 1000, n, || dft(bits)),
        Job::NonOverlapping => {
            let templates = aperiodic_templates(p.non_overlapping_m);
            let min_len = p.non_overlapping_blocks * (1 << p.non_overlapping_m);
            if n < min_len {
                return templates
                    .iter()
                    .map(|t| {
                        TestInstance::na(
                            "NonOverlappingTemplate",
                            template_label(t),
                            format!("needs at least {min_len} bits, got {n}"),
                        )
                    })
                    .collect();
            }
            let w = templates::suite_windows(bits, p.non_overlapping_m);
            templates
                .par_iter()
                .map(|t| {
                    let label = template_label(t);
                    match templates::non_overlapping_windows(&w, n, t, p.non_overlapping_blocks) {
                        Ok(pv) => TestInstance::value("NonOverlappingTemplate", label, pv),
                        Err(e) => TestInstance::na("NonOverlappingTemplate", label, e.to_string()),
                    }
                })
                .collect()
        }
        Job::Overlapping => single("OverlappingTemplate", 1_000_000, n, || {
            overlapping(bits, p.overlapping_m, p.overlapping_block)
        }),
        Job::Universal => {
            let l = p.universal_l;
            let q = p.universal_q;
            let k = (n / l).saturating_sub(q);
            if k < 1000 << l {
                return vec![TestInstance::na(
                    "Universal",
                    "",
                    format!("needs {} test words of {l} bits, got {k}", 1000 << l),
                )];
            }
            single("Universal", 0, n, || universal(bits, l, q))
        }
        Job::ApproximateEntropy => {
            let m = p.approximate_entropy_m;
            if m + 5 >= log2n {
                return vec![TestInstance::na(
                    "ApproximateEntropy",
                    "",
                    format!("m = {m} requires m < floor(log2 n) - 5 = {}", log2n as isize - 5),
                )];
            }
            single("ApproximateEntropy", 0, n, || approximate_entropy(bits, m))
        }
        Job::Excursions => excursion_instances(bits),
        Job::Serial => {
            let m = p.serial_m;
            if m + 2 >= log2n {
                let reason = format!("m = {m} requires m < floor(log2 n) - 2 = {}", log2n as isize - 2);
                return vec![
                    TestInstance::na("Serial", "p1", &reason),
                    TestInstance::na("Serial", "p2", reason),
                ];
            }
            let (p1, p2) = serial(bits, m).expect("validated");
            vec![
                TestInstance::value("Serial", "p1", p1),
                TestInstance::value("Serial", "p2", p2),
            ]
        }
        Job::LinearComplexity => single("LinearComplexity", 1_000_000, n, || {
            linear_complexity(bits, p.linear_complexity_m)
        }),
    }
}

fn template_label(t: &[u8]) -> String {
    t.iter().map(|&b| char::from(b'0' + b)).collect()
}

fn state_label(x: i64) -> String {
    format!("x={x:+}")
}

fn excursion_instances(bits: &[u8]) -> Vec<TestInstance> {
    let n = bits.len();
    let states = EXCURSION_STATES.iter().map(|&x| ("RandomExcursions", x));
    let variant = VARIANT_STATES.iter().map(|&x| ("RandomExcursionsVariant", x));
    let reason = if n < 1_000_000 {
        Some(format!("needs at least 1000000 bits, got {n}"))
    } else {
        None
    };
    let walk = reason.is_none().then(|| Walk::new(bits));
    let reason = reason.or_else(|| {
        let j = walk.as_ref().expect("walk built").cycles();
        (j < MIN_EXCURSION_CYCLES).then(|| format!("J = {j} cycles < {MIN_EXCURSION_CYCLES}"))
    });
    states
        .chain(variant)
        .map(|(test, x)| match (&reason, &walk) {
            (Some(r), _) => TestInstance::na(test, state_label(x), r.clone()),
            (None, Some(w)) => {
                let p = if test == "RandomExcursions" {
                    w.excursion(x)
                } else {
                    w.variant(x)
                };
                TestInstance::value(test, state_label(x), p)
            }
            (None, None) => unreachable!("walk exists when applicable"),
        })
        .collect()
}

/// Runs the full battery. Sub-tests run in parallel; the report order is fixed.
pub fn run_suite(bits: &Bitstream, params: &SuiteParams) -> Result<SuiteReport> {
    params.validate()?;
    if bits.is_empty() {
        return Err(domain("empty bit sequence"));
    }
    let unpacked = bits.to_unpacked();
    let groups: Vec<Vec<TestInstance>> = JOBS.par_iter().map(|&job| run_job(job, &unpacked, params)).collect();
    let instances: Vec<TestInstance> = groups.into_iter().flatten().collect();
    debug_assert_eq!(instances.len(), SUITE_INSTANCES);
    Ok(SuiteReport {
        n_bits: bits.len(),
        alpha: params.alpha,
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, streams};
    use rand::RngCore;

    fn random_bits(n: usize, seed: u64) -> Bitstream {
        let mut rng = stream(seed, streams::REFERENCE);
        let mut bytes = vec![0u8; n / 8];
        rng.fill_bytes(&mut bytes);
        Bitstream::from_byte_vec(bytes)
    }

    #[test]
    fn report_has_188_instances_in_order() {
        let bits = random_bits(1 << 20, 5);
        let report = run_suite(&bits, &SuiteParams::default()).unwrap();
        assert_eq!(report.instances.len(), SUITE_INSTANCES);
        assert_eq!(report.instances[0].test, "Frequency");
        assert_eq!(report.instances[187].test, "LinearComplexity");
        let s = summarize(&report);
        assert_eq!(s.n_pass + s.n_fail + s.n_na, 188);
        assert!(s.n_fail <= 8, "{:?}", s.failed);
        for inst in &report.instances {
            if let Some(p) = inst.p_value {
                assert!((0.0..=1.0).contains(&p));
            } else {
                assert!(inst.na_reason.is_some());
            }
        }
        assert_eq!(report, run_suite(&bits, &SuiteParams::default()).unwrap());
    }

    #[test]
    fn short_input_reports_na() {
        let bits = random_bits(2048, 1);
        let report = run_suite(&bits, &SuiteParams::default()).unwrap();
        assert_eq!(report.instances.len(), SUITE_INSTANCES);
        let s = summarize(&report);
        assert!(s.n_na >= 148 + 26);
        assert!(run_suite(&Bitstream::new(), &SuiteParams::default()).is_err());
    }

    #[test]
    fn summarize_counts_and_sorts() {
        let mk = |test, label: &str, p| TestInstance::value(test, label, p);
        let mut report = SuiteReport {
            n_bits: 0,
            alpha: 0.01,
            instances: (0..188).map(|_| mk("Frequency", "", 0.5)).collect(),
        };
        assert_eq!(
            summarize(&report),
            SuiteSummary {
                n_pass: 188,
                n_fail: 0,
                n_na: 0,
                failed: vec![]
            }
        );
        report.instances[10] = mk("Serial", "p2", 0.001);
        report.instances[3] = mk("DFT", "", 0.0);
        report.instances[4] = TestInstance::na("RandomExcursions", "x=+1", "J = 12 cycles < 500");
        let s = summarize(&report);
        assert_eq!((s.n_pass, s.n_fail, s.n_na), (185, 2, 1));
        assert_eq!(s.failed, vec!["DFT".to_string(), "Serial[p2]".to_string()]);
        let csv = report.to_csv();
        assert!(csv.contains("Serial,p2,0.001000,FAIL"));
        assert!(csv.contains("RandomExcursions,x=+1,NA,NA"));
    }

    #[test]
    fn all_zeros_fails_frequency() {
        let bits = Bitstream::zeros(1 << 20);
        let report = run_suite(&bits, &SuiteParams::default()).unwrap();
        let s = summarize(&report);
        assert!(s.failed.contains(&"Frequency".to_string()));
    }
}
