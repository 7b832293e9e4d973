//! Known-answer fixture parsing shared by the statistics tests.

use qrnglab::bits::Bitstream;
use qrnglab::statests::*;

pub const PI_100: &str = "1100100100001111110110101010001000100001011010001100001000110100\
                      110001001100011001100010100010111000";
pub const LONGEST_128: &str = "11001100000101010110110001001100111000000000001001001101010100010001\
                           001111010110100000001101011111001100111001101101100010110010";

pub fn parse(s: &str) -> Vec<u8> {
    s.bytes().map(|c| c - b'0').collect()
}

pub fn e_bits() -> Vec<u8> {
    let bytes = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/e_1e6.bin")).unwrap();
    Bitstream::from_bytes(bytes, 1_000_000).unwrap().to_unpacked()
}

fn param(params: &str, key: &str) -> usize {
    params
        .split(';')
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("missing {key} in {params}"))
        .parse()
        .unwrap()
}

fn template(params: &str) -> Vec<u8> {
    let t = params.split(';').find_map(|kv| kv.strip_prefix("template=")).unwrap();
    parse(t)
}

pub fn compute(bits: &[u8], test: &str, params: &str, instance: &str) -> f64 {
    match test {
        "frequency" => frequency(bits).unwrap(),
        "block_frequency" => block_frequency(bits, param(params, "m")).unwrap(),
        "runs" => runs(bits).unwrap(),
        "cumulative_sums" => cumulative_sums(bits, instance == "reverse").unwrap(),
        "dft" => dft(bits).unwrap(),
        "approximate_entropy" => approximate_entropy(bits, param(params, "m")).unwrap(),
        "longest_run" => longest_run(bits).unwrap(),
        "serial" => {
            let (p1, p2) = serial(bits, param(params, "m")).unwrap();
            if instance == "p1" {
                p1
            } else {
                p2
            }
        }
        "non_overlapping_template" => non_overlapping(bits, &template(params), param(params, "blocks")).unwrap(),
        "overlapping_template" => overlapping(bits, param(params, "m"), 1032).unwrap(),
        "universal" => universal(bits, param(params, "l"), param(params, "q")).unwrap(),
        "rank" => rank(bits).unwrap(),
        "linear_complexity" => linear_complexity(bits, param(params, "m")).unwrap(),
        "random_excursions" | "random_excursions_variant" => {
            let x: i64 = instance
                .strip_prefix("x=")
                .unwrap()
                .trim_start_matches('+')
                .parse()
                .unwrap();
            let walk = Walk::new(bits);
            if test == "random_excursions" {
                walk.excursion(x)
            } else {
                walk.variant(x)
            }
        }
        other => panic!("unknown test {other}"),
    }
}

pub const FIXTURE: &str = include_str!("../fixtures/sp800_22_kat.csv");

/// Recomputes every fixture row; returns (row label, got, want).
pub fn fixture_rows() -> Vec<(String, f64, f64)> {
    let e = e_bits();
    FIXTURE
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let (input, test, params, instance) = (f[0], f[1], f[2], f[3]);
            let want: f64 = f[4].parse().unwrap();
            let bits = match input {
                "ten" => parse("1011010101"),
                "pi100" => parse(PI_100),
                "long128" => parse(LONGEST_128),
                "serial10" => parse("0011011101"),
                "apen10" => parse("0100110101"),
                "nonov20" => parse("10100100101110010110"),
                "e" => e.clone(),
                other => panic!("unknown input {other}"),
            };
            (
                format!("{input} {test} {params} {instance}"),
                compute(&bits, test, params, instance),
                want,
            )
        })
        .collect()
}
