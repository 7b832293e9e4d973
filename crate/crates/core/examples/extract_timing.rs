//! Times one paper-size extraction: 64 Mibit in, 1 Mibit out.

use qrnglab::bits::Bitstream;
use qrnglab::extractor::{seed_new, toeplitz_extract};
use qrnglab::rng::stream;
use rand::RngCore;
use std::time::Instant;

fn main() {
    let (n, m) = (1usize << 26, 1usize << 20);
    let seed = seed_new(n, m, 1).unwrap();
    let mut rng = stream(2, 0);
    let words: Vec<u64> = (0..n / 64).map(|_| rng.next_u64()).collect();
    let input = Bitstream::from_words(&words, n);
    let t = Instant::now();
    let out = toeplitz_extract(&seed, &input).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!(
        "{} -> {} bits in {dt:.2} s ({:.3e} input bits/s)",
        n,
        out.len(),
        n as f64 / dt
    );
}
