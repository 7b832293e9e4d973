//! Fast Toeplitz paths against the naive GF(2) product.

use qrnglab::bits::Bitstream;
use qrnglab::extractor::{seed_new, toeplitz_extract, toeplitz_extract_naive, toeplitz_extract_with, Strategy};
use qrnglab::rng::stream;
use rand::RngCore;

#[test]
fn exhaustive_small_shapes() {
    for n in 1..=10usize {
        for m in 1..=6usize.min(n) {
            for s in 0..50u64 {
                let seed = seed_new(n, m, 1000 * s + 10 * n as u64 + m as u64).unwrap();
                for x in 0..1u64 << n {
                    let input = Bitstream::from_words(&[x], n);
                    let reference = toeplitz_extract_naive(&seed, &input).unwrap();
                    assert_eq!(toeplitz_extract(&seed, &input).unwrap(), reference);
                    assert_eq!(
                        toeplitz_extract_with(&seed, &input, Strategy::Packed).unwrap(),
                        reference
                    );
                }
                // the FFT path is costlier per call; sample its inputs
                for x in (0..1u64 << n).step_by(7) {
                    let input = Bitstream::from_words(&[x], n);
                    let reference = toeplitz_extract_naive(&seed, &input).unwrap();
                    assert_eq!(toeplitz_extract_with(&seed, &input, Strategy::Fft).unwrap(), reference);
                }
            }
        }
    }
}

#[test]
fn randomized_at_2_pow_16() {
    let n = 1 << 16;
    for (k, m) in [(1usize, 1usize << 12), (2, 1000), (3, 1 << 15)] {
        let seed = seed_new(n, m, k as u64).unwrap();
        let mut rng = stream(k as u64, 99);
        let words: Vec<u64> = (0..n / 64).map(|_| rng.next_u64()).collect();
        let input = Bitstream::from_words(&words, n);
        let before = input.clone();
        let reference = toeplitz_extract_naive(&seed, &input).unwrap();
        assert_eq!(
            toeplitz_extract_with(&seed, &input, Strategy::Packed).unwrap(),
            reference
        );
        assert_eq!(toeplitz_extract_with(&seed, &input, Strategy::Fft).unwrap(), reference);
        assert_eq!(input, before);
    }
}
