// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod dsp;
pub mod entropy;
pub mod error;
pub mod extractor;
pub mod frontend;
pub mod modulator;
pub mod pipeline;
pub mod qpsk;
pub mod rng;
pub mod statests;
