//! The book chapters under `book/src`, compiled so their snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/frontend.md")]
pub mod frontend {}
#[doc = include_str!("../../../book/src/entropy.md")]
pub mod entropy {}
#[doc = include_str!("../../../book/src/extraction.md")]
pub mod extraction {}
#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}
#[doc = include_str!("../../../book/src/tdm.md")]
pub mod tdm {}
#[doc = include_str!("../../../book/src/qpsk.md")]
pub mod qpsk {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
