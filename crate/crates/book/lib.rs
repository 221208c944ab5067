//! Compiles every Rust snippet in `book/src` and the README as a doctest.

#[doc = include_str!("../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../book/src/embeddings.md")]
mod embeddings {}

#[doc = include_str!("../../book/src/surveys-and-noise.md")]
mod surveys_and_noise {}

#[doc = include_str!("../../book/src/classifier.md")]
mod classifier {}

#[doc = include_str!("../../book/src/federation.md")]
mod federation {}

#[doc = include_str!("../../book/src/evaluation.md")]
mod evaluation {}

#[doc = include_str!("../../book/src/cli.md")]
mod cli {}

#[doc = include_str!("../../README.md")]
mod readme {}
