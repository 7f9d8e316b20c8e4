//! The `volctl` guide as doc-tests. Each module holds one chapter of
//! `book/`, so `cargo test -p volctl-book` compiles and runs every snippet.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/conjugation.md")]
pub mod conjugation {}

#[doc = include_str!("../../../book/src/transformation.md")]
pub mod transformation {}

#[doc = include_str!("../../../book/src/resolvent.md")]
pub mod resolvent {}

#[doc = include_str!("../../../book/src/stepping.md")]
pub mod stepping {}

#[doc = include_str!("../../../book/src/value-feedback.md")]
pub mod value_feedback {}

#[doc = include_str!("../../../book/src/degenerate.md")]
pub mod degenerate {}

#[doc = include_str!("../../../book/src/two-d.md")]
pub mod two_d {}

#[doc = include_str!("../../../book/src/monte-carlo.md")]
pub mod monte_carlo {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
