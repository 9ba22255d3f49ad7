//! The guide chapters from `book/src`, included as documentation so that
//! `cargo test --doc` compiles and runs every code snippet in the book.

#[doc = include_str!("../../../book/src/penalties.md")]
pub mod penalties {}

#[doc = include_str!("../../../book/src/envelopes.md")]
pub mod envelopes {}

#[doc = include_str!("../../../book/src/semiconvex.md")]
pub mod semiconvex {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
