//! Each chapter of `book/src` is the documentation of one empty module, so
//! `cargo test --doc -p asvlab-book` runs every listing in the guide.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/sysid.md")]
pub mod sysid {}
#[doc = include_str!("../../../book/src/environment.md")]
pub mod environment {}
#[doc = include_str!("../../../book/src/batch.md")]
pub mod batch {}
#[doc = include_str!("../../../book/src/policy.md")]
pub mod policy {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
