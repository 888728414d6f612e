//! The book's listings, compiled and run by `cargo test --doc`. mdbook
//! cannot link workspace crates into its own test runs, so each chapter is
//! pulled in as the docs of an empty module here.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/molecules.md")]
pub mod molecules {}

#[doc = include_str!("../../../book/src/properties.md")]
pub mod properties {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/campaigns.md")]
pub mod campaigns {}

#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
