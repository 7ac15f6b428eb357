//! The code listings of the book in `book/src` run as doc-tests of this
//! crate, one module per chapter, so `cargo test --workspace` keeps the book
//! honest without mdbook's own test runner.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}
#[doc = include_str!("../../../book/src/density.md")]
pub mod density {}
#[doc = include_str!("../../../book/src/gamma.md")]
pub mod gamma {}
#[doc = include_str!("../../../book/src/operator.md")]
pub mod operator {}
#[doc = include_str!("../../../book/src/fixed_point.md")]
pub mod fixed_point {}
#[doc = include_str!("../../../book/src/limit.md")]
pub mod limit {}
#[doc = include_str!("../../../book/src/march.md")]
pub mod march {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
