//! Guide chapters. Each module pulls in one page of the book so its code
//! blocks run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/frames.md")]
pub mod frames {}

#[doc = include_str!("../../../book/src/flow.md")]
pub mod flow {}

#[doc = include_str!("../../../book/src/blobs.md")]
pub mod blobs {}

#[doc = include_str!("../../../book/src/fusion.md")]
pub mod fusion {}

#[doc = include_str!("../../../book/src/registration.md")]
pub mod registration {}

#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
