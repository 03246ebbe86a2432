//! Book chapters compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/frames.md")]
pub mod frames {}

#[doc = include_str!("../../../book/src/audio.md")]
pub mod audio {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/neural.md")]
pub mod neural {}

#[doc = include_str!("../../../book/src/osd.md")]
pub mod osd {}

#[doc = include_str!("../../../book/src/gender.md")]
pub mod gender {}

#[doc = include_str!("../../../book/src/pitch.md")]
pub mod pitch {}

#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
