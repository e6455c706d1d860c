//! Radial simulations of the L¹-critical Patlak-Keller-Segel system with
//! porous-medium diffusion, `u_t = Δu^m − ∇·(u∇c)` with `m = 2 − 2/d`.
//!
//! The state is the cumulative mass `M(t,r)`; see the guide in `book/`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod barrier;
pub mod chemo;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod profile;
pub mod radial;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/profile.md")]
    mod profile {}
    #[doc = include_str!("../../../book/src/scheme.md")]
    mod scheme {}
    #[doc = include_str!("../../../book/src/barrier.md")]
    mod barrier {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/bracket.md")]
    mod bracket {}
}
