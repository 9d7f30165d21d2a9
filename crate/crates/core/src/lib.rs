//! Objective-collapse toy models built on coherent states of weighted modes.
//!
//! * [`coherent`] — overlaps, superpositions, the landscape `V` and free evolution.
//! * [`selection`] — event clock, landscape ascent and collapse sequences.
//! * [`born`] — blocking geometry and Monte Carlo acceptance frequencies.
//! * [`ring`] — absorbing ring: split-step survival and a classical comparator.
//! * [`current`] — classical currents projected onto photon modes.
//! * [`spread`] — order-of-magnitude spreading estimate.
//! * [`harness`] — config-driven runner used by the `collapse-lab` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod born;
pub mod coherent;
pub mod current;
pub mod harness;
pub mod plot;
pub mod ring;
pub mod selection;
pub mod spread;

/// Runs the snippets of the mdbook under `book/` as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/coherent.md")]
    mod coherent {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/ring.md")]
    mod ring {}
    #[doc = include_str!("../../../book/src/born.md")]
    mod born {}
    #[doc = include_str!("../../../book/src/current.md")]
    mod current {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
