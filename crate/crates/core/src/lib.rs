#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod alm;
pub mod driver;
pub mod embedding;
pub mod hydrogen;
pub mod model;
pub mod qhd;
pub mod refine;
pub mod sb;

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/samplers.md")]
    mod samplers {}
    #[doc = include_str!("../../../book/src/hydrogen.md")]
    mod hydrogen {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
