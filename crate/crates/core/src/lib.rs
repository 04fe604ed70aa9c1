//! Finite-dimensional C*-correspondences over multi-matrix algebras.

pub mod bimod;
pub mod document;
pub mod error;
pub mod fock;
pub mod freeness;
pub mod linalg;
pub mod hmod;
pub mod ideal_graph;
pub mod index_theory;
pub mod mmalg;
pub mod random;
pub mod report;
pub mod wire;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub struct Overview;
    #[doc = include_str!("../../../book/src/algebras.md")]
    pub struct Algebras;
    #[doc = include_str!("../../../book/src/modules.md")]
    pub struct Modules;
    #[doc = include_str!("../../../book/src/bimodules.md")]
    pub struct Bimodules;
    #[doc = include_str!("../../../book/src/ideals.md")]
    pub struct Ideals;
    #[doc = include_str!("../../../book/src/witnesses.md")]
    pub struct Witnesses;
    #[doc = include_str!("../../../book/src/index_theory.md")]
    pub struct IndexTheory;
    #[doc = include_str!("../../../book/src/fock.md")]
    pub struct Fock;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
