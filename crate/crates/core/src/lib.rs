pub mod attractor;
pub mod bowen;
pub mod dynamics;
pub mod empirical;
pub mod error;
pub mod space;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/orbits.md")]
    mod orbits {}
    #[doc = include_str!("../../../book/src/basins.md")]
    mod basins {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/heteroclinic.md")]
    mod heteroclinic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
