pub mod cli;
pub mod dynamics;
pub mod meta;
pub mod qualifiers;
pub mod subtyping;
pub mod surface;
pub mod typecheck;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/qualifiers.md")]
    pub mod qualifiers {}
    #[doc = include_str!("../../../book/src/arenas.md")]
    pub mod arenas {}
    #[doc = include_str!("../../../book/src/checking.md")]
    pub mod checking {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
