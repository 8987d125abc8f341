pub mod calendar;
pub mod error;
pub mod eval;
pub mod external;
pub mod ingest;
pub mod models;
pub mod ml;
pub mod synth;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/calendar.md")]
    pub mod calendar {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    pub mod ingest {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/trees.md")]
    pub mod trees {}
    #[doc = include_str!("../../../book/src/usda.md")]
    pub mod usda {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/comparison.md")]
    pub mod comparison {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    pub mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
