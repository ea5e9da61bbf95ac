//! Join-calculus workbench for modeling self-replicating malware inside
//! system contexts.

pub mod context;
pub mod detector;
pub mod engine;
pub mod malware;
pub mod petri;
pub mod policy;
pub mod scenario;
pub mod syntax;

/// The guide, one module per chapter.
pub mod guide {
    #[doc = include_str!("../../../book/src/ch01-calculus.md")]
    pub mod calculus {}
    #[doc = include_str!("../../../book/src/ch02-contexts.md")]
    pub mod contexts {}
    #[doc = include_str!("../../../book/src/ch03-detection.md")]
    pub mod detection {}
    #[doc = include_str!("../../../book/src/ch04-petri.md")]
    pub mod petri {}
    #[doc = include_str!("../../../book/src/ch05-policy.md")]
    pub mod policy {}
    #[doc = include_str!("../../../book/src/ch06-scenarios.md")]
    pub mod scenarios {}
}
