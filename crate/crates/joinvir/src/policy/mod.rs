//! Containment policies: non-infection by bounded trace comparison, static
//! isolation classification and token-guarded contexts.

mod classify;
mod noninfect;
mod token;

use crate::context::ContextError;
use crate::engine::EngineError;
use crate::syntax::{DesugarError, Name};

pub use classify::{classify_context, Case, Classification, IsolationReport};
pub use noninfect::{
    enforcement_sound, non_infection_test, probe_battery, read_tests, Distinguishing, NonInfection,
    NonInfectionVerdict, QUIESCENCE_BUDGET,
};
pub use token::{tokenize_context, TokenMode, TokenPolicy, DEFAULT_TOKEN};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("context reacts with nothing plugged in")]
    UnstableContext,
    #[error("test {test} uses {channel}, which is {case}")]
    InfectingTest { test: String, channel: Name, case: Case },
    #[error("{0} is neither a service nor a resource")]
    UnknownChannel(Name),
    #[error("token {0} is published")]
    TokenPublished(Name),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Desugar(#[from] DesugarError),
}
