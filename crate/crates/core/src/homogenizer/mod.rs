//! Genetic-programming search for parameter-dependent scalings.

mod candidate;
mod evolve;
mod expr;
mod fitness;

pub use candidate::{CandidateTransform, ScaleValues};
pub use evolve::{evolve, evolve_with, write_history_csv, DiscoveredTransform, EvolutionResult, GPConfig, GenerationStats};
pub use expr::{simplify, Bindings, Expr, PrimitiveSet, Symbol, PROTECTED_DIV_EPS};
pub use fitness::{
    evaluate_fitness, generate_response_data, FitnessContext, FitnessReport, ResponseSetup, DEFAULT_PARSIMONY,
    WORST_FITNESS,
};
