use thiserror::Error;

use crate::game::Strategy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("norm label {0} is outside 0..=255")]
    LabelOutOfRange(i64),
    #[error("cannot parse {0:?}: expected 8 entries from {{0,1,*}} such as [1,0,*,*;*,1,*,1]")]
    Syntax(String),
    #[error("{0:?} contains wildcards but a single norm is required")]
    WildcardInNorm(String),
    #[error("unknown strategy {0:?}: expected UU, UF, FU or FF")]
    Strategy(String),
    #[error("unknown scenario {0:?}: expected benchmark, dictator-opt-out or recipient-opt-out")]
    Scenario(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid composition: Z = {z}, m = {m}")]
    InvalidComposition { z: usize, m: usize },
    #[error("the {0} class is empty at m = {1}, its payoff is undefined")]
    EmptyClass(Strategy, usize),
    #[error("limiting distribution did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("at m = {m}: {source}")]
    AtComposition {
        m: usize,
        #[source]
        source: Box<ModelError>,
    },
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
