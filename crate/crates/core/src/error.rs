use thiserror::Error;

use crate::domain::{MdcId, ModuleId, ServerId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid application graph: {0}")]
    InvalidApp(String),

    #[error("application graph contains a cycle through module {0}")]
    Cycle(ModuleId),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("no route between MDC {0} and MDC {1}")]
    NoRoute(MdcId, MdcId),

    #[error("placement is missing module {0}")]
    IncompletePlacement(ModuleId),

    #[error("placement refers to unknown server {0}")]
    UnknownServer(ServerId),

    #[error("no operational server available")]
    NoOperationalServer,

    #[error(
        "energy accounting error on MDC {mdc}: consumed {consumed} J exceeds available {available} J"
    )]
    Overdraw {
        mdc: MdcId,
        consumed: f64,
        available: f64,
    },

    #[error("accounting error: {0}")]
    Accounting(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
