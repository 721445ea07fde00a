//! Data-driven event-triggered adaptive state feedback for unknown
//! discrete-time linear time-varying plants.

pub mod error;
pub mod linalg;
pub mod sdp;
pub mod plant;
pub mod data;
pub mod proximity;
pub mod synthesis;
pub mod hybrid;
pub mod monitor;
pub mod config;
pub mod experiment;
pub mod suites;

pub use error::{Error, Result};
