//! Toolkit for as-you-go wireless relay deployment along a trail.

pub mod channel;
pub mod deployment;
pub mod error;
pub mod formats;
pub mod links;
pub mod measurement;
pub mod numerics;
pub mod policy;
pub mod session;
pub mod sim;
pub mod store;
pub mod trail;
pub mod units;

pub use error::{Error, Result};
