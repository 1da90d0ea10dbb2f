//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod ar;
pub mod beam;
pub mod generation;
pub mod scoring;
pub mod verifier;
