pub mod algorithms;
pub mod cli;
pub mod dataio;
pub mod diagnostics;
pub mod harness;
pub mod objectives;
pub mod rng;
pub mod vector;
pub mod verify;
