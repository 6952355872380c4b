//! File formats, a parallel reconstruction driver, the noise experiment
//! harness and the `radiant-sweep` command line, all on top of
//! [`radiant_core`].

pub mod cli;
pub mod experiment;
pub mod io;
pub mod parallel;
pub mod reparam_check;
