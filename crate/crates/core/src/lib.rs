pub mod chain;
pub mod cli;
pub mod error;
pub mod io;
pub mod order;
pub mod polish;
pub mod outer;
pub mod profile;
pub mod program;
pub mod reference;
pub mod relaxation;
pub mod reproduce;
pub mod scenario;
pub mod solver;
