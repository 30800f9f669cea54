//! Decision-focused economic dispatch: network model, LP dispatch, exact
//! cost curves, demand distributions, the dispatch kernel and training.

pub mod curve;
pub mod grid;
pub mod lp;
pub mod dist;
pub mod kernel;
pub mod data;
pub mod learn;
