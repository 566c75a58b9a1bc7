#![no_std]
extern crate alloc;

pub mod align;
pub mod analytics;
pub mod audit;
pub mod chunk;
pub mod citegraph;
pub mod date;
pub mod diff;
pub mod model;
pub mod normalize;
pub mod registry;
pub mod text;

pub use date::Date;
pub use model::*;
