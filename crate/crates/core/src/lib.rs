//! Einstein–Weyl structures, Veronese webs, Lax pairs and Poisson pencils
//! built from solutions of the dispersionless Hirota and hyper-CR equations,
//! with every correspondence checked as a numerical residual.

pub mod conventions;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod jets;
pub mod laxweb;
pub mod linalg;
pub mod pdesolve;
pub mod poisson;
pub mod report;
pub mod sampling;
pub mod twistor;

pub use error::{Error, Result};
