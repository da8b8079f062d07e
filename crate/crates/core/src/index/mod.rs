//! Index functions and the transforms between them.

mod function;
pub mod search;
mod transforms;

pub use function::{Form, IndexFunction, IndexFunctionRecord};
pub use transforms::*;
