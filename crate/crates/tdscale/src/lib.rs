//! Scale functions, tidy subgroups and flat groups of automorphisms for a
//! handful of concrete totally disconnected locally compact groups.

pub mod core;
pub mod dynamics;
pub mod error;
pub mod ext;
pub mod flat;
pub mod model_padic_mat;
pub mod model_padic_vec;
pub mod model_shift;
pub mod model_tree;
pub mod monomial;
pub mod ratio;
pub mod treerep;

pub use error::{Error, Result};
pub use ext::Ext;
pub use ratio::IndexRatio;

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}
