//! Truncated arithmetic in Q_p and its unramified and tamely ramified
//! quadratic extensions.

mod elem;
mod field;
mod parse;

pub use elem::{Elem, Valuation};
pub use field::{base_field, irreducible_mod_p, is_prime, make_field, ExtensionKind, Field, FieldRef};
pub use parse::parse_elem;
