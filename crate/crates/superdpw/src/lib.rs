//! Superharmonic and superprimitive maps from `R^{2|2}` via holomorphic
//! potentials, twisted loop groups and Iwasawa splitting.

pub mod cmat;
pub mod dpw;
pub mod elliptic2;
pub mod grassmann;
pub mod jet;
pub mod liealg;
pub mod iwasawa;
pub mod loops;
pub mod superfield;
pub mod verify;
