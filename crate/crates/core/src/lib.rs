//! Exact traces of Hecke operators composed with Atkin–Lehner operators on
//! spaces of newforms, the resulting local root number statistics, and
//! murmuration averages over families of levels.
//!
//! The crate is organised bottom-up:
//!
//! * [`arith`]: factorization, Kronecker symbols, multiplicative functions.
//! * [`classnum`]: weighted and Hurwitz class numbers, with a form oracle.
//! * [`trace`]: traces of `T_l W_q` on full spaces and newspaces.
//! * [`signs`]: closed forms for `tr W_q`, dimensions and sign predicates.
//! * [`twist`]: quadratic twist bookkeeping for Atkin–Lehner signs.
//! * [`murmur`]: averages over level families, smoothing and fits.
//! * [`verify`]: the acceptance checks, shared by tests and the CLI.

pub mod arith;
pub mod classnum;
pub mod exact;
pub mod murmur;
pub mod par;
pub mod signs;
pub mod trace;
pub mod twist;
pub mod verify;

pub use exact::ExactValue;
pub use par::Exec;
