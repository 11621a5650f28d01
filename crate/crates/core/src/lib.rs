//! BCS-to-Ginzburg-Landau coefficient extraction and semiclassical checks.
//!
//! The pipeline runs bottom-up:
//!
//! 1. [`gap`] solves the linear gap problem, finds `T_c`, and normalizes `t`.
//! 2. [`coeffs`] integrates `t` against the `g` functions to get `B1, B2, B3`
//!    and the expansion constants `E1`, `E2`.
//! 3. [`gl`] minimizes the Ginzburg-Landau functional on the unit torus.
//! 4. [`bdg`] builds the Bogoliubov operator fiber by fiber and compares
//!    traces, pair operators and trial energies against the GL predictions.

pub mod bdg;
pub mod coeffs;
pub mod gap;
pub mod gl;
pub mod specfun;
