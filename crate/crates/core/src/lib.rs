pub mod corpus;
pub mod harness;
pub mod mult;
pub mod name;
pub mod ordinary;
pub mod outcome;
pub mod parse;
pub mod pretty;
pub mod program;
pub mod pure;
pub mod syntax;
pub mod translate;
pub mod typecheck;
pub mod usage;

/// Runs a recursive step with enough stack, growing it on the heap when
/// it runs low. Terms and types built by the evaluators can nest
/// thousands deep.
pub(crate) fn deep<R>(f: impl FnOnce() -> R) -> R {
    stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, f)
}
