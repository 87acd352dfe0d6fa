pub mod demo;
pub mod tools;
pub mod train;

/// What a command run amounted to, beyond hard errors.
pub enum Outcome {
    Success,
    /// Training aborted on non-finite numbers; artifacts hold the last
    /// good checkpoint.
    NumericalAbort,
}
