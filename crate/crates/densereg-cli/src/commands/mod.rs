//! One module per subcommand.

pub mod bench;
pub mod eval;
pub mod generate;
pub mod predict;
pub mod sweep;
pub mod train;
