//! Benchmark fixtures shared by the criterion targets.

use fsrg::config::Fixture;
use fsrg::model::ModelSpec;

/// Parsed model for a shipped fixture.
pub fn fixture(f: Fixture) -> ModelSpec {
    ModelSpec::from_config(&f.config()).expect("shipped fixtures parse")
}
