//! Reward environments: test functions, feedback laws and brute-force
//! oracles over the average function.

mod functions;
mod oracle;
mod process;

pub use functions::{TestFunction, DOUBLE_SINE_ARGMAX, DOUBLE_SINE_MAX};
pub use oracle::{
    cell_mean_oracle, count_near_optimal_cells, sup_oracle, AverageOracle, MeanEstimate,
    SupEstimate,
};
pub use process::{
    audit_points, product_grid, AdversarySpec, FeedbackKind, MeteredProcess, NoiseLaw,
    RewardProcess, AUDIT_TOLERANCE,
};

impl RewardProcess {
    pub fn average_oracle(&self) -> AverageOracle<'_> {
        AverageOracle::new(self)
    }
}
