//! Experiment drivers: configuration, builtin targets, constrained and
//! unconstrained refinement studies, and CSV output.

mod config;
mod runs;
mod targets;

pub use config::{load_config_file, parse_config, RhoRule, RunArgs, RunConfig, TimeStepRule};
pub use runs::{
    build_operator, extract_trajectory, l2q_error, read_convergence_csv, read_solution, run_constrained_experiment,
    run_constrained_level, run_unconstrained_convergence, solve_unconstrained, write_convergence_csv, write_solution,
    write_trajectory_csv, ConstrainedLevel, ConvergenceRecord, ErrorRow, ExperimentSummary, SavedSolution,
};
pub use targets::{builtin_target, target_names, TargetFn};
