//! Joint group-head selection and airtime allocation for proximity data
//! dissemination, solved as a generalized Nash bargaining problem.

pub mod adaptive;
pub mod error;
pub mod game;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod solver;
pub mod utility;

pub use error::{Error, Result};
pub use game::{AirtimeGame, Baseline};
pub use model::{
    aggregate_flows, build_dissemination_plan, Allocation, DataItem, DisseminationPlan, FlowSummary, Scenario,
    UserProfile,
};
pub use solver::{
    run_algorithm1, select_head, solve_joint, solve_subproblem, JointSolution, SolveStatus, SolverOptions, SubProblem,
    SubSolution,
};
pub use utility::{nash_products, utility, NashProducts};
