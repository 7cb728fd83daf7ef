//! Dense Hermitian linear algebra and the ADMM solver for the predual SDP.

pub mod admm;
pub mod eig;

pub use admm::{
    solve_predual_sdp, solve_trig_sdp, write_trace, SolverConfig, SolverResult, SolverStatus,
    TraceRow, TrigSolution,
};
pub use eig::{hermitian_eig, project_psd, project_psd_faer, Eigen, HermitianMatrix};
