//! Process exit codes, one per error class.
//!
//! | code | meaning |
//! |-----:|---------|
//! | 0 | success; every residual within its tolerance |
//! | 1 | finished, but a residual exceeds its tolerance |
//! | 2 | usage or configuration error |
//! | 3 | file I/O or parse error |
//! | 4 | grid or shape mismatch between inputs |
//! | 5 | invalid domain, collar or exhaustion |
//! | 6 | inconsistent datum: mass condition, nonzero mean or period, inconsistent map |
//! | 7 | precondition violated: positivity, support distance, band values, resolution of a kernel |
//! | 8 | linear solver stalled |
//! | 9 | fixed point failed: smallness gate or contraction |
//! | 10 | measure correction bracket failed |
//! | 11 | flow or map failure: orientation, inversion, accuracy, range, change-of-variables drift |

use jacshape_core::Error;

pub const SUCCESS: u8 = 0;
pub const TOLERANCE: u8 = 1;
pub const USAGE: u8 = 2;
pub const IO: u8 = 3;
pub const SHAPE: u8 = 4;
pub const DOMAIN: u8 = 5;
pub const INCONSISTENT_DATUM: u8 = 6;
pub const PRECONDITION: u8 = 7;
pub const SOLVER_STALL: u8 = 8;
pub const FIXED_POINT: u8 = 9;
pub const BRACKET: u8 = 10;
pub const FLOW: u8 = 11;

/// Exit code of a library error, looking through stage tags.
pub fn code(e: &Error) -> u8 {
    match e.root() {
        Error::Io(_) | Error::Parse(_) => IO,
        Error::Shape(_) => SHAPE,
        Error::DegenerateDomain(_)
        | Error::Underresolved(_)
        | Error::Connectivity { .. }
        | Error::CollarTooThick { .. }
        | Error::ExhaustionFailure(_)
        | Error::UnsupportedTopology { .. } => DOMAIN,
        Error::MassCondition { .. }
        | Error::InconsistentDatum { .. }
        | Error::NonzeroPeriod { .. }
        | Error::InconsistentMap(_) => INCONSISTENT_DATUM,
        Error::Precondition(_)
        | Error::Positivity(_)
        | Error::SupportDistance { .. }
        | Error::DegenerateRegion(_)
        | Error::UnsupportedOrder(_)
        | Error::KernelUnderresolved { .. } => PRECONDITION,
        Error::SolverStall { .. } => SOLVER_STALL,
        Error::GateFailure { .. } | Error::ContractionFailure { .. } => FIXED_POINT,
        Error::BracketFailure { .. } => BRACKET,
        Error::OrientationLoss { .. }
        | Error::InversionFailure { .. }
        | Error::FlowAccuracy { .. }
        | Error::OutOfRange { .. }
        | Error::ChangeOfVariablesDrift { .. } => FLOW,
        Error::Stage { .. } => unreachable!("root skips stage tags"),
    }
}
