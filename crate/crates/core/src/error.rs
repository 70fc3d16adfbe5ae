use thiserror::Error;

/// A syntax error in one of the text formats, tagged with a 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cell ({row},{col}) is outside the map or blocked")]
    BadCell { row: usize, col: usize },
    #[error("two agents start at ({row},{col})")]
    DuplicateAgent { row: usize, col: usize },
    #[error("two shelves share pickup ({row},{col})")]
    DuplicatePickup { row: usize, col: usize },
    #[error("two shelves share delivery ({row},{col})")]
    DuplicateDelivery { row: usize, col: usize },
    #[error("agent start ({row},{col}) coincides with a shelf pickup")]
    AgentOnPickup { row: usize, col: usize },
    #[error("{agents} agents but only {shelves} shelves")]
    TooManyAgents { agents: usize, shelves: usize },
    #[error("instance has no agents")]
    NoAgents,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("plan has {found} trajectories, instance has {expected} shelves")]
    CountMismatch { expected: usize, found: usize },
    #[error("trajectory for shelf {0} is empty")]
    EmptyTrajectory(usize),
    #[error("shelf {0} appears twice in the plan")]
    DuplicateShelf(usize),
}

/// Failures that abort an execution run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("shelf plan is not a valid safe 1-robust plan: {0}")]
    InvalidPlan(String),
    #[error("dependency graph became cyclic: {0}")]
    Cyclic(String),
    #[error("no candidate shelf for assignment ({0})")]
    NoCandidate(String),
    #[error("planner found no path for agent {agent} carrying shelf {shelf}")]
    PlannerFailure { agent: usize, shelf: usize },
    #[error("execution did not finish within {0} iterations")]
    Stalled(usize),
    #[error("time limit of {0:?} exceeded")]
    Timeout(std::time::Duration),
}
