use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid automaton: {0}")]
    InvalidGraph(String),

    #[error("horizon {0} exceeds the resource guard 2^20")]
    HorizonTooLarge(usize),

    #[error("enumeration of {count} paths exceeds cap {cap}")]
    EnumerationCap { count: String, cap: u64 },

    #[error("sphere is empty at n = {0}")]
    EmptySphere(usize),

    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),

    #[error("integer exponent overflow in a Z syllable")]
    ExponentOverflow,

    #[error("vertices {0} and {1} are adjacent; quotient requires a non-adjacent pair")]
    AdjacentPair(String, String),

    #[error("ball radius {0} exceeds the combinatorial guard {1}")]
    BallRadius(u64, u64),

    #[error("presentation graph is not anticonnected")]
    NotAnticonnected,

    #[error("no non-adjacent vertex pair exists (complete graph)")]
    CompleteGraph,

    #[error("combing construction: {0}")]
    Combing(String),

    #[error("not an almost semisimple candidate: lambda = {0} <= 1")]
    NotAlmostSemisimple(f64),

    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("Markov row sum deviates by {dev} at vertex {vertex}")]
    RowSum { vertex: usize, dev: f64 },

    #[error("vertex {0} is not recurrent")]
    NotRecurrent(usize),

    #[error("tree space: {0}")]
    TreeSpace(String),

    #[error("action: {0}")]
    Action(String),

    #[error("fellow-traveling conclusion violated: ({0}) vs ({1}) under met hypotheses")]
    FellowTravelViolation(String, String),

    #[error("combing verification failed: {0}")]
    VerifyFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
