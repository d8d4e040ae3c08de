use crate::GenId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network model: {0}")]
    Model(String),

    #[error("invalid fault specification: {0}")]
    Fault(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("pre-fault equilibrium did not converge after {iterations} iterations (mismatch {mismatch:e})")]
    Equilibrium { iterations: usize, mismatch: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: duplicate sample for generator {gen_id} at t = {t}")]
    DuplicateSample { line: usize, gen_id: GenId, t: f64 },

    #[error("line {line}: timestamp {t} for generator {gen_id} is not after the previous sample")]
    Ordering { line: usize, gen_id: GenId, t: f64 },

    #[error("generator {gen_id}: gap of {gap} s exceeds twice the sample period")]
    Gap { gen_id: GenId, gap: f64 },

    #[error("invalid trace: {0}")]
    Trace(String),

    #[error("requested grid lies outside the source span [{start}, {end}]")]
    Range { start: f64, end: f64 },

    #[error("insufficient coverage after clearing for generators {0:?}")]
    Coverage(Vec<GenId>),

    #[error("invalid event metadata: {0}")]
    Event(String),

    #[error("no disturbance: all clearing-instant speeds are zero")]
    NoDisturbance,

    #[error("degenerate event: no severely disturbed generator besides the least disturbed one")]
    DegenerateEvent,

    #[error("unknown generator id {0}")]
    UnknownGenerator(GenId),

    #[error("initial relative speed {v0:e} rad/s is too small to classify")]
    NearZeroSpeed { v0: f64 },

    #[error("no decision within {0} s")]
    Timeout(f64),

    #[error("singular RLS initialization: both samples at t = {0}")]
    SingularInit(f64),

    #[error("non-finite RLS input")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("no assessable generator pair")]
    NoAssessablePair,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
