use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("radius must be positive (got {0})")]
    NonPositiveRadius(f64),
    #[error("width must be positive (got {0})")]
    NonPositiveWidth(f64),
    #[error("ring radii must satisfy 0 <= r_min <= r_max (got r_min = {r_min}, r_max = {r_max})")]
    BadRing { r_min: f64, r_max: f64 },
    #[error("constant weight must be finite and nonnegative (got {0})")]
    BadConstant(f64),
    #[error("declared bound must be finite and nonnegative (got {0})")]
    BadBound(f64),
    #[error("profile breaks must lie strictly inside (0, 1) and increase")]
    BadProfileBreaks,
    #[error("profile has {values} values for {breaks} breaks; expected breaks + 1")]
    ProfileShape { breaks: usize, values: usize },
    #[error("schedule needs at least one block and one segment")]
    EmptySchedule,
    #[error("schedule segment {segment} has duration {duration}; durations must be positive")]
    BadSegmentDuration { segment: usize, duration: f64 },
    #[error("schedule segment {segment} has {got} entries, expected {expected}")]
    ScheduleShape {
        segment: usize,
        got: usize,
        expected: usize,
    },
    #[error("schedule segment {segment} entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeScheduleEntry {
        segment: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("sample count must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("ensemble needs at least {min} nodes (got {got})")]
    TooFewNodes { min: usize, got: usize },
    #[error("node arrays have mismatched lengths")]
    LengthMismatch,
    #[error("agent indices must lie in [0, 1] and strictly increase (violated at node {0})")]
    BadIndex(usize),
    #[error("node {0} has non-positive or non-finite mass")]
    BadMass(usize),
    #[error("masses sum to {0}, expected 1 within 1e-12")]
    MassNotNormalized(f64),
    #[error("node {node} has non-finite opinion {value}")]
    NonFiniteOpinion { node: usize, value: f64 },
    #[error("initial profile value {value} at agent {agent} lies outside [0, 1]")]
    ProfileOutOfRange { agent: f64, value: f64 },
    #[error("initial opinion {value} at node {node} lies outside [0, 1]")]
    InitialOutOfBox { node: usize, value: f64 },
    #[error("time step dt = {dt} exceeds the stability guard 0.5 / W = {limit} (W = {w_bound})")]
    StepTooLarge { dt: f64, w_bound: f64, limit: f64 },
    #[error("invalid integrator setting: {0}")]
    BadConfig(String),
    #[error("opinions left the box by {excursion} at t = {t}, above tolerance {tolerance}")]
    BoxViolation { t: f64, excursion: f64, tolerance: f64 },
    #[error("non-finite velocity at node {node}, t = {t}")]
    NonFiniteVelocity { node: usize, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterexampleError {
    #[error("velocity exponent {0} must lie in (2/3, 1)")]
    BadExponent(f64),
    #[error("cluster start {c0} must exceed {bound}")]
    ClusterTooClose { c0: f64, bound: f64 },
    #[error("need at least 2 interval nodes and 1 node per cluster")]
    TooFewNodes,
    #[error("interval agent {alpha} sits on a fold point at t = {t}")]
    FoldPoint { alpha: f64, t: f64 },
    #[error("interval agent index {0} outside [0, 2]")]
    BadAgent(f64),
    #[error("time must be nonnegative (got {0})")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PicardError {
    #[error("kernel declares no Lipschitz constant; the Picard construction needs one")]
    MissingLipschitz,
    #[error("window length {b} violates 0 < b < {bound}")]
    WindowTooLong { b: f64, bound: f64 },
    #[error("iterate sup-norm {0} exceeds 2")]
    IterateTooLarge(f64),
    #[error("window [{t_start}, {t_end}] contains a kernel time breakpoint at {breakpoint}")]
    BreakpointInWindow {
        t_start: f64,
        t_end: f64,
        breakpoint: f64,
    },
    #[error("no convergence on window at t = {t_start} after {iterations} iterations (residual {residual}, last ratio {ratio})")]
    NotConverged {
        t_start: f64,
        iterations: usize,
        residual: f64,
        ratio: f64,
    },
    #[error("iterate does not match the ensemble or window grid")]
    ShapeMismatch,
    #[error("invalid Picard setting: {0}")]
    BadConfig(String),
    #[error("window at t = {t_start} failed: {source}")]
    Window {
        t_start: f64,
        #[source]
        source: Box<PicardError>,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}
