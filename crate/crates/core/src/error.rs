use thiserror::Error;

use crate::arith::{Int, Rat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("initial height must be at least 1")]
    NonPositiveHeight,

    #[error("construction has no stages")]
    EmptyStageList,

    #[error("stage {stage}: cut count {cuts} is below 2")]
    CutCountTooSmall { stage: u32, cuts: usize },

    #[error("stage {stage}: spacer count {spacers} does not match cut count {cuts}")]
    SpacerCountMismatch {
        stage: u32,
        cuts: usize,
        spacers: usize,
    },

    #[error("stage {stage}: spacer {index} is negative")]
    NegativeSpacer { stage: u32, index: usize },

    #[error("stage {stage} outside defined range 1..={max}")]
    StageOutOfRange { stage: u32, max: u32 },

    #[error("column {column} outside 1..={max} at stage {stage}")]
    ColumnOutOfRange { stage: u32, column: u32, max: u32 },

    #[error("level {level} outside tower {stage} of height {height}")]
    LevelOutOfRange { stage: u32, level: Int, height: Int },

    #[error("offset {offset} outside [0, {width}) at stage {stage}")]
    OffsetOutOfRange { stage: u32, offset: Rat, width: Rat },

    #[error("point {point} lies outside the realized space [0, {total})")]
    PointOutsideSpace { point: Rat, total: Rat },

    #[error("power application left tower {cap}; raise the stage cap to resolve")]
    UnresolvedAtCap { cap: u32 },

    #[error("unresolved mass {best} exceeds tolerance {tol} at the deepest defined stage")]
    ResolutionExhausted { tol: Rat, best: Rat },

    #[error("depth {depth} invalid at stage {stage}; depth must satisfy stage < depth <= {max}")]
    DepthOutOfRange { stage: u32, depth: u32, max: u32 },

    #[error("stage {stage} failed self-intersection verification")]
    NotSidon { stage: u32 },

    #[error("growth factor {growth} is below the floor of 3")]
    GrowthTooSmall { growth: u32 },

    #[error("generated stage parameters exceed the {budget}-bit budget")]
    StageBudgetExceeded { budget: u64 },

    #[error("prefix stage {prefix} outside 1..={max}")]
    PrefixOutOfRange { prefix: u32, max: u32 },

    #[error("cannot parse '{text}' as an integer or fraction p/q")]
    NumberSyntax { text: String },

    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
