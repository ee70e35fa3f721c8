// SPDX-License-Identifier: MIT OR Apache-2.0

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six benchmark tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    /// Single-object removal.
    T1,
    /// Multi-object removal (minimum removal set, ordered).
    T2,
    /// Transparency.
    T3,
    /// Reflection.
    T4,
    /// One pairwise swap.
    T5,
    /// One or more pairwise swaps.
    T6,
}

impl TaskId {
    pub const ALL: [TaskId; 6] = [
        TaskId::T1,
        TaskId::T2,
        TaskId::T3,
        TaskId::T4,
        TaskId::T5,
        TaskId::T6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::T1 => "T1",
            TaskId::T2 => "T2",
            TaskId::T3 => "T3",
            TaskId::T4 => "T4",
            TaskId::T5 => "T5",
            TaskId::T6 => "T6",
        }
    }

    pub fn is_planning(self) -> bool {
        matches!(self, TaskId::T5 | TaskId::T6)
    }

    /// Tasks whose scenes come from the occlusion-scene generator.
    pub fn is_occlusion(self) -> bool {
        matches!(self, TaskId::T1 | TaskId::T2 | TaskId::T3)
    }

    /// Instance counts of the released benchmark split.
    pub fn reference_count(self) -> usize {
        match self {
            TaskId::T1 => 602,
            TaskId::T2 => 330,
            TaskId::T3 => 900,
            TaskId::T4 => 300,
            TaskId::T5 => 602,
            TaskId::T6 => 300,
        }
    }

    /// Reference count scaled by `factor`, rounded to nearest.
    pub fn scaled_count(self, factor: f64) -> usize {
        let scaled = self.reference_count() as f64 * factor;
        if scaled <= 0.0 {
            0
        } else {
            libm::round(scaled) as usize
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task id `{0}` (expected T1..T6)")]
pub struct ParseTaskError(pub alloc::string::String);

impl FromStr for TaskId {
    type Err = ParseTaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "T1" | "t1" => Ok(TaskId::T1),
            "T2" | "t2" => Ok(TaskId::T2),
            "T3" | "t3" => Ok(TaskId::T3),
            "T4" | "t4" => Ok(TaskId::T4),
            "T5" | "t5" => Ok(TaskId::T5),
            "T6" | "t6" => Ok(TaskId::T6),
            other => Err(ParseTaskError(other.into())),
        }
    }
}
