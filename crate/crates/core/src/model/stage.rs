use std::fmt;

use serde::{Deserialize, Serialize};

/// The four sequential phases of a co-writing session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WorkflowStage {
    TopicIdeation,
    InspirationGeneration,
    ValidationRefinement,
    FinalSynthesis,
}

impl WorkflowStage {
    pub const ALL: [WorkflowStage; 4] = [
        WorkflowStage::TopicIdeation,
        WorkflowStage::InspirationGeneration,
        WorkflowStage::ValidationRefinement,
        WorkflowStage::FinalSynthesis,
    ];

    /// Edge relation of the stage machine, guards excluded.
    ///
    /// Forward steps plus two self-loops: re-summarising during ideation and
    /// edits during refinement. There are no backward edges.
    pub fn can_transition_to(self, target: WorkflowStage) -> bool {
        use WorkflowStage::*;
        matches!(
            (self, target),
            (TopicIdeation, TopicIdeation)
                | (TopicIdeation, InspirationGeneration)
                | (InspirationGeneration, ValidationRefinement)
                | (ValidationRefinement, ValidationRefinement)
                | (ValidationRefinement, FinalSynthesis)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WorkflowStage::TopicIdeation => "TopicIdeation",
            WorkflowStage::InspirationGeneration => "InspirationGeneration",
            WorkflowStage::ValidationRefinement => "ValidationRefinement",
            WorkflowStage::FinalSynthesis => "FinalSynthesis",
        }
    }
}

impl fmt::Display for WorkflowStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
