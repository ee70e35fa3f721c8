// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixed per-task prompt templates.

use alloc::string::String;

use crate::bench::{Target, TaskInstance};
use crate::task::TaskId;

const SUFFIX_LIST: &str = "Give me only the list of objects and no additional commentary or information.";
const SUFFIX_PAIR: &str = "Give me only the pair of objects and no additional commentary or information.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("{task} prompt needs {expected}")]
    MissingBinding { task: TaskId, expected: &'static str },
}

/// Template text with `<object>` or `<obj1>`..`<obj4>` placeholders.
pub fn template(task: TaskId) -> String {
    let swap = |allowed: &str| {
        alloc::format!(
            "Which pair of objects should I swap ({allowed}), without moving any other object \
             and without causing any overlaps or collisions, so that the relative left-to-right \
             order by x-coordinate alone (y-coordinates are irrelevant) of <obj1>, <obj2>, \
             <obj3>, <obj4> matches the listed order, from the current fixed camera viewpoint? \
             {SUFFIX_PAIR}"
        )
    };
    match task {
        TaskId::T1 => alloc::format!(
            "If <object> is removed, which previously partially occluded objects become fully \
             visible, from the current fixed camera viewpoint? {SUFFIX_LIST}"
        ),
        TaskId::T2 => alloc::format!(
            "Which object instance(s) comprise the minimum set that must be removed so that \
             <object> becomes fully visible from the current fixed camera viewpoint? {SUFFIX_LIST}"
        ),
        TaskId::T3 => alloc::format!(
            "If <object>, all its internal components, and anything contained within it are made \
             perfectly transparent, which objects are now visible through its volume, from the \
             current fixed camera viewpoint? {SUFFIX_LIST}"
        ),
        TaskId::T4 => alloc::format!(
            "Which objects have their reflection visible in any surface, from the current fixed \
             camera viewpoint? {SUFFIX_LIST}"
        ),
        TaskId::T5 => swap("one pairwise swap allowed"),
        TaskId::T6 => swap("one or more pairwise swaps allowed"),
    }
}

/// Renders the prompt for `task` with `target` bound to its placeholders.
pub fn render(task: TaskId, target: &Target) -> Result<String, PromptError> {
    let text = template(task);
    match (task, target) {
        (TaskId::T1 | TaskId::T2 | TaskId::T3, Target::Object { label, .. }) => {
            Ok(text.replace("<object>", label))
        }
        (TaskId::T4, Target::Removal { .. }) => Ok(text),
        (TaskId::T5 | TaskId::T6, Target::Order { labels }) if labels.len() == 4 => {
            let mut out = text;
            for (k, label) in labels.iter().enumerate() {
                out = out.replace(&alloc::format!("<obj{}>", k + 1), label);
            }
            Ok(out)
        }
        _ => Err(PromptError::MissingBinding {
            task,
            expected: match task {
                TaskId::T1 | TaskId::T2 | TaskId::T3 => "an object target",
                TaskId::T4 => "a removal-pair target",
                TaskId::T5 | TaskId::T6 => "an order of exactly four labels",
            },
        }),
    }
}

pub fn render_prompt(instance: &TaskInstance) -> Result<String, PromptError> {
    render(instance.task, &instance.target)
}
