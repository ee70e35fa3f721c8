// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use spatialcf_core::bench::Target;
use spatialcf_core::prompt::{render, render_prompt, template, PromptError};
use spatialcf_core::TaskId;

fn golden(task: TaskId) -> &'static str {
    match task {
        TaskId::T1 => include_str!("golden/t1.txt"),
        TaskId::T2 => include_str!("golden/t2.txt"),
        TaskId::T3 => include_str!("golden/t3.txt"),
        TaskId::T4 => include_str!("golden/t4.txt"),
        TaskId::T5 => include_str!("golden/t5.txt"),
        TaskId::T6 => include_str!("golden/t6.txt"),
    }
}

#[test]
fn templates_match_golden_bytes() {
    for task in TaskId::ALL {
        assert_eq!(template(task).as_bytes(), golden(task).as_bytes(), "{task}");
    }
}

#[test]
fn rendered_prompts_substitute_only_placeholders() {
    let object = Target::Object {
        id: 3,
        label: "blue ceramic mug".into(),
    };
    for task in [TaskId::T1, TaskId::T2, TaskId::T3] {
        assert_eq!(
            render(task, &object).unwrap(),
            golden(task).replace("<object>", "blue ceramic mug")
        );
    }
    let removal = Target::Removal {
        ids: [0, 4],
        labels: ["lamp".into(), "clock".into()],
    };
    assert_eq!(render(TaskId::T4, &removal).unwrap(), golden(TaskId::T4));
    let order = Target::Order {
        labels: ["vase", "book", "lamp", "mug"].map(String::from).to_vec(),
    };
    for task in [TaskId::T5, TaskId::T6] {
        let want = golden(task)
            .replace("<obj1>", "vase")
            .replace("<obj2>", "book")
            .replace("<obj3>", "lamp")
            .replace("<obj4>", "mug");
        assert_eq!(render(task, &order).unwrap(), want);
    }
    assert!(matches!(
        render(TaskId::T5, &object),
        Err(PromptError::MissingBinding { .. })
    ));
}

#[test]
fn generated_instances_carry_their_rendered_prompt() {
    for task in TaskId::ALL {
        for e in common::emitted(task, 5, common::MASTER_SEED ^ 7) {
            let prompt = render_prompt(&e.instance).unwrap();
            assert_eq!(prompt, e.instance.prompt);
            assert!(!prompt.contains('<'), "{prompt}");
        }
    }
}
