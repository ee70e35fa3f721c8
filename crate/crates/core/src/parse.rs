// SPDX-License-Identifier: MIT OR Apache-2.0

//! Response parsing: permissive on separators and formatting, strict on
//! label text.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::score::normalize;
use crate::swap::SwapPair;
use crate::task::TaskId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parsed {
    Labels { labels: Vec<String> },
    Pairs { pairs: Vec<SwapPair> },
    /// The response claims no valid plan exists.
    Infeasible,
}

impl Parsed {
    /// Every label mentioned, in order of appearance.
    pub fn mentioned(&self) -> Vec<&str> {
        match self {
            Parsed::Labels { labels } => labels.iter().map(String::as_str).collect(),
            Parsed::Pairs { pairs } => pairs
                .iter()
                .flat_map(|p| [p.0.as_str(), p.1.as_str()])
                .collect(),
            Parsed::Infeasible => Vec::new(),
        }
    }
}

const EMPTY_ANSWERS: [&str; 6] = ["none", "nothing", "no objects", "no object", "n/a", "empty"];

const INFEASIBLE_PHRASES: [&str; 11] = [
    "infeasible",
    "impossible",
    "not possible",
    "no valid",
    "no feasible",
    "not feasible",
    "no sequence",
    "no solution",
    "cannot be achieved",
    "can't be achieved",
    "cannot be done",
];

const PAIR_SEPARATORS: [&str; 8] = ["↔", "<->", "<=>", "⇄", "⟷", " and ", " with ", " & "];

const SWAP_VERBS: [&str; 4] = ["swap ", "switch ", "exchange ", "interchange "];

pub fn parse_response(raw: &str, task: TaskId) -> Parsed {
    if task.is_planning() {
        parse_plan(raw, task)
    } else {
        Parsed::Labels {
            labels: parse_labels(raw),
        }
    }
}

/// Lowercases and removes markdown emphasis, code ticks, quotes and
/// parenthesized asides.
fn clean(raw: &str) -> String {
    let lowered = raw.to_lowercase().replace("**", "").replace(['`', '"', '*', '_'], " ");
    let mut out = String::with_capacity(lowered.len());
    let mut depth = 0usize;
    for ch in lowered.chars() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    out
}

/// Removes list markers such as `1.`, `2)`, `-`, `•`, `a)` from the start.
fn strip_enumerator(item: &str) -> &str {
    let mut s = item.trim_start();
    loop {
        let before = s;
        s = s.trim_start_matches(['-', '–', '•', '·', '>', '+']).trim_start();
        let digits = s.chars().take_while(char::is_ascii_digit).count();
        let rest = &s[digits..];
        if digits > 0 && (rest.starts_with('.') || rest.starts_with(')') || rest.starts_with(':')) {
            s = rest[1..].trim_start();
        } else if s.len() >= 2 && s.as_bytes()[0].is_ascii_lowercase() && s.as_bytes()[1] == b')' {
            s = s[2..].trim_start();
        }
        if s == before {
            return s;
        }
    }
}

/// Drops a leading `answer:`-style header.
fn strip_header(line: &str) -> &str {
    match line.rfind(':') {
        Some(i) => &line[i + 1..],
        None => line,
    }
}

fn finish_label(item: &str) -> Option<String> {
    let item = strip_enumerator(item);
    let item = item.trim().trim_end_matches(['.', '!', '?', ':']).trim();
    let label = normalize(item);
    if label.is_empty() || EMPTY_ANSWERS.contains(&label.as_str()) {
        None
    } else {
        Some(label)
    }
}

fn split_any<'a>(s: &'a str, seps: &[&str]) -> Vec<&'a str> {
    let mut parts = alloc::vec![s];
    for sep in seps {
        parts = parts.into_iter().flat_map(|p| p.split(sep)).collect();
    }
    parts
}

/// Label list, first occurrence order, duplicates removed.
pub fn parse_labels(raw: &str) -> Vec<String> {
    let text = clean(raw);
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = strip_header(line);
        for item in split_any(line, &[",", ";", " & ", " and "]) {
            let item = item.trim_start();
            let item = item.strip_prefix("and ").unwrap_or(item);
            if let Some(label) = finish_label(item) {
                if !out.contains(&label) {
                    out.push(label);
                }
            }
        }
    }
    out
}

fn strip_verb(seg: &str) -> &str {
    let mut s = strip_enumerator(seg).trim();
    for prefix in ["then ", "and ", "first ", "next ", "finally ", "step "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = strip_enumerator(rest).trim();
        }
    }
    for verb in SWAP_VERBS {
        if let Some(rest) = s.strip_prefix(verb) {
            return rest.trim();
        }
    }
    s
}

fn split_pair(seg: &str) -> Option<SwapPair> {
    for sep in PAIR_SEPARATORS {
        if let Some((a, b)) = seg.split_once(sep) {
            return pair_from(a, b);
        }
    }
    None
}

fn pair_from(a: &str, b: &str) -> Option<SwapPair> {
    let a = finish_label(strip_verb(a))?;
    let b = finish_label(b)?;
    Some(SwapPair(a, b))
}

fn has_separator(seg: &str) -> bool {
    PAIR_SEPARATORS.iter().any(|s| seg.contains(s))
}

/// Swap pairs, one per line or clause, in order.
pub fn parse_pairs(raw: &str) -> Vec<SwapPair> {
    let text = clean(raw);
    let mut out = Vec::new();
    for line in text.lines() {
        let line = strip_header(line);
        for seg in split_any(line, &[";", " then ", ". "]) {
            let seg = strip_verb(seg);
            let parts: Vec<&str> = seg.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
            if parts.iter().all(|p| has_separator(p)) {
                out.extend(parts.iter().filter_map(|p| split_pair(strip_verb(p))));
            } else if parts.len() == 2 && !parts.iter().any(|p| has_separator(p)) {
                out.extend(pair_from(parts[0], parts[1]));
            } else {
                out.extend(
                    parts
                        .iter()
                        .filter(|p| has_separator(p))
                        .filter_map(|p| split_pair(strip_verb(p))),
                );
            }
        }
    }
    out
}

fn claims_infeasible(raw: &str) -> bool {
    let text = raw.to_lowercase();
    INFEASIBLE_PHRASES.iter().any(|p| text.contains(p))
}

fn parse_plan(raw: &str, task: TaskId) -> Parsed {
    let pairs = parse_pairs(raw);
    if pairs.is_empty() && task == TaskId::T6 && claims_infeasible(raw) {
        Parsed::Infeasible
    } else {
        Parsed::Pairs { pairs }
    }
}

/// Re-renders a parse as canonical text, for debugging and reports.
pub fn display(parsed: &Parsed) -> String {
    match parsed {
        Parsed::Labels { labels } => labels.join(", "),
        Parsed::Pairs { pairs } => pairs
            .iter()
            .map(|p| alloc::format!("{} <-> {}", p.0, p.1))
            .collect::<Vec<_>>()
            .join("; "),
        Parsed::Infeasible => "infeasible".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(raw: &str) -> Vec<String> {
        parse_labels(raw)
    }

    #[test]
    fn spec_examples() {
        assert_eq!(labels("1. mug\n2. vase"), ["mug", "vase"]);
        assert_eq!(labels("The mug, the vase"), ["mug", "vase"]);
        assert_eq!(
            parse_pairs("swap the lamp and the clock"),
            [SwapPair::new("lamp", "clock")]
        );
    }

    #[test]
    fn empty_answers() {
        assert!(labels("").is_empty());
        assert!(labels("None.").is_empty());
        assert!(labels("   \n\n").is_empty());
    }

    #[test]
    fn enumerators_do_not_eat_labels() {
        assert_eq!(labels("- 3d printer"), ["3d printer"]);
        assert_eq!(labels("a) kettle\nb) mug"), ["kettle", "mug"]);
    }

    #[test]
    fn infeasible_only_for_t6() {
        let raw = "It is impossible to reach this order without a collision.";
        assert_eq!(parse_response(raw, TaskId::T6), Parsed::Infeasible);
        assert_eq!(
            parse_response(raw, TaskId::T5),
            Parsed::Pairs { pairs: Vec::new() }
        );
    }

    #[test]
    fn idempotent_on_display() {
        let p = parse_response("**Swap** the Mug with the Vase; then lamp ↔ clock", TaskId::T6);
        assert_eq!(
            p,
            Parsed::Pairs {
                pairs: alloc::vec![SwapPair::new("mug", "vase"), SwapPair::new("lamp", "clock")]
            }
        );
        assert_eq!(parse_response(&display(&p), TaskId::T6), p);
    }
}
