//! Deterministic stub replies for offline synthesis runs: a small flowchart
//! per QA pair for step 1 and a sectioned reply for step 2, with optional
//! per-id faults.

use std::collections::BTreeMap;

use diagbench_client::{OnMiss, StubFixture};
use serde::{Deserialize, Serialize};

use crate::diagram::{PromptTemplates, INCOMPLETE_HEADER, SOLUTION_HEADER};
use crate::types::QAPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Step 1 returns a label with unquoted brackets.
    UnquotedLabel,
    /// Step 1 answers in prose only.
    NoDiagramBlock,
    /// Step 2 omits the solution header.
    MissingSolution,
    /// Step 2 never points at the diagram.
    NoDeferral,
}

fn label(text: &str, limit: usize) -> String {
    let flat: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c == ' ' { c } else { ' ' })
        .collect();
    let words: Vec<&str> = flat.split_whitespace().collect();
    let mut out = String::new();
    for w in words {
        if out.len() + w.len() + 1 > limit {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    if out.is_empty() {
        "Solve the task".into()
    } else {
        out
    }
}

/// Flowchart step 1 answers with for `qa`.
pub fn scripted_diagram(qa: &QAPair) -> String {
    let first = qa.question.lines().find(|l| !l.trim().is_empty() && !l.trim_start().starts_with("```")).unwrap_or("");
    format!(
        "flowchart TD\n    Start([\"Start\"]) --> Read[(\"Read the input of {id}\")]\n    Read --> Step[\"{task}\"]\n    Step --> Check{{\"Input exhausted?\"}}\n    Check -- \"no\" --> Step\n    Check -- \"yes\" --> Output[(\"Output the result\")]\n    Output --> Stop([\"End\"])",
        id = label(&qa.id, 24),
        task = label(first, 32),
    )
}

fn step1_reply(qa: &QAPair, fault: Option<Fault>) -> String {
    match fault {
        Some(Fault::NoDiagramBlock) => "The problem reads input, processes it and prints the result.".into(),
        Some(Fault::UnquotedLabel) => format!(
            "```mermaid\nflowchart TD\n    Start([Start]) --> Compute[Add A[j] * B[i-j] to C[i] for {}]\n    Compute --> End([End])\n```",
            label(&qa.id, 24)
        ),
        _ => format!("Here is the diagram.\n\n```mermaid\n{}\n```\n", scripted_diagram(qa)),
    }
}

fn step2_reply(qa: &QAPair, fault: Option<Fault>) -> String {
    let prose: String = qa
        .question
        .split("```")
        .step_by(2)
        .collect::<Vec<_>>()
        .join(" ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let deferral = match fault {
        Some(Fault::NoDeferral) => "Write the program.".to_string(),
        _ => "The order of the processing steps is detailed in the provided diagram.".to_string(),
    };
    let problem = format!("{prose} {deferral}");
    match fault {
        Some(Fault::MissingSolution) => format!("{INCOMPLETE_HEADER}\n{problem}\n\n{}", qa.answer),
        _ => format!("### {INCOMPLETE_HEADER}\n{problem}\n\n### {SOLUTION_HEADER}\n{}\n", qa.answer),
    }
}

/// Replies keyed by the exact step-1 and step-2 instructions; anything else
/// is a stub error.
pub fn scripted_fixture(qas: &[QAPair], templates: &PromptTemplates, faults: &BTreeMap<String, Fault>) -> StubFixture {
    let mut fixture = StubFixture::new(OnMiss::Error("no scripted reply for this instruction".into()));
    fixture.description = format!("scripted synthesis replies for {} QA pairs", qas.len());
    for qa in qas {
        let fault = faults.get(&qa.id).copied();
        fixture.insert_instruction(&templates.step1_prompt(qa), step1_reply(qa, fault));
        fixture.insert_instruction(&templates.step2_prompt(qa, &scripted_diagram(qa)), step2_reply(qa, fault));
    }
    fixture
}
