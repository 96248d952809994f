//! Hand-built corpus of model replies and the block each must yield.

use diagbench_core::extraction::{extract_code, ModelResponseText};
use diagbench_core::Language;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    target: String,
    response: String,
    expected_source: String,
    expected_origin: String,
    expected_fence_info: Option<String>,
}

fn corpus() -> Vec<Case> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/extraction_golden.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn golden_selections() {
    let cases = corpus();
    assert_eq!(cases.len(), 20);
    for case in &cases {
        let lang: Language = case.target.parse().unwrap();
        let got = extract_code(&ModelResponseText::new(case.response.clone()), lang)
            .unwrap_or_else(|e| panic!("{}: {e}", case.name));
        assert_eq!(got.source, case.expected_source, "{}", case.name);
        assert_eq!(got.origin.as_str(), case.expected_origin, "{}", case.name);
        assert_eq!(got.fence_info, case.expected_fence_info, "{}", case.name);
    }
}

#[test]
fn golden_selections_are_deterministic() {
    for case in corpus() {
        let lang: Language = case.target.parse().unwrap();
        let a = extract_code(&ModelResponseText::new(case.response.clone()), lang).unwrap();
        let b = extract_code(&ModelResponseText::new(case.response), lang).unwrap();
        assert_eq!(a, b);
    }
}
