use diagbench_render::mermaid;
use proptest::prelude::*;

proptest! {
    #[test]
    fn parser_never_panics(body in "[A-Za-z0-9 \\[\\]\\(\\)\\{\\}\"|&;:.<>=~-]{0,80}") {
        let _ = mermaid::render_png(&format!("flowchart TD\n{body}"));
        let _ = mermaid::render_png(&format!("sequenceDiagram\n{body}"));
        let _ = mermaid::render_png(&format!("classDiagram\n{body}"));
    }

    #[test]
    fn quoted_labels_survive_any_brackets(label in "[A-Za-z0-9 \\[\\]\\(\\)\\{\\}*+-]{1,30}") {
        let src = format!("flowchart LR\n  A[\"{label}\"] --> B");
        match mermaid::parse(&src) {
            Ok(mermaid::Diagram::Flowchart(f)) => prop_assert_eq!(&f.nodes[0].label, &label),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
