use std::path::PathBuf;

use diagbench_render::{
    mermaid, BuiltinCodeRenderer, CodeRenderer, CodeRendererConfig, CodeTheme, DiagramRenderer,
    DiagramRendererConfig, MermaidRenderer, RenderError, RenderOutcome,
};

fn workspace_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// The example flowchart embedded in the step-1 prompt template.
fn template_example() -> String {
    let template = std::fs::read_to_string(workspace_file("config/prompts/diagram_step1.txt")).unwrap();
    let start = template.find("```\nflowchart TD").unwrap() + 4;
    let end = start + template[start..].find("```").unwrap();
    template[start..end].to_string()
}

#[test]
fn template_example_flowchart_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("example.png");
    match MermaidRenderer.render(&template_example(), &out).unwrap() {
        RenderOutcome::Accept(info) => {
            assert!(info.width > 0 && info.height > 0);
            assert_eq!(info.path, out);
        }
        RenderOutcome::Reject { message } => panic!("rejected: {message}"),
    }
    let mermaid::Diagram::Flowchart(f) = mermaid::parse(&template_example()).unwrap() else {
        panic!("not a flowchart");
    };
    assert_eq!(f.nodes.len(), 8);
    assert_eq!(f.edges.len(), 9);
    let compute = f.nodes.iter().find(|n| n.id == "Compute").unwrap();
    assert_eq!(compute.label, "Add A[j] * B[i-j] to C[i]");
}

#[test]
fn unquoted_special_characters_are_rejected_with_parser_message() {
    // The template example with the quotes stripped from one bracketed label.
    let hazard = template_example().replace("[(\"Add A[j] * B[i-j] to C[i]\")]", "[Add A[j] * B[i-j] to C[i]]");
    assert_ne!(hazard, template_example());
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hazard.png");
    match MermaidRenderer.render(&hazard, &out).unwrap() {
        RenderOutcome::Reject { message } => {
            assert!(message.contains("line 6"), "{message}");
            assert!(message.contains("double quotes"), "{message}");
        }
        RenderOutcome::Accept(_) => panic!("accepted a diagram with unquoted brackets"),
    }
    assert!(!out.exists());
}

#[test]
fn invalid_diagram_text_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["", "this is not a diagram", "flowchart TD\nA -->", "pie\n\"a\": 1", "sequenceDiagram\nA->>B"] {
        let outcome = MermaidRenderer.render(text, &dir.path().join("x.png")).unwrap();
        assert!(!outcome.is_accept(), "{text:?}");
    }
}

#[test]
fn diagram_kinds_render_deterministically() {
    let sources = [
        template_example(),
        "graph LR\nA[\"Client\"] -->|request| B{\"Valid?\"}\nB -- yes --> C[(\"Store\")]\nB -. no .-> D>\"Reject\"]\nsubgraph S[\"Backend\"]\nC\nend".to_string(),
        "sequenceDiagram\nparticipant U as User\nU->>S: login\nalt ok\nS-->>U: token\nelse bad\nS-->>U: 401\nend\nNote right of S: audit".to_string(),
        "classDiagram\nclass Animal {\n<<abstract>>\n+name String\n+speak() String\n}\nAnimal <|-- Dog\nAnimal <|-- Cat\nDog ..> Bone : chews".to_string(),
    ];
    for src in &sources {
        let a = mermaid::render_png(src).unwrap();
        let b = mermaid::render_png(src).unwrap();
        assert_eq!(a, b);
        let img = image::load_from_memory(&a).unwrap();
        assert!(img.width() > 50 && img.height() > 50);
    }
}

#[test]
fn builtin_code_images_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let r = BuiltinCodeRenderer::new(CodeTheme::Light);
    let code = "def add(a, b):\n\treturn a + b  # sum\n";
    let a = r.render(code, Some("python"), &dir.path().join("a.png")).unwrap();
    let b = r.render(code, Some("python"), &dir.path().join("b.png")).unwrap();
    assert_eq!(a.sha256, b.sha256);
    assert!(a.width > 0 && a.height > 0);
    let one_line = r.render("print(1)", Some("py"), &dir.path().join("c.png")).unwrap();
    assert!(one_line.width > 0 && one_line.height > 0);
    let dark = BuiltinCodeRenderer::new(CodeTheme::Dark)
        .render(code, Some("python"), &dir.path().join("d.png"))
        .unwrap();
    assert_ne!(dark.sha256, a.sha256);
}

#[test]
fn pygments_images_are_byte_identical() {
    let config: CodeRendererConfig = toml::from_str("kind = \"pygments\"").unwrap();
    let renderer = match config.build() {
        Ok(r) => r,
        Err(RenderError::Environment(reason)) => {
            eprintln!("skipping: {reason}");
            return;
        }
        Err(e) => panic!("{e}"),
    };
    let dir = tempfile::tempdir().unwrap();
    let code = "#include <cstdio>\nint main() { std::printf(\"hi\\n\"); }";
    let a = renderer.render(code, Some("c++"), &dir.path().join("a.png")).unwrap();
    let b = renderer.render(code, Some("c++"), &dir.path().join("b.png")).unwrap();
    assert!(a.width > 0 && a.height > 0);
    assert_eq!(a.sha256, b.sha256);
    assert!(renderer.version().contains("Pygments"), "{}", renderer.version());
    assert!(matches!(renderer.render("", None, &dir.path().join("e.png")), Err(RenderError::EmptyInput)));
}

#[test]
fn missing_renderer_is_an_environment_error() {
    let config = DiagramRendererConfig::Command {
        argv: vec!["no-such-mmdc-binary".into(), "-i".into(), "{input}".into(), "-o".into(), "{output}".into()],
        timeout_seconds: 5.0,
    };
    assert!(matches!(config.build(), Err(RenderError::Environment(_))));
    let code: CodeRendererConfig = toml::from_str("kind = \"pygments\"\nprogram = \"no-such-pygmentize\"").unwrap();
    assert!(matches!(code.build(), Err(RenderError::Environment(_))));
}

#[test]
fn command_renderer_follows_exit_status_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("fake-mmdc.sh");
    std::fs::write(
        &script,
        "#!/bin/sh\nif grep -q broken \"$1\"; then echo 'Parse error on line 2' >&2; exit 1; fi\ncp \"$4\" \"$3\"\n",
    )
    .unwrap();
    let png = dir.path().join("seed.png");
    std::fs::write(&png, mermaid::render_png("flowchart TD\nA-->B").unwrap()).unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let config = DiagramRendererConfig::Command {
        argv: vec![
            script.to_string_lossy().into_owned(),
            "{input}".into(),
            "-o".into(),
            "{output}".into(),
            png.to_string_lossy().into_owned(),
        ],
        timeout_seconds: 10.0,
    };
    let r = config.build().unwrap();
    let out = dir.path().join("out.png");
    assert!(r.render("flowchart TD\nA-->B", &out).unwrap().is_accept());
    match r.render("flowchart TD\nbroken", &out).unwrap() {
        RenderOutcome::Reject { message } => assert!(message.contains("line 2"), "{message}"),
        other => panic!("{other:?}"),
    }
}
