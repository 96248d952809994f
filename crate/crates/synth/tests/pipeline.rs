use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use diagbench_client::{DecodingConfig, EndpointConfig, ModelClient, OnMiss, StubBackend, StubFixture};
use diagbench_render::{BuiltinCodeRenderer, CodeTheme, MermaidRenderer, RenderOutcome};
use diagbench_synth::scripted::{scripted_fixture, Fault};
use diagbench_synth::*;

fn workspace_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn qa_fixture() -> Vec<QAPair> {
    load_qa_pairs(&workspace_file("fixtures/synthesis/qa_pairs.jsonl")).unwrap()
}

fn qa(id: &str, question: &str) -> QAPair {
    QAPair {
        id: id.into(),
        question: question.into(),
        answer: "Use a loop.".into(),
        language_hint: Some("python".into()),
    }
}

fn client(fixture: StubFixture) -> ModelClient {
    let config = EndpointConfig::stub("unused.json", "stub-model");
    ModelClient::with_backend(Arc::new(StubBackend::new(fixture)), &config, None)
}

fn handle(client: &ModelClient) -> ModelHandle<'_> {
    ModelHandle {
        client,
        model_id: "stub-model".into(),
        decoding: DecodingConfig::greedy(),
    }
}

const CODE: BuiltinCodeRenderer = BuiltinCodeRenderer::new(CodeTheme::Light);

fn synthesizer<'a>(client: &'a ModelClient, seed: u64) -> Synthesizer<'a> {
    Synthesizer {
        model: handle(client),
        code_renderer: &CODE,
        diagram_renderer: &MermaidRenderer,
        templates: PromptTemplates::builtin(),
        config: SynthConfig {
            seed,
            ..SynthConfig::default()
        },
    }
}

fn template_example() -> String {
    let t = PromptTemplates::builtin().step1;
    let start = t.find("```\nflowchart TD").unwrap() + 4;
    let end = start + t[start..].find("```").unwrap();
    t[start..end].trim_end().to_string()
}

#[test]
fn code_blocks_become_ordered_placeholders() {
    let dir = tempfile::tempdir().unwrap();
    let question = "Fix this:\n```python\nx = 1\n```\nthen\n```cpp\nint y;\n```\nand\n```\nplain\n```\ndone";
    let CrossModal::Record(r) = make_cross_modal(&qa("a", question), &CODE, "<image>", dir.path(), dir.path(), "a").unwrap() else {
        panic!("skipped");
    };
    assert_eq!(r.images.len(), 3);
    assert_eq!(r.placeholder_count(), 3);
    assert_eq!(r.question_rewritten, "Fix this:\n<image>\nthen\n<image>\nand\n<image>\ndone");
    assert_eq!(r.code_blocks[1], "```cpp\nint y;\n```");
    // Order: block offsets in the source increase with image index.
    let offsets: Vec<usize> = r.code_blocks.iter().map(|b| question.find(b.as_str()).unwrap()).collect();
    assert!(offsets.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(r.images[0].path, PathBuf::from("a-code-0.png"));
    assert_eq!(r.reconstruct_question().unwrap(), question);

    let one = make_cross_modal(&qa("b", "```python\nprint(1)\n```"), &CODE, "<image>", dir.path(), dir.path(), "b").unwrap();
    let CrossModal::Record(one) = one else { panic!() };
    assert_eq!((one.images.len(), one.placeholder_count()), (1, 1));
    assert!(one.images[0].width > 0 && one.images[0].height > 0);

    assert!(matches!(
        make_cross_modal(&qa("c", "no code at all"), &CODE, "<image>", dir.path(), dir.path(), "c").unwrap(),
        CrossModal::Skip
    ));
    assert!(make_cross_modal(&qa("d", "see <image>\n```py\nx\n```"), &CODE, "<image>", dir.path(), dir.path(), "d").is_err());
}

#[test]
fn code_images_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let q = qa("r", "```python\nfor i in range(3):\n    print(i)\n```");
    let a = make_cross_modal(&q, &CODE, "<image>", dir.path(), dir.path(), "r1").unwrap();
    let b = make_cross_modal(&q, &CODE, "<image>", dir.path(), dir.path(), "r2").unwrap();
    let (CrossModal::Record(a), CrossModal::Record(b)) = (a, b) else { panic!() };
    assert_eq!(a.images[0].sha256, b.images[0].sha256);
}

#[test]
fn step1_extracts_the_diagram_block() {
    let templates = PromptTemplates::builtin();
    let q = qa("s1", "Multiply two polynomials.");
    let prompt = templates.step1_prompt(&q);
    assert!(prompt.contains("Multiply two polynomials.") && prompt.contains("Use a loop."));
    assert!(!prompt.contains("{problem}") && !prompt.contains("{solution}"));

    let cases = [
        (format!("```mermaid\n{}\n```", template_example()), Some(template_example())),
        (format!("Sure:\n```\n{}\n```", template_example()), Some(template_example())),
        ("```mermaid\ngraph TD\nA-->B\n```\n```mermaid\ngraph TD\nC-->D\n```".to_string(), Some("graph TD\nA-->B".to_string())),
        ("I would draw a flowchart with three boxes.".to_string(), None),
    ];
    for (reply, expected) in cases {
        let mut fixture = StubFixture::new(OnMiss::Error("unexpected".into()));
        fixture.insert_instruction(&prompt, reply);
        let c = client(fixture);
        match (synth_diagram_step1(&q, &handle(&c), &templates), expected) {
            (Ok(code), Some(want)) => assert_eq!(code, want),
            (Err(RecordFailure::Reject(why)), None) => assert!(why.starts_with("NoDiagramBlock"), "{why}"),
            (other, want) => panic!("{:?} vs {want:?}", other.map_err(|e| format!("{e:?}"))),
        }
    }
}

#[test]
fn render_validation_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.png");
    assert!(validate_render(&template_example(), &MermaidRenderer, &out).unwrap().is_accept());
    assert!(!validate_render("flowchart TD\nA --", &MermaidRenderer, &out).unwrap().is_accept());
    let hazard = "flowchart TD\n    Start([Start]) --> Compute[Add A[j] * B[i-j] to C[i]]";
    match validate_render(hazard, &MermaidRenderer, &out).unwrap() {
        RenderOutcome::Reject { message } => assert!(message.contains("Parse error on line 2"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn step2_sections_and_lint() {
    let templates = PromptTemplates::builtin();
    let q = qa("s2", "Sum a list.");
    let code = "flowchart TD\nA-->B";
    let prompt = templates.step2_prompt(&q, code);
    assert!(prompt.contains(code));
    let phrases: Vec<String> = DEFAULT_DEFERRAL_PHRASES.iter().map(|s| s.to_string()).collect();
    let run = |reply: &str| {
        let mut fixture = StubFixture::new(OnMiss::Error("unexpected".into()));
        fixture.insert_instruction(&prompt, reply);
        let c = client(fixture);
        synth_diagram_step2(&q, code, &handle(&c), &templates, &phrases)
    };
    let (p, s) = run("[Incomplete Problem]\nSum the list; the rule could be found in the diagram.\n[Solution]\nsum(xs)").unwrap();
    assert!(p.ends_with("could be found in the diagram."));
    assert_eq!(s, "sum(xs)");
    match run("[Incomplete Problem]\nSum the list, details detailed in the provided diagram.") {
        Err(RecordFailure::Reject(why)) => assert!(why.starts_with("SectionParseError"), "{why}"),
        other => panic!("{other:?}"),
    }
    match run("[Incomplete Problem]\nSum the list.\n[Solution]\nsum(xs)") {
        Err(RecordFailure::Reject(why)) => assert!(why.starts_with("LintReject"), "{why}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stage1_hundred_pairs_split_nine_to_one() {
    let qas = qa_fixture();
    assert_eq!(qas.len(), 100);
    let templates = PromptTemplates::builtin();
    let c = client(scripted_fixture(&qas, &templates, &BTreeMap::new()));
    let dir = tempfile::tempdir().unwrap();
    let ds = synthesizer(&c, 7).assemble_stage(&qas, Stage::Stage1, dir.path()).unwrap();
    assert_eq!(ds.meta.planned, Mixture { cross_modal: 90, diagram: 10 });
    assert_eq!(ds.meta.mixture, Mixture { cross_modal: 90, diagram: 10 });
    assert_eq!(ds.records.len(), 100);
    assert!(ds.meta.warning.is_none());

    for r in &ds.records {
        match r {
            Record::CrossModal(cm) => {
                assert_eq!(cm.placeholder_count(), cm.images.len());
                let original = qas.iter().find(|q| q.id == cm.source_id).unwrap();
                assert_eq!(cm.reconstruct_question().unwrap(), original.question);
                for img in &cm.images {
                    assert!(dir.path().join(&img.path).is_file());
                }
            }
            Record::Diagram(d) => {
                assert!(d.render_ok);
                assert!(lint_deferral(&d.incomplete_problem, &SynthConfig::default().deferral_phrases));
            }
        }
    }
    let checks = revalidate(&ds, &MermaidRenderer).unwrap();
    assert_eq!(checks.len(), 10);
    assert!(checks.iter().all(|(_, o)| o.is_accept()));

    let again_dir = tempfile::tempdir().unwrap();
    let again = synthesizer(&c, 7).assemble_stage(&qas, Stage::Stage1, again_dir.path()).unwrap();
    assert_eq!(again.meta.partition_digest, ds.meta.partition_digest);
    assert_eq!(again.meta.records_digest, ds.meta.records_digest);
    let other_dir = tempfile::tempdir().unwrap();
    let other = synthesizer(&c, 8).assemble_stage(&qas, Stage::Stage1, other_dir.path()).unwrap();
    assert_ne!(other.meta.partition_digest, ds.meta.partition_digest);

    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.records, ds.records);
    assert_eq!(loaded.meta, ds.meta);
}

#[test]
fn render_rejects_are_counted_and_logged() {
    let qas: Vec<QAPair> = qa_fixture().into_iter().take(20).collect();
    let faults: BTreeMap<String, Fault> =
        ["qa-002", "qa-011", "qa-017"].iter().map(|id| (id.to_string(), Fault::UnquotedLabel)).collect();
    let c = client(scripted_fixture(&qas, &PromptTemplates::builtin(), &faults));
    let dir = tempfile::tempdir().unwrap();
    let ds = synthesizer(&c, 1).assemble_stage(&qas, Stage::Stage2, dir.path()).unwrap();
    assert_eq!(ds.meta.mixture, Mixture { cross_modal: 0, diagram: 17 });
    let rejected: Vec<&LogEntry> = ds.rejections().collect();
    assert_eq!(rejected.len(), 3);
    for e in &rejected {
        assert!(faults.contains_key(&e.id));
        assert!(e.reason.as_deref().unwrap().contains("double quotes"), "{e:?}");
    }
    let log_file = std::fs::read_to_string(dir.path().join("rejections.jsonl")).unwrap();
    assert_eq!(log_file.lines().count(), 3);
    // No image is left behind for a rejected record.
    let images = std::fs::read_dir(dir.path().join("images")).unwrap().count();
    assert_eq!(images, 17);
}

#[test]
fn every_input_is_accounted_for_once() {
    let mut qas: Vec<QAPair> = qa_fixture().into_iter().take(30).collect();
    qas.push(qa("prose-only", "Explain recursion without code."));
    let faults: BTreeMap<String, Fault> = [
        ("qa-000", Fault::NoDiagramBlock),
        ("qa-001", Fault::MissingSolution),
        ("qa-002", Fault::NoDeferral),
        ("qa-003", Fault::UnquotedLabel),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), *v))
    .collect();
    let c = client(scripted_fixture(&qas, &PromptTemplates::builtin(), &faults));
    let dir = tempfile::tempdir().unwrap();
    let ds = synthesizer(&c, 3).assemble_stage(&qas, Stage::Stage1, dir.path()).unwrap();
    let mut ids: Vec<&str> = ds.log.iter().map(|e| e.id.as_str()).collect();
    ids.sort();
    let mut want: Vec<&str> = qas.iter().map(|q| q.id.as_str()).collect();
    want.sort();
    assert_eq!(ids, want);
    assert_eq!(ds.records.len() + ds.meta.skipped + ds.meta.rejected, qas.len());
    let skipped = ds.log.iter().find(|e| e.id == "prose-only").unwrap();
    if skipped.route == Route::CrossModal {
        assert_eq!(skipped.disposition, Disposition::Skipped);
    }
}

#[test]
fn stage2_is_all_diagram() {
    let qas: Vec<QAPair> = qa_fixture().into_iter().take(10).collect();
    let c = client(scripted_fixture(&qas, &PromptTemplates::builtin(), &BTreeMap::new()));
    let dir = tempfile::tempdir().unwrap();
    let ds = synthesizer(&c, 0).assemble_stage(&qas, Stage::Stage2, dir.path()).unwrap();
    assert_eq!(ds.meta.mixture, Mixture { cross_modal: 0, diagram: 10 });
}

#[test]
fn total_rejection_yields_empty_dataset_with_warning() {
    let qas: Vec<QAPair> = qa_fixture().into_iter().take(5).collect();
    let c = client(StubFixture::new(OnMiss::Reply("no diagram, sorry".into())));
    let dir = tempfile::tempdir().unwrap();
    let ds = synthesizer(&c, 0).assemble_stage(&qas, Stage::Stage2, dir.path()).unwrap();
    assert!(ds.records.is_empty());
    assert_eq!(ds.meta.rejected, 5);
    assert!(ds.meta.warning.is_some());
    let stats = compute_stats(StatsSource::Dataset(&ds), Some(&WhitespaceTokenizer)).unwrap();
    assert_eq!((stats.records, stats.images), (0, 0));
    assert!(stats.tokens.is_none() && stats.image_width.is_none());
}

#[test]
fn input_preconditions() {
    let c = client(StubFixture::new(OnMiss::Reply(String::new())));
    let dir = tempfile::tempdir().unwrap();
    let few: Vec<QAPair> = qa_fixture().into_iter().take(9).collect();
    assert!(matches!(
        synthesizer(&c, 0).assemble_stage(&few, Stage::Stage1, dir.path()),
        Err(SynthError::TooFewInputs(9))
    ));
    let dup = vec![qa("x", "q"), qa("x", "q")];
    assert!(matches!(
        synthesizer(&c, 0).assemble_stage(&dup, Stage::Stage2, dir.path()),
        Err(SynthError::DuplicateId(_))
    ));
    assert!(parse_qa_pairs("{\"id\":\"a\",\"question\":\"\",\"answer\":\"b\"}").is_err());
}

#[test]
fn mixture_bound_holds_for_every_size() {
    for n in 10..=250 {
        let ids: Vec<String> = (0..n).map(|i| format!("id-{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let routes = partition(&refs, 42);
        let cross = routes.iter().filter(|r| **r == Route::CrossModal).count();
        let frac = cross as f64 / n as f64;
        assert!((frac - 0.9).abs() <= 1.0 / n as f64, "n={n} cross={cross}");
        assert_eq!(routes, partition(&refs, 42));
    }
}

#[test]
fn stats_report_image_extremes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("images")).unwrap();
    image::RgbImage::new(338, 159).save(dir.path().join("images/one.png")).unwrap();
    let info = diagbench_render::ImageInfo::inspect(&dir.path().join("images/one.png")).unwrap();
    let qas: Vec<QAPair> = qa_fixture().into_iter().take(10).collect();
    let c = client(scripted_fixture(&qas, &PromptTemplates::builtin(), &BTreeMap::new()));
    let mut ds = synthesizer(&c, 0).assemble_stage(&qas, Stage::Stage2, dir.path()).unwrap();
    ds.records.truncate(1);
    if let Record::Diagram(d) = &mut ds.records[0] {
        d.diagram_image = ImageRef::from_info(&info, dir.path());
    }
    let stats = compute_stats(StatsSource::Dataset(&ds), None).unwrap();
    assert_eq!(stats.images, 1);
    assert_eq!(stats.image_width.unwrap().min, 338);
    assert_eq!(stats.image_height.unwrap().min, 159);
    assert!(stats.tokens.is_none());
    let with_tokens = compute_stats(StatsSource::Dataset(&ds), Some(&WhitespaceTokenizer)).unwrap();
    let t = with_tokens.tokens.clone().unwrap();
    assert!(t.problem.min > 0 && t.response.max >= t.response.min);
    assert!(with_tokens.to_text().contains("Min. width"));
}
