//! Published per-language Pass@1 rows re-aggregated through the scorer.

use diagbench_core::benchmark::{Category, ProblemId};
use diagbench_core::metrics::{aggregate, display_round, ProblemTally};
use diagbench_core::Language;
use serde::Deserialize;

#[derive(Deserialize)]
struct Row {
    model: String,
    languages: Vec<f64>,
    avg: f64,
}

#[derive(Deserialize)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Row>,
}

fn table() -> Table {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/published_scores.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Greedy outcomes for 30 problems per language reproducing a displayed row.
fn tallies_for(columns: &[String], cells: &[f64]) -> Vec<ProblemTally> {
    let mut out = Vec::new();
    for (col, &cell) in columns.iter().zip(cells) {
        let lang: Language = col.parse().unwrap();
        let solved = (cell * 30.0 / 100.0).round() as u32;
        for concept in 1..=30 {
            let mut t = ProblemTally::new(
                ProblemId {
                    concept_id: concept,
                    language: lang,
                },
                Category::Algorithm,
            );
            if concept <= solved {
                t.passed = 1;
            } else {
                t.failed = 1;
            }
            out.push(t);
        }
    }
    out
}

#[test]
fn every_cell_is_a_multiple_of_one_thirtieth() {
    for row in table().rows {
        for &cell in &row.languages {
            let nearest = (0..=30).map(|m| m as f64 * 100.0 / 30.0).fold(f64::MAX, |best, v| {
                if (v - cell).abs() < (best - cell).abs() {
                    v
                } else {
                    best
                }
            });
            assert!((nearest - cell).abs() <= 0.05, "{}: {cell}", row.model);
        }
    }
}

#[test]
fn every_row_average_reproduces() {
    let t = table();
    assert_eq!(t.rows.len(), 29);
    for row in &t.rows {
        let scores = aggregate(&tallies_for(&t.columns, &row.languages), 1).unwrap();
        assert_eq!(display_round(scores.overall), row.avg, "{}", row.model);
        for (col, &cell) in t.columns.iter().zip(&row.languages) {
            let lang: Language = col.parse().unwrap();
            assert_eq!(display_round(scores.per_language[&lang]), cell, "{} {col}", row.model);
        }
    }
}
