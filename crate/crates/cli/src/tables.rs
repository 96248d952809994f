//! Score tables as aligned plain text and tab-separated values.

use diagbench_core::benchmark::Category;
use diagbench_core::metrics::{format_percent, ScoreTable};
use diagbench_core::Language;

pub struct ScoreRow<'a> {
    pub label: String,
    pub table: &'a ScoreTable,
}

fn cell(v: Option<&f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format_percent(*v))
}

/// Header plus one row per run: every language, then Avg.
pub fn language_grid(rows: &[ScoreRow<'_>]) -> Vec<Vec<String>> {
    let mut header = vec!["Model".to_string()];
    header.extend(Language::ALL.iter().map(|l| l.display_name().to_string()));
    header.push("Avg.".into());
    let mut grid = vec![header];
    for row in rows {
        let mut line = vec![row.label.clone()];
        line.extend(Language::ALL.iter().map(|l| cell(row.table.per_language.get(l))));
        line.push(format_percent(row.table.overall));
        grid.push(line);
    }
    grid
}

/// Header plus one row per run over the categories any run covers.
pub fn category_grid(rows: &[ScoreRow<'_>]) -> Vec<Vec<String>> {
    let cats: Vec<Category> = Category::ALL
        .into_iter()
        .filter(|c| rows.iter().any(|r| r.table.per_category.contains_key(c)))
        .collect();
    let mut header = vec!["Model".to_string()];
    header.extend(cats.iter().map(|c| c.name().to_string()));
    let mut grid = vec![header];
    for row in rows {
        let mut line = vec![row.label.clone()];
        line.extend(cats.iter().map(|c| cell(row.table.per_category.get(c))));
        grid.push(line);
    }
    grid
}

/// First column left-aligned, the rest right-aligned.
pub fn aligned(grid: &[Vec<String>]) -> String {
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| grid.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in grid {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i == 0 {
                    format!("{s:<w$}", w = widths[i])
                } else {
                    format!("{s:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn tsv(grid: &[Vec<String>]) -> String {
    grid.iter().map(|r| r.join("\t") + "\n").collect()
}

pub fn comparison_text(rows: &[ScoreRow<'_>]) -> String {
    let k = rows.first().map_or(1, |r| r.table.k);
    format!(
        "Pass@{k} by language\n{}\nPass@{k} by category\n{}",
        aligned(&language_grid(rows)),
        aligned(&category_grid(rows))
    )
}

/// Both grids in one file, separated by a blank line.
pub fn comparison_tsv(rows: &[ScoreRow<'_>]) -> String {
    format!("{}\n{}", tsv(&language_grid(rows)), tsv(&category_grid(rows)))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn table() -> ScoreTable {
        ScoreTable {
            k: 1,
            per_language: BTreeMap::from([(Language::Python, 100.0), (Language::Cpp, 100.0 / 3.0)]),
            per_category: BTreeMap::from([(Category::Algorithm, 50.0)]),
            overall: (100.0 + 100.0 / 3.0) / 2.0,
            problems_scored: 4,
            infra_excluded_samples: 0,
            excluded_problems: vec![],
            decoding_digest: None,
        }
    }

    #[test]
    fn grid_has_all_languages_and_avg() {
        let t = table();
        let grid = language_grid(&[ScoreRow { label: "run".into(), table: &t }]);
        assert_eq!(grid[0].len(), 12);
        assert_eq!(grid[0][11], "Avg.");
        assert_eq!(grid[1][2], "33.3");
        assert_eq!(grid[1][1], "-");
        assert_eq!(grid[1][11], "66.7");
    }

    #[test]
    fn aligned_columns_line_up() {
        let text = aligned(&[vec!["a".into(), "1.0".into()], vec!["long".into(), "100.0".into()]]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[0].ends_with("  1.0"));
    }
}
