use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{tokenize_untruncated, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SensicalStatements,
    NonsensicalStatements,
    CorrectReasons,
    ConfusingReasons,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::SensicalStatements,
        Category::NonsensicalStatements,
        Category::CorrectReasons,
        Category::ConfusingReasons,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::SensicalStatements => "Sensical statements",
            Category::NonsensicalStatements => "Non-sensical statements",
            Category::CorrectReasons => "Correct reasons",
            Category::ConfusingReasons => "Confusing reasons",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub sentences: usize,
    /// Mean token count; absent when the category has no sentences.
    pub mean_tokens: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub validation_samples: usize,
    pub explanation_samples: usize,
    pub categories: BTreeMap<Category, CategoryStats>,
}

impl StatsReport {
    pub fn sample_count(&self) -> usize {
        self.validation_samples + self.explanation_samples
    }

    pub fn mean(&self, category: Category) -> Option<f64> {
        self.categories.get(&category).and_then(|c| c.mean_tokens)
    }
}

/// Per-category mean token lengths over a split.
///
/// Validation samples feed the two statement categories; explanation samples
/// feed the two reason categories.
pub fn dataset_stats(samples: &[Sample]) -> StatsReport {
    let mut totals: BTreeMap<Category, (usize, usize)> = Category::ALL.iter().map(|&c| (c, (0, 0))).collect();
    let mut add = |category, text: &str| {
        let entry = totals.get_mut(&category).expect("all categories present");
        entry.0 += 1;
        entry.1 += tokenize_untruncated(text).len();
    };
    let mut report = StatsReport::default();
    for sample in samples {
        match sample {
            Sample::Validation(s) => {
                report.validation_samples += 1;
                add(Category::SensicalStatements, &s.statements[s.sensical_index]);
                add(Category::NonsensicalStatements, &s.statements[s.nonsensical_index()]);
            }
            Sample::Explanation(s) => {
                report.explanation_samples += 1;
                for (i, option) in s.options.iter().enumerate() {
                    let category =
                        if i == s.correct_index { Category::CorrectReasons } else { Category::ConfusingReasons };
                    add(category, option);
                }
            }
        }
    }
    report.categories = totals
        .into_iter()
        .map(|(c, (n, tokens))| {
            let mean_tokens = (n > 0).then(|| tokens as f64 / n as f64);
            (c, CategoryStats { sentences: n, mean_tokens })
        })
        .collect();
    report
}

/// One column per named split, one row per category.
pub fn render_stats_table(splits: &[(String, StatsReport)]) -> String {
    let label_width = Category::ALL.iter().map(|c| c.label().len()).max().unwrap_or(0).max(17);
    let col_width = splits.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "");
    for (name, _) in splits {
        let _ = write!(out, " | {name:>col_width$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<label_width$}", "Number of samples");
    for (_, r) in splits {
        let _ = write!(out, " | {:>col_width$}", r.sample_count());
    }
    out.push('\n');
    for c in Category::ALL {
        let _ = write!(out, "{:<label_width$}", c.label());
        for (_, r) in splits {
            let cell = r.mean(c).map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
            let _ = write!(out, " | {cell:>col_width$}");
        }
        out.push('\n');
    }
    out
}
