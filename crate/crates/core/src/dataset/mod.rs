//! Benchmark samples, input reconstruction, the toy tokenizer and corpus
//! statistics.
//!
//! A validation sample is a pair of statements, one of which makes sense. An
//! explanation sample is a statement that does not make sense together with
//! three candidate reasons. Every choice of a sample is turned into one
//! [`ReconstructedInput`] by wrapping it in a fixed natural-language template
//! (see [`Template`]), and the scorer produces one score per choice.

mod format;
mod stats;
mod template;
mod tokenize;

pub use format::{
    parse_explanation_data, parse_samples, parse_validation_data, AnswerMarks, AnswerSource, FormatConfig, Task,
};
pub use stats::{dataset_stats, render_stats_table, Category, CategoryStats, StatsReport};
pub use template::{reconstruct_explanation_input, reconstruct_validation_input, ReconstructedInput, Template};
pub use tokenize::{tokenize, tokenize_untruncated, TokenSequence, DEFAULT_MAX_SEQUENCE_LENGTH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two statements, exactly one of which is in line with common sense.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationSample {
    pub id: String,
    pub statements: [String; 2],
    /// Index of the statement that makes sense.
    pub sensical_index: usize,
}

impl ValidationSample {
    pub fn new(id: impl Into<String>, statements: [String; 2], sensical_index: usize) -> Result<Self> {
        let id = id.into();
        if statements.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::InvalidInput(format!("sample {id}: empty statement")));
        }
        if sensical_index > 1 {
            return Err(Error::InvalidInput(format!("sample {id}: sensical index {sensical_index} not in {{0,1}}")));
        }
        Ok(Self { id, statements, sensical_index })
    }

    pub fn nonsensical_index(&self) -> usize {
        1 - self.sensical_index
    }
}

/// A statement against common sense and three candidate explanations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationSample {
    pub id: String,
    pub false_statement: String,
    pub options: [String; 3],
    pub correct_index: usize,
}

impl ExplanationSample {
    pub fn new(
        id: impl Into<String>,
        false_statement: impl Into<String>,
        options: [String; 3],
        correct_index: usize,
    ) -> Result<Self> {
        let id = id.into();
        let false_statement = false_statement.into();
        if false_statement.trim().is_empty() {
            return Err(Error::InvalidInput(format!("sample {id}: empty false statement")));
        }
        if options.iter().any(|o| o.trim().is_empty()) {
            return Err(Error::InvalidInput(format!("sample {id}: empty option")));
        }
        if correct_index > 2 {
            return Err(Error::InvalidInput(format!("sample {id}: correct index {correct_index} not in {{0,1,2}}")));
        }
        Ok(Self { id, false_statement, options, correct_index })
    }
}

/// Either kind of labeled sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Sample {
    Validation(ValidationSample),
    Explanation(ExplanationSample),
}

impl Sample {
    pub fn id(&self) -> &str {
        match self {
            Sample::Validation(s) => &s.id,
            Sample::Explanation(s) => &s.id,
        }
    }

    /// Index of the correct choice.
    pub fn label(&self) -> usize {
        match self {
            Sample::Validation(s) => s.sensical_index,
            Sample::Explanation(s) => s.correct_index,
        }
    }

    pub fn choice_count(&self) -> usize {
        match self {
            Sample::Validation(_) => 2,
            Sample::Explanation(_) => 3,
        }
    }

    /// One reconstructed input per choice, in choice order.
    pub fn reconstruct(&self, template: &Template) -> Result<Vec<ReconstructedInput>> {
        match self {
            Sample::Validation(s) => s
                .statements
                .iter()
                .enumerate()
                .map(|(i, st)| {
                    let mut input = template.validation(st)?;
                    input.source_sample_id = s.id.clone();
                    input.choice_index = i;
                    Ok(input)
                })
                .collect(),
            Sample::Explanation(s) => s
                .options
                .iter()
                .enumerate()
                .map(|(i, opt)| {
                    let mut input = template.explanation(&s.false_statement, opt)?;
                    input.source_sample_id = s.id.clone();
                    input.choice_index = i;
                    Ok(input)
                })
                .collect(),
        }
    }
}

impl From<ValidationSample> for Sample {
    fn from(s: ValidationSample) -> Self {
        Sample::Validation(s)
    }
}

impl From<ExplanationSample> for Sample {
    fn from(s: ExplanationSample) -> Self {
        Sample::Explanation(s)
    }
}
