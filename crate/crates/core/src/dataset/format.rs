use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExplanationSample, Sample, Template, ValidationSample};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Validation,
    Explanation,
}

/// Which statement a validation answer points at.
///
/// The released benchmark answer keys name the statement that is against
/// common sense, hence the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMarks {
    Sensical,
    #[default]
    Nonsensical,
}

/// Where labels come from: a column of the data file, or a companion file of
/// `id<delim>answer` rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Column(String),
    File {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
    },
}

/// Column layout of a delimiter-separated benchmark file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatConfig {
    pub task: Task,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    /// Validation: the two statement columns.
    #[serde(default)]
    pub statement_columns: Vec<String>,
    /// Explanation: the false statement column.
    #[serde(default)]
    pub false_statement_column: Option<String>,
    /// Explanation: the three option columns.
    #[serde(default)]
    pub option_columns: Vec<String>,
    pub answer: AnswerSource,
    #[serde(default)]
    pub answer_marks: AnswerMarks,
    #[serde(default)]
    pub template: Template,
}

fn default_delimiter() -> char {
    ','
}

fn default_id_column() -> String {
    "id".into()
}

impl FormatConfig {
    /// Reads a JSON format config. A relative answer file path is resolved
    /// against the directory holding the config.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: FormatConfig =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if let AnswerSource::File { path: answers, .. } = &mut config.answer {
            if answers.is_relative() {
                if let Some(dir) = path.parent() {
                    *answers = dir.join(&*answers);
                }
            }
        }
        Ok(config)
    }

    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(u32::from(self.delimiter))
            .ok()
            .filter(|b| b.is_ascii())
            .ok_or_else(|| Error::Format(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, delimiter: u8, has_header: bool) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(has_header)
            .flexible(false)
            .from_reader(bytes.as_slice());
        let header = if has_header {
            reader
                .headers()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
                .iter()
                .map(|h| h.trim().to_string())
                .collect()
        } else {
            Vec::new()
        };
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            rows.push((line, record));
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("missing column {name:?}")))
    }
}

struct Row<'a> {
    line: usize,
    id: &'a str,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    fn field(&self, index: usize) -> Result<&str> {
        self.record.get(index).ok_or_else(|| self.error("short row"))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Row { row: self.line, id: self.id.to_string(), message: message.into() }
    }
}

/// Rows of the data file paired with their raw answer strings.
fn rows_with_answers<'a>(table: &'a Table, config: &FormatConfig) -> Result<Vec<(Row<'a>, String)>> {
    let id_col = table.column(&config.id_column)?;
    let answer_col = match &config.answer {
        AnswerSource::Column(name) => Some(table.column(name)?),
        AnswerSource::File { .. } => None,
    };
    let companion = match &config.answer {
        AnswerSource::File { path, has_header } => Some(read_answer_file(path, config.delimiter_byte()?, *has_header)?),
        AnswerSource::Column(_) => None,
    };

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, record) in &table.rows {
        let id = record.get(id_col).unwrap_or("").trim();
        let row = Row { line: *line, id, record };
        if id.is_empty() {
            return Err(row.error("empty id"));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let answer = match (answer_col, &companion) {
            (Some(col), _) => row.field(col)?.trim().to_string(),
            (None, Some(map)) => map.get(id).cloned().ok_or_else(|| row.error("no answer in answer file"))?,
            (None, None) => unreachable!(),
        };
        out.push((row, answer));
    }
    Ok(out)
}

fn read_answer_file(path: &Path, delimiter: u8, has_header: bool) -> Result<HashMap<String, String>> {
    let table = Table::read(path, delimiter, has_header)?;
    let mut answers = HashMap::with_capacity(table.rows.len());
    for (line, record) in &table.rows {
        let (Some(id), Some(answer)) = (record.get(0), record.get(1)) else {
            return Err(Error::Record { line: *line, message: format!("{}: expected id and answer", path.display()) });
        };
        if answers.insert(id.trim().to_string(), answer.trim().to_string()).is_some() {
            return Err(Error::DuplicateId(id.trim().to_string()));
        }
    }
    Ok(answers)
}

/// Parses a validation split.
pub fn parse_validation_data(path: impl AsRef<Path>, config: &FormatConfig) -> Result<Vec<ValidationSample>> {
    if config.statement_columns.len() != 2 {
        return Err(Error::Format(format!(
            "validation needs 2 statement columns, got {}",
            config.statement_columns.len()
        )));
    }
    let table = Table::read(path.as_ref(), config.delimiter_byte()?, true)?;
    let cols = [table.column(&config.statement_columns[0])?, table.column(&config.statement_columns[1])?];
    rows_with_answers(&table, config)?
        .into_iter()
        .map(|(row, answer)| {
            let marked = match answer.as_str() {
                "0" => 0,
                "1" => 1,
                other => return Err(row.error(format!("label {other:?} not in {{0,1}}"))),
            };
            let sensical_index = match config.answer_marks {
                AnswerMarks::Sensical => marked,
                AnswerMarks::Nonsensical => 1 - marked,
            };
            let statements = [row.field(cols[0])?.to_string(), row.field(cols[1])?.to_string()];
            ValidationSample::new(row.id, statements, sensical_index).map_err(|e| row.error(e.to_string()))
        })
        .collect()
}

/// Parses an explanation-selection split. Answers are `A`/`B`/`C` (any case)
/// or `0`/`1`/`2`.
pub fn parse_explanation_data(path: impl AsRef<Path>, config: &FormatConfig) -> Result<Vec<ExplanationSample>> {
    if config.option_columns.len() != 3 {
        return Err(Error::Format(format!("explanation needs 3 option columns, got {}", config.option_columns.len())));
    }
    let false_col_name = config
        .false_statement_column
        .as_deref()
        .ok_or_else(|| Error::Format("explanation needs false_statement_column".into()))?;
    let table = Table::read(path.as_ref(), config.delimiter_byte()?, true)?;
    let false_col = table.column(false_col_name)?;
    let option_cols = [
        table.column(&config.option_columns[0])?,
        table.column(&config.option_columns[1])?,
        table.column(&config.option_columns[2])?,
    ];
    rows_with_answers(&table, config)?
        .into_iter()
        .map(|(row, answer)| {
            let correct_index = match answer.to_ascii_uppercase().as_str() {
                "A" | "0" => 0,
                "B" | "1" => 1,
                "C" | "2" => 2,
                other => return Err(row.error(format!("answer {other:?} not in A/B/C"))),
            };
            let options = [
                row.field(option_cols[0])?.to_string(),
                row.field(option_cols[1])?.to_string(),
                row.field(option_cols[2])?.to_string(),
            ];
            ExplanationSample::new(row.id, row.field(false_col)?, options, correct_index)
                .map_err(|e| row.error(e.to_string()))
        })
        .collect()
}

/// Parses whichever task the config declares.
pub fn parse_samples(path: impl AsRef<Path>, config: &FormatConfig) -> Result<Vec<Sample>> {
    Ok(match config.task {
        Task::Validation => parse_validation_data(path, config)?.into_iter().map(Sample::from).collect(),
        Task::Explanation => parse_explanation_data(path, config)?.into_iter().map(Sample::from).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(contents.as_bytes()).unwrap();
        p
    }

    fn validation_config(answer: AnswerSource) -> FormatConfig {
        FormatConfig {
            task: Task::Validation,
            delimiter: ',',
            id_column: "id".into(),
            statement_columns: vec!["sent0".into(), "sent1".into()],
            false_statement_column: None,
            option_columns: vec![],
            answer,
            answer_marks: AnswerMarks::Nonsensical,
            template: Template::default(),
        }
    }

    fn explanation_config() -> FormatConfig {
        FormatConfig {
            task: Task::Explanation,
            delimiter: ',',
            id_column: "id".into(),
            statement_columns: vec![],
            false_statement_column: Some("FalseSent".into()),
            option_columns: vec!["OptionA".into(), "OptionB".into(), "OptionC".into()],
            answer: AnswerSource::Column("answer".into()),
            answer_marks: AnswerMarks::default(),
            template: Template::default(),
        }
    }

    #[test]
    fn fridge_example_with_companion_answers() {
        let dir = tempfile::tempdir().unwrap();
        let data = file(
            dir.path(),
            "a.csv",
            "id,sent0,sent1\nid1,He put a turkey into the fridge,He put an elephant into the fridge\n",
        );
        let answers = file(dir.path(), "a_answers.csv", "id1,1\n");
        let config = validation_config(AnswerSource::File { path: answers, has_header: false });
        let samples = parse_validation_data(&data, &config).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].statements[samples[0].sensical_index], "He put a turkey into the fridge");

        let mut sensical = config.clone();
        sensical.answer_marks = AnswerMarks::Sensical;
        let samples = parse_validation_data(&data, &sensical).unwrap();
        assert_eq!(samples[0].sensical_index, 1);
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let data = file(dir.path(), "a.csv", "id,sent0,sent1,label\n");
        let config = validation_config(AnswerSource::Column("label".into()));
        assert!(parse_validation_data(&data, &config).unwrap().is_empty());
    }

    #[test]
    fn ten_thousand_rows_keep_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("id,sent0,sent1,label\n");
        for i in 0..10_000 {
            text.push_str(&format!("s{i},a {i},b {i},{}\n", i % 2));
        }
        let data = file(dir.path(), "a.csv", &text);
        let config = validation_config(AnswerSource::Column("label".into()));
        let samples = parse_validation_data(&data, &config).unwrap();
        assert_eq!(samples.len(), 10_000);
        assert_eq!(samples[1234].id, "s1234");
        assert_eq!(samples[1].sensical_index, 0);
    }

    #[test]
    fn validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let config = validation_config(AnswerSource::Column("label".into()));

        let data = file(dir.path(), "m.csv", "id,sent0,label\nx,a,0\n");
        let err = parse_validation_data(&data, &config).unwrap_err();
        assert!(err.to_string().contains("sent1"), "{err}");

        let data = file(dir.path(), "l.csv", "id,sent0,sent1,label\nx,a,b,0\ny,a,b,2\n");
        match parse_validation_data(&data, &config).unwrap_err() {
            Error::Row { id, row, .. } => {
                assert_eq!(id, "y");
                assert_eq!(row, 3);
            }
            e => panic!("{e}"),
        }

        let data = file(dir.path(), "d.csv", "id,sent0,sent1,label\nx,a,b,0\nx,c,d,1\n");
        assert!(matches!(parse_validation_data(&data, &config), Err(Error::DuplicateId(id)) if id == "x"));

        let answers = file(dir.path(), "ans.csv", "other,1\n");
        let data = file(dir.path(), "n.csv", "id,sent0,sent1\nx,a,b\n");
        let config = validation_config(AnswerSource::File { path: answers, has_header: false });
        assert!(matches!(parse_validation_data(&data, &config), Err(Error::Row { .. })));
    }

    #[test]
    fn explanation_answer_letters() {
        let dir = tempfile::tempdir().unwrap();
        let data = file(
            dir.path(),
            "b.csv",
            "id,FalseSent,OptionA,OptionB,OptionC,answer\n\
             1,He put an elephant into the fridge,An elephant is much bigger than a fridge,Elephants are gray,Fridges are cold,A\n\
             2,f,a,b,c,C\n",
        );
        let samples = parse_explanation_data(&data, &explanation_config()).unwrap();
        assert_eq!(samples[0].correct_index, 0);
        assert_eq!(samples[1].correct_index, 2);

        let bad = file(dir.path(), "c.csv", "id,FalseSent,OptionA,OptionB,OptionC,answer\n1,f,a,b,c,D\n");
        assert!(matches!(parse_explanation_data(&bad, &explanation_config()), Err(Error::Row { .. })));
    }

    #[test]
    fn config_loads_and_resolves_answer_path() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = file(
            dir.path(),
            "fmt.json",
            r#"{"task":"validation","statement_columns":["sent0","sent1"],
                "answer":{"file":{"path":"answers.csv"}}}"#,
        );
        let config = FormatConfig::load(&cfg).unwrap();
        assert_eq!(config.delimiter, ',');
        assert_eq!(config.answer_marks, AnswerMarks::Nonsensical);
        assert_eq!(config.answer, AnswerSource::File { path: dir.path().join("answers.csv"), has_header: false });
        assert_eq!(config.template, Template::default());
    }
}
