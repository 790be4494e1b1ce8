use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A choice wrapped in its task template, ready to be scored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructedInput {
    pub text: String,
    pub begin_marker: String,
    pub end_marker: String,
    pub source_sample_id: String,
    pub choice_index: usize,
}

/// Begin/end markers put around every reconstructed input.
///
/// The defaults are the literal strings `[CLS]` and `[SEP]`. Scorers that add
/// their own special tokens can set both to empty strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub begin_marker: String,
    pub end_marker: String,
}

impl Default for Template {
    fn default() -> Self {
        Self { begin_marker: "[CLS]".into(), end_marker: "[SEP]".into() }
    }
}

impl Template {
    /// `<begin> If <statement> is in common sense? <end>`
    pub fn validation(&self, statement: &str) -> Result<ReconstructedInput> {
        let statement = non_empty(statement, "statement")?;
        Ok(self.wrap(&["If", statement, "is in common sense?"]))
    }

    /// `<begin> <false statement> does not make sense because <option> <end>`
    pub fn explanation(&self, false_statement: &str, option: &str) -> Result<ReconstructedInput> {
        let false_statement = non_empty(false_statement, "false statement")?;
        let option = non_empty(option, "option")?;
        Ok(self.wrap(&[false_statement, "does not make sense because", option]))
    }

    fn wrap(&self, body: &[&str]) -> ReconstructedInput {
        let parts = std::iter::once(self.begin_marker.as_str())
            .chain(body.iter().copied())
            .chain(std::iter::once(self.end_marker.as_str()))
            .filter(|p| !p.is_empty());
        ReconstructedInput {
            text: parts.collect::<Vec<_>>().join(" "),
            begin_marker: self.begin_marker.clone(),
            end_marker: self.end_marker.clone(),
            source_sample_id: String::new(),
            choice_index: 0,
        }
    }
}

fn non_empty<'a>(text: &'a str, what: &str) -> Result<&'a str> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        Err(Error::InvalidInput(format!("empty {what}")))
    } else {
        Ok(trimmed)
    }
}

/// Validation template with the default `[CLS]`/`[SEP]` markers.
pub fn reconstruct_validation_input(statement: &str) -> Result<ReconstructedInput> {
    Template::default().validation(statement)
}

/// Explanation template with the default `[CLS]`/`[SEP]` markers.
pub fn reconstruct_explanation_input(false_statement: &str, option: &str) -> Result<ReconstructedInput> {
    Template::default().explanation(false_statement, option)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation_template() {
        let r = reconstruct_validation_input("John put an elephant into the fridge").unwrap();
        assert_eq!(r.text, "[CLS] If John put an elephant into the fridge is in common sense? [SEP]");
        assert_eq!(reconstruct_validation_input("x").unwrap().text, "[CLS] If x is in common sense? [SEP]");
        assert_eq!(
            reconstruct_validation_input("Dogs bark.").unwrap().text,
            "[CLS] If Dogs bark. is in common sense? [SEP]"
        );
    }

    #[test]
    fn explanation_template() {
        let r = reconstruct_explanation_input(
            "John put an elephant into the fridge",
            "An elephant is much bigger than a fridge",
        )
        .unwrap();
        assert_eq!(
            r.text,
            "[CLS] John put an elephant into the fridge does not make sense because An elephant is much bigger than a fridge [SEP]"
        );
        assert_eq!(
            reconstruct_explanation_input("a", "b").unwrap().text,
            "[CLS] a does not make sense because b [SEP]"
        );
        assert_eq!(
            reconstruct_explanation_input("a", "it fell because of rain").unwrap().text,
            "[CLS] a does not make sense because it fell because of rain [SEP]"
        );
    }

    #[test]
    fn empty_arguments_rejected() {
        assert!(reconstruct_validation_input("").is_err());
        assert!(reconstruct_validation_input("  ").is_err());
        assert!(reconstruct_explanation_input("a", "").is_err());
        assert!(reconstruct_explanation_input("", "b").is_err());
    }

    #[test]
    fn empty_markers_leave_no_stray_spaces() {
        let t = Template { begin_marker: String::new(), end_marker: String::new() };
        assert_eq!(t.validation("x").unwrap().text, "If x is in common sense?");
    }

    fn statement() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z ,.']{0,30}[A-Za-z.]"
    }

    proptest! {
        #[test]
        fn source_is_contiguous_substring(s in statement(), o in statement()) {
            let r = reconstruct_validation_input(&s).unwrap();
            prop_assert!(r.text.contains(s.trim()));
            prop_assert!(r.text.starts_with(&r.begin_marker));
            prop_assert!(r.text.ends_with(&r.end_marker));
            let e = reconstruct_explanation_input(&s, &o).unwrap();
            prop_assert!(e.text.contains(s.trim()) && e.text.contains(o.trim()));
        }

        #[test]
        fn validation_template_is_injective(a in statement(), b in statement()) {
            prop_assume!(a.trim() != b.trim());
            prop_assert_ne!(
                reconstruct_validation_input(&a).unwrap().text,
                reconstruct_validation_input(&b).unwrap().text
            );
        }
    }
}
