//! Prompt templates with named `{slot}` substitution.
//!
//! Substitution is a single left-to-right pass: slot values are inserted
//! verbatim and never rescanned, so braces inside RTL or SVA text are safe.
//! A `{...}` whose contents are not an identifier is left untouched.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template {template}: no value for slot {{{slot}}}")]
    MissingSlot { template: String, slot: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    name: String,
    text: String,
}

fn is_slot_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits `text` into literal pieces and slot names.
fn pieces(text: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                if open > 0 {
                    out.push((false, &rest[..open]));
                }
                out.push((true, &after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push((false, &rest[..open + 1]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push((false, rest));
    }
    out
}

impl Template {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Template {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn load(name: impl Into<String>, path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Template::new(name, text))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for (is_slot, s) in pieces(&self.text) {
            if is_slot && !seen.contains(&s) {
                seen.push(s);
            }
        }
        seen
    }

    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        for (is_slot, s) in pieces(&self.text) {
            if is_slot {
                let v = values.get(s).ok_or_else(|| TemplateError::MissingSlot {
                    template: self.name.clone(),
                    slot: s.to_string(),
                })?;
                out.push_str(v);
            } else {
                out.push_str(s);
            }
        }
        Ok(out)
    }

    /// Convenience form of [`Template::render`] taking `(slot, value)` pairs.
    pub fn fill(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let map = values.iter().map(|(k, v)| (*k, v.to_string())).collect();
        self.render(&map)
    }
}

macro_rules! prompt_assets {
    ($($field:ident => $file:literal),* $(,)?) => {
        /// The full set of prompt templates and few-shot example texts.
        #[derive(Debug, Clone, PartialEq)]
        pub struct PromptSet {
            $(pub $field: Template,)*
        }

        impl Default for PromptSet {
            fn default() -> Self {
                PromptSet {
                    $($field: Template::new(
                        $file,
                        include_str!(concat!("../assets/prompts/", $file, ".txt")),
                    ),)*
                }
            }
        }

        impl PromptSet {
            /// Bundled defaults, with any `<name>.txt` present in `dir`
            /// taking precedence.
            pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
                let mut set = PromptSet::default();
                $(
                    let p = dir.join(concat!($file, ".txt"));
                    if p.is_file() {
                        set.$field = Template::load($file, &p)?;
                    }
                )*
                Ok(set)
            }

            pub fn all(&self) -> Vec<&Template> {
                vec![$(&self.$field,)*]
            }
        }
    };
}

prompt_assets! {
    entity_extraction => "entity_extraction",
    description_summary => "description_summary",
    design_summary => "design_summary",
    rtl_summary => "rtl_summary",
    signals_summary => "signals_summary",
    patterns_summary => "patterns_summary",
    signal_description => "signal_description",
    pruner => "pruner",
    nl_plan => "nl_plan",
    sva => "sva",
    plan_examples => "plan_examples",
    sva_examples => "sva_examples",
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pass_substitution() {
        let t = Template::new("t", "A {x} B {y} {x}");
        let out = t.fill(&[("x", "{y}"), ("y", "2")]).unwrap();
        assert_eq!(out, "A {y} B 2 {y}");
    }

    #[test]
    fn non_identifier_braces_are_literal() {
        let t = Template::new("t", "x = {a, b}; {} { n }");
        assert!(t.slots().is_empty());
        assert_eq!(t.fill(&[]).unwrap(), "x = {a, b}; {} { n }");
    }

    #[test]
    fn missing_slot_is_error() {
        let t = Template::new("t", "{signal_name}");
        assert_eq!(
            t.fill(&[]),
            Err(TemplateError::MissingSlot {
                template: "t".into(),
                slot: "signal_name".into()
            })
        );
    }

    #[test]
    fn bundled_templates_have_expected_slots() {
        let p = PromptSet::default();
        assert_eq!(
            p.entity_extraction.slots(),
            ["entity_types", "relation_types", "input_text"]
        );
        assert_eq!(p.design_summary.slots(), ["spec_text"]);
        assert_eq!(p.rtl_summary.slots(), ["rtl_text"]);
        assert_eq!(p.signals_summary.slots(), ["signals_str", "spec_text", "rtl_text"]);
        assert_eq!(p.patterns_summary.slots(), ["spec_text", "rtl_text"]);
        assert_eq!(
            p.signal_description.slots(),
            ["signal_name", "spec_text", "rtl_text"]
        );
        for t in p.all() {
            assert!(!t.text().trim().is_empty(), "{}", t.name());
        }
    }
}
