use std::sync::LazyLock;

use regex::Regex;

use super::{collapse_ws, MaskedTemplate, TextError, MASK};

const BUILTIN_RULES: &str = include_str!("../../data/question_templates.txt");

static BUILTIN: LazyLock<TemplateConverter> = LazyLock::new(|| {
    TemplateConverter::parse(BUILTIN_RULES).expect("built-in template rules are well formed")
});

#[derive(Debug, Clone)]
pub struct TemplateRule {
    pub pattern: Regex,
    pub template: String,
}

/// Ordered rewrite rules from questions to masked statements.
#[derive(Debug, Clone)]
pub struct TemplateConverter {
    rules: Vec<TemplateRule>,
}

impl TemplateConverter {
    /// The rule table shipped with the crate.
    pub fn builtin() -> &'static TemplateConverter {
        &BUILTIN
    }

    /// Reads a rule table (`<regex> => <template>` per line).
    pub fn parse(text: &str) -> Result<TemplateConverter, TextError> {
        let mut rules = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| TextError::BadRule {
                line: idx + 1,
                message,
            };
            let (pattern, template) = line
                .split_once(" => ")
                .ok_or_else(|| bad("missing ` => ` separator".into()))?;
            let pattern = Regex::new(pattern.trim()).map_err(|e| bad(e.to_string()))?;
            let template = template.trim().to_string();
            if template.matches(MASK).count() != 1 {
                return Err(bad(format!("template `{template}` needs exactly one [MASK]")));
            }
            rules.push(TemplateRule { pattern, template });
        }
        Ok(TemplateConverter { rules })
    }

    pub fn rules(&self) -> &[TemplateRule] {
        &self.rules
    }

    /// Applies the first matching rule, falling back to the bare `[MASK]`.
    pub fn convert(&self, question: &str) -> MaskedTemplate {
        let q = normalize_question(question);
        if q.contains("[mask]") {
            return MaskedTemplate::bare();
        }
        for rule in &self.rules {
            if let Some(caps) = rule.pattern.captures(&q) {
                let mut out = String::new();
                caps.expand(&rule.template, &mut out);
                // A capture may itself contain the mask token.
                if let Ok(t) = MaskedTemplate::new(collapse_ws(&out)) {
                    return t;
                }
            }
        }
        MaskedTemplate::bare()
    }
}

fn normalize_question(question: &str) -> String {
    let q = collapse_ws(&question.to_lowercase());
    q.trim_end_matches(['?', '.', '!', ' ']).to_string()
}

/// Rewrites a question as a masked statement using the built-in rules.
pub fn question_to_template(question: &str) -> Result<MaskedTemplate, TextError> {
    if question.trim().is_empty() {
        return Err(TextError::Empty("question"));
    }
    Ok(TemplateConverter::builtin().convert(question))
}
