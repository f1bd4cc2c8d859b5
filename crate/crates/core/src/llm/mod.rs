//! Model access: prompt templates, record/replay gateway, cost accounting.

pub mod cost;
pub mod gateway;
pub mod templates;

pub use cost::{cost_report, CostLedger, CostReport, PriceConfig, Stage, StageTotals};
pub use gateway::{
    Backend, BackendFailure, Decoding, Gateway, HttpBackend, LlmRequest, LlmResponse, RenderedRequest,
    ScriptedBackend, Transcript, TranscriptEntry, TranscriptMode, Usage,
};
pub use templates::{render_prompt, TemplateId};

/// Pull a list of items out of model output, one per line.
///
/// Code fences, bullets, numbering, and surrounding backticks or quotes are stripped.
pub fn parse_line_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```"))
        .map(|l| {
            let l = l.trim_start_matches(['-', '*', '•']).trim_start();
            let l = match l.split_once(['.', ')']) {
                Some((n, rest)) if !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => rest.trim_start(),
                _ => l,
            };
            l.trim_matches(['`', '"', '\'']).trim().to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// Extract the first fenced code block; `None` when the text has no fence.
pub fn first_code_block(text: &str) -> Option<String> {
    let mut lines = text.lines();
    lines.by_ref().find(|l| l.trim_start().starts_with("```"))?;
    let mut body = String::new();
    for l in lines {
        if l.trim_start().starts_with("```") {
            return Some(body);
        }
        body.push_str(l);
        body.push('\n');
    }
    Some(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_lists_tolerate_decoration() {
        let out = parse_line_list("```\n1. `tests/a.py`\n- tests/b.py\n\n2) \"c.py\"\n```\n");
        assert_eq!(out, vec!["tests/a.py", "tests/b.py", "c.py"]);
    }

    #[test]
    fn code_blocks() {
        assert_eq!(first_code_block("x\n```python\ndef f():\n    pass\n```\ny").unwrap(), "def f():\n    pass\n");
        assert_eq!(first_code_block("no fence"), None);
        assert_eq!(first_code_block("```\nunterminated\n").unwrap(), "unterminated\n");
    }
}
