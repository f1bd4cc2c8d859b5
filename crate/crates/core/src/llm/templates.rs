//! Versioned prompt templates.
//!
//! Placeholders are written `{name}`. Bound values are substituted verbatim in
//! a single pass, so braces inside a value are never re-expanded.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::TemplateError;

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "focal_loc_1")]
    FocalLoc1,
    #[serde(rename = "focal_loc_2")]
    FocalLoc2,
    #[serde(rename = "test_loc_1")]
    TestLoc1,
    #[serde(rename = "test_loc_2")]
    TestLoc2,
    #[serde(rename = "plan_initial")]
    PlanInitial,
    #[serde(rename = "plan_reflect")]
    PlanReflect,
    #[serde(rename = "gen_write")]
    GenWrite,
    #[serde(rename = "gen_modify")]
    GenModify,
    #[serde(rename = "zero_shot")]
    ZeroShot,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::FocalLoc1,
        TemplateId::FocalLoc2,
        TemplateId::TestLoc1,
        TemplateId::TestLoc2,
        TemplateId::PlanInitial,
        TemplateId::PlanReflect,
        TemplateId::GenWrite,
        TemplateId::GenModify,
        TemplateId::ZeroShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::FocalLoc1 => "focal_loc_1",
            TemplateId::FocalLoc2 => "focal_loc_2",
            TemplateId::TestLoc1 => "test_loc_1",
            TemplateId::TestLoc2 => "test_loc_2",
            TemplateId::PlanInitial => "plan_initial",
            TemplateId::PlanReflect => "plan_reflect",
            TemplateId::GenWrite => "gen_write",
            TemplateId::GenModify => "gen_modify",
            TemplateId::ZeroShot => "zero_shot",
        }
    }

    pub fn parse(s: &str) -> Option<TemplateId> {
        TemplateId::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::FocalLoc1 => FOCAL_LOC_1,
            TemplateId::FocalLoc2 => FOCAL_LOC_2,
            TemplateId::TestLoc1 => TEST_LOC_1,
            TemplateId::TestLoc2 => TEST_LOC_2,
            TemplateId::PlanInitial => PLAN_INITIAL,
            TemplateId::PlanReflect => PLAN_REFLECT,
            TemplateId::GenWrite => GEN_WRITE,
            TemplateId::GenModify => GEN_MODIFY,
            TemplateId::ZeroShot => ZERO_SHOT,
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for seg in segments(self.text()) {
            if let Segment::Hole(name) = seg {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

enum Segment<'a> {
    Text(&'a str),
    Hole(&'a str),
}

fn segments(template: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close)
                if close > 0 && after[..close].chars().all(|c| c.is_ascii_lowercase() || c == '_') =>
            {
                out.push(Segment::Text(&rest[..open]));
                out.push(Segment::Hole(&after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Segment::Text(&rest[..=open]));
                rest = after;
            }
        }
    }
    out.push(Segment::Text(rest));
    out
}

pub fn render_prompt(id: TemplateId, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    let mut out = String::new();
    for seg in segments(id.text()) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Hole(name) => {
                let value = bindings.get(name).ok_or_else(|| TemplateError::Unbound(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

const FOCAL_LOC_1: &str = "\
You are helping a developer understand a Python repository before they fix an issue.

Issue description:
{issue}

Source files in the repository:
{files}

List up to 10 files from the list above that most likely contain the functions this issue is about \
and where a fix would be made. Copy each path exactly as written above. Output one path per line, \
most relevant first, and nothing else.
";

const FOCAL_LOC_2: &str = "\
You are helping a developer understand a Python repository before they fix an issue.

Issue description:
{issue}

Candidate files and the functions they define:
{candidates}

Pick the functions that the issue exercises and that are likely places for the fix. \
Output one entry per line in the form path::function or path::Class::function, most relevant first, \
and nothing else.
";

const TEST_LOC_1: &str = "\
You are helping a developer write a test that reproduces an issue in a Python repository.

Issue description:
{issue}

Files in the repository that contain tests:
{files}

List up to 10 test files from the list above that are most relevant to the issue. Copy each path exactly \
as written above. Output one path per line, most relevant first, and nothing else.
";

const TEST_LOC_2: &str = "\
You are helping a developer write a test that reproduces an issue in a Python repository.

Issue description:
{issue}

Candidate test files and their test functions:
{candidates}

Pick the test functions most relevant to the issue. Output one entry per line in the form \
path::test_function or path::TestClass::test_function, most relevant first, and nothing else.
";

const PLAN_INITIAL: &str = "\
You are planning how to write a test that fails before the following issue is fixed and passes after.

Issue description:
{issue}

Relevant function definitions from the repository:
{context}

Make an initial plan consisting only of READ actions: functions whose source you want to see before \
writing the test. Write one action per line in exactly this form:
READ path::function
READ path::Class::function
Output only the action lines.
";

const PLAN_REFLECT: &str = "\
You are planning how to write a test that fails before the following issue is fixed and passes after.

Issue description:
{issue}

Current plan:
{plan}

Validation feedback on the current plan:
{feedback}

Reflect on the plan and improve it. Keep useful READ actions, drop invalid ones, and add exactly one \
action that declares the test to produce, either a new test function or a change to an existing one:
WRITE path::test_function
WRITE path::Class::test_function
MODIFY path::Class::test_function
Write one action per line. Finish with a single line stating whether you are satisfied with the plan:
VERDICT: Satisfied
VERDICT: Unsatisfied
VERDICT: Unsure
";

const GEN_WRITE: &str = "\
Write a new Python test function that fails on the current code because of the issue below, and passes \
once the issue is fixed.

Issue description:
{issue}

Relevant code:
{context}

The test goes into {target_file}. Structure of that file:
{structure}

Imports already present in that file:
{imports}

Name the new test {function}. First write one line of the form
PRECEDING: name_of_existing_function
naming the existing function the new test should be placed after. Then write the complete test function \
in a single ```python code block. Put any additional import lines the test needs at the top of that block. \
Do not write a diff and do not repeat existing functions.
";

const GEN_MODIFY: &str = "\
Modify an existing Python test function so that it fails on the current code because of the issue below, \
and passes once the issue is fixed.

Issue description:
{issue}

Relevant code:
{context}

The test lives in {target_file}. Structure of that file:
{structure}

Imports already present in that file:
{imports}

Current source of {function}:
{original}

Write the complete new version of {function} in a single ```python code block. Put any additional import \
lines the test needs at the top of that block. Do not write a diff.
";

const ZERO_SHOT: &str = "\
The repository {repo} has the following issue.

Issue description:
{issue}

Write a complete pytest test file that reproduces this issue: its test must fail on the current code and \
pass once the issue is fixed. Include all imports needed to run the file. Output the whole file in a \
single ```python code block.
";
