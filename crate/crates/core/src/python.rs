//! Structural scanner for Python sources.
//!
//! This is not a full parser. It splits a file into logical lines (joining
//! bracketed, backslash-continued, and triple-quoted spans), tracks the
//! indentation block structure, and pulls out the pieces the rest of the
//! pipeline needs: classes, functions, decorators, and module-level imports.
//! Anything it cannot make sense of is reported as a [`ParseError`] so callers
//! can fall back to path-only handling.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;

static DEF_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:async\s+)?def\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap());
static CLASS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^class\s+([A-Za-z_][A-Za-z0-9_]*)\s*[(:]").unwrap());
static KEYWORD_HEAD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:async\s+)?(def|class)\b").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// One logical source line.
#[derive(Debug, Clone)]
pub struct LogicalLine {
    /// 1-based first physical line.
    pub start: usize,
    /// 1-based last physical line.
    pub end: usize,
    pub indent: usize,
    /// Code text with comments removed and physical lines joined by `\n`.
    pub code: String,
    pub ends_with_colon: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StringState {
    quote: char,
    triple: bool,
}

fn indent_width(prefix: &str) -> usize {
    let mut width = 0;
    for c in prefix.chars() {
        match c {
            '\t' => width = (width / 8 + 1) * 8,
            _ => width += 1,
        }
    }
    width
}

/// Split source text into logical lines, skipping blank and comment-only lines.
pub fn logical_lines(text: &str) -> Result<Vec<LogicalLine>, ParseError> {
    let mut out = Vec::new();
    let mut string: Option<StringState> = None;
    let mut brackets: Vec<(char, usize)> = Vec::new();
    let mut current: Option<LogicalLine> = None;
    let mut last_sig: Option<char> = None;

    let physical: Vec<&str> = text.lines().collect();
    for (idx, raw) in physical.iter().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        if current.is_none() {
            let trimmed = line.trim_start_matches([' ', '\t', '\x0c']);
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let lead = line.len() - trimmed.len();
            current = Some(LogicalLine {
                start: lineno,
                end: lineno,
                indent: indent_width(&line[..lead]),
                code: String::new(),
                ends_with_colon: false,
            });
            last_sig = None;
            i = line[..lead].chars().count();
        }
        let cur = current.as_mut().expect("logical line in progress");
        if cur.start != lineno {
            cur.code.push('\n');
        }
        cur.end = lineno;
        let mut continued = false;

        while i < chars.len() {
            let c = chars[i];
            if let Some(st) = string {
                cur.code.push(c);
                if c == '\\' {
                    if i + 1 < chars.len() {
                        cur.code.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    // escaped newline inside a string
                    continued = true;
                    i += 1;
                    continue;
                }
                if c == st.quote {
                    if st.triple {
                        if i + 2 < chars.len() && chars[i + 1] == st.quote && chars[i + 2] == st.quote {
                            cur.code.push(st.quote);
                            cur.code.push(st.quote);
                            string = None;
                            last_sig = Some(st.quote);
                            i += 3;
                            continue;
                        }
                    } else {
                        string = None;
                        last_sig = Some(st.quote);
                    }
                }
                i += 1;
                continue;
            }
            match c {
                '#' => break,
                '"' | '\'' => {
                    let triple = i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
                    if triple {
                        cur.code.push_str(&c.to_string().repeat(3));
                        i += 3;
                    } else {
                        cur.code.push(c);
                        i += 1;
                    }
                    string = Some(StringState { quote: c, triple });
                    continue;
                }
                '(' | '[' | '{' => brackets.push((c, lineno)),
                ')' | ']' | '}' => {
                    let want = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    match brackets.pop() {
                        Some((open, _)) if open == want => {}
                        Some((open, _)) => {
                            return err(lineno, format!("closing '{c}' does not match '{open}'"))
                        }
                        None => return err(lineno, format!("unmatched '{c}'")),
                    }
                }
                '\\' if i + 1 == chars.len() => {
                    continued = true;
                    i += 1;
                    continue;
                }
                _ => {}
            }
            cur.code.push(c);
            if !c.is_whitespace() {
                last_sig = Some(c);
            }
            i += 1;
        }

        if let Some(st) = string {
            if !st.triple && !continued {
                return err(lineno, "unterminated string literal");
            }
            continue;
        }
        if continued || !brackets.is_empty() {
            continue;
        }
        let mut done = current.take().expect("logical line in progress");
        done.ends_with_colon = last_sig == Some(':');
        out.push(done);
    }

    if string.is_some() {
        let start = current.as_ref().map_or(physical.len(), |c| c.start);
        return err(start, "unterminated triple-quoted string");
    }
    if let Some((open, line)) = brackets.last() {
        return err(*line, format!("'{open}' was never closed"));
    }
    if let Some(cur) = current {
        return err(cur.end, "unexpected end of file after line continuation");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyFunction {
    pub name: String,
    /// Dotted chain of enclosing classes, if any.
    pub suite: Option<String>,
    pub start_line: usize,
    pub end_line: usize,
    /// First decorator line, or `start_line` when undecorated.
    pub decorators_start: usize,
    pub indent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyClass {
    /// Dotted name including enclosing classes.
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub decorators_start: usize,
    pub indent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyImport {
    pub start_line: usize,
    pub end_line: usize,
    pub raw_text: String,
    pub imported_names: Vec<String>,
    pub module_path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PyModule {
    pub functions: Vec<PyFunction>,
    pub classes: Vec<PyClass>,
    pub imports: Vec<PyImport>,
    pub line_count: usize,
}

impl PyModule {
    pub fn top_level_names(&self) -> impl Iterator<Item = &str> {
        self.functions
            .iter()
            .filter(|f| f.suite.is_none())
            .map(|f| f.name.as_str())
            .chain(self.classes.iter().filter(|c| !c.name.contains('.')).map(|c| c.name.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Function(usize),
    Class(usize),
    Other,
}

#[derive(Debug)]
struct Block {
    header_indent: usize,
    kind: BlockKind,
    last_end: usize,
    body_indent: Option<usize>,
}

/// Parse the block structure of a Python module.
pub fn parse_module(text: &str) -> Result<PyModule, ParseError> {
    let lines = logical_lines(text)?;
    let mut module = PyModule { line_count: text.lines().count(), ..PyModule::default() };
    let mut stack: Vec<Block> = Vec::new();
    let mut pending_decorator: Option<(usize, usize)> = None;
    let mut expect_body: Option<usize> = None;

    for ll in &lines {
        if let Some(opener_line) = expect_body.take() {
            let parent = stack.last().expect("block for header");
            if ll.indent <= parent.header_indent {
                return err(ll.start, format!("expected an indented block after line {opener_line}"));
            }
        }
        while let Some(top) = stack.last() {
            if ll.indent > top.header_indent {
                break;
            }
            let closed = stack.pop().expect("non-empty stack");
            finish_block(&mut module, &closed);
            if let Some(parent) = stack.last_mut() {
                parent.last_end = parent.last_end.max(closed.last_end);
            }
        }
        match stack.last_mut() {
            None if ll.indent != 0 => return err(ll.start, "unexpected indent"),
            None => {}
            Some(top) => match top.body_indent {
                None => top.body_indent = Some(ll.indent),
                Some(body) if ll.indent > body => return err(ll.start, "unexpected indent"),
                Some(body) if ll.indent < body => {
                    return err(ll.start, "unindent does not match any outer indentation level")
                }
                _ => {}
            },
        }
        for b in stack.iter_mut() {
            b.last_end = b.last_end.max(ll.end);
        }

        let code = ll.code.trim_start();
        if code.starts_with('@') {
            if pending_decorator.is_none() {
                pending_decorator = Some((ll.start, ll.indent));
            }
            continue;
        }
        let decorators_start = match pending_decorator.take() {
            Some((line, indent)) if indent == ll.indent => {
                if !KEYWORD_HEAD_RE.is_match(code) {
                    return err(ll.start, "decorator must precede a function or class");
                }
                line
            }
            Some(_) => return err(ll.start, "decorator must precede a function or class"),
            None => ll.start,
        };

        let in_function = stack.iter().any(|b| matches!(b.kind, BlockKind::Function(_)));
        let enclosing_class = stack
            .iter()
            .rev()
            .find_map(|b| match b.kind {
                BlockKind::Class(i) => Some(module.classes[i].name.clone()),
                BlockKind::Function(_) => Some(String::new()),
                BlockKind::Other => None,
            })
            .filter(|s| !s.is_empty());

        let kind = if KEYWORD_HEAD_RE.is_match(code) {
            if let Some(cap) = DEF_RE.captures(code) {
                if !ll.code.contains(':') {
                    return err(ll.start, "function header without ':'");
                }
                if in_function {
                    BlockKind::Other
                } else {
                    module.functions.push(PyFunction {
                        name: cap[1].to_string(),
                        suite: enclosing_class.clone(),
                        start_line: ll.start,
                        end_line: ll.end,
                        decorators_start,
                        indent: ll.indent,
                    });
                    BlockKind::Function(module.functions.len() - 1)
                }
            } else if let Some(cap) = CLASS_RE.captures(code) {
                if !ll.code.contains(':') {
                    return err(ll.start, "class header without ':'");
                }
                if in_function {
                    BlockKind::Other
                } else {
                    let name = match &enclosing_class {
                        Some(outer) => format!("{outer}.{}", &cap[1]),
                        None => cap[1].to_string(),
                    };
                    module.classes.push(PyClass {
                        name,
                        start_line: ll.start,
                        end_line: ll.end,
                        decorators_start,
                        indent: ll.indent,
                    });
                    BlockKind::Class(module.classes.len() - 1)
                }
            } else {
                return err(ll.start, "invalid syntax in definition header");
            }
        } else {
            BlockKind::Other
        };

        if !in_function && matches!(kind, BlockKind::Other) && is_module_scope(&stack) {
            if let Some(imp) = parse_import(ll) {
                module.imports.push(imp);
            }
        }

        let opens_block = ll.ends_with_colon;
        let is_def = matches!(kind, BlockKind::Function(_) | BlockKind::Class(_));
        if opens_block {
            stack.push(Block { header_indent: ll.indent, kind, last_end: ll.end, body_indent: None });
            expect_body = Some(ll.start);
        } else if is_def {
            // single-line definition such as `def f(): pass`
            let closed = Block { header_indent: ll.indent, kind, last_end: ll.end, body_indent: None };
            finish_block(&mut module, &closed);
        }
    }
    if let Some(line) = expect_body {
        return err(line, "expected an indented block at end of file");
    }
    if let Some((line, _)) = pending_decorator {
        return err(line, "decorator at end of file");
    }
    while let Some(closed) = stack.pop() {
        finish_block(&mut module, &closed);
        if let Some(parent) = stack.last_mut() {
            parent.last_end = parent.last_end.max(closed.last_end);
        }
    }
    Ok(module)
}

fn is_module_scope(stack: &[Block]) -> bool {
    stack.iter().all(|b| matches!(b.kind, BlockKind::Other))
}

fn finish_block(module: &mut PyModule, block: &Block) {
    match block.kind {
        BlockKind::Function(i) => module.functions[i].end_line = block.last_end,
        BlockKind::Class(i) => module.classes[i].end_line = block.last_end,
        BlockKind::Other => {}
    }
}

fn strip_alias(part: &str) -> (&str, Option<&str>) {
    let mut pieces = part.split_whitespace();
    let target = pieces.next().unwrap_or("");
    match (pieces.next(), pieces.next()) {
        (Some("as"), Some(alias)) => (target, Some(alias)),
        _ => (target, None),
    }
}

/// Recognise `import ...` / `from ... import ...` statements.
pub fn parse_import(ll: &LogicalLine) -> Option<PyImport> {
    let code = ll.code.trim();
    let flat: String = code.replace(['\n', '\\'], " ");
    let flat = flat.trim();
    let (module_path, names) = if let Some(rest) = flat.strip_prefix("import ") {
        let mut names = Vec::new();
        let mut first_module = None;
        for part in rest.split(',') {
            let (target, alias) = strip_alias(part.trim());
            if target.is_empty() {
                return None;
            }
            first_module.get_or_insert_with(|| target.to_string());
            let bound = alias.map(str::to_string).unwrap_or_else(|| {
                target.split('.').next().unwrap_or(target).to_string()
            });
            names.push(bound);
        }
        (first_module.unwrap_or_default(), names)
    } else if let Some(rest) = flat.strip_prefix("from ") {
        let (module, imported) = rest.split_once(" import ")?;
        let imported = imported.trim().trim_start_matches('(').trim_end_matches(')');
        let names: Vec<String> = imported
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                let (target, alias) = strip_alias(p);
                alias.unwrap_or(target).to_string()
            })
            .collect();
        (module.trim().to_string(), names)
    } else {
        return None;
    };
    if names.is_empty() {
        return None;
    }
    Some(PyImport {
        start_line: ll.start,
        end_line: ll.end,
        raw_text: String::new(),
        imported_names: names,
        module_path,
    })
}

/// Parse and fill each import's `raw_text` from the physical source lines.
pub fn parse_module_with_text(text: &str) -> Result<PyModule, ParseError> {
    let mut module = parse_module(text)?;
    let physical: Vec<&str> = text.lines().collect();
    for imp in &mut module.imports {
        imp.raw_text = physical[imp.start_line - 1..imp.end_line].join("\n");
    }
    Ok(module)
}

/// Leading whitespace of a physical line.
pub fn leading_ws(line: &str) -> &str {
    let trimmed = line.trim_start_matches([' ', '\t']);
    &line[..line.len() - trimmed.len()]
}
