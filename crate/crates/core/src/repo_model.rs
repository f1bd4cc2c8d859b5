//! Indexed view of a Python repository snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::RepoError;
use crate::python::{self, PyModule};

/// A function or method definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRef {
    pub file: String,
    /// Enclosing class chain, dotted (`Outer.Inner`), when the function is a method.
    pub suite: Option<String>,
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub decorators_start: usize,
    pub indent: usize,
    pub is_test: bool,
}

impl FunctionRef {
    pub fn qualified_name(&self) -> String {
        match &self.suite {
            Some(s) => format!("{s}.{}", self.name),
            None => self.name.clone(),
        }
    }

    /// Runner node id, `path::Suite::function` or `path::function`.
    pub fn test_id(&self) -> String {
        match &self.suite {
            Some(s) => format!("{}::{}::{}", self.file, s.replace('.', "::"), self.name),
            None => format!("{}::{}", self.file, self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteRef {
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub indent: usize,
    pub members: Vec<FunctionRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportStmt {
    pub raw_text: String,
    pub imported_names: Vec<String>,
    pub module_path: String,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStructure {
    pub path: String,
    pub imports: Vec<ImportStmt>,
    /// Module-level functions and suite methods, in source order.
    pub functions: Vec<FunctionRef>,
    pub suites: Vec<SuiteRef>,
    pub parse_ok: bool,
    pub parse_error: Option<String>,
    pub line_count: usize,
}

impl FileStructure {
    pub fn unparsed(path: &str, error: String) -> Self {
        FileStructure {
            path: path.to_string(),
            imports: Vec::new(),
            functions: Vec::new(),
            suites: Vec::new(),
            parse_ok: false,
            parse_error: Some(error),
            line_count: 0,
        }
    }

    pub fn from_source(path: &str, text: &str) -> Self {
        match python::parse_module_with_text(text) {
            Ok(module) => Self::from_module(path, module),
            Err(e) => Self::unparsed(path, e.to_string()),
        }
    }

    fn from_module(path: &str, module: PyModule) -> Self {
        let functions: Vec<FunctionRef> = module
            .functions
            .iter()
            .map(|f| FunctionRef {
                file: path.to_string(),
                suite: f.suite.clone(),
                name: f.name.clone(),
                start_line: f.start_line,
                end_line: f.end_line,
                decorators_start: f.decorators_start,
                indent: f.indent,
                is_test: f.name.starts_with("test"),
            })
            .collect();
        let suites = module
            .classes
            .iter()
            .map(|c| SuiteRef {
                name: c.name.clone(),
                start_line: c.start_line,
                end_line: c.end_line,
                indent: c.indent,
                members: functions
                    .iter()
                    .filter(|f| f.suite.as_deref() == Some(c.name.as_str()))
                    .cloned()
                    .collect(),
            })
            .collect();
        let imports = module
            .imports
            .into_iter()
            .map(|i| ImportStmt {
                raw_text: i.raw_text,
                imported_names: i.imported_names,
                module_path: i.module_path,
                start_line: i.start_line,
                end_line: i.end_line,
            })
            .collect();
        FileStructure {
            path: path.to_string(),
            imports,
            functions,
            suites,
            parse_ok: true,
            parse_error: None,
            line_count: module.line_count,
        }
    }

    pub fn test_functions(&self) -> impl Iterator<Item = &FunctionRef> {
        self.functions.iter().filter(|f| f.is_test)
    }

    pub fn has_tests(&self) -> bool {
        self.functions.iter().any(|f| f.is_test)
    }

    /// Find a function by name, optionally constrained to a suite.
    ///
    /// Without a suite, a module-level function wins over a method of the same name.
    pub fn find_function(&self, suite: Option<&str>, name: &str) -> Option<&FunctionRef> {
        match suite {
            Some(s) => self
                .functions
                .iter()
                .find(|f| f.name == name && f.suite.as_deref().is_some_and(|fs| fs == s || fs.ends_with(&format!(".{s}")))),
            None => self
                .functions
                .iter()
                .find(|f| f.name == name && f.suite.is_none())
                .or_else(|| self.functions.iter().find(|f| f.name == name)),
        }
    }

    pub fn find_suite(&self, name: &str) -> Option<&SuiteRef> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn top_level_names(&self) -> Vec<&str> {
        self.functions
            .iter()
            .filter(|f| f.suite.is_none())
            .map(|f| f.name.as_str())
            .chain(self.suites.iter().filter(|s| !s.name.contains('.')).map(|s| s.name.as_str()))
            .collect()
    }

    /// Signature-only outline: suite headers and function names with spans, no bodies.
    pub fn skeleton(&self) -> String {
        let mut out = String::new();
        for f in &self.functions {
            if f.suite.is_none() {
                out.push_str(&format!("def {}  # lines {}-{}\n", f.name, f.start_line, f.end_line));
            }
        }
        for s in &self.suites {
            let depth = s.name.matches('.').count();
            let pad = "    ".repeat(depth);
            let short = s.name.rsplit('.').next().unwrap_or(&s.name);
            out.push_str(&format!("{pad}class {short}:  # lines {}-{}\n", s.start_line, s.end_line));
            for m in &s.members {
                out.push_str(&format!("{pad}    def {}  # lines {}-{}\n", m.name, m.start_line, m.end_line));
            }
        }
        out
    }
}

/// Parsed view of a repository snapshot. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceIndex {
    pub root: PathBuf,
    pub files: Vec<String>,
    pub modules: BTreeMap<String, FileStructure>,
    pub def_index: BTreeMap<String, Vec<String>>,
    pub diagnostics: Vec<String>,
}

fn normalize_rel(path: &Path) -> Option<String> {
    let mut parts = Vec::new();
    for comp in path.components() {
        match comp {
            std::path::Component::Normal(p) => parts.push(p.to_str()?.to_string()),
            std::path::Component::CurDir => {}
            _ => return None,
        }
    }
    Some(parts.join("/"))
}

/// Dotted module path for a repository-relative `.py` file.
///
/// A leading `src/` directory is dropped and `__init__.py` maps to its package.
pub fn module_path_of(rel: &str) -> String {
    let trimmed = rel.strip_suffix(".py").unwrap_or(rel);
    let trimmed = trimmed.strip_prefix("src/").unwrap_or(trimmed);
    let trimmed = trimmed.strip_suffix("/__init__").unwrap_or(trimmed);
    trimmed.replace('/', ".")
}

impl SourceIndex {
    pub fn build(root: impl AsRef<Path>) -> Result<SourceIndex, RepoError> {
        let root = root.as_ref();
        if !root.is_dir() {
            return Err(RepoError::MissingRoot(root.to_path_buf()));
        }
        let mut rels = Vec::new();
        let mut diagnostics = Vec::new();
        let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
            let name = e.file_name().to_string_lossy();
            e.depth() == 0 || !(name.starts_with('.') || name == "__pycache__")
        });
        for entry in walker {
            match entry {
                Ok(e) if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "py") => {
                    let rel = e.path().strip_prefix(root).expect("walk stays under root");
                    match normalize_rel(rel) {
                        Some(r) => rels.push(r),
                        None => diagnostics.push(format!("skipped non-utf8 path {}", rel.display())),
                    }
                }
                Ok(_) => {}
                Err(e) => diagnostics.push(format!("walk error: {e}")),
            }
        }
        rels.sort();

        let parsed: Vec<(String, Result<FileStructure, String>)> = rels
            .into_par_iter()
            .map(|rel| {
                let res = fs::read(root.join(&rel))
                    .map_err(|e| format!("unreadable {rel}: {e}"))
                    .and_then(|bytes| {
                        String::from_utf8(bytes).map_err(|_| format!("unreadable {rel}: not valid UTF-8"))
                    })
                    .map(|text| FileStructure::from_source(&rel, &text));
                (rel, res)
            })
            .collect();

        let mut files = Vec::new();
        let mut modules = BTreeMap::new();
        let mut def_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (rel, res) in parsed {
            match res {
                Ok(structure) => {
                    for name in structure.top_level_names() {
                        let entry = def_index.entry(name.to_string()).or_default();
                        if !entry.contains(&rel) {
                            entry.push(rel.clone());
                        }
                    }
                    files.push(rel.clone());
                    modules.insert(rel, structure);
                }
                Err(msg) => diagnostics.push(msg),
            }
        }
        Ok(SourceIndex { root: root.to_path_buf(), files, modules, def_index, diagnostics })
    }

    /// Files containing at least one test function, in path order.
    pub fn list_test_files(&self) -> Vec<String> {
        self.files.iter().filter(|f| self.modules[*f].has_tests()).cloned().collect()
    }

    /// Files that parsed successfully.
    pub fn parsed_files(&self) -> Vec<String> {
        self.files.iter().filter(|f| self.modules[*f].parse_ok).cloned().collect()
    }

    pub fn extract_structure(&self, file: &str) -> Result<&FileStructure, RepoError> {
        self.modules.get(file).ok_or_else(|| RepoError::NotFound(file.to_string()))
    }

    pub fn contains(&self, file: &str) -> bool {
        self.modules.contains_key(file)
    }

    /// Files defining `name` at top level, plus files whose module path ends with `name`.
    pub fn find_definition(&self, name: &str) -> Vec<String> {
        let name = name.trim();
        if name.is_empty() {
            return Vec::new();
        }
        let mut found: BTreeSet<String> = self.def_index.get(name).into_iter().flatten().cloned().collect();
        let suffix = format!(".{name}");
        for f in &self.files {
            let module = module_path_of(f);
            if module == name || module.ends_with(&suffix) {
                found.insert(f.clone());
            }
        }
        found.into_iter().collect()
    }

    pub fn read_file(&self, file: &str) -> Result<String, RepoError> {
        fs::read_to_string(self.root.join(file)).map_err(|source| RepoError::Io { path: file.to_string(), source })
    }

    pub fn resolve_function(&self, file: &str, suite: Option<&str>, name: &str) -> Option<&FunctionRef> {
        self.modules.get(file)?.find_function(suite, name)
    }

    /// Source text of a function including its decorators.
    pub fn function_source(&self, func: &FunctionRef) -> Result<String, RepoError> {
        let text = self.read_file(&func.file)?;
        Ok(slice_lines(&text, func.decorators_start, func.end_line))
    }

    /// Structure dump document.
    pub fn dump_json(&self) -> serde_json::Value {
        let modules: serde_json::Map<String, serde_json::Value> = self
            .modules
            .iter()
            .map(|(path, s)| {
                let functions: Vec<_> = s
                    .functions
                    .iter()
                    .map(|f| {
                        serde_json::json!({
                            "name": f.name,
                            "qualified_name": f.qualified_name(),
                            "start": f.start_line,
                            "end": f.end_line,
                            "is_test": f.is_test,
                        })
                    })
                    .collect();
                let suites: Vec<_> = s
                    .suites
                    .iter()
                    .map(|su| {
                        serde_json::json!({
                            "name": su.name,
                            "start": su.start_line,
                            "end": su.end_line,
                            "members": su.members.iter().map(|m| m.name.clone()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                let imports: Vec<_> = s.imports.iter().map(|i| i.raw_text.clone()).collect();
                (
                    path.clone(),
                    serde_json::json!({
                        "parse_ok": s.parse_ok,
                        "imports": imports,
                        "functions": functions,
                        "suites": suites,
                    }),
                )
            })
            .collect();
        serde_json::json!({ "files": self.files, "modules": modules })
    }
}

/// Inclusive 1-based line slice, joined with `\n` and newline-terminated.
pub fn slice_lines(text: &str, start: usize, end: usize) -> String {
    let mut out = String::new();
    for line in text.lines().skip(start.saturating_sub(1)).take(end + 1 - start.max(1)) {
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(root: &Path, rel: &str, text: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    #[test]
    fn two_file_index() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.py", "def foo():\n    return 1\n");
        write(dir.path(), "tests/test_a.py", "from a import foo\n\ndef test_foo():\n    assert foo() == 1\n");
        let idx = SourceIndex::build(dir.path()).unwrap();
        assert_eq!(idx.files, vec!["a.py", "tests/test_a.py"]);
        assert_eq!(idx.def_index["foo"], vec!["a.py"]);
        assert_eq!(idx.def_index["test_foo"], vec!["tests/test_a.py"]);
        assert_eq!(idx.list_test_files(), vec!["tests/test_a.py"]);
        assert_eq!(idx.find_definition("foo"), vec!["a.py"]);
        assert!(idx.find_definition("nonexistent").is_empty());
    }

    #[test]
    fn empty_and_missing_roots() {
        let dir = tempfile::tempdir().unwrap();
        let idx = SourceIndex::build(dir.path()).unwrap();
        assert!(idx.files.is_empty());
        assert!(idx.list_test_files().is_empty());
        assert!(matches!(SourceIndex::build(dir.path().join("nope")), Err(RepoError::MissingRoot(_))));
    }

    #[test]
    fn unknown_file_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let idx = SourceIndex::build(dir.path()).unwrap();
        assert!(matches!(idx.extract_structure("x.py"), Err(RepoError::NotFound(_))));
    }

    #[test]
    fn module_name_match() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "pkg/__init__.py", "");
        write(dir.path(), "pkg/utils.py", "X = 1\n");
        write(dir.path(), "src/lib/core.py", "def run(): pass\n");
        let idx = SourceIndex::build(dir.path()).unwrap();
        assert_eq!(idx.find_definition("utils"), vec!["pkg/utils.py"]);
        assert_eq!(idx.find_definition("pkg.utils"), vec!["pkg/utils.py"]);
        assert_eq!(idx.find_definition("pkg"), vec!["pkg/__init__.py"]);
        assert_eq!(idx.find_definition("core"), vec!["src/lib/core.py"]);
        assert_eq!(module_path_of("src/lib/core.py"), "lib.core");
    }

    #[test]
    fn test_ids_and_qualified_names() {
        let s = FileStructure::from_source(
            "t.py",
            "class A:\n    class B:\n        def test_x(self):\n            pass\n",
        );
        let f = &s.functions[0];
        assert_eq!(f.qualified_name(), "A.B.test_x");
        assert_eq!(f.test_id(), "t.py::A::B::test_x");
        assert!(s.find_function(Some("B"), "test_x").is_some());
        assert!(s.find_function(Some("A.B"), "test_x").is_some());
        assert!(s.find_function(Some("C"), "test_x").is_none());
    }

    #[test]
    fn slicing_is_inclusive() {
        assert_eq!(slice_lines("a\nb\nc\n", 2, 3), "b\nc\n");
        assert_eq!(slice_lines("a\nb\nc", 1, 1), "a\n");
    }
}
