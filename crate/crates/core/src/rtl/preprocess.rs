use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{Diagnostic, RtlError};

/// Origin (file, 1-based line) of every line of preprocessed text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineMap {
    lines: Vec<(Arc<str>, usize)>,
}

impl LineMap {
    pub fn origin(&self, line: usize) -> Option<(&str, usize)> {
        self.lines
            .get(line.checked_sub(1)?)
            .map(|(f, l)| (f.as_ref(), *l))
    }

    /// `file:line` for a line of preprocessed text.
    pub fn span(&self, line: usize) -> String {
        match self.origin(line) {
            Some((f, l)) => format!("{f}:{l}"),
            None => format!("?:{line}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Preprocessed {
    pub text: String,
    pub map: LineMap,
    pub warnings: Vec<Diagnostic>,
}

impl Preprocessed {
    /// Text with no preprocessing; lines map to themselves.
    pub fn plain(file: &str, text: &str) -> Self {
        let f: Arc<str> = Arc::from(file);
        let n = text.split_inclusive('\n').count().max(1);
        Preprocessed {
            text: text.to_string(),
            map: LineMap {
                lines: (1..=n).map(|l| (f.clone(), l)).collect(),
            },
            warnings: Vec::new(),
        }
    }
}

/// Directives that are dropped silently.
const BENIGN: &[&str] = &[
    "timescale",
    "default_nettype",
    "resetall",
    "celldefine",
    "endcelldefine",
];
/// Directives whose text is dropped with a warning; conditional branches
/// are all kept.
const UNSUPPORTED: &[&str] = &["define", "undef", "ifdef", "ifndef", "elsif", "else", "endif"];

fn directive(line: &str) -> Option<(&str, &str)> {
    let rest = line.trim_start().strip_prefix('`')?;
    let end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    Some((&rest[..end], rest[end..].trim()))
}

fn include_target(arg: &str) -> Option<&str> {
    let arg = arg.trim();
    let inner = arg.strip_prefix('"')?;
    inner.find('"').map(|e| &inner[..e])
}

struct Expander<'a> {
    include_dirs: &'a [PathBuf],
    out: Preprocessed,
}

impl Expander<'_> {
    fn resolve(&self, including: &Path, target: &str) -> Option<PathBuf> {
        let base = including.parent().unwrap_or(Path::new("."));
        std::iter::once(base.join(target))
            .chain(self.include_dirs.iter().map(|d| d.join(target)))
            .find(|p| p.is_file())
    }

    fn expand(&mut self, path: &Path, stack: &mut Vec<PathBuf>) -> Result<(), RtlError> {
        let canon = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
        if let Some(pos) = stack.iter().position(|p| *p == canon) {
            let mut cycle: Vec<String> = stack[pos..].iter().map(|p| p.display().to_string()).collect();
            cycle.push(canon.display().to_string());
            return Err(RtlError::IncludeCycle(cycle));
        }
        let text = std::fs::read_to_string(path).map_err(|e| RtlError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        stack.push(canon);
        let file: Arc<str> = Arc::from(path.display().to_string());
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let lineno = i + 1;
            match directive(line) {
                Some(("include", arg)) => {
                    let span = format!("{file}:{lineno}");
                    let target = include_target(arg).ok_or_else(|| RtlError::Parse {
                        file: file.to_string(),
                        line: lineno,
                        column: 1,
                        token: "`include".into(),
                        message: "expected a quoted file name".into(),
                    })?;
                    let resolved =
                        self.resolve(path, target)
                            .ok_or_else(|| RtlError::MissingInclude {
                                including: span,
                                target: target.to_string(),
                            })?;
                    self.expand(&resolved, stack)?;
                    if !self.out.text.is_empty() && !self.out.text.ends_with('\n') {
                        self.out.text.push('\n');
                    }
                }
                Some((name, _)) if BENIGN.contains(&name) || UNSUPPORTED.contains(&name) => {
                    if UNSUPPORTED.contains(&name) {
                        self.out.warnings.push(Diagnostic {
                            span: format!("{file}:{lineno}"),
                            message: format!("unsupported directive `{name} ignored"),
                        });
                    }
                    self.push_line(if line.ends_with('\n') { "\n" } else { "" }, &file, lineno);
                }
                _ => self.push_line(line, &file, lineno),
            }
        }
        stack.pop();
        Ok(())
    }

    fn push_line(&mut self, line: &str, file: &Arc<str>, lineno: usize) {
        self.out.text.push_str(line);
        self.out.map.lines.push((file.clone(), lineno));
    }
}

/// Inlines `include directives of one file, recursively.
pub fn preprocess_file(path: &Path, include_dirs: &[PathBuf]) -> Result<Preprocessed, RtlError> {
    let mut ex = Expander {
        include_dirs,
        out: Preprocessed::default(),
    };
    ex.expand(path, &mut Vec::new())?;
    Ok(ex.out)
}

/// Preprocesses each entry file independently.
pub fn preprocess_includes(
    entry_files: &[PathBuf],
    include_dirs: &[PathBuf],
) -> Result<Vec<Preprocessed>, RtlError> {
    entry_files
        .iter()
        .map(|f| preprocess_file(f, include_dirs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn inlines_include_in_place() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "b.v", "wire b;\n");
        let a = write(d.path(), "a.v", "module a;\n`include \"b.v\"\nendmodule\n");
        let out = preprocess_file(&a, &[]).unwrap();
        assert_eq!(out.text, "module a;\nwire b;\nendmodule\n");
        assert!(out.map.span(2).ends_with("b.v:1"));
        assert!(out.map.span(3).ends_with("a.v:3"));
    }

    #[test]
    fn include_dirs_are_searched() {
        let d = tempfile::tempdir().unwrap();
        let inc = d.path().join("inc");
        std::fs::create_dir(&inc).unwrap();
        write(&inc, "defs.vh", "localparam W = 8;");
        let a = write(d.path(), "a.v", "`include \"defs.vh\"\n");
        let out = preprocess_file(&a, &[inc]).unwrap();
        assert_eq!(out.text, "localparam W = 8;\n");
    }

    #[test]
    fn self_include_is_cycle() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.v", "`include \"a.v\"\n");
        assert!(matches!(preprocess_file(&a, &[]), Err(RtlError::IncludeCycle(c)) if c.len() == 2));
    }

    #[test]
    fn missing_include_names_path() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.v", "\n`include \"nope.v\"\n");
        match preprocess_file(&a, &[]) {
            Err(RtlError::MissingInclude { including, target }) => {
                assert!(including.ends_with("a.v:2"));
                assert_eq!(target, "nope.v");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_includes_is_identity() {
        let d = tempfile::tempdir().unwrap();
        let text = "module m(input a);\n  // x\nendmodule";
        let a = write(d.path(), "m.v", text);
        let out = preprocess_file(&a, &[]).unwrap();
        assert_eq!(out.text, text);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn define_warns_and_blanks() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "m.v", "`define W 8\n`timescale 1ns/1ps\nwire x;\n");
        let out = preprocess_file(&a, &[]).unwrap();
        assert_eq!(out.text, "\n\nwire x;\n");
        assert_eq!(out.warnings.len(), 1);
    }
}
