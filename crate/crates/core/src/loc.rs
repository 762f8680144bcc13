use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;

/// A source position: the enclosing function plus `file:line`.
///
/// Renders as `file:line`, the same form used for frame locations in
/// goroutine profiles. Ordering is by file, then line, then function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceLoc {
    pub function: String,
    pub file: String,
    pub line: u32,
}

impl SourceLoc {
    pub fn new(function: impl Into<String>, file: impl Into<String>, line: u32) -> Self {
        Self {
            function: function.into(),
            file: file.into(),
            line,
        }
    }

    /// Same position, attributed to a different function.
    pub fn with_function(&self, function: impl Into<String>) -> Self {
        Self {
            function: function.into(),
            file: self.file.clone(),
            line: self.line,
        }
    }

    /// True when `file` and `line` match, regardless of function.
    pub fn same_position(&self, other: &SourceLoc) -> bool {
        self.line == other.line && self.file == other.file
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl PartialOrd for SourceLoc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SourceLoc {
    fn cmp(&self, other: &Self) -> Ordering {
        self.file
            .cmp(&other.file)
            .then(self.line.cmp(&other.line))
            .then_with(|| self.function.cmp(&other.function))
    }
}
