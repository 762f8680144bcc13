use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{ArmOp, ChanExpr, Count, Function, SelectArm, SimProgram, Stmt, StmtKind, WaitKind};
use crate::SourceLoc;

const DEFAULT_ENTRY: &str = "main";
const DEFAULT_FILE: &str = "main.go";

/// Load error with a 1-based line and column in the IR text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown channel identifier `{0}`")]
    UnknownChannel(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{func}` takes {expected} argument(s), got {found}")]
    Arity { func: String, expected: usize, found: usize },
    #[error("undeclared token `{0}`")]
    UnknownToken(String),
    #[error("undeclared parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate source location {0}")]
    DuplicateLoc(String),
    #[error("function `{0}` defined twice")]
    DuplicateFunction(String),
    #[error("missing entry function")]
    MissingEntry,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.kind)
    }
}

impl core::error::Error for ParseError {}

/// Parses and resolves IR text into a [`SimProgram`].
pub fn load_program(text: &str) -> Result<SimProgram, ParseError> {
    let tokens = lex(text)?;
    Parser::new(tokens).program()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    Eq,
    Newline,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

/// A `<file>:<line>` or `:<line>` pin at the start of a physical line.
#[derive(Debug, Clone)]
struct Pin {
    file: Option<String>,
    line: u32,
}

struct Lexed {
    tokens: Vec<Token>,
    pins: BTreeMap<usize, Pin>,
}

fn parse_pin(word: &str) -> Option<Pin> {
    let (file, line) = word.rsplit_once(':')?;
    if line.is_empty() || !line.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let line: u32 = line.parse().ok()?;
    if line == 0 {
        return None;
    }
    Some(Pin {
        file: (!file.is_empty()).then(|| file.to_string()),
        line,
    })
}

fn lex(text: &str) -> Result<Lexed, ParseError> {
    let mut tokens = Vec::new();
    let mut pins = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut first = true;
        let mut cursor = 0;
        let bytes = content.as_bytes();
        while cursor < bytes.len() {
            let c = bytes[cursor];
            if c.is_ascii_whitespace() {
                cursor += 1;
                continue;
            }
            let col = cursor + 1;
            let tok = match c {
                b'{' => {
                    cursor += 1;
                    Tok::LBrace
                }
                b'}' => {
                    cursor += 1;
                    Tok::RBrace
                }
                b'=' => {
                    cursor += 1;
                    Tok::Eq
                }
                _ => {
                    let start = cursor;
                    while cursor < bytes.len()
                        && !bytes[cursor].is_ascii_whitespace()
                        && !matches!(bytes[cursor], b'{' | b'}' | b'=')
                    {
                        cursor += 1;
                    }
                    let word = &content[start..cursor];
                    if first {
                        if let Some(pin) = parse_pin(word) {
                            pins.insert(line_no, pin);
                            first = false;
                            continue;
                        }
                    }
                    if word.contains(':') {
                        return Err(ParseError {
                            line: line_no,
                            col,
                            kind: ParseErrorKind::Syntax(format!(
                                "location pin `{word}` must start the line"
                            )),
                        });
                    }
                    Tok::Word(word.to_string())
                }
            };
            first = false;
            tokens.push(Token { tok, line: line_no, col });
        }
        tokens.push(Token {
            tok: Tok::Newline,
            line: line_no,
            col: content.len() + 1,
        });
    }
    Ok(Lexed { tokens, pins })
}

struct PendingCall {
    func: String,
    args: usize,
    line: usize,
    col: usize,
}

struct Parser {
    tokens: Vec<Token>,
    pins: BTreeMap<usize, Pin>,
    pos: usize,
    current_file: String,
    current_func: String,
    scope: BTreeSet<String>,
    tokens_decl: BTreeMap<String, bool>,
    params_decl: BTreeMap<String, u64>,
    seen_locs: BTreeSet<(String, u32)>,
    calls: Vec<PendingCall>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(lexed: Lexed) -> Self {
        Self {
            tokens: lexed.tokens,
            pins: lexed.pins,
            pos: 0,
            current_file: DEFAULT_FILE.to_string(),
            current_func: String::new(),
            scope: BTreeSet::new(),
            tokens_decl: BTreeMap::new(),
            params_decl: BTreeMap::new(),
            seen_locs: BTreeSet::new(),
            calls: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn last_pos(&self) -> (usize, usize) {
        self.tokens
            .last()
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn error_at(&self, tok: Option<&Token>, kind: ParseErrorKind) -> ParseError {
        let (line, col) = tok.map(|t| (t.line, t.col)).unwrap_or_else(|| self.last_pos());
        ParseError { line, col, kind }
    }

    fn syntax<T>(&self, tok: Option<&Token>, msg: impl Into<String>) -> PResult<T> {
        Err(self.error_at(tok, ParseErrorKind::Syntax(msg.into())))
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().map(|t| &t.tok), Some(Tok::Newline)) {
            self.pos += 1;
        }
    }

    fn at_line_end(&self) -> bool {
        matches!(self.peek().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::RBrace))
    }

    fn word(&mut self, what: &str) -> PResult<(String, Token)> {
        match self.next() {
            Some(t @ Token { tok: Tok::Word(_), .. }) => {
                let Tok::Word(w) = &t.tok else { unreachable!() };
                Ok((w.clone(), t))
            }
            other => self.syntax(other.as_ref(), format!("expected {what}")),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> PResult<Token> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t),
            other => self.syntax(other.as_ref(), format!("expected {what}")),
        }
    }

    fn end_of_line(&mut self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(Token { tok: Tok::Newline, .. }) => {
                self.pos += 1;
                Ok(())
            }
            Some(Token { tok: Tok::RBrace, .. }) => Ok(()),
            Some(t) => {
                let t = t.clone();
                self.syntax(Some(&t), "unexpected trailing input")
            }
        }
    }

    fn program(mut self) -> PResult<SimProgram> {
        let mut name: Option<String> = None;
        let mut entry: Option<(String, Token)> = None;
        let mut functions: BTreeMap<String, Function> = BTreeMap::new();
        loop {
            self.skip_newlines();
            let Some(tok) = self.peek().cloned() else { break };
            let (kw, kw_tok) = match &tok.tok {
                Tok::Word(w) => (w.clone(), tok.clone()),
                _ => return self.syntax(Some(&tok), "expected a top-level declaration"),
            };
            self.pos += 1;
            match kw.as_str() {
                "program" => {
                    let (n, _) = self.word("program name")?;
                    name = Some(n);
                    self.end_of_line()?;
                }
                "file" => {
                    let (f, _) = self.word("file path")?;
                    self.current_file = f;
                    self.end_of_line()?;
                }
                "token" => {
                    let (n, _) = self.word("token name")?;
                    self.expect(Tok::Eq, "`=`")?;
                    let (v, vt) = self.word("`true` or `false`")?;
                    let value = match v.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return self.syntax(Some(&vt), "expected `true` or `false`"),
                    };
                    self.tokens_decl.insert(n, value);
                    self.end_of_line()?;
                }
                "param" => {
                    let (n, _) = self.word("parameter name")?;
                    self.expect(Tok::Eq, "`=`")?;
                    let (v, vt) = self.word("integer")?;
                    let Ok(value) = v.parse::<u64>() else {
                        return self.syntax(Some(&vt), "expected a non-negative integer");
                    };
                    self.params_decl.insert(n, value);
                    self.end_of_line()?;
                }
                "entry" => {
                    let fname = match self.peek().map(|t| &t.tok) {
                        Some(Tok::Word(w)) => {
                            let w = w.clone();
                            self.pos += 1;
                            w
                        }
                        _ => DEFAULT_ENTRY.to_string(),
                    };
                    if entry.is_some() {
                        return self.syntax(Some(&kw_tok), "entry declared twice");
                    }
                    entry = Some((fname.clone(), kw_tok.clone()));
                    if matches!(self.peek().map(|t| &t.tok), Some(Tok::LBrace)) {
                        let func = self.function_body(fname, Vec::new())?;
                        self.define(&mut functions, func, &kw_tok)?;
                    } else {
                        self.end_of_line()?;
                    }
                }
                "func" => {
                    let (fname, _) = self.word("function name")?;
                    let mut params = Vec::new();
                    while let Some(Tok::Word(p)) = self.peek().map(|t| &t.tok) {
                        params.push(p.clone());
                        self.pos += 1;
                    }
                    let func = self.function_body(fname, params)?;
                    self.define(&mut functions, func, &kw_tok)?;
                }
                _ => return self.syntax(Some(&kw_tok), format!("unknown declaration `{kw}`")),
            }
        }

        let Some((entry, entry_tok)) = entry else {
            let (line, col) = self.last_pos();
            return Err(ParseError { line, col, kind: ParseErrorKind::MissingEntry });
        };
        if !functions.contains_key(&entry) {
            return Err(self.error_at(Some(&entry_tok), ParseErrorKind::MissingEntry));
        }
        if !functions[&entry].params.is_empty() {
            return self.syntax(Some(&entry_tok), "entry function cannot take parameters");
        }
        for call in &self.calls {
            let Some(func) = functions.get(&call.func) else {
                return Err(ParseError {
                    line: call.line,
                    col: call.col,
                    kind: ParseErrorKind::UnknownFunction(call.func.clone()),
                });
            };
            if func.params.len() != call.args {
                return Err(ParseError {
                    line: call.line,
                    col: call.col,
                    kind: ParseErrorKind::Arity {
                        func: call.func.clone(),
                        expected: func.params.len(),
                        found: call.args,
                    },
                });
            }
        }
        Ok(SimProgram {
            name: name.unwrap_or_else(|| entry.clone()),
            entry,
            functions,
            tokens: self.tokens_decl,
            params: self.params_decl,
        })
    }

    fn define(
        &self,
        functions: &mut BTreeMap<String, Function>,
        func: Function,
        at: &Token,
    ) -> PResult<()> {
        if functions.contains_key(&func.name) {
            return Err(self.error_at(Some(at), ParseErrorKind::DuplicateFunction(func.name)));
        }
        functions.insert(func.name.clone(), func);
        Ok(())
    }

    fn function_body(&mut self, name: String, params: Vec<String>) -> PResult<Function> {
        self.current_func = name.clone();
        self.scope = params.iter().cloned().collect();
        let body = self.block()?;
        self.end_of_line()?;
        Ok(Function { name, params, body })
    }

    /// `{ stmt* }`, braces included.
    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            match self.peek() {
                None => return self.syntax(None, "unterminated block"),
                Some(Token { tok: Tok::RBrace, .. }) => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(_) => out.push(self.stmt()?),
            }
        }
    }

    fn loc_for(&mut self, tok: &Token) -> PResult<SourceLoc> {
        let (file, line) = match self.pins.get(&tok.line) {
            Some(pin) => {
                if let Some(f) = &pin.file {
                    self.current_file = f.clone();
                }
                (self.current_file.clone(), pin.line)
            }
            None => (self.current_file.clone(), tok.line as u32),
        };
        if !self.seen_locs.insert((file.clone(), line)) {
            return Err(self.error_at(
                Some(tok),
                ParseErrorKind::DuplicateLoc(format!("{file}:{line}")),
            ));
        }
        Ok(SourceLoc::new(self.current_func.clone(), file, line))
    }

    fn use_var(&mut self, what: &str) -> PResult<String> {
        let (name, tok) = self.word(what)?;
        if !self.scope.contains(&name) {
            return Err(self.error_at(Some(&tok), ParseErrorKind::UnknownChannel(name)));
        }
        Ok(name)
    }

    fn declare_var(&mut self) -> PResult<String> {
        let (name, tok) = self.word("variable name")?;
        if name.contains('(') || name.bytes().next().is_some_and(|b| b.is_ascii_digit()) {
            return self.syntax(Some(&tok), format!("invalid variable name `{name}`"));
        }
        self.scope.insert(name.clone());
        Ok(name)
    }

    fn count_word(&self, word: &str, tok: &Token) -> PResult<Count> {
        if word.bytes().all(|b| b.is_ascii_digit()) {
            return match word.parse() {
                Ok(n) => Ok(Count::Lit(n)),
                Err(_) => self.syntax(Some(tok), "count out of range"),
            };
        }
        if !self.params_decl.contains_key(word) {
            return Err(self.error_at(Some(tok), ParseErrorKind::UnknownParam(word.to_string())));
        }
        Ok(Count::Param(word.to_string()))
    }

    fn count(&mut self) -> PResult<Count> {
        let (w, tok) = self.word("count")?;
        self.count_word(&w, &tok)
    }

    fn chan_expr(&mut self) -> PResult<ChanExpr> {
        let (w, tok) = self.word("channel")?;
        if let Some(inner) = w.strip_prefix("after(").and_then(|r| r.strip_suffix(')')) {
            return Ok(ChanExpr::After(self.count_word(inner, &tok)?));
        }
        if !self.scope.contains(&w) {
            return Err(self.error_at(Some(&tok), ParseErrorKind::UnknownChannel(w)));
        }
        Ok(ChanExpr::Var(w))
    }

    fn optional_value(&mut self) -> PResult<i64> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                let tok = self.next().unwrap();
                if w == "nil" {
                    return Ok(0);
                }
                match w.parse::<i64>() {
                    Ok(v) => Ok(v),
                    Err(_) => self.syntax(Some(&tok), "expected an integer value or `nil`"),
                }
            }
            _ => Ok(0),
        }
    }

    fn call_args(&mut self, kw: &Token) -> PResult<(String, Vec<String>)> {
        let (func, ftok) = self.word("function name")?;
        let mut args = Vec::new();
        while !self.at_line_end() {
            args.push(self.use_var("argument")?);
        }
        let _ = kw;
        self.calls.push(PendingCall {
            func: func.clone(),
            args: args.len(),
            line: ftok.line,
            col: ftok.col,
        });
        Ok((func, args))
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let (kw, tok) = self.word("statement")?;
        let loc = self.loc_for(&tok)?;
        let kind = match kw.as_str() {
            "make" => {
                let var = self.declare_var()?;
                let capacity = if self.at_line_end() { Count::Lit(0) } else { self.count()? };
                StmtKind::MakeChan { var, capacity }
            }
            "nil" => StmtKind::NilChan { var: self.declare_var()? },
            "send" => {
                let chan = self.chan_expr()?;
                let value = self.optional_value()?;
                StmtKind::Send { chan, value }
            }
            "recv" => StmtKind::Recv { chan: self.chan_expr()? },
            "close" => StmtKind::Close { var: self.use_var("channel")? },
            "go" => {
                let (func, args) = self.call_args(&tok)?;
                StmtKind::Spawn { func, args }
            }
            "call" => {
                let (func, args) = self.call_args(&tok)?;
                StmtKind::Call { func, args }
            }
            "range" => {
                let var = self.use_var("channel")?;
                let body = self.block()?;
                StmtKind::RangeOverChan { var, body }
            }
            "if" => {
                let (cond, ctok) = self.word("token")?;
                let (negated, cond) = match cond.strip_prefix('!') {
                    Some(rest) => (true, rest.to_string()),
                    None => (false, cond),
                };
                if !self.tokens_decl.contains_key(&cond) {
                    return Err(self.error_at(Some(&ctok), ParseErrorKind::UnknownToken(cond)));
                }
                let then_body = self.block()?;
                let else_body = match self.peek().map(|t| &t.tok) {
                    Some(Tok::Word(w)) if w == "else" => {
                        self.pos += 1;
                        self.block()?
                    }
                    _ => Vec::new(),
                };
                StmtKind::If { cond, negated, then_body, else_body }
            }
            "for" => {
                let count = match self.peek().map(|t| &t.tok) {
                    Some(Tok::LBrace) => None,
                    _ => Some(self.count()?),
                };
                let body = self.block()?;
                StmtKind::ForLoop { count, body }
            }
            "select" => self.select()?,
            "return" => StmtKind::Return,
            "sleep" => StmtKind::Sleep { ticks: self.count()? },
            "after" => {
                let var = self.declare_var()?;
                StmtKind::After { var, ticks: self.count()? }
            }
            "tick" => {
                let var = self.declare_var()?;
                StmtKind::Ticker { var, period: self.count()? }
            }
            "ctx" => {
                let var = self.declare_var()?;
                let cancel_at = if self.at_line_end() { None } else { Some(self.count()?) };
                StmtKind::Context { var, cancel_at }
            }
            "cancel" => StmtKind::Cancel { var: self.use_var("context")? },
            "done" => StmtKind::CtxDoneWait { var: self.use_var("context")? },
            "iowait" | "syscall" | "condwait" | "semacquire" => {
                let kind = match kw.as_str() {
                    "iowait" => WaitKind::IoWait,
                    "syscall" => WaitKind::Syscall,
                    "condwait" => WaitKind::CondWait,
                    _ => WaitKind::SemAcquire,
                };
                let (token, _) = self.word("wait token")?;
                StmtKind::Wait { kind, token }
            }
            "release" => StmtKind::Release { token: self.word("wait token")?.0 },
            _ => return self.syntax(Some(&tok), format!("unknown statement `{kw}`")),
        };
        self.end_of_line()?;
        Ok(Stmt { loc, kind })
    }

    fn select(&mut self) -> PResult<StmtKind> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut arms = Vec::new();
        let mut default = None;
        loop {
            self.skip_newlines();
            let Some(tok) = self.peek().cloned() else {
                return self.syntax(None, "unterminated select");
            };
            if tok.tok == Tok::RBrace {
                self.pos += 1;
                break;
            }
            let (kw, kw_tok) = self.word("select arm")?;
            let op = match kw.as_str() {
                "recv" => Some(ArmOp::Recv { chan: self.chan_expr()? }),
                "send" => {
                    let chan = self.chan_expr()?;
                    let value = self.optional_value()?;
                    Some(ArmOp::Send { chan, value })
                }
                "default" => None,
                _ => return self.syntax(Some(&kw_tok), format!("unknown select arm `{kw}`")),
            };
            let body = if matches!(self.peek().map(|t| &t.tok), Some(Tok::LBrace)) {
                self.block()?
            } else {
                Vec::new()
            };
            self.end_of_line()?;
            match op {
                Some(op) => arms.push(SelectArm { op, body }),
                None if default.is_some() => {
                    return self.syntax(Some(&kw_tok), "select has two default arms")
                }
                None => default = Some(body),
            }
        }
        Ok(StmtKind::Select { arms, default })
    }
}
