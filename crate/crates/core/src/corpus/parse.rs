use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{check_unique, Clause, CorpusError, Form, Item, ItemKind, Justification, Opacity, ThenLink};

pub const CORPUS_EXTENSION: &str = "art";

/// Primitive tokens that are always available and never dependencies.
pub const BUILTINS: [&str; 4] = ["nat", "lit", "set", "prop"];

const KEYWORDS: [&str; 14] = [
    "def",
    "thm",
    "notation",
    "hint",
    "reserve",
    "defblock",
    "then",
    "uses",
    "var",
    "by",
    "auto",
    "for",
    "opaque",
    "transparent",
];

const OPERATOR_CHARS: &str = "+-*/<>=!~^&|%@$?.";

pub(crate) fn is_operator(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| OPERATOR_CHARS.contains(c))
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Shape of generated labels: `__n<digits>` optionally followed by `_<tag>`.
pub(crate) fn is_fresh_label(name: &str) -> bool {
    let Some(rest) = name.strip_prefix("__n") else {
        return false;
    };
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return false;
    }
    let tail = &rest[digits..];
    tail.is_empty() || (tail.starts_with('_') && tail[1..].chars().all(is_ident_char))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Op(String),
    Colon,
    Assign,
    Semi,
    Comma,
    LBrace,
    RBrace,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Op(s) => format!("`{s}`"),
            Tok::Colon => "`:`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
        }
    }
}

fn lex(file: &str, src: &str) -> Result<Vec<(Tok, usize)>, CorpusError> {
    let mut toks = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        let line_no = lineno + 1;
        let mut chars = line.char_indices().peekable();
        while let Some(&(start, c)) = chars.peek() {
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                chars.next();
                continue;
            }
            let tok = match c {
                ':' => {
                    chars.next();
                    if matches!(chars.peek(), Some((_, '='))) {
                        chars.next();
                        Tok::Assign
                    } else {
                        Tok::Colon
                    }
                }
                ';' => {
                    chars.next();
                    Tok::Semi
                }
                ',' => {
                    chars.next();
                    Tok::Comma
                }
                '{' => {
                    chars.next();
                    Tok::LBrace
                }
                '}' => {
                    chars.next();
                    Tok::RBrace
                }
                c if is_ident_start(c) => {
                    let mut end = start;
                    while let Some(&(i, c)) = chars.peek() {
                        if !is_ident_char(c) {
                            break;
                        }
                        end = i + c.len_utf8();
                        chars.next();
                    }
                    Tok::Ident(line[start..end].to_string())
                }
                c if OPERATOR_CHARS.contains(c) => {
                    let mut end = start;
                    while let Some(&(i, c)) = chars.peek() {
                        if !OPERATOR_CHARS.contains(c) {
                            break;
                        }
                        end = i + c.len_utf8();
                        chars.next();
                    }
                    Tok::Op(line[start..end].to_string())
                }
                other => {
                    return Err(CorpusError::Syntax {
                        file: file.to_string(),
                        line: line_no,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            };
            toks.push((tok, line_no));
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map(|(_, l)| *l).unwrap_or(self.last_line)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, CorpusError> {
        Err(CorpusError::Syntax { file: self.file.to_string(), line: self.line(), message: message.into() })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), CorpusError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let found = t.describe();
                self.err(format!("expected {}, found {found}", tok.describe()))
            }
            None => self.err(format!("expected {}, found end of file", tok.describe())),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), CorpusError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    /// A user-chosen name: no keywords, no builtins, no reserved prefix.
    fn name(&mut self) -> Result<String, CorpusError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                if KEYWORDS.contains(&s.as_str()) || BUILTINS.contains(&s.as_str()) {
                    return self.err(format!("`{s}` is reserved and cannot be used as a name"));
                }
                if s.starts_with("__") && !is_fresh_label(&s) {
                    return self.err(format!("`{s}`: the `__` prefix is reserved for generated labels"));
                }
                self.pos += 1;
                Ok(s)
            }
            Some(t) => self.err(format!("expected a name, found {}", t.describe())),
            None => self.err("expected a name, found end of file"),
        }
    }

    /// A symbol reference: an identifier, builtin or notation token.
    fn reference(&mut self) -> Result<String, CorpusError> {
        match self.peek().cloned() {
            Some(Tok::Op(s)) => {
                self.pos += 1;
                Ok(s)
            }
            Some(Tok::Ident(s)) if BUILTINS.contains(&s.as_str()) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.name(),
        }
    }

    /// An identifier reference that may be a builtin but not a notation.
    fn ident_ref(&mut self) -> Result<String, CorpusError> {
        match self.peek() {
            Some(Tok::Op(s)) => {
                let s = s.clone();
                self.err(format!("notation token `{s}` is not allowed here"))
            }
            _ => self.reference(),
        }
    }

    fn at_ref(&self) -> bool {
        match self.peek() {
            Some(Tok::Op(_)) => true,
            Some(Tok::Ident(s)) => !KEYWORDS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn opacity(&mut self) -> Option<Opacity> {
        if self.eat_keyword("opaque") {
            Some(Opacity::Opaque)
        } else if self.eat_keyword("transparent") {
            Some(Opacity::Transparent)
        } else {
            None
        }
    }

    fn def(&mut self, index: usize) -> Result<Item, CorpusError> {
        self.keyword("def")?;
        let opacity = self.opacity();
        let name = self.name()?;
        let mut types = Vec::new();
        if self.peek() == Some(&Tok::Colon) {
            self.pos += 1;
            while self.at_ref() {
                types.push(self.reference()?);
            }
        }
        self.expect(Tok::Assign)?;
        let mut body = Vec::new();
        while self.at_ref() {
            body.push(self.reference()?);
        }
        self.expect(Tok::Semi)?;
        Ok(self.item(name, ItemKind::Definition, opacity, Justification::None, Form::Def { types, body }, index))
    }

    fn thm(&mut self, index: usize, link: Option<ThenLink>) -> Result<Item, CorpusError> {
        self.keyword("thm")?;
        let opacity = self.opacity();
        let (name, anonymous) = if self.peek() == Some(&Tok::Colon) {
            (format!("?{}#{}", self.file, index), true)
        } else {
            (self.name()?, false)
        };
        self.expect(Tok::Colon)?;
        let mut clauses = Vec::new();
        loop {
            if self.eat_keyword("uses") {
                clauses.push(Clause::Uses(self.reference()?));
            } else if self.eat_keyword("var") {
                clauses.push(Clause::Var(self.name()?));
            } else {
                break;
            }
        }
        let justification = if self.eat_keyword("by") {
            if self.eat_keyword("auto") {
                if link.is_some() {
                    return self.err("a `then` statement cannot also be justified `by auto`");
                }
                Justification::Auto
            } else {
                let mut refs = vec![self.name()?];
                while matches!(self.peek(), Some(Tok::Ident(_))) {
                    refs.push(self.name()?);
                }
                Justification::ByRefs(refs)
            }
        } else {
            Justification::None
        };
        self.expect(Tok::Semi)?;
        let mut item = self.item(name, ItemKind::Theorem, opacity, justification, Form::Thm { clauses }, index);
        item.anonymous = anonymous;
        item.link = link;
        Ok(item)
    }

    fn notation(&mut self, index: usize) -> Result<Item, CorpusError> {
        self.keyword("notation")?;
        let name = match self.peek() {
            Some(Tok::Op(s)) => s.clone(),
            _ => return self.err("a notation name must be an operator token such as `+` or `<=`"),
        };
        self.pos += 1;
        self.keyword("for")?;
        let target = self.ident_ref()?;
        self.expect(Tok::Semi)?;
        Ok(self.item(name, ItemKind::Notation, None, Justification::None, Form::Notation { target }, index))
    }

    fn hint(&mut self, index: usize) -> Result<Item, CorpusError> {
        self.keyword("hint")?;
        let name = self.name()?;
        self.keyword("uses")?;
        let mut symbols = vec![self.ident_ref()?];
        while matches!(self.peek(), Some(Tok::Ident(_))) {
            symbols.push(self.ident_ref()?);
        }
        self.expect(Tok::Semi)?;
        Ok(self.item(name, ItemKind::Hint, None, Justification::None, Form::Hint { symbols }, index))
    }

    fn reserve(&mut self, index: usize) -> Result<Item, CorpusError> {
        self.keyword("reserve")?;
        let mut segments = Vec::new();
        loop {
            let mut vars = vec![self.name()?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                vars.push(self.name()?);
            }
            self.expect(Tok::Colon)?;
            let ty = self.ident_ref()?;
            segments.extend(vars.into_iter().map(|v| (v, ty.clone())));
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        let name = segments[0].0.clone();
        Ok(self.item(name, ItemKind::Reservation, None, Justification::None, Form::Reserve { segments }, index))
    }

    fn defblock(&mut self, index: usize) -> Result<Item, CorpusError> {
        self.keyword("defblock")?;
        self.expect(Tok::LBrace)?;
        let mut members = Vec::new();
        while self.is_keyword("def") {
            members.push(self.def(index)?);
        }
        if members.is_empty() {
            return self.err("a defblock must contain at least one def");
        }
        self.expect(Tok::RBrace)?;
        if self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
        let opacity =
            if members.iter().all(|m| m.opacity == Opacity::Opaque) { Opacity::Opaque } else { Opacity::Transparent };
        let name = members[0].name.clone();
        let mut item =
            self.item(name, ItemKind::Definition, Some(opacity), Justification::None, Form::Block { members }, index);
        item.opacity_keyword = false;
        Ok(item)
    }

    fn item(
        &self,
        name: String,
        kind: ItemKind,
        opacity: Option<Opacity>,
        justification: Justification,
        form: Form,
        index: usize,
    ) -> Item {
        let default = if kind == ItemKind::Theorem { Opacity::Opaque } else { Opacity::Transparent };
        let mut item = Item {
            name,
            kind,
            statement_symbols: BTreeSet::new(),
            justification,
            body_symbols: BTreeSet::new(),
            opacity: opacity.unwrap_or(default),
            source_file: self.file.to_string(),
            index_in_file: index,
            vars: BTreeSet::new(),
            notations: BTreeSet::new(),
            anonymous: false,
            opacity_keyword: opacity.is_some(),
            link: None,
            form,
        };
        item.refresh_symbols();
        item
    }
}

/// Parses the text of one `.art` file. `file` is the name recorded as each
/// item's `source_file`.
pub fn parse_source(file: &str, src: &str) -> Result<Vec<Item>, CorpusError> {
    let toks = lex(file, src)?;
    let last_line = toks.last().map(|(_, l)| *l).unwrap_or(1);
    let mut p = Parser { file, toks, pos: 0, last_line };
    let mut items: Vec<Item> = Vec::new();
    while p.peek().is_some() {
        let index = items.len();
        let item = if p.eat_keyword("then") {
            if !p.is_keyword("thm") {
                return p.err("`then` must be followed by `thm`");
            }
            let previous = items.last().map(|i| i.name.clone());
            p.thm(index, Some(ThenLink { previous }))?
        } else if p.is_keyword("thm") {
            p.thm(index, None)?
        } else if p.is_keyword("def") {
            p.def(index)?
        } else if p.is_keyword("defblock") {
            p.defblock(index)?
        } else if p.is_keyword("notation") {
            p.notation(index)?
        } else if p.is_keyword("hint") {
            p.hint(index)?
        } else if p.is_keyword("reserve") {
            p.reserve(index)?
        } else {
            let found = p.peek().map(|t| t.describe()).unwrap_or_default();
            return p.err(format!("expected a statement, found {found}"));
        };
        items.push(item);
    }
    check_unique(&items)?;
    Ok(items)
}

pub fn parse_file(root: &Path, path: &Path) -> Result<Vec<Item>, CorpusError> {
    let rel = relative_name(root, path);
    let src = fs::read_to_string(path)
        .map_err(|e| CorpusError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_source(&rel, &src)
}

fn relative_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    let io = |e: std::io::Error| CorpusError::Io { path: dir.display().to_string(), message: e.to_string() };
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == CORPUS_EXTENSION) {
            out.push(path);
        }
    }
    Ok(())
}

/// Parses every `.art` file below `root`, in lexicographic path order.
pub fn parse_corpus(root: &Path) -> Result<Vec<Item>, CorpusError> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    let mut named: Vec<(String, PathBuf)> = files.into_iter().map(|p| (relative_name(root, &p), p)).collect();
    named.sort();
    let mut items = Vec::new();
    for (_, path) in &named {
        items.extend(parse_file(root, path)?);
    }
    check_unique(&items)?;
    Ok(items)
}
