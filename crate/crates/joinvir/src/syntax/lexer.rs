use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Fresh(String, u64),
    Int(i64),
    Str(String),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Fresh(s, i) => format!("identifier `{}#{}`", s, i),
            Tok::Int(i) => format!("integer `{}`", i),
            Tok::Str(s) => format!("string {:?}", s),
            Tok::Kw(k) => format!("`{}`", k),
            Tok::Sym(s) => format!("`{}`", s),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub const KEYWORDS: &[&str] = &["def", "in", "and", "let", "return", "to", "if", "then", "else", "T", "HOLE"];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, column: tc });
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                s.push(chars[i]);
                advance!();
            }
            // `x#3` is a fresh name; `x #3` is a name followed by a comment.
            if i + 1 < chars.len() && chars[i] == '#' && chars[i + 1].is_ascii_digit() {
                advance!();
                let mut d = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    d.push(chars[i]);
                    advance!();
                }
                let idx = d.parse::<u64>().map_err(|_| SyntaxError::new(tl, tc, vec!["fresh index".into()], d.clone()))?;
                push(&mut out, Tok::Fresh(s, idx));
                continue;
            }
            match KEYWORDS.iter().find(|k| **k == s) {
                Some(k) => push(&mut out, Tok::Kw(k)),
                None => push(&mut out, Tok::Ident(s)),
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit()) {
            let mut s = String::new();
            s.push(c);
            advance!();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                advance!();
            }
            let v = s.parse::<i64>().map_err(|_| SyntaxError::new(tl, tc, vec!["integer".into()], s.clone()))?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c == '"' {
            advance!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::new(tl, tc, vec!["closing `\"`".into()], "end of input".into()));
                }
                let d = chars[i];
                advance!();
                match d {
                    '"' => break,
                    '\\' => {
                        if i >= chars.len() {
                            return Err(SyntaxError::new(line, col, vec!["escape".into()], "end of input".into()));
                        }
                        let e = chars[i];
                        advance!();
                        match e {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            other => s.push(other),
                        }
                    }
                    other => s.push(other),
                }
            }
            push(&mut out, Tok::Str(s));
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        if two == "|>" {
            advance!();
            advance!();
            push(&mut out, Tok::Sym("|>"));
            continue;
        }
        let sym = match c {
            '|' => "|",
            '<' => "<",
            '>' => ">",
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            '=' => "=",
            ',' => ",",
            ';' => ";",
            _ => {
                return Err(SyntaxError::new(tl, tc, vec!["a token".into()], format!("character `{}`", c)));
            }
        };
        advance!();
        push(&mut out, Tok::Sym(sym));
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}
