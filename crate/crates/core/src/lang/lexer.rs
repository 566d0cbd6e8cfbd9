use crate::error::LangError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Lexeme {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

const PUNCTS: &[&str] = &[
    "||", "&&", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "=", "(", ")", "{",
    "}", ";", ",", ".",
];

pub fn lex(source: &str) -> Result<Vec<Lexeme>, LangError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let err = |line, col, message: String| LangError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            // Placeholders such as VAR-UNK lex as one identifier.
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let mut text: String = chars[start..i].iter().collect();
            if matches!(text.as_str(), "VAR" | "FUNC" | "TYPE" | "LIT")
                && chars[i..].starts_with(&['-', 'U', 'N', 'K'])
            {
                i += 4;
                text.push_str("-UNK");
            }
            col += (i - start) as u32;
            out.push(Lexeme {
                tok: Tok::Ident(text),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if text.len() > 1 && text.starts_with('0') {
                return Err(err(line, col, format!("leading zero in `{text}`")));
            }
            if text.parse::<i64>().is_err() {
                return Err(err(line, col, format!("integer `{text}` out of range")));
            }
            col += (i - start) as u32;
            out.push(Lexeme {
                tok: Tok::Int(text),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c == '"' {
            let start = i;
            i += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(start_line, start_col, "unterminated string".into()))
                    }
                    Some('\\') => {
                        match chars.get(i + 1) {
                            Some('"' | '\\' | 'n') => {}
                            _ => {
                                return Err(err(line, col + (i - start) as u32, "bad escape".into()))
                            }
                        }
                        i += 2;
                    }
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            out.push(Lexeme {
                tok: Tok::Str(text),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(*p)) {
            Some(p) => {
                i += p.len();
                col += p.len() as u32;
                out.push(Lexeme {
                    tok: Tok::Punct(p),
                    line: start_line,
                    col: start_col,
                });
            }
            None => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Lexeme {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Decode a quoted string literal token into its runtime value.
pub fn unquote(text: &str) -> String {
    let inner = &text[1..text.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut it = inner.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_placeholders_and_operators() {
        let toks: Vec<Tok> = lex("VAR-UNK <= x1 && \"a\\\"b\"")
            .unwrap()
            .into_iter()
            .map(|l| l.tok)
            .collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("VAR-UNK".into()),
                Tok::Punct("<="),
                Tok::Ident("x1".into()),
                Tok::Punct("&&"),
                Tok::Str("\"a\\\"b\"".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn quote_roundtrip() {
        for s in ["", "a\"b", "x\\y\nz"] {
            assert_eq!(unquote(&quote(s)), s);
        }
    }

    #[test]
    fn reports_position() {
        match lex("{\n  int x = #;") {
            Err(LangError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 11)),
            other => panic!("{other:?}"),
        }
    }
}
