use super::MiniLangError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Identifier,
    IntLiteral,
    BoolLiteral,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// Byte offsets into the source: [start, end).
    pub span: (usize, usize),
}

const OPERATORS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "=",
];

pub fn lex(source: &str) -> Result<Vec<Token>, MiniLangError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos] as char;
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = pos;
            while pos < bytes.len() && {
                let c = bytes[pos] as char;
                c.is_ascii_alphanumeric() || c == '_'
            } {
                pos += 1;
            }
            let lexeme = &source[start..pos];
            let kind = if lexeme == "true" || lexeme == "false" {
                TokenKind::BoolLiteral
            } else if super::KEYWORDS.contains(&lexeme) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token {
                kind,
                lexeme: lexeme.to_string(),
                span: (start, pos),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = pos;
            while pos < bytes.len() && (bytes[pos] as char).is_ascii_digit() {
                pos += 1;
            }
            tokens.push(Token {
                kind: TokenKind::IntLiteral,
                lexeme: source[start..pos].to_string(),
                span: (start, pos),
            });
            continue;
        }
        if "(){}[];,".contains(c) {
            tokens.push(Token {
                kind: TokenKind::Punctuation,
                lexeme: c.to_string(),
                span: (pos, pos + 1),
            });
            pos += 1;
            continue;
        }
        let rest = &source[pos..];
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            tokens.push(Token {
                kind: TokenKind::Operator,
                lexeme: (*op).to_string(),
                span: (pos, pos + op.len()),
            });
            pos += op.len();
            continue;
        }
        return Err(MiniLangError::Lex { pos, ch: c });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_minimal_method() {
        let toks = lex("int f(int a) { return a; }").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Punctuation,
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Punctuation,
                TokenKind::Punctuation,
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Punctuation,
                TokenKind::Punctuation,
            ]
        );
    }

    #[test]
    fn spans_match_source_slices() {
        let src = "int f() { int x = 10; return x <= 3; }";
        for tok in lex(src).unwrap() {
            assert!(tok.span.0 < tok.span.1);
            assert_eq!(&src[tok.span.0..tok.span.1], tok.lexeme);
        }
    }

    #[test]
    fn two_char_operators_win_over_one_char() {
        let toks = lex("a <= b == c && d").unwrap();
        let ops: Vec<_> = toks
            .iter()
            .filter(|t| t.kind == TokenKind::Operator)
            .map(|t| t.lexeme.as_str())
            .collect();
        assert_eq!(ops, vec!["<=", "==", "&&"]);
    }

    #[test]
    fn rejects_unknown_character() {
        let err = lex("int f() { return 1 ? 2; }").unwrap_err();
        assert!(matches!(err, MiniLangError::Lex { ch: '?', .. }));
    }
}
