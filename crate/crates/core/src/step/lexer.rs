//! Tokenizer for the clear-text encoding of ISO 10303-21 exchange files.

use super::StepError;

/// Line/column of a token's first character (both 1-based) plus its byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    /// Standard or user-defined keyword, e.g. `IFCWALL`, `DATA`, `ISO-10303-21`.
    Keyword(String),
    Integer(i64),
    Real(f64),
    /// String literal with escapes already decoded.
    Text(String),
    /// Enumeration value without the surrounding dots, e.g. `T` for `.T.`.
    Enum(String),
    /// Entity instance name `#123`.
    Reference(u64),
    LParen,
    RParen,
    Comma,
    Semicolon,
    Equals,
    Dollar,
    Star,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub pos: Position,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            bytes: text.as_bytes(),
            offset: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.offset).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.offset + ahead).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.offset += 1;
        if b == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(b)
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            column: self.column,
            offset: self.offset,
        }
    }
}

/// Splits `text` into tokens. Comments (`/* ... */`) and whitespace are dropped.
pub fn tokenize(text: &str) -> Result<Vec<Spanned>, StepError> {
    let mut cur = Cursor::new(text);
    let mut out = Vec::new();

    while let Some(b) = cur.peek() {
        let pos = cur.pos();
        let token = match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                cur.bump();
                continue;
            }
            b'/' if cur.peek_at(1) == Some(b'*') => {
                skip_comment(&mut cur, pos)?;
                continue;
            }
            b'(' => single(&mut cur, Token::LParen),
            b')' => single(&mut cur, Token::RParen),
            b',' => single(&mut cur, Token::Comma),
            b';' => single(&mut cur, Token::Semicolon),
            b'=' => single(&mut cur, Token::Equals),
            b'$' => single(&mut cur, Token::Dollar),
            b'*' => single(&mut cur, Token::Star),
            b'\'' => Token::Text(lex_string(&mut cur, pos)?),
            b'#' => lex_reference(&mut cur, pos)?,
            b'.' if cur.peek_at(1).is_some_and(|c| c.is_ascii_alphabetic() || c == b'_') => {
                lex_enum(&mut cur, pos)?
            }
            b'0'..=b'9' | b'+' | b'-' => lex_number(&mut cur, pos)?,
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'!' => lex_keyword(&mut cur),
            _ => {
                return Err(StepError::InvalidCharacter {
                    found: char_at(text, pos.offset),
                    line: pos.line,
                    column: pos.column,
                })
            }
        };
        out.push(Spanned { token, pos });
    }
    Ok(out)
}

fn char_at(text: &str, offset: usize) -> char {
    text[offset..].chars().next().unwrap_or('\u{FFFD}')
}

fn single(cur: &mut Cursor<'_>, token: Token) -> Token {
    cur.bump();
    token
}

fn skip_comment(cur: &mut Cursor<'_>, start: Position) -> Result<(), StepError> {
    cur.bump();
    cur.bump();
    loop {
        match cur.bump() {
            Some(b'*') if cur.peek() == Some(b'/') => {
                cur.bump();
                return Ok(());
            }
            Some(_) => {}
            None => {
                return Err(StepError::UnterminatedComment {
                    line: start.line,
                    column: start.column,
                })
            }
        }
    }
}

fn lex_keyword(cur: &mut Cursor<'_>) -> Token {
    let start = cur.offset;
    cur.bump();
    while let Some(c) = cur.peek() {
        if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' {
            cur.bump();
        } else {
            break;
        }
    }
    Token::Keyword(String::from_utf8_lossy(&cur.bytes[start..cur.offset]).into_owned())
}

fn lex_reference(cur: &mut Cursor<'_>, pos: Position) -> Result<Token, StepError> {
    cur.bump();
    let start = cur.offset;
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    let digits = std::str::from_utf8(&cur.bytes[start..cur.offset]).unwrap_or("");
    match digits.parse::<u64>() {
        Ok(id) if id > 0 => Ok(Token::Reference(id)),
        _ => Err(StepError::InvalidCharacter {
            found: '#',
            line: pos.line,
            column: pos.column,
        }),
    }
}

fn lex_enum(cur: &mut Cursor<'_>, pos: Position) -> Result<Token, StepError> {
    cur.bump();
    let start = cur.offset;
    while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
        cur.bump();
    }
    let end = cur.offset;
    if cur.peek() != Some(b'.') {
        return Err(StepError::InvalidCharacter {
            found: '.',
            line: pos.line,
            column: pos.column,
        });
    }
    cur.bump();
    Ok(Token::Enum(
        String::from_utf8_lossy(&cur.bytes[start..end]).into_owned(),
    ))
}

fn lex_number(cur: &mut Cursor<'_>, pos: Position) -> Result<Token, StepError> {
    let start = cur.offset;
    if matches!(cur.peek(), Some(b'+') | Some(b'-')) {
        cur.bump();
    }
    let int_start = cur.offset;
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    let invalid = || StepError::InvalidCharacter {
        found: char::from(cur.bytes[start]),
        line: pos.line,
        column: pos.column,
    };
    if cur.offset == int_start {
        return Err(invalid());
    }
    let mut is_real = false;
    if cur.peek() == Some(b'.') {
        is_real = true;
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some(b'E') | Some(b'e')) {
        let save = (cur.offset, cur.line, cur.column);
        cur.bump();
        if matches!(cur.peek(), Some(b'+') | Some(b'-')) {
            cur.bump();
        }
        if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            is_real = true;
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
        } else {
            (cur.offset, cur.line, cur.column) = save;
        }
    }
    let lexeme = std::str::from_utf8(&cur.bytes[start..cur.offset]).map_err(|_| invalid())?;
    if is_real {
        // `1.` and `1.E5` are legal here but not for Rust's float parser.
        let normalized = lexeme.replacen(".E", ".0E", 1).replacen(".e", ".0e", 1);
        let normalized = if normalized.ends_with('.') {
            format!("{normalized}0")
        } else {
            normalized
        };
        normalized.parse::<f64>().map(Token::Real).map_err(|_| invalid())
    } else {
        match lexeme.parse::<i64>() {
            Ok(v) => Ok(Token::Integer(v)),
            // Out-of-range integers still carry a value; keep it as a real.
            Err(_) => lexeme.parse::<f64>().map(Token::Real).map_err(|_| invalid()),
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>, pos: Position) -> Result<String, StepError> {
    cur.bump();
    let mut raw = Vec::new();
    loop {
        match cur.bump() {
            Some(b'\'') => {
                if cur.peek() == Some(b'\'') {
                    cur.bump();
                    raw.push(b'\'');
                } else {
                    break;
                }
            }
            Some(b) => raw.push(b),
            None => {
                return Err(StepError::UnterminatedString {
                    line: pos.line,
                    column: pos.column,
                })
            }
        }
    }
    Ok(decode_escapes(&raw))
}

/// Decodes the ISO 10303-21 control directives inside a string body
/// (`\\`, `\S\`, `\X\hh`, `\X2\...\X0\`, `\X4\...\X0\`; `\P?\` is dropped).
/// Malformed directives are kept literally.
pub fn decode_escapes(raw: &[u8]) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let b = raw[i];
        if b != b'\\' {
            // Bytes >= 0x80 are not legal in the basic alphabet; read them as Latin-1.
            out.push(char::from(b));
            i += 1;
            continue;
        }
        let rest = &raw[i..];
        if rest.starts_with(b"\\\\") {
            out.push('\\');
            i += 2;
        } else if rest.len() >= 4 && rest.starts_with(b"\\S\\") {
            out.push(char::from(rest[3] | 0x80));
            i += 4;
        } else if rest.len() >= 4 && rest.starts_with(b"\\P") && rest[3] == b'\\' {
            i += 4;
        } else if rest.starts_with(b"\\X2\\") || rest.starts_with(b"\\X4\\") {
            let width = if rest[2] == b'2' { 4 } else { 8 };
            match decode_wide(&rest[4..], width) {
                Some((text, used)) => {
                    out.push_str(&text);
                    i += 4 + used;
                }
                None => {
                    out.push('\\');
                    i += 1;
                }
            }
        } else if rest.len() >= 5 && rest.starts_with(b"\\X\\") {
            match hex_value(&rest[3..5]) {
                Some(v) => {
                    out.push(char::from(v as u8));
                    i += 5;
                }
                None => {
                    out.push('\\');
                    i += 1;
                }
            }
        } else {
            out.push('\\');
            i += 1;
        }
    }
    out
}

fn hex_value(digits: &[u8]) -> Option<u32> {
    let s = std::str::from_utf8(digits).ok()?;
    u32::from_str_radix(s, 16).ok()
}

/// Reads hex groups of `width` digits up to the closing `\X0\`.
/// Returns the decoded text and the number of bytes consumed (terminator included).
fn decode_wide(body: &[u8], width: usize) -> Option<(String, usize)> {
    let end = body.windows(4).position(|w| w == b"\\X0\\")?;
    let hex = &body[..end];
    if hex.is_empty() || !hex.len().is_multiple_of(width) {
        return None;
    }
    let mut units = Vec::new();
    for chunk in hex.chunks(width) {
        units.push(hex_value(chunk)?);
    }
    let text = if width == 4 {
        let units: Vec<u16> = units.iter().map(|&u| u as u16).collect();
        String::from_utf16(&units).ok()?
    } else {
        units
            .iter()
            .map(|&u| char::from_u32(u))
            .collect::<Option<String>>()?
    };
    Some((text, end + 4))
}

/// Encodes `text` as a STEP string literal (quotes included).
pub fn encode_string(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('\'');
    for c in text.chars() {
        match c {
            '\'' => out.push_str("''"),
            '\\' => out.push_str("\\\\"),
            ' '..='~' => out.push(c),
            _ => {
                let mut units = [0u16; 2];
                let units = c.encode_utf16(&mut units);
                if units.len() == 1 {
                    out.push_str(&format!("\\X2\\{:04X}\\X0\\", units[0]));
                } else {
                    out.push_str(&format!("\\X4\\{:08X}\\X0\\", c as u32));
                }
            }
        }
    }
    out.push('\'');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Token> {
        tokenize(text).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn wall_record_tokens() {
        let toks = kinds("#12=IFCWALL('gid',$,*,(1.0,2.));");
        use Token::*;
        assert_eq!(
            toks,
            vec![
                Reference(12),
                Equals,
                Keyword("IFCWALL".into()),
                LParen,
                Text("gid".into()),
                Comma,
                Dollar,
                Comma,
                Star,
                Comma,
                LParen,
                Real(1.0),
                Comma,
                Real(2.0),
                RParen,
                RParen,
                Semicolon,
            ]
        );
    }

    #[test]
    fn comment_is_skipped() {
        let toks = kinds("/* note */ #1=A();");
        assert_eq!(toks.len(), 6);
        assert_eq!(toks[0], Token::Reference(1));
    }

    #[test]
    fn doubled_quote() {
        assert_eq!(kinds("'It''s'"), vec![Token::Text("It's".into())]);
    }

    #[test]
    fn escapes() {
        assert_eq!(decode_escapes(br"\X\E4"), "\u{e4}");
        assert_eq!(decode_escapes(br"a\X2\00E400FC\X0\b"), "a\u{e4}\u{fc}b");
        assert_eq!(decode_escapes(br"\X4\0001F600\X0\"), "\u{1F600}");
        assert_eq!(decode_escapes(br"\S\D"), "\u{c4}");
        assert_eq!(decode_escapes(br"c:\\dir"), "c:\\dir");
        assert_eq!(decode_escapes(br"\PA\x"), "x");
        // malformed directive stays literal
        assert_eq!(decode_escapes(br"\X2\00E"), "\\X2\\00E");
    }

    #[test]
    fn encode_roundtrip() {
        for s in ["plain", "It's", "back\\slash", "Tür \u{1F600}", ""] {
            let lit = encode_string(s);
            assert_eq!(kinds(&lit), vec![Token::Text(s.to_string())], "{lit}");
        }
    }

    #[test]
    fn numbers() {
        use Token::*;
        assert_eq!(
            kinds("1 -2 +3 1. 1.5E-2 -0.25 2.E3 7E2"),
            vec![
                Integer(1),
                Integer(-2),
                Integer(3),
                Real(1.0),
                Real(0.015),
                Real(-0.25),
                Real(2000.0),
                Real(700.0),
            ]
        );
    }

    #[test]
    fn enums_and_header_keywords() {
        use Token::*;
        assert_eq!(
            kinds("ISO-10303-21; .T. .ELEMENT."),
            vec![
                Keyword("ISO-10303-21".into()),
                Semicolon,
                Enum("T".into()),
                Enum("ELEMENT".into()),
            ]
        );
    }

    #[test]
    fn errors_carry_position() {
        assert_eq!(
            tokenize("#1=A(\n  'open"),
            Err(StepError::UnterminatedString { line: 2, column: 3 })
        );
        assert_eq!(
            tokenize("  /* never closed"),
            Err(StepError::UnterminatedComment { line: 1, column: 3 })
        );
        assert_eq!(
            tokenize("#1=A(@);"),
            Err(StepError::InvalidCharacter {
                found: '@',
                line: 1,
                column: 6
            })
        );
    }
}
