use super::lexer::{tokenize, Spanned, Token};
use super::{AttributeValue, EntityInstance, StepError, StepModel};

/// Deepest list/typed-value nesting accepted inside one attribute.
pub const MAX_NESTING_DEPTH: usize = 32;

/// Tokenizes and parses a whole exchange file, keeping the header as raw text.
pub fn parse(text: &str) -> Result<StepModel, StepError> {
    let tokens = tokenize(text)?;
    let mut model = parse_data_section(&tokens)?;
    model.header = header_text(text, &tokens).unwrap_or_default();
    Ok(model)
}

/// Raw text between `HEADER;` and the next `ENDSEC;`.
fn header_text(text: &str, tokens: &[Spanned]) -> Option<String> {
    let start = tokens.windows(2).position(|w| {
        matches!(&w[0].token, Token::Keyword(k) if k.eq_ignore_ascii_case("HEADER"))
            && w[1].token == Token::Semicolon
    })?;
    let body_start = tokens[start + 1].pos.offset + 1;
    let end = tokens[start + 2..].windows(2).position(|w| {
        matches!(&w[0].token, Token::Keyword(k) if k.eq_ignore_ascii_case("ENDSEC"))
            && w[1].token == Token::Semicolon
    })?;
    let body_end = tokens[start + 2 + end].pos.offset;
    Some(text[body_start..body_end].trim().to_string())
}

/// Builds a [`StepModel`] from every record inside `DATA; ... ENDSEC;` sections.
/// Tokens outside data sections are ignored.
pub fn parse_data_section(tokens: &[Spanned]) -> Result<StepModel, StepError> {
    let mut model = StepModel::default();
    let mut stream = Stream { tokens, at: 0 };
    let mut seen_data = false;

    while let Some(tok) = stream.peek() {
        if is_keyword(&tok.token, "DATA") && section_opens(&stream) {
            seen_data = true;
            stream.skip_section_header();
            parse_records(&mut stream, &mut model)?;
        } else {
            stream.at += 1;
        }
    }

    if seen_data {
        Ok(model)
    } else {
        Err(StepError::MissingDataSection)
    }
}

fn is_keyword(token: &Token, word: &str) -> bool {
    matches!(token, Token::Keyword(k) if k.eq_ignore_ascii_case(word))
}

/// `DATA;` or the parameterised `DATA('name',(...));` form.
fn section_opens(stream: &Stream<'_>) -> bool {
    matches!(
        stream.peek_at(1).map(|t| &t.token),
        Some(Token::Semicolon) | Some(Token::LParen)
    )
}

struct Stream<'t> {
    tokens: &'t [Spanned],
    at: usize,
}

impl<'t> Stream<'t> {
    fn peek(&self) -> Option<&'t Spanned> {
        self.tokens.get(self.at)
    }

    fn peek_at(&self, ahead: usize) -> Option<&'t Spanned> {
        self.tokens.get(self.at + ahead)
    }

    fn next(&mut self) -> Option<&'t Spanned> {
        let tok = self.tokens.get(self.at);
        if tok.is_some() {
            self.at += 1;
        }
        tok
    }

    fn line(&self) -> usize {
        self.peek()
            .or_else(|| self.tokens.last())
            .map(|t| t.pos.line)
            .unwrap_or(0)
    }

    fn skip_section_header(&mut self) {
        while let Some(tok) = self.next() {
            if tok.token == Token::Semicolon {
                break;
            }
        }
    }

    fn malformed(&self, line: usize, reason: impl Into<String>) -> StepError {
        StepError::MalformedRecord {
            line,
            reason: reason.into(),
        }
    }
}

fn parse_records(stream: &mut Stream<'_>, model: &mut StepModel) -> Result<(), StepError> {
    loop {
        let Some(tok) = stream.peek() else {
            return Err(stream.malformed(stream.line(), "DATA section not closed by ENDSEC"));
        };
        if is_keyword(&tok.token, "ENDSEC") {
            stream.next();
            match stream.next() {
                Some(t) if t.token == Token::Semicolon => return Ok(()),
                _ => return Err(stream.malformed(tok.pos.line, "expected ';' after ENDSEC")),
            }
        }
        let instance = parse_record(stream)?;
        model.insert(instance)?;
    }
}

fn parse_record(stream: &mut Stream<'_>) -> Result<EntityInstance, StepError> {
    let start = stream.next().expect("caller peeked");
    let line = start.pos.line;
    let Token::Reference(id) = start.token else {
        return Err(stream.malformed(line, format!("expected instance name, found {:?}", start.token)));
    };
    match stream.next().map(|t| &t.token) {
        Some(Token::Equals) => {}
        _ => return Err(stream.malformed(line, "expected '=' after instance name")),
    }
    let type_name = match stream.next().map(|t| &t.token) {
        Some(Token::Keyword(name)) => name.clone(),
        Some(Token::LParen) => {
            return Err(stream.malformed(line, "complex entity instances are not supported"))
        }
        _ => return Err(stream.malformed(line, "expected entity type name")),
    };
    match stream.next().map(|t| &t.token) {
        Some(Token::LParen) => {}
        _ => return Err(stream.malformed(line, "expected '(' after type name")),
    }
    let attributes = parse_list_body(stream, line, 1)?;
    match stream.next().map(|t| &t.token) {
        Some(Token::Semicolon) => {}
        _ => return Err(stream.malformed(line, "expected ';' to close record")),
    }
    Ok(EntityInstance {
        id,
        type_name,
        attributes,
    })
}

/// Parses comma-separated values up to and including the closing `)`.
/// `depth` is the nesting level of the list being read (the record's own
/// parameter list is level 1 and does not count toward the limit).
fn parse_list_body(
    stream: &mut Stream<'_>,
    line: usize,
    depth: usize,
) -> Result<Vec<AttributeValue>, StepError> {
    let mut items = Vec::new();
    if stream.peek().map(|t| &t.token) == Some(&Token::RParen) {
        stream.next();
        return Ok(items);
    }
    loop {
        items.push(parse_value(stream, line, depth)?);
        match stream.next().map(|t| &t.token) {
            Some(Token::Comma) => {}
            Some(Token::RParen) => return Ok(items),
            other => {
                return Err(stream.malformed(line, format!("expected ',' or ')', found {other:?}")))
            }
        }
    }
}

fn parse_value(
    stream: &mut Stream<'_>,
    line: usize,
    depth: usize,
) -> Result<AttributeValue, StepError> {
    let Some(tok) = stream.next() else {
        return Err(stream.malformed(line, "unexpected end of input"));
    };
    let value = match &tok.token {
        Token::Dollar => AttributeValue::Null,
        Token::Star => AttributeValue::Derived,
        Token::Integer(v) => AttributeValue::Integer(*v),
        Token::Real(v) => AttributeValue::Real(*v),
        Token::Text(s) => AttributeValue::Text(s.clone()),
        Token::Enum(e) => AttributeValue::Enum(e.clone()),
        Token::Reference(id) => AttributeValue::Reference(*id),
        Token::LParen => {
            check_depth(stream, line, depth)?;
            AttributeValue::List(parse_list_body(stream, line, depth + 1)?)
        }
        Token::Keyword(name) => {
            check_depth(stream, line, depth)?;
            match stream.next().map(|t| &t.token) {
                Some(Token::LParen) => {}
                _ => return Err(stream.malformed(line, format!("expected '(' after {name}"))),
            }
            let inner = parse_value(stream, line, depth + 1)?;
            match stream.next().map(|t| &t.token) {
                Some(Token::RParen) => {}
                _ => {
                    return Err(stream.malformed(line, format!("typed value {name} takes one argument")))
                }
            }
            AttributeValue::Typed(name.clone(), Box::new(inner))
        }
        other => return Err(stream.malformed(line, format!("unexpected token {other:?}"))),
    };
    Ok(value)
}

fn check_depth(stream: &Stream<'_>, line: usize, depth: usize) -> Result<(), StepError> {
    if depth > MAX_NESTING_DEPTH {
        Err(stream.malformed(
            line,
            format!("attribute nesting deeper than {MAX_NESTING_DEPTH}"),
        ))
    } else {
        Ok(())
    }
}
