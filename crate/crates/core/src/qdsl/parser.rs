//! Hand-written lexer and recursive-descent parser.
//!
//! ```text
//! query := expr
//! expr  := LOAD str
//!        | SELECT expr WHERE pred
//!        | PROJECT expr ON ident (, ident)*
//!        | JOIN expr , expr ON sim COMBINE comb
//!        | SAMPLE expr SHOTS int
//!        | ( expr )
//! pred  := conj (OR conj)*
//! conj  := unary (AND unary)*
//! unary := NOT unary | ( pred ) | operand (= | < | >) operand
//! sim   := eq(ident, ident) | within(ident, ident, num) | const(num [, num])
//! comb  := concat | concat_drop(ident) | [ fref (, fref)* ]
//! fref  := ident | left.ident | right.ident
//! ```
//!
//! Keywords are case-insensitive; `#` starts a comment that runs to end of line.

use crate::error::{Error, Result};
use crate::qops::{FieldRef, Side};

use super::ast::{CmpOp, CombineSpec, Operand, Predicate, Query, SimilaritySpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Keyword {
    Load,
    Select,
    Where,
    Project,
    On,
    Join,
    Combine,
    Sample,
    Shots,
    And,
    Or,
    Not,
}

impl Keyword {
    fn lookup(word: &str) -> Option<Keyword> {
        Some(match word.to_ascii_uppercase().as_str() {
            "LOAD" => Keyword::Load,
            "SELECT" => Keyword::Select,
            "WHERE" => Keyword::Where,
            "PROJECT" => Keyword::Project,
            "ON" => Keyword::On,
            "JOIN" => Keyword::Join,
            "COMBINE" => Keyword::Combine,
            "SAMPLE" => Keyword::Sample,
            "SHOTS" => Keyword::Shots,
            "AND" => Keyword::And,
            "OR" => Keyword::Or,
            "NOT" => Keyword::Not,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Keyword::Load => "LOAD",
            Keyword::Select => "SELECT",
            Keyword::Where => "WHERE",
            Keyword::Project => "PROJECT",
            Keyword::On => "ON",
            Keyword::Join => "JOIN",
            Keyword::Combine => "COMBINE",
            Keyword::Sample => "SAMPLE",
            Keyword::Shots => "SHOTS",
            Keyword::And => "AND",
            Keyword::Or => "OR",
            Keyword::Not => "NOT",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Keyword(Keyword),
    Ident(String),
    Str(String),
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Eq,
    Lt,
    Gt,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Keyword(k) => k.name().to_string(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Number(n) => format!("number {n}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, message: message.into() }
}

fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut col);
            }
            continue;
        }
        let tok = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '=' => Some(Tok::Eq),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            _ => None,
        };
        if let Some(tok) = tok {
            advance(1, &mut i, &mut col);
            tokens.push(Token { tok, line: start_line, column: start_col });
            continue;
        }
        if c == '"' {
            advance(1, &mut i, &mut col);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(syntax(start_line, start_col, "unterminated string"));
                    }
                    Some('"') => {
                        advance(1, &mut i, &mut col);
                        break;
                    }
                    Some('\\') => {
                        match chars.get(i + 1) {
                            Some(&e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(syntax(line, col, "invalid escape in string")),
                        }
                        advance(2, &mut i, &mut col);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(1, &mut i, &mut col);
                    }
                }
            }
            tokens.push(Token { tok: Tok::Str(s), line: start_line, column: start_col });
            continue;
        }
        let negative = c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || negative {
            let begin = i;
            advance(1, &mut i, &mut col);
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i, &mut col);
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                advance(1, &mut i, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(1, &mut i, &mut col);
                }
            }
            let text: String = chars[begin..i].iter().collect();
            tokens.push(Token { tok: Tok::Number(text), line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i, &mut col);
            }
            let word: String = chars[begin..i].iter().collect();
            let tok = match Keyword::lookup(&word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word),
            };
            tokens.push(Token { tok, line: start_line, column: start_col });
            continue;
        }
        return Err(syntax(start_line, start_col, format!("unexpected character `{c}`")));
    }
    tokens.push(Token { tok: Tok::Eof, line, column: col });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &str) -> Error {
        let t = self.peek();
        syntax(t.line, t.column, format!("expected {expected}, found {}", t.tok.describe()))
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<()> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(expected))
        }
    }

    fn expect_keyword(&mut self, k: Keyword) -> Result<()> {
        self.expect(Tok::Keyword(k), k.name())
    }

    fn ident(&mut self) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.error_here("a field name")),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(text) => {
                let v = text
                    .parse::<u64>()
                    .map_err(|_| syntax(t.line, t.column, format!("`{text}` is not an unsigned integer")))?;
                self.next();
                Ok(v)
            }
            _ => Err(self.error_here("an integer")),
        }
    }

    fn real(&mut self) -> Result<f64> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(text) => {
                let v = text
                    .parse::<f64>()
                    .map_err(|_| syntax(t.line, t.column, format!("`{text}` is not a number")))?;
                self.next();
                Ok(v)
            }
            _ => Err(self.error_here("a number")),
        }
    }

    fn expr(&mut self) -> Result<Query> {
        let t = self.peek().clone();
        match t.tok {
            Tok::LParen => {
                self.next();
                let q = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(q)
            }
            Tok::Keyword(Keyword::Load) => {
                self.next();
                match self.next().tok {
                    Tok::Str(path) => Ok(Query::Load { path }),
                    _ => {
                        self.pos -= 1;
                        Err(self.error_here("a quoted path"))
                    }
                }
            }
            Tok::Keyword(Keyword::Select) => {
                self.next();
                let input = Box::new(self.expr()?);
                self.expect_keyword(Keyword::Where)?;
                let predicate = self.predicate()?;
                Ok(Query::Select { input, predicate })
            }
            Tok::Keyword(Keyword::Project) => {
                self.next();
                let input = Box::new(self.expr()?);
                self.expect_keyword(Keyword::On)?;
                let mut fields = vec![self.ident()?];
                // A comma continues the list only when a field name follows, so
                // `JOIN PROJECT ... ON a, LOAD ...` splits the join operands.
                while self.peek().tok == Tok::Comma && matches!(self.peek_at(1), Tok::Ident(_)) {
                    self.next();
                    fields.push(self.ident()?);
                }
                Ok(Query::Project { input, fields })
            }
            Tok::Keyword(Keyword::Join) => {
                self.next();
                let left = Box::new(self.expr()?);
                self.expect(Tok::Comma, "`,`")?;
                let right = Box::new(self.expr()?);
                self.expect_keyword(Keyword::On)?;
                let similarity = self.similarity()?;
                self.expect_keyword(Keyword::Combine)?;
                let combine = self.combine()?;
                Ok(Query::Join { left, right, similarity, combine })
            }
            Tok::Keyword(Keyword::Sample) => {
                self.next();
                let input = Box::new(self.expr()?);
                self.expect_keyword(Keyword::Shots)?;
                let shots = self.integer()?;
                Ok(Query::Sample { input, shots })
            }
            _ => Err(self.error_here("LOAD, SELECT, PROJECT, JOIN, SAMPLE or `(`")),
        }
    }

    fn predicate(&mut self) -> Result<Predicate> {
        let mut p = self.conjunction()?;
        while self.peek().tok == Tok::Keyword(Keyword::Or) {
            self.next();
            p = Predicate::Or(Box::new(p), Box::new(self.conjunction()?));
        }
        Ok(p)
    }

    fn conjunction(&mut self) -> Result<Predicate> {
        let mut p = self.unary()?;
        while self.peek().tok == Tok::Keyword(Keyword::And) {
            self.next();
            p = Predicate::And(Box::new(p), Box::new(self.unary()?));
        }
        Ok(p)
    }

    fn unary(&mut self) -> Result<Predicate> {
        match self.peek().tok {
            Tok::Keyword(Keyword::Not) => {
                self.next();
                Ok(Predicate::Not(Box::new(self.unary()?)))
            }
            Tok::LParen => {
                self.next();
                let p = self.predicate()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(p)
            }
            _ => {
                let left = self.operand()?;
                let op = match self.peek().tok {
                    Tok::Eq => CmpOp::Eq,
                    Tok::Lt => CmpOp::Lt,
                    Tok::Gt => CmpOp::Gt,
                    _ => return Err(self.error_here("`=`, `<` or `>`")),
                };
                self.next();
                let right = self.operand()?;
                Ok(Predicate::Compare { left, op, right })
            }
        }
    }

    fn operand(&mut self) -> Result<Operand> {
        match &self.peek().tok {
            Tok::Ident(_) => Ok(Operand::Field(self.ident()?)),
            Tok::Number(_) => Ok(Operand::Literal(self.integer()?)),
            _ => Err(self.error_here("a field name or integer")),
        }
    }

    fn similarity(&mut self) -> Result<SimilaritySpec> {
        let t = self.peek().clone();
        let name = self.ident().map_err(|_| self.error_here("eq, within or const"))?;
        self.expect(Tok::LParen, "`(`")?;
        let spec = match name.as_str() {
            "eq" => {
                let left = self.ident()?;
                self.expect(Tok::Comma, "`,`")?;
                let right = self.ident()?;
                SimilaritySpec::Eq { left, right }
            }
            "within" => {
                let left = self.ident()?;
                self.expect(Tok::Comma, "`,`")?;
                let right = self.ident()?;
                self.expect(Tok::Comma, "`,`")?;
                let scale = self.real()?;
                SimilaritySpec::Within { left, right, scale }
            }
            "const" => {
                let re = self.real()?;
                let im = if self.peek().tok == Tok::Comma {
                    self.next();
                    self.real()?
                } else {
                    0.0
                };
                SimilaritySpec::Const { re, im }
            }
            other => {
                return Err(syntax(
                    t.line,
                    t.column,
                    format!("unknown similarity `{other}` (expected eq, within or const)"),
                ))
            }
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(spec)
    }

    fn combine(&mut self) -> Result<CombineSpec> {
        if self.peek().tok == Tok::LBracket {
            self.next();
            let mut refs = vec![self.field_ref()?];
            while self.peek().tok == Tok::Comma {
                self.next();
                refs.push(self.field_ref()?);
            }
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(CombineSpec::Fields(refs));
        }
        let t = self.peek().clone();
        let name = self.ident().map_err(|_| self.error_here("concat, concat_drop or `[`"))?;
        match name.as_str() {
            "concat" => Ok(CombineSpec::Concat),
            "concat_drop" => {
                self.expect(Tok::LParen, "`(`")?;
                let field = self.ident()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(CombineSpec::ConcatDrop(field))
            }
            other => Err(syntax(
                t.line,
                t.column,
                format!("unknown combine `{other}` (expected concat, concat_drop or a field list)"),
            )),
        }
    }

    fn field_ref(&mut self) -> Result<FieldRef> {
        let name = self.ident()?;
        if self.peek().tok != Tok::Dot {
            return Ok(FieldRef::bare(name));
        }
        let side = match name.as_str() {
            "left" => Side::Left,
            "right" => Side::Right,
            _ => return Err(self.error_here("a field name (only `left.` and `right.` qualify fields)")),
        };
        self.next();
        Ok(FieldRef { side: Some(side), name: self.ident()? })
    }
}

/// Parses one query.
pub fn parse(source: &str) -> Result<Query> {
    let mut p = Parser { tokens: lex(source)?, pos: 0 };
    let q = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.error_here("end of input"));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(p: &str) -> Box<Query> {
        Box::new(Query::Load { path: p.into() })
    }

    #[test]
    fn parse_project() {
        let q = parse(r#"PROJECT LOAD "r.rel" ON a"#).unwrap();
        assert_eq!(q, Query::Project { input: load("r.rel"), fields: vec!["a".into()] });
    }

    #[test]
    fn parse_join() {
        let q = parse(r#"JOIN LOAD "r.rel", LOAD "s.rel" ON eq(k,k) COMBINE concat_drop(k)"#).unwrap();
        assert_eq!(
            q,
            Query::Join {
                left: load("r.rel"),
                right: load("s.rel"),
                similarity: SimilaritySpec::Eq { left: "k".into(), right: "k".into() },
                combine: CombineSpec::ConcatDrop("k".into()),
            }
        );
    }

    #[test]
    fn misspelled_keyword_is_located() {
        let err = parse(r#"SELECT LOAD "r.rel" WHER x=1"#).unwrap_err();
        match err {
            Error::Syntax { line, column, message } => {
                assert_eq!((line, column), (1, 21));
                assert!(message.contains("expected WHERE"), "{message}");
                assert!(message.contains("WHER"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multi_line_locations() {
        let err = parse("SAMPLE\n  LOAD \"x\"\n  SHOTS abc").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 3, column: 9, .. }), "{err:?}");
        let err = parse("LOAD \"x").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 6, .. }), "{err:?}");
        assert!(parse("LOAD \"x\" extra").is_err());
        assert!(parse("LOAD \"x\" $").is_err());
    }

    #[test]
    fn predicate_precedence() {
        let q = parse(r#"SELECT LOAD "r" WHERE a = 1 OR b > 2 AND NOT c < 3"#).unwrap();
        let Query::Select { predicate, .. } = q else { panic!() };
        let cmp = |f: &str, op, v| Predicate::Compare { left: Operand::Field(f.into()), op, right: Operand::Literal(v) };
        assert_eq!(
            predicate,
            Predicate::Or(
                Box::new(cmp("a", CmpOp::Eq, 1)),
                Box::new(Predicate::And(
                    Box::new(cmp("b", CmpOp::Gt, 2)),
                    Box::new(Predicate::Not(Box::new(cmp("c", CmpOp::Lt, 3))))
                ))
            )
        );
    }

    #[test]
    fn nested_project_inside_join() {
        let q = parse(
            r#"join project load "r" on a, b, load "s" on within(a, c, 2.5) combine [left.a, right.c, b]"#,
        )
        .unwrap();
        let Query::Join { left, similarity, combine, .. } = q else { panic!() };
        assert_eq!(*left, Query::Project { input: load("r"), fields: vec!["a".into(), "b".into()] });
        assert_eq!(similarity, SimilaritySpec::Within { left: "a".into(), right: "c".into(), scale: 2.5 });
        assert_eq!(
            combine,
            CombineSpec::Fields(vec![FieldRef::left("a"), FieldRef::right("c"), FieldRef::bare("b")])
        );
    }

    #[test]
    fn const_similarity_and_comments() {
        let q = parse("# header\nJOIN LOAD \"r\", LOAD \"s\" ON const(0.5, -0.25) COMBINE concat # tail").unwrap();
        let Query::Join { similarity, .. } = q else { panic!() };
        assert_eq!(similarity, SimilaritySpec::Const { re: 0.5, im: -0.25 });
    }

    #[test]
    fn escapes_round_trip() {
        let q = Query::Load { path: r#"dir\"odd"name.rel"#.into() };
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn unknown_operators() {
        assert!(parse(r#"JOIN LOAD "r", LOAD "s" ON near(a,b) COMBINE concat"#).is_err());
        assert!(parse(r#"JOIN LOAD "r", LOAD "s" ON eq(a,b) COMBINE zip"#).is_err());
        assert!(parse(r#"JOIN LOAD "r", LOAD "s" ON eq(a,b) COMBINE [mid.a]"#).is_err());
    }
}
