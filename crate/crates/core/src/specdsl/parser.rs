use super::{Bound, Formula, ParametricSpec, SpecError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Less,
    Greater,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, SpecError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let simple = match c {
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            '<' => Some(Tok::Less),
            '>' => Some(Tok::Greater),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            i += 1;
            col += 1;
            continue;
        }
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.')
                && chars
                    .get(i + 1)
                    .is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign =
                    (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| SpecError::Syntax {
                line: tl,
                column: tc,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(SpecError::Syntax {
                    line: tl,
                    column: tc,
                    message: format!("non-finite number `{text}`"),
                });
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Num(value),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        return Err(SpecError::Syntax {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &["param", "in", "spec", "and", "or", "not", "G", "F"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    names: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: &Token, message: impl Into<String>) -> Result<T, SpecError> {
        Err(SpecError::Syntax {
            line: at.line,
            column: at.column,
            message: message.into(),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, SpecError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            self.error(&t, format!("expected {what}, found {}", describe(&t.tok)))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SpecError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            other => self.error(&t, format!("expected `{kw}`, found {}", describe(other))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), SpecError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok((s.clone(), t.clone())),
            other => self.error(&t, format!("expected {what}, found {}", describe(other))),
        }
    }

    fn number(&mut self) -> Result<f64, SpecError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(v),
            ref other => self.error(&t, format!("expected number, found {}", describe(other))),
        }
    }

    fn program(&mut self) -> Result<ParametricSpec, SpecError> {
        let mut decls = Vec::new();
        while self.is_keyword("param") {
            self.next();
            let (name, _) = self.ident("parameter name")?;
            self.expect_keyword("in")?;
            self.expect(Tok::LBracket, "`[`")?;
            let lo = self.number()?;
            self.expect(Tok::Comma, "`,`")?;
            let hi = self.number()?;
            self.expect(Tok::RBracket, "`]`")?;
            self.expect(Tok::Semi, "`;`")?;
            decls.push((name, lo, hi));
        }
        self.names = decls.iter().map(|d| d.0.clone()).collect();
        self.expect_keyword("spec")?;
        let formula = self.or()?;
        let end = self.next();
        if end.tok != Tok::Eof {
            return self.error(&end, format!("unexpected {}", describe(&end.tok)));
        }
        ParametricSpec::new(formula, decls)
    }

    fn or(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.and()?];
        while self.is_keyword("or") {
            self.next();
            parts.push(self.and()?);
        }
        Ok(Formula::or(parts))
    }

    fn and(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.unary()?];
        while self.is_keyword("and") {
            self.next();
            parts.push(self.unary()?);
        }
        Ok(Formula::and(parts))
    }

    fn unary(&mut self) -> Result<Formula, SpecError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(s) if s == "not" => {
                self.next();
                Ok(self.unary()?.negate())
            }
            Tok::Ident(s) if s == "G" || s == "F" => {
                let globally = s == "G";
                self.next();
                self.expect(Tok::LBracket, "`[`")?;
                let lo = self.bound()?;
                self.expect(Tok::Comma, "`,`")?;
                let hi = self.bound()?;
                self.expect(Tok::RBracket, "`]`")?;
                let child = Box::new(self.unary()?);
                Ok(if globally {
                    Formula::Globally { lo, hi, child }
                } else {
                    Formula::Eventually { lo, hi, child }
                })
            }
            Tok::LParen => {
                self.next();
                let f = self.or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(_) => self.atom(),
            other => self.error(&t, format!("expected formula, found {}", describe(other))),
        }
    }

    fn atom(&mut self) -> Result<Formula, SpecError> {
        let (signal, at) = self.ident("signal name")?;
        if signal != "x" {
            return self.error(
                &at,
                format!("unknown signal `{signal}`; only the single signal `x` is supported"),
            );
        }
        let op = self.next();
        let less = match op.tok {
            Tok::Less => true,
            Tok::Greater => false,
            ref other => {
                return self.error(&op, format!("expected `<` or `>`, found {}", describe(other)))
            }
        };
        let b = self.bound()?;
        Ok(if less {
            Formula::Less(b)
        } else {
            Formula::Greater(b)
        })
    }

    fn bound(&mut self) -> Result<Bound, SpecError> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Bound::Const(*v)),
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                match self.names.iter().position(|n| n == name) {
                    Some(i) => Ok(Bound::Param(i)),
                    None => Err(SpecError::Undeclared {
                        line: t.line,
                        column: t.column,
                        name: name.clone(),
                    }),
                }
            }
            other => self.error(
                &t,
                format!("expected number or parameter, found {}", describe(other)),
            ),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(v) => format!("number {v}"),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semi => "`;`".into(),
        Tok::Less => "`<`".into(),
        Tok::Greater => "`>`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses `.psl` text into a polarity-checked specification.
pub fn parse(text: &str) -> Result<ParametricSpec, SpecError> {
    let toks = lex(text)?;
    Parser {
        toks,
        pos: 0,
        names: Vec::new(),
    }
    .program()
}
