use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(u64),
    /// `#n` numeral literal.
    Numeral(u64),
    /// `@name` library reference.
    LibRef(String),
    /// `$r.n` generated address.
    Fresh(String, u32),
    Lambda,
    BigLambda,
    Forall,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Bang,
    Star,
    Bar,
    StoreArrow,
    Lolli,
    Arrow,
    Eq,
    Colon,
    Semi,
    Comma,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Nat(n) => format!("`{n}`"),
            Tok::Numeral(n) => format!("`#{n}`"),
            Tok::LibRef(s) => format!("`@{s}`"),
            Tok::Fresh(r, n) => format!("`${r}.{n}`"),
            Tok::Lambda => "`\\`".into(),
            Tok::BigLambda => "`/\\`".into(),
            Tok::Forall => "`forall`".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Star => "`*`".into(),
            Tok::Bar => "`|`".into(),
            Tok::StoreArrow => "`<=`".into(),
            Tok::Lolli => "`-o`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() && c != 'λ' && c != 'Λ' || c == '_'
}

fn is_ident_char(c: char) -> bool {
    (c.is_alphanumeric() && c != 'λ' && c != 'Λ') || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError::Syntax {
        line,
        col,
        message: msg,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
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
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: tl, col: tc });
        let two = chars.get(i + 1).copied();
        match c {
            '\\' | 'λ' => {
                push(&mut out, Tok::Lambda);
                adv(1, &mut i, &mut col);
            }
            '/' if two == Some('\\') => {
                push(&mut out, Tok::BigLambda);
                adv(2, &mut i, &mut col);
            }
            'Λ' => {
                push(&mut out, Tok::BigLambda);
                adv(1, &mut i, &mut col);
            }
            '∀' => {
                push(&mut out, Tok::Forall);
                adv(1, &mut i, &mut col);
            }
            '.' => {
                push(&mut out, Tok::Dot);
                adv(1, &mut i, &mut col);
            }
            '(' => {
                push(&mut out, Tok::LParen);
                adv(1, &mut i, &mut col);
            }
            ')' => {
                push(&mut out, Tok::RParen);
                adv(1, &mut i, &mut col);
            }
            '[' => {
                push(&mut out, Tok::LBracket);
                adv(1, &mut i, &mut col);
            }
            ']' => {
                push(&mut out, Tok::RBracket);
                adv(1, &mut i, &mut col);
            }
            '!' => {
                push(&mut out, Tok::Bang);
                adv(1, &mut i, &mut col);
            }
            '*' | '∗' => {
                push(&mut out, Tok::Star);
                adv(1, &mut i, &mut col);
            }
            '|' => {
                push(&mut out, Tok::Bar);
                adv(1, &mut i, &mut col);
            }
            '<' if two == Some('=') => {
                push(&mut out, Tok::StoreArrow);
                adv(2, &mut i, &mut col);
            }
            '⇐' => {
                push(&mut out, Tok::StoreArrow);
                adv(1, &mut i, &mut col);
            }
            '-' if two == Some('o') && !chars.get(i + 2).is_some_and(|c| is_ident_char(*c)) => {
                push(&mut out, Tok::Lolli);
                adv(2, &mut i, &mut col);
            }
            '⊸' => {
                push(&mut out, Tok::Lolli);
                adv(1, &mut i, &mut col);
            }
            '-' if two == Some('>') => {
                push(&mut out, Tok::Arrow);
                adv(2, &mut i, &mut col);
            }
            '→' => {
                push(&mut out, Tok::Arrow);
                adv(1, &mut i, &mut col);
            }
            '=' => {
                push(&mut out, Tok::Eq);
                adv(1, &mut i, &mut col);
            }
            ':' => {
                push(&mut out, Tok::Colon);
                adv(1, &mut i, &mut col);
            }
            ';' => {
                push(&mut out, Tok::Semi);
                adv(1, &mut i, &mut col);
            }
            ',' => {
                push(&mut out, Tok::Comma);
                adv(1, &mut i, &mut col);
            }
            '#' | '@' | '$' => {
                let start = i + 1;
                let mut j = start;
                if c == '#' {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                } else {
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                }
                if j == start {
                    return Err(err(tl, tc, format!("`{c}` must be followed by a name or number")));
                }
                let text: String = chars[start..j].iter().collect();
                let tok = match c {
                    '#' => Tok::Numeral(
                        text.parse()
                            .map_err(|_| err(tl, tc, format!("numeral `#{text}` is too large")))?,
                    ),
                    '@' => Tok::LibRef(text),
                    _ => {
                        if chars.get(j) != Some(&'.') {
                            return Err(err(tl, tc, "generated address needs the form `$r.n`".into()));
                        }
                        let k0 = j + 1;
                        let mut k = k0;
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        let num: String = chars[k0..k].iter().collect();
                        let n = num
                            .parse()
                            .map_err(|_| err(tl, tc, "generated address needs the form `$r.n`".into()))?;
                        j = k;
                        Tok::Fresh(text, n)
                    }
                };
                push(&mut out, tok);
                let n = j - i;
                adv(n, &mut i, &mut col);
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let n = text
                    .parse()
                    .map_err(|_| err(tl, tc, format!("number `{text}` is too large")))?;
                push(&mut out, Tok::Nat(n));
                let n = j - i;
                adv(n, &mut i, &mut col);
            }
            c if is_ident_start(c) => {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let tok = if text == "forall" {
                    Tok::Forall
                } else {
                    Tok::Ident(text)
                };
                push(&mut out, tok);
                let n = j - i;
                adv(n, &mut i, &mut col);
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ascii_and_unicode_agree() {
        assert_eq!(toks("\\x. x -o y"), toks("λx. x ⊸ y"));
        assert_eq!(toks("r <= *"), toks("r ⇐ ∗"));
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            toks("x -- note\ny"),
            vec![Tok::Ident("x".into()), Tok::Ident("y".into()), Tok::Eof]
        );
    }

    #[test]
    fn sigils() {
        assert_eq!(
            toks("#12 @mult $r.3"),
            vec![
                Tok::Numeral(12),
                Tok::LibRef("mult".into()),
                Tok::Fresh("r".into(), 3),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = lex("x\n  y").unwrap();
        assert_eq!((t[1].line, t[1].col), (2, 3));
    }

    #[test]
    fn lolli_needs_a_break() {
        assert_eq!(toks("-o"), vec![Tok::Lolli, Tok::Eof]);
        assert!(lex("-oops").is_err());
    }
}
