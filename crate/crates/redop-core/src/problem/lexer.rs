use num_bigint::BigInt;

use super::ProblemError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(char),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const SYMBOLS: &str = "+-*/^(),;:[]=";

pub fn tokenize(text: &str) -> Result<Vec<Token>, ProblemError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let at = |tok| Token {
                tok,
                line: ln + 1,
                column,
            };
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                out.push(at(Tok::Int(s.parse().expect("digits"))));
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(at(Tok::Ident(chars[start..i].iter().collect())));
            } else if SYMBOLS.contains(c) {
                out.push(at(Tok::Sym(c)));
                i += 1;
            } else {
                return Err(ProblemError::Parse {
                    line: ln + 1,
                    column,
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let cut = [line.find('#'), line.find("//")]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(line.len());
    &line[..cut]
}
