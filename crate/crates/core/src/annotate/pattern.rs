//! Token pattern expressions.
//!
//! A pattern is a space-separated sequence of token patterns; the i-th token
//! pattern must match the whole i-th token of a window. Inside a token
//! pattern the language is deliberately small:
//!
//! ```text
//! atom       := literal | '\' escaped | '.' | class
//! escaped    := 'd' (digit) | 'a' (letter) | 'w' (letter, digit, '_') | any other char (itself)
//! class      := '[' '^'? (char | char '-' char | '\' escaped)+ ']'
//! quantifier := '?' | '*' | '+' | '{n}' | '{n,}' | '{n,m}'
//! ```
//!
//! There is no alternation, grouping or anchoring. Patterns are translated to
//! anchored `regex` programs for matching.

use regex::Regex;

#[derive(Debug, Clone)]
pub struct TokenPattern {
    source: String,
    tokens: Vec<Regex>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid pattern at char {position}: {message}")]
pub struct PatternError {
    pub position: usize,
    pub message: String,
}

fn err(position: usize, message: impl Into<String>) -> PatternError {
    PatternError {
        position,
        message: message.into(),
    }
}

const SPECIAL: &[char] = &['\\', '.', '[', ']', '?', '*', '+', '{', '}'];

impl TokenPattern {
    pub fn compile(source: &str) -> Result<Self, PatternError> {
        let trimmed = source.trim();
        if trimmed.is_empty() {
            return Err(err(0, "empty pattern"));
        }
        let mut tokens = Vec::new();
        let mut offset = source.len() - source.trim_start().len();
        for part in trimmed.split(' ') {
            if part.is_empty() {
                return Err(err(offset, "consecutive spaces"));
            }
            let body = translate(part, offset)?;
            let re = Regex::new(&format!("^(?:{body})$"))
                .map_err(|e| err(offset, format!("cannot compile: {e}")))?;
            tokens.push(re);
            offset += part.chars().count() + 1;
        }
        Ok(TokenPattern {
            source: trimmed.to_string(),
            tokens,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of tokens a match covers.
    pub fn width(&self) -> usize {
        self.tokens.len()
    }

    pub fn matches_at(&self, tokens: &[String], start: usize) -> bool {
        start + self.tokens.len() <= tokens.len()
            && self
                .tokens
                .iter()
                .zip(&tokens[start..])
                .all(|(re, t)| re.is_match(t))
    }
}

fn escape_class_char(c: char) -> String {
    match c {
        '\\' | ']' | '[' | '^' | '-' | '&' | '~' => format!("\\{c}"),
        _ => c.to_string(),
    }
}

fn shorthand(c: char, in_class: bool) -> String {
    let body = match c {
        'd' => "0-9",
        'a' => "A-Za-z",
        'w' => "A-Za-z0-9_",
        other => {
            return if in_class {
                escape_class_char(other)
            } else {
                regex::escape(&other.to_string())
            }
        }
    };
    if in_class {
        body.to_string()
    } else {
        format!("[{body}]")
    }
}

fn translate(part: &str, base: usize) -> Result<String, PatternError> {
    let chars: Vec<char> = part.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    let mut have_atom = false;
    while i < chars.len() {
        let pos = base + i;
        let c = chars[i];
        match c {
            '\\' => {
                let next = *chars.get(i + 1).ok_or_else(|| err(pos, "dangling escape"))?;
                out.push_str(&shorthand(next, false));
                i += 2;
                have_atom = true;
            }
            '.' => {
                out.push('.');
                i += 1;
                have_atom = true;
            }
            '[' => {
                let (class, next) = translate_class(&chars, i, base)?;
                out.push_str(&class);
                i = next;
                have_atom = true;
            }
            '?' | '*' | '+' => {
                if !have_atom {
                    return Err(err(pos, format!("quantifier '{c}' without atom")));
                }
                out.push(c);
                i += 1;
                have_atom = false;
            }
            '{' => {
                if !have_atom {
                    return Err(err(pos, "repetition without atom"));
                }
                let close = chars[i..]
                    .iter()
                    .position(|&x| x == '}')
                    .ok_or_else(|| err(pos, "unclosed repetition"))?
                    + i;
                let inner: String = chars[i + 1..close].iter().collect();
                let (lo, hi) = match inner.split_once(',') {
                    None => (inner.as_str(), Some(inner.as_str())),
                    Some((lo, "")) => (lo, None),
                    Some((lo, hi)) => (lo, Some(hi)),
                };
                let lo: usize = lo
                    .parse()
                    .map_err(|_| err(pos, format!("bad repetition bound '{inner}'")))?;
                let hi: Option<usize> = hi
                    .map(|h| h.parse())
                    .transpose()
                    .map_err(|_| err(pos, format!("bad repetition bound '{inner}'")))?;
                if let Some(h) = hi {
                    if h < lo || h > 100 {
                        return Err(err(pos, format!("bad repetition range '{inner}'")));
                    }
                }
                match hi {
                    Some(h) if h == lo => out.push_str(&format!("{{{lo}}}")),
                    Some(h) => out.push_str(&format!("{{{lo},{h}}}")),
                    None => out.push_str(&format!("{{{lo},}}")),
                }
                i = close + 1;
                have_atom = false;
            }
            ']' | '}' => return Err(err(pos, format!("unbalanced '{c}'"))),
            _ => {
                debug_assert!(!SPECIAL.contains(&c));
                out.push_str(&regex::escape(&c.to_string()));
                i += 1;
                have_atom = true;
            }
        }
    }
    Ok(out)
}

fn translate_class(chars: &[char], open: usize, base: usize) -> Result<(String, usize), PatternError> {
    let mut i = open + 1;
    let mut out = String::from("[");
    if chars.get(i) == Some(&'^') {
        out.push('^');
        i += 1;
    }
    let mut members = 0;
    loop {
        let c = *chars
            .get(i)
            .ok_or_else(|| err(base + open, "unclosed character class"))?;
        match c {
            ']' => {
                if members == 0 {
                    return Err(err(base + i, "empty character class"));
                }
                out.push(']');
                return Ok((out, i + 1));
            }
            '\\' => {
                let next = *chars
                    .get(i + 1)
                    .ok_or_else(|| err(base + i, "dangling escape"))?;
                out.push_str(&shorthand(next, true));
                i += 2;
            }
            _ => {
                if chars.get(i + 1) == Some(&'-') && chars.get(i + 2).is_some_and(|&x| x != ']') {
                    let hi = chars[i + 2];
                    if hi < c {
                        return Err(err(base + i, format!("reversed range {c}-{hi}")));
                    }
                    out.push_str(&format!("{}-{}", escape_class_char(c), escape_class_char(hi)));
                    i += 3;
                } else {
                    out.push_str(&escape_class_char(c));
                    i += 1;
                }
            }
        }
        members += 1;
    }
}
