//! Parser for action lists emitted by the language model.
//!
//! Accepted call syntax:
//!
//! ```text
//! list  := '[' ']' | '[' call (',' call)* ']'
//! call  := ident '(' ')' | ident '(' arg (',' arg)* ')'
//! arg   := word+ | quoted
//! word  := ident | number
//! ```
//!
//! Whitespace may appear between any two tokens. Several bare words in one
//! argument are joined with single spaces, so `pick_up(green apple)` and
//! `pick_up("green apple")` are the same call. The canonical JSON form
//! `[{"method": "...", "args": [...]}]` is accepted as well.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionCall {
    pub method: String,
    pub args: Vec<String>,
}

impl ActionCall {
    pub fn new<S: Into<String>>(
        method: impl Into<String>,
        args: impl IntoIterator<Item = S>,
    ) -> Self {
        ActionCall {
            method: method.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for ActionCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.method)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write_arg(f, a)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_number(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    all_digits(int) && frac.is_none_or(all_digits)
}

fn write_arg(f: &mut impl fmt::Write, arg: &str) -> fmt::Result {
    if is_identifier(arg) || is_number(arg) {
        return f.write_str(arg);
    }
    f.write_char('"')?;
    for c in arg.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// `[a(x), b("y z")]`: bare where possible, quoted otherwise.
pub fn to_canonical(calls: &[ActionCall]) -> String {
    let body: Vec<String> = calls.iter().map(ToString::to_string).collect();
    format!("[{}]", body.join(", "))
}

pub fn to_json(calls: &[ActionCall]) -> String {
    serde_json::to_string(calls).expect("action calls always serialize")
}

pub fn parse_actions(text: &str) -> Result<Vec<ActionCall>, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    p.expect('[', "`[`")?;
    p.skip_ws();
    if p.peek() == Some('{') {
        return parse_json(text);
    }
    let mut calls = vec![];
    if p.peek() == Some(']') {
        p.bump();
    } else {
        loop {
            calls.push(p.call()?);
            p.skip_ws();
            match p.peek() {
                Some(',') => {
                    p.bump();
                    p.skip_ws();
                }
                Some(']') => {
                    p.bump();
                    break;
                }
                _ => return Err(p.error("`,` or `]`")),
            }
        }
    }
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("end of input"));
    }
    Ok(calls)
}

fn parse_json(text: &str) -> Result<Vec<ActionCall>, ParseError> {
    let calls: Vec<ActionCall> = serde_json::from_str(text).map_err(|e| ParseError {
        offset: line_col_to_offset(text, e.line(), e.column()),
        expected: "canonical JSON action list".into(),
        found: e.to_string(),
    })?;
    if let Some(bad) = calls.iter().find(|c| !is_identifier(&c.method)) {
        let offset = text.find(&format!("\"{}\"", bad.method)).unwrap_or(0);
        return Err(ParseError {
            offset,
            expected: "identifier method name".into(),
            found: format!("{:?}", bad.method),
        });
    }
    Ok(calls)
}

fn line_col_to_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            expected: expected.to_string(),
            found: match self.peek() {
                Some(c) => format!("{c:?}"),
                None => "end of input".to_string(),
            },
        }
    }

    fn expect(&mut self, c: char, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn call(&mut self) -> Result<ActionCall, ParseError> {
        let method = self.ident().ok_or_else(|| self.error("method name"))?;
        self.skip_ws();
        self.expect('(', "`(`")?;
        self.skip_ws();
        let mut args = vec![];
        if self.peek() == Some(')') {
            self.bump();
            return Ok(ActionCall { method, args });
        }
        loop {
            args.push(self.arg()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.bump();
                    self.skip_ws();
                }
                Some(')') => {
                    self.bump();
                    return Ok(ActionCall { method, args });
                }
                _ => return Err(self.error("`,` or `)`")),
            }
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                self.bump();
            }
            _ => return None,
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.bump();
        }
        Some(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Option<String> {
        let start = self.pos;
        let save = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.bump();
            }
            p.pos > s
        };
        if !digits(self) {
            self.pos = save;
            return None;
        }
        if self.peek() == Some('.') {
            let dot = self.pos;
            self.bump();
            if !digits(self) {
                self.pos = dot;
            }
        }
        Some(self.src[start..self.pos].to_string())
    }

    fn word(&mut self) -> Option<String> {
        self.ident().or_else(|| self.number())
    }

    fn arg(&mut self) -> Result<String, ParseError> {
        if let Some(q @ ('"' | '\'')) = self.peek() {
            return self.quoted(q);
        }
        let mut words = vec![self.word().ok_or_else(|| self.error("argument"))?];
        loop {
            let before = self.pos;
            self.skip_ws();
            if self.pos == before {
                break;
            }
            match self.word() {
                Some(w) => words.push(w),
                None => {
                    self.pos = before;
                    break;
                }
            }
        }
        Ok(words.join(" "))
    }

    fn quoted(&mut self, quote: char) -> Result<String, ParseError> {
        let open = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some(c) if c == quote => return Ok(out),
                Some('\\') => match self.peek() {
                    Some('n') => {
                        self.bump();
                        out.push('\n');
                    }
                    Some('t') => {
                        self.bump();
                        out.push('\t');
                    }
                    Some(c @ ('\\' | '"' | '\'')) => {
                        self.bump();
                        out.push(c);
                    }
                    Some(_) => return Err(self.error("escape sequence")),
                    None => return Err(self.error("escaped character")),
                },
                Some(c) => out.push(c),
                None => {
                    return Err(ParseError {
                        offset: open,
                        expected: format!("closing {quote}"),
                        found: "end of input".into(),
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spatial_example() {
        let calls = parse_actions("[ move_object_to_left_of(apple, orange) ]").unwrap();
        assert_eq!(
            calls,
            vec![ActionCall::new(
                "move_object_to_left_of",
                ["apple", "orange"]
            )]
        );
    }

    #[test]
    fn empty_list() {
        assert!(parse_actions("[]").unwrap().is_empty());
        assert!(parse_actions("  [ \n ]  ").unwrap().is_empty());
    }

    #[test]
    fn two_calls_in_order() {
        let calls = parse_actions("[ pick_up(lemon), hand_over(lemon) ]").unwrap();
        assert_eq!(
            calls,
            vec![
                ActionCall::new("pick_up", ["lemon"]),
                ActionCall::new("hand_over", ["lemon"]),
            ]
        );
    }

    #[test]
    fn multi_word_and_quoted_labels() {
        let a = parse_actions(r#"[pick_up("green apple")]"#).unwrap();
        let b = parse_actions("[pick_up(green   apple)]").unwrap();
        let c = parse_actions("[pick_up('green apple')]").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a[0].args, vec!["green apple"]);
        assert_eq!(to_canonical(&a), r#"[pick_up("green apple")]"#);
    }

    #[test]
    fn numeric_and_empty_args() {
        let calls = parse_actions("[place_at(kiwi, 640, -12.5), reset()]").unwrap();
        assert_eq!(calls[0].args, vec!["kiwi", "640", "-12.5"]);
        assert!(calls[1].args.is_empty());
    }

    #[test]
    fn json_form_is_accepted() {
        let text = r#"[{"method": "pick_up", "args": ["apple"]}]"#;
        assert_eq!(
            parse_actions(text).unwrap(),
            vec![ActionCall::new("pick_up", ["apple"])]
        );
        let calls = parse_actions("[pick_up(apple), place_at(apple, 1, 2)]").unwrap();
        assert_eq!(parse_actions(&to_json(&calls)).unwrap(), calls);
        let bad = r#"[{"method": "pick up", "args": []}]"#;
        assert!(parse_actions(bad).is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_actions("[pick_up(apple)] extra").unwrap_err();
        assert_eq!(e.offset, 17);
        assert_eq!(e.expected, "end of input");

        let e = parse_actions("pick_up(apple)").unwrap_err();
        assert_eq!(e.offset, 0);

        let e = parse_actions("[pick_up(apple]").unwrap_err();
        assert_eq!(e.offset, 14);
        assert_eq!(e.expected, "`,` or `)`");

        let e = parse_actions("[pick_up(apple),]").unwrap_err();
        assert_eq!(e.offset, 16);
        assert_eq!(e.expected, "method name");

        let e = parse_actions(r#"[pick_up("apple)]"#).unwrap_err();
        assert_eq!(e.offset, 9);

        let e = parse_actions("[pick_up(apple)").unwrap_err();
        assert_eq!(e.found, "end of input");
    }

    fn label() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z_][a-z0-9_]{0,8}",
            "-?[0-9]{1,4}(\\.[0-9]{1,3})?",
            "[a-z]{1,6}( [a-z]{1,6}){1,2}",
            "[ -~]{0,10}",
        ]
    }

    fn calls() -> impl Strategy<Value = Vec<ActionCall>> {
        prop::collection::vec(
            (
                "[a-z_][a-z0-9_]{0,12}",
                prop::collection::vec(label(), 0..4),
            )
                .prop_map(|(m, a)| ActionCall { method: m, args: a }),
            0..5,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn canonical_round_trip(cs in calls()) {
            let text = to_canonical(&cs);
            prop_assert_eq!(parse_actions(&text).unwrap(), cs);
        }

        #[test]
        fn mutations_never_panic(cs in calls(), edits in prop::collection::vec((any::<usize>(), any::<u8>()), 1..4)) {
            let mut bytes = to_canonical(&cs).into_bytes();
            for (i, b) in edits {
                let idx = i % (bytes.len() + 1);
                if idx == bytes.len() { bytes.push(b) } else { bytes[idx] = b }
            }
            let text = String::from_utf8_lossy(&bytes);
            if let Err(e) = parse_actions(&text) {
                prop_assert!(e.offset <= text.len());
            }
        }
    }
}
