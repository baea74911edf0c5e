//! Reader for the loosely Python-flavoured dictionary literals agents emit:
//! `True`/`False`, tuples, single- or double-quoted strings, trailing commas.

/// A parsed literal value.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Literal>),
    Tuple(Vec<Literal>),
    Dict(Vec<(String, Literal)>),
}

impl Literal {
    /// Case-sensitive key lookup on a dictionary; first occurrence wins.
    pub fn get(&self, key: &str) -> Option<&Literal> {
        match self {
            Literal::Dict(items) => items.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Int(i) => Some(*i as f64),
            Literal::Float(f) => Some(*f),
            _ => None,
        }
    }
}

/// Find the first balanced `{...}` in `text` that parses as a dictionary.
pub fn extract_dictionary(text: &str) -> Option<Literal> {
    let chars: Vec<char> = text.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if *c != '{' {
            continue;
        }
        let mut reader = Reader {
            chars: &chars,
            pos: i,
        };
        if let Some(lit @ Literal::Dict(_)) = reader.value() {
            return Some(lit);
        }
    }
    None
}

/// Parse a complete literal (used for values nested inside strings).
pub fn parse_literal(text: &str) -> Option<Literal> {
    let chars: Vec<char> = text.chars().collect();
    let mut reader = Reader {
        chars: &chars,
        pos: 0,
    };
    let v = reader.value()?;
    reader.skip_ws();
    (reader.pos == chars.len()).then_some(v)
}

struct Reader<'a> {
    chars: &'a [char],
    pos: usize,
}

impl Reader<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Option<Literal> {
        self.skip_ws();
        match self.peek()? {
            '{' => self.dict(),
            '[' => self.seq('[', ']').map(Literal::List),
            '(' => self.seq('(', ')').map(Literal::Tuple),
            '"' | '\'' | '“' => self.string().map(Literal::Str),
            c if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => self.number(),
            c if c.is_alphabetic() => self.word(),
            _ => None,
        }
    }

    fn dict(&mut self) -> Option<Literal> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            if self.eat('}') {
                return Some(Literal::Dict(items));
            }
            self.skip_ws();
            let key = match self.peek()? {
                '"' | '\'' | '“' => self.string()?,
                _ => return None,
            };
            if !self.eat(':') {
                return None;
            }
            let value = self.value()?;
            items.push((key, value));
            if self.eat(',') {
                continue;
            }
            if self.eat('}') {
                return Some(Literal::Dict(items));
            }
            return None;
        }
    }

    fn seq(&mut self, open: char, close: char) -> Option<Vec<Literal>> {
        debug_assert_eq!(self.peek(), Some(open));
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            if self.eat(close) {
                return Some(items);
            }
            items.push(self.value()?);
            if self.eat(',') {
                continue;
            }
            if self.eat(close) {
                return Some(items);
            }
            return None;
        }
    }

    fn string(&mut self) -> Option<String> {
        let open = self.peek()?;
        let close = if open == '“' { '”' } else { open };
        self.pos += 1;
        let mut out = String::new();
        loop {
            let c = self.peek()?;
            self.pos += 1;
            if c == close {
                return Some(out);
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let esc = self.peek()?;
            self.pos += 1;
            match esc {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                'b' => out.push('\u{8}'),
                'f' => out.push('\u{c}'),
                '0' => out.push('\0'),
                'u' => {
                    let hi = self.hex4()?;
                    if (0xD800..0xDC00).contains(&hi) {
                        // Surrogate pair.
                        if self.peek() == Some('\\') && self.chars.get(self.pos + 1) == Some(&'u') {
                            self.pos += 2;
                            let lo = self.hex4()?;
                            let code =
                                0x10000 + ((hi - 0xD800) << 10) + (lo.checked_sub(0xDC00)?);
                            out.push(char::from_u32(code)?);
                        } else {
                            return None;
                        }
                    } else {
                        out.push(char::from_u32(hi)?);
                    }
                }
                other => out.push(other),
            }
        }
    }

    fn hex4(&mut self) -> Option<u32> {
        let digits: String = self.chars.get(self.pos..self.pos + 4)?.iter().collect();
        self.pos += 4;
        u32::from_str_radix(&digits, 16).ok()
    }

    fn number(&mut self) -> Option<Literal> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'))
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if let Ok(i) = text.parse::<i64>() {
            return Some(Literal::Int(i));
        }
        text.parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .map(Literal::Float)
    }

    fn word(&mut self) -> Option<Literal> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        match word.as_str() {
            "True" | "true" => Some(Literal::Bool(true)),
            "False" | "false" => Some(Literal::Bool(false)),
            "None" | "null" => Some(Literal::Null),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_style_dict_inside_prose() {
        let raw = "Sure! Here you go:\n```python\n{\"Flag\": True, 'Time Period': [(400, 600), (1000.5, 1200)], \"Reason\": \"it's {there}\",}\n```";
        let d = extract_dictionary(raw).unwrap();
        assert_eq!(d.get("Flag"), Some(&Literal::Bool(true)));
        assert_eq!(
            d.get("Time Period"),
            Some(&Literal::List(vec![
                Literal::Tuple(vec![Literal::Int(400), Literal::Int(600)]),
                Literal::Tuple(vec![Literal::Float(1000.5), Literal::Int(1200)]),
            ]))
        );
        assert_eq!(d.get("Reason"), Some(&Literal::Str("it's {there}".into())));
        assert_eq!(d.get("flag"), None);
    }

    #[test]
    fn skips_unbalanced_braces_before_the_dictionary() {
        let raw = "set {x} is empty. {\"Confidence\": false}";
        let d = extract_dictionary(raw).unwrap();
        assert_eq!(d.get("Confidence"), Some(&Literal::Bool(false)));
    }

    #[test]
    fn json_escapes_round_trip() {
        let original = "quote \" backslash \\ newline \n emoji 🎥 tab \t";
        let encoded = serde_json::to_string(original).unwrap();
        let d = extract_dictionary(&format!("{{\"k\": {encoded}}}")).unwrap();
        assert_eq!(d.get("k"), Some(&Literal::Str(original.into())));
        let ascii = "{\"k\": \"\\ud83c\\udfa5\"}";
        assert_eq!(
            extract_dictionary(ascii).unwrap().get("k"),
            Some(&Literal::Str("🎥".into()))
        );
    }

    #[test]
    fn garbage_has_no_dictionary() {
        assert_eq!(extract_dictionary("garbage"), None);
        assert_eq!(extract_dictionary("{\"a\": }"), None);
        assert_eq!(extract_dictionary("{\"a\": 1"), None);
    }

    #[test]
    fn nested_literal() {
        assert_eq!(
            parse_literal(" (1, 2) "),
            Some(Literal::Tuple(vec![Literal::Int(1), Literal::Int(2)]))
        );
        assert_eq!(parse_literal("(1, 2) x"), None);
    }
}
