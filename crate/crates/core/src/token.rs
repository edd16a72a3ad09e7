//! Whitespace-insensitive SPARQL token streams.
//!
//! Generated queries are compared to expected texts token by token, so that
//! formatting (indentation, line breaks) never makes a comparison fail while
//! any real difference still does.

/// Split a SPARQL query text into comparison tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // Comments run to end of line.
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        // IRIs.
        if c == '<' && chars.get(i + 1).map_or(false, |&n| n != '=' && !n.is_whitespace()) {
            let start = i;
            while i < chars.len() && chars[i] != '>' {
                i += 1;
            }
            i = (i + 1).min(chars.len());
            out.push(chars[start..i].iter().collect());
            continue;
        }
        // String literals (single or double quoted).
        if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() {
                if chars[i] == '\\' {
                    i += 2;
                    continue;
                }
                if chars[i] == c {
                    i += 1;
                    break;
                }
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
            continue;
        }
        // Multi-character operators.
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        if ["^^", "&&", "||", "!=", "<=", ">="].contains(&two.as_str()) {
            out.push(two);
            i += 2;
            continue;
        }
        // Words: names, prefixed names, variables, numbers, keywords.
        if c.is_alphanumeric() || c == '?' || c == '$' || c == '_' || c == ':' {
            let start = i;
            if c == '?' || c == '$' {
                i += 1;
            }
            while i < chars.len()
                && (chars[i].is_alphanumeric()
                    || chars[i] == ':'
                    || chars[i] == '_'
                    || (chars[i] == '.' && chars.get(i + 1).map_or(false, |n| n.is_ascii_digit())))
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(word);
            continue;
        }
        out.push(c.to_string());
        i += 1;
    }
    out
}

/// True when both texts tokenize identically.
pub fn same_tokens(a: &str, b: &str) -> bool {
    tokenize(a) == tokenize(b)
}

/// A readable diff locating the first token mismatch, for test output.
pub fn first_difference(a: &str, b: &str) -> Option<String> {
    let ta = tokenize(a);
    let tb = tokenize(b);
    for (i, (x, y)) in ta.iter().zip(tb.iter()).enumerate() {
        if x != y {
            let ctx_a: Vec<&str> = ta[i.saturating_sub(4)..(i + 3).min(ta.len())]
                .iter()
                .map(String::as_str)
                .collect();
            let ctx_b: Vec<&str> = tb[i.saturating_sub(4)..(i + 3).min(tb.len())]
                .iter()
                .map(String::as_str)
                .collect();
            return Some(format!(
                "token {i}: `{x}` vs `{y}`\n  left:  … {}\n  right: … {}",
                ctx_a.join(" "),
                ctx_b.join(" ")
            ));
        }
    }
    if ta.len() != tb.len() {
        return Some(format!(
            "token count differs: {} vs {} (extra: {:?})",
            ta.len(),
            tb.len(),
            if ta.len() > tb.len() {
                &ta[tb.len()..]
            } else {
                &tb[ta.len()..]
            }
        ));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_is_ignored() {
        assert!(same_tokens(
            "SELECT ?x WHERE { ?x a :C . }",
            "SELECT ?x\nWHERE {\n  ?x a :C .\n}"
        ));
    }

    #[test]
    fn real_differences_are_caught() {
        assert!(!same_tokens("SELECT ?x", "SELECT ?y"));
        assert!(!same_tokens("FILTER(?a >= 4)", "FILTER(?a > 4)"));
    }

    #[test]
    fn strings_and_iris_are_single_tokens() {
        let toks = tokenize("?x :p 'a b c'@en . ?y = <http://e x>");
        assert!(toks.contains(&"'a b c'".to_string()));
        assert!(toks.iter().any(|t| t.starts_with("<http://e")));
    }

    #[test]
    fn prefixed_names_keep_their_colon() {
        let toks = tokenize("?h :caseRecordNo ?c.");
        assert_eq!(toks, vec!["?h", ":caseRecordNo", "?c", "."]);
    }

    #[test]
    fn comments_are_skipped() {
        assert!(same_tokens("SELECT ?x # everything\n WHERE", "SELECT ?x WHERE"));
    }

    #[test]
    fn multi_char_operators() {
        let toks = tokenize("FILTER(?a >= 4 && ?b != 2)");
        assert!(toks.contains(&">=".to_string()));
        assert!(toks.contains(&"&&".to_string()));
        assert!(toks.contains(&"!=".to_string()));
    }

    #[test]
    fn decimal_numbers_stay_whole() {
        let toks = tokenize("FILTER(?a > 4.5)");
        assert!(toks.contains(&"4.5".to_string()));
    }
}
