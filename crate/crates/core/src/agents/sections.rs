//! Line-oriented helpers for locating headings, fields and tables in model
//! output. Everything here is total: malformed input yields empty results.

use std::sync::OnceLock;

use regex::Regex;

/// A heading at a fixed level and the lines up to the next heading of the
/// same or a higher level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section<'a> {
    pub title: String,
    pub number: Option<String>,
    pub body: Vec<&'a str>,
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s{0,3}(#{1,6})\s+(.*?)\s*#*\s*$").expect("valid regex"))
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+(?:\.\d+)*)\.?\s+(.*)$").expect("valid regex"))
}

fn heading(line: &str) -> Option<(usize, &str)> {
    let caps = heading_re().captures(line)?;
    Some((caps.get(1)?.as_str().len(), caps.get(2)?.as_str()))
}

/// Splits `lines` at headings of exactly `level` hashes. Lines before the
/// first such heading are dropped.
pub fn split_sections<'a>(lines: &[&'a str], level: usize) -> Vec<Section<'a>> {
    let mut out: Vec<Section<'a>> = Vec::new();
    for line in lines {
        match heading(line) {
            Some((l, text)) if l == level => {
                let text = text.trim();
                let (number, title) = match number_re().captures(text) {
                    Some(c) => (Some(c[1].to_string()), c[2].trim().to_string()),
                    None => (None, text.to_string()),
                };
                out.push(Section { title, number, body: Vec::new() });
            }
            Some((l, _)) if l < level && !out.is_empty() => {
                // A higher-level heading ends the current section; the
                // placeholder collects lines until the next match.
                out.push(Section { title: String::new(), number: None, body: Vec::new() });
            }
            _ => {
                if let Some(last) = out.last_mut() {
                    last.body.push(line);
                }
            }
        }
    }
    out.retain(|s| !(s.title.is_empty() && s.number.is_none()));
    out
}

pub fn lines(text: &str) -> Vec<&str> {
    text.lines().collect()
}

/// Index of the section matching any synonym (case-insensitive substring of
/// the title), else the one whose leading number equals `number`.
pub fn find_section<'s, 'a>(
    sections: &'s [Section<'a>],
    number: &str,
    synonyms: &[&str],
) -> Option<&'s Section<'a>> {
    sections
        .iter()
        .find(|s| {
            let t = s.title.to_lowercase();
            synonyms.iter().any(|syn| t.contains(syn))
        })
        .or_else(|| sections.iter().find(|s| s.number.as_deref() == Some(number)))
}

/// Strips list markers (`*`, `-`, `+`, `1.`, `1)`) and surrounding space.
pub fn strip_marker(line: &str) -> &str {
    let t = line.trim();
    for m in ["* ", "- ", "+ ", "• "] {
        if let Some(rest) = t.strip_prefix(m) {
            return rest.trim();
        }
    }
    if t == "*" || t == "-" {
        return "";
    }
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && digits < t.len() {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim();
        }
    }
    t
}

pub fn is_list_item(line: &str) -> bool {
    let t = line.trim_start();
    strip_marker(t).len() < t.len()
}

/// Value of a `Label: value` line, matching the label case-insensitively
/// after list markers and `**` emphasis are removed.
pub fn field<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let t = strip_marker(line).trim_start_matches("**");
    if t.len() < label.len() || !t.is_char_boundary(label.len()) {
        return None;
    }
    let (head, rest) = t.split_at(label.len());
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = rest.trim_start_matches("**").trim_start();
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches("**").trim())
}

/// List items in `body` with markers stripped; non-list lines are appended to
/// the preceding item as continuation text.
pub fn bullets(body: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in body {
        if line.trim().is_empty() {
            continue;
        }
        if is_list_item(line) {
            let item = strip_marker(line);
            if !item.is_empty() {
                out.push(item.to_string());
            }
        } else if let Some(last) = out.last_mut() {
            last.push(' ');
            last.push_str(line.trim());
        }
    }
    out
}

/// Non-empty body lines joined by single spaces.
pub fn paragraph(body: &[&str]) -> String {
    body.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Cells of a pipe-table row; `None` for non-rows and separator rows.
pub fn table_row(line: &str) -> Option<Vec<String>> {
    let t = line.trim();
    if !t.starts_with('|') {
        return None;
    }
    let inner = t.trim_start_matches('|').trim_end_matches('|');
    let cells: Vec<String> = inner.split('|').map(|c| c.trim().to_string()).collect();
    let is_separator = cells.iter().all(|c| !c.is_empty() && c.chars().all(|ch| matches!(ch, '-' | ':' | ' ')));
    if is_separator || cells.iter().all(String::is_empty) {
        return None;
    }
    Some(cells)
}

pub fn urls(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r#"https?://[^\s<>()\[\]"'`,]+"#).expect("valid regex"));
    let mut out: Vec<String> = Vec::new();
    for m in re.find_iter(text) {
        let u = m.as_str().trim_end_matches(['.', ';', ':']).to_string();
        if !out.contains(&u) {
            out.push(u);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_split_on_the_requested_level() {
        let text = "intro\n### 1. First\na\n#### 1.1 Sub\nb\n### 2 Second\nc\n";
        let l = lines(text);
        let s = split_sections(&l, 3);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].number.as_deref(), Some("1"));
        assert_eq!(s[0].title, "First");
        assert_eq!(s[0].body, vec!["a", "#### 1.1 Sub", "b"]);
        assert_eq!(s[1].title, "Second");
        let sub = split_sections(&s[0].body, 4);
        assert_eq!(sub[0].number.as_deref(), Some("1.1"));
    }

    #[test]
    fn higher_heading_closes_a_section() {
        let l = lines("#### A\nx\n### B\ny\n#### C\nz");
        let s = split_sections(&l, 4);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].body, vec!["x"]);
        assert_eq!(s[1].body, vec!["z"]);
    }

    #[test]
    fn fields_and_markers() {
        assert_eq!(field("* Clause Citation: Article 4", "Clause Citation"), Some("Article 4"));
        assert_eq!(field("- **Risk Level:** High", "risk level"), Some("High"));
        assert_eq!(field("Risk Levels: x", "Risk Level"), None);
        assert_eq!(strip_marker("12. item"), "item");
        assert_eq!(strip_marker("2025 was a year"), "2025 was a year");
    }

    #[test]
    fn table_rows() {
        assert_eq!(table_row("| a | b |"), Some(vec!["a".into(), "b".into()]));
        assert_eq!(table_row("|---|:--:|"), None);
        assert_eq!(table_row("no pipes"), None);
    }

    #[test]
    fn url_extraction() {
        let u = urls("see https://a.com/x, and (https://b.org/y). https://a.com/x");
        assert_eq!(u, ["https://a.com/x", "https://b.org/y"]);
    }
}
