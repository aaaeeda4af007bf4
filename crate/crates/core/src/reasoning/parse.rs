//! Line-oriented parser for `Area <n>: <score>, <reason>` answers.

use std::sync::LazyLock;

use regex::Regex;

use super::{ReasonCategory, ReasoningError, RatingResponse};

static LINE: LazyLock<Regex> = LazyLock::new(|| {
    // Tolerates list bullets and markdown emphasis around the label.
    Regex::new(r"(?i)^[\s*\-•]*area\s*(\d+)\s*\**\s*:\s*\**\s*([+-]?\d+(?:\.\d+)?)\s*\**\s*(?:,\s*(.*?))?\s*$")
        .expect("valid regex")
});

const KEYWORDS: [(&str, ReasonCategory); 5] = [
    ("functional", ReasonCategory::Functionality),
    ("aesthetic", ReasonCategory::Aesthetics),
    ("social", ReasonCategory::Social),
    ("health", ReasonCategory::HealthSafety),
    ("safety", ReasonCategory::HealthSafety),
];

/// Category named in a free-text reason: the earliest factor keyword wins;
/// a reason that starts with "other" is Other; anything else is Unclassified.
pub fn classify_reason(reason: &str) -> ReasonCategory {
    let lower = reason.to_lowercase();
    let earliest = KEYWORDS
        .iter()
        .filter_map(|(k, c)| lower.find(k).map(|pos| (pos, *c)))
        .min_by_key(|(pos, c)| (*pos, *c));
    if let Some((_, c)) = earliest {
        return c;
    }
    let trimmed = lower.trim_start_matches(|c: char| !c.is_alphanumeric());
    if trimmed.starts_with("other") {
        ReasonCategory::Other
    } else {
        ReasonCategory::Unclassified
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub responses: Vec<RatingResponse>,
    /// One entry per rejected non-blank line, with its 1-based line number.
    pub diagnostics: Vec<String>,
}

/// Parses every line; at least one well-formed rating is required.
pub fn parse_response(text: &str) -> Result<ParseOutcome, ReasoningError> {
    let mut responses: Vec<RatingResponse> = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        let Some(caps) = LINE.captures(line) else {
            diagnostics.push(format!("line {n}: not a rating line: {line}"));
            continue;
        };
        let area: u32 = match caps[1].parse() {
            Ok(a) if a >= 1 => a,
            _ => {
                diagnostics.push(format!("line {n}: invalid area index `{}`", &caps[1]));
                continue;
            }
        };
        let score = match caps[2].parse::<u8>() {
            Ok(s) if (1..=5).contains(&s) => s,
            _ => {
                diagnostics.push(format!("line {n}: score `{}` outside 1..5", &caps[2]));
                continue;
            }
        };
        if responses.iter().any(|r| r.area == area) {
            diagnostics.push(format!("line {n}: duplicate rating for area {area}"));
            continue;
        }
        let reason = caps.get(3).map_or("", |m| m.as_str()).to_string();
        let category = classify_reason(&reason);
        responses.push(RatingResponse { area, score, reason, category });
    }
    if responses.is_empty() {
        return Err(ReasoningError::NoRatings { diagnostics });
    }
    Ok(ParseOutcome { responses, diagnostics })
}

/// Canonical rendering, one `Area n: s, reason` line per response.
pub fn render_responses(responses: &[RatingResponse]) -> String {
    let mut s = String::new();
    for r in responses {
        s.push_str(&format!("Area {}: {}, {}\n", r.area, r.score, r.reason));
    }
    s
}
