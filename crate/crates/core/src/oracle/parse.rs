//! Extraction of structured answers from free model text.

use std::sync::OnceLock;

use regex::Regex;

use super::OracleError;

fn decimal() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:\d+(?:\.\d*)?|\.\d+)$").unwrap())
}

fn rating() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)rating\s*[:：]\s*\{?\s*\**\s*(\d+)").unwrap())
}

/// The last asterisk-delimited decimal in `[0,1]`, e.g. `*0.7*`.
///
/// Every pair of consecutive asterisks is a candidate, so `*0.2*0.6*` holds
/// both 0.2 and 0.6, and markdown bold `**0.4**` yields 0.4.
pub fn parse_probability(text: &str) -> Result<f64, OracleError> {
    let stars: Vec<usize> = text.match_indices('*').map(|(i, _)| i).collect();
    let found = stars
        .windows(2)
        .rev()
        .filter_map(|w| {
            let inner = text[w[0] + 1..w[1]].trim();
            if !decimal().is_match(inner) {
                return None;
            }
            inner.parse::<f64>().ok()
        })
        .find(|p| (0.0..=1.0).contains(p));
    found.ok_or_else(|| OracleError::Parse {
        reason: "no asterisk-delimited decimal in [0,1]".into(),
        raw: text.to_string(),
    })
}

/// The last `Rating: n` with `n` in 1..=6.
pub fn parse_rating(text: &str) -> Result<u8, OracleError> {
    let last = rating()
        .captures_iter(text)
        .last()
        .and_then(|c| c[1].parse::<u32>().ok());
    match last {
        Some(r @ 1..=6) => Ok(r as u8),
        Some(r) => Err(OracleError::Parse {
            reason: format!("rating {r} outside 1..6"),
            raw: text.to_string(),
        }),
        None => Err(OracleError::Parse {
            reason: "no `Rating:` line".into(),
            raw: text.to_string(),
        }),
    }
}

/// A JSON array of strings somewhere in the text (code fences and prose
/// around it are ignored).
pub fn parse_string_list(text: &str) -> Result<Vec<String>, OracleError> {
    let err = |reason: &str| OracleError::Parse {
        reason: reason.to_string(),
        raw: text.to_string(),
    };
    let start = text.find('[').ok_or_else(|| err("no JSON list"))?;
    let end = text.rfind(']').ok_or_else(|| err("no JSON list"))?;
    if end < start {
        return Err(err("no JSON list"));
    }
    let values: Vec<serde_json::Value> =
        serde_json::from_str(&text[start..=end]).map_err(|e| err(&format!("bad JSON list: {e}")))?;
    values
        .into_iter()
        .map(|v| match v {
            serde_json::Value::String(s) => Ok(s),
            other => Err(err(&format!("list item {other} is not a string"))),
        })
        .collect()
}
