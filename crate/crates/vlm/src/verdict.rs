use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Organized,
    Disorganized,
    Unknown,
}

/// Case-insensitive keyword scan; "disorganized" is tested first since it
/// contains "organized".
pub fn parse_verdict(text: &str) -> Verdict {
    let lower = text.to_lowercase();
    if lower.contains("disorganized") {
        Verdict::Disorganized
    } else if lower.contains("organized") {
        Verdict::Organized
    } else {
        Verdict::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_precedence() {
        assert_eq!(parse_verdict("The lab is DISORGANIZED."), Verdict::Disorganized);
        assert_eq!(parse_verdict("organized, not disorganized"), Verdict::Disorganized);
        assert_eq!(parse_verdict("The lab is Organized"), Verdict::Organized);
        assert_eq!(parse_verdict("There is a box on the floor."), Verdict::Unknown);
        assert_eq!(parse_verdict(""), Verdict::Unknown);
    }
}
