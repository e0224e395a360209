//! Closed word lists shared by the resolvers.

/// Personal pronouns, matched case-insensitively.
pub const PERSONAL_PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "you", "your", "yours", "he", "him", "his", "she", "her", "hers",
    "we", "us", "our", "ours", "they", "them", "their", "theirs", "it", "its",
];

const PLURAL_PRONOUNS: &[&str] = &["we", "us", "our", "ours", "they", "them", "their", "theirs"];

/// Surface forms treated as potential discourse-deixis anaphors.
pub const DEIXIS_FORMS: &[&str] = &["this", "that", "it", "which"];

pub fn is_personal_pronoun(surface: &str) -> bool {
    let lower = surface.to_lowercase();
    PERSONAL_PRONOUNS.contains(&lower.as_str())
}

/// `Some(true)` for plural pronouns, `Some(false)` for singular ones.
/// `you` and its forms are ambiguous and yield `None`.
pub fn pronoun_is_plural(surface: &str) -> Option<bool> {
    let lower = surface.to_lowercase();
    if !PERSONAL_PRONOUNS.contains(&lower.as_str()) || lower.starts_with("you") {
        return None;
    }
    Some(PLURAL_PRONOUNS.contains(&lower.as_str()))
}

pub fn is_deixis_form(surface: &str) -> bool {
    let lower = surface.to_lowercase();
    DEIXIS_FORMS.contains(&lower.as_str())
}

pub fn is_sentence_final(surface: &str) -> bool {
    matches!(surface, "." | "?" | "!")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_insensitive() {
        assert!(is_personal_pronoun("I"));
        assert!(is_personal_pronoun("Them"));
        assert!(!is_personal_pronoun("table"));
        assert!(is_deixis_form("THIS"));
        assert!(is_deixis_form("Which"));
        assert!(!is_deixis_form("these"));
    }

    #[test]
    fn number() {
        assert_eq!(pronoun_is_plural("they"), Some(true));
        assert_eq!(pronoun_is_plural("He"), Some(false));
        assert_eq!(pronoun_is_plural("you"), None);
        assert_eq!(pronoun_is_plural("table"), None);
    }
}
