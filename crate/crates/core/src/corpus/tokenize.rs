/// Split text into lowercase tokens.
///
/// A token is a maximal run of letters and digits; a single hyphen between
/// two alphanumeric characters stays inside the token ("t-cells"). Every
/// other character separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '-' && !current.is_empty() && chars.peek().is_some_and(|n| n.is_alphanumeric()) {
            current.push('-');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
