//! String normalization shared by dictionaries, entity resolution and slot
//! filler matching.

/// Case-folds and collapses runs of whitespace into single spaces.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

const HONORIFICS: &[&str] = &[
    "mr", "mrs", "ms", "miss", "dr", "prof", "sir", "dame", "lord", "lady", "rev", "hon",
];

/// `normalize`, then drops leading honorifics ("Mr.", "Dr", ...).
pub fn normalize_person(s: &str) -> String {
    let norm = normalize(s);
    let mut words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
    while words.len() > 1 {
        let head = words[0].trim_end_matches('.');
        if HONORIFICS.contains(&head) {
            words.remove(0);
        } else {
            break;
        }
    }
    words.join(" ")
}
