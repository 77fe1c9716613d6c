//! Porter stemmer (M. F. Porter, 1980) over lowercase ASCII words.
//!
//! Words shorter than three letters or containing non-ASCII-alphabetic
//! characters are returned unchanged.

use alloc::string::{String, ToString};

fn is_consonant(word: &[u8], i: usize) -> bool {
    match word[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => {
            if i == 0 {
                true
            } else {
                !is_consonant(word, i - 1)
            }
        }
        _ => true,
    }
}

/// The measure m of the stem: the number of VC sequences in [C](VC)^m[V].
fn measure(word: &[u8]) -> usize {
    let mut m = 0;
    let mut i = 0;
    let n = word.len();
    while i < n && is_consonant(word, i) {
        i += 1;
    }
    loop {
        while i < n && !is_consonant(word, i) {
            i += 1;
        }
        if i == n {
            return m;
        }
        while i < n && is_consonant(word, i) {
            i += 1;
        }
        m += 1;
        if i == n {
            return m;
        }
    }
}

fn contains_vowel(word: &[u8]) -> bool {
    (0..word.len()).any(|i| !is_consonant(word, i))
}

fn ends_double_consonant(word: &[u8]) -> bool {
    let n = word.len();
    n >= 2 && word[n - 1] == word[n - 2] && is_consonant(word, n - 1)
}

/// *o: stem ends consonant-vowel-consonant where the final consonant is not
/// w, x, or y.
fn ends_cvc(word: &[u8]) -> bool {
    let n = word.len();
    if n < 3 {
        return false;
    }
    is_consonant(word, n - 3)
        && !is_consonant(word, n - 2)
        && is_consonant(word, n - 1)
        && !matches!(word[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(word: &[u8], suffix: &str) -> bool {
    let s = suffix.as_bytes();
    word.len() >= s.len() && &word[word.len() - s.len()..] == s
}

/// If `word` ends with `suffix` and the remaining stem has measure > `min_m`,
/// replaces the suffix. Returns whether the suffix matched at all.
fn replace_if(word: &mut Vec<u8>, suffix: &str, replacement: &str, min_m: usize) -> bool {
    if !ends_with(word, suffix) {
        return false;
    }
    let stem_len = word.len() - suffix.len();
    if measure(&word[..stem_len]) > min_m {
        word.truncate(stem_len);
        word.extend_from_slice(replacement.as_bytes());
    }
    true
}

use alloc::vec::Vec;

fn step_1a(word: &mut Vec<u8>) {
    if ends_with(word, "sses") || ends_with(word, "ies") {
        word.truncate(word.len() - 2);
    } else if ends_with(word, "ss") {
        // keep
    } else if ends_with(word, "s") {
        word.truncate(word.len() - 1);
    }
}

fn step_1b(word: &mut Vec<u8>) {
    if ends_with(word, "eed") {
        let stem_len = word.len() - 3;
        if measure(&word[..stem_len]) > 0 {
            word.truncate(word.len() - 1);
        }
        return;
    }
    let trimmed = if ends_with(word, "ed") && contains_vowel(&word[..word.len() - 2]) {
        word.truncate(word.len() - 2);
        true
    } else if ends_with(word, "ing") && contains_vowel(&word[..word.len() - 3]) {
        word.truncate(word.len() - 3);
        true
    } else {
        false
    };
    if !trimmed {
        return;
    }
    if ends_with(word, "at") || ends_with(word, "bl") || ends_with(word, "iz") {
        word.push(b'e');
    } else if ends_double_consonant(word) && !matches!(word[word.len() - 1], b'l' | b's' | b'z') {
        word.truncate(word.len() - 1);
    } else if measure(word) == 1 && ends_cvc(word) {
        word.push(b'e');
    }
}

fn step_1c(word: &mut [u8]) {
    if ends_with(word, "y") && contains_vowel(&word[..word.len() - 1]) {
        let n = word.len();
        word[n - 1] = b'i';
    }
}

const STEP_2: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("entli", "ent"),
    ("eli", "e"),
    ("ousli", "ous"),
    ("ization", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("biliti", "ble"),
];

const STEP_3: &[(&str, &str)] = &[
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
];

const STEP_4: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ou", "ism",
    "ate", "iti", "ous", "ive", "ize",
];

fn step_4(word: &mut Vec<u8>) {
    // "ion" only drops after s or t.
    if ends_with(word, "ion") {
        let stem_len = word.len() - 3;
        if stem_len >= 1
            && matches!(word[stem_len - 1], b's' | b't')
            && measure(&word[..stem_len]) > 1
        {
            word.truncate(stem_len);
        }
        return;
    }
    // Longest-match order matters: try longer suffixes first.
    let mut suffixes: Vec<&str> = STEP_4.to_vec();
    suffixes.sort_by_key(|s| core::cmp::Reverse(s.len()));
    for suffix in suffixes {
        if ends_with(word, suffix) {
            let stem_len = word.len() - suffix.len();
            if measure(&word[..stem_len]) > 1 {
                word.truncate(stem_len);
            }
            return;
        }
    }
}

fn step_5(word: &mut Vec<u8>) {
    if ends_with(word, "e") {
        let stem = &word[..word.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            word.truncate(word.len() - 1);
        }
    }
    if measure(word) > 1 && ends_double_consonant(word) && word[word.len() - 1] == b'l' {
        word.truncate(word.len() - 1);
    }
}

fn apply_pair_table(word: &mut Vec<u8>, table: &[(&str, &str)]) {
    for (suffix, replacement) in table {
        if ends_with(word, suffix) {
            replace_if(word, suffix, replacement, 0);
            return;
        }
    }
}

/// Stems one lowercase word.
pub fn porter(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w: Vec<u8> = word.as_bytes().to_vec();
    step_1a(&mut w);
    step_1b(&mut w);
    step_1c(&mut w);
    apply_pair_table(&mut w, STEP_2);
    apply_pair_table(&mut w, STEP_3);
    step_4(&mut w);
    step_5(&mut w);
    String::from_utf8(w).expect("ascii in, ascii out")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_vocabulary_samples() {
        for (word, stem) in [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("hopping", "hop"),
            ("falling", "fall"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("generalization", "gener"),
            ("oscillators", "oscil"),
            ("adjustable", "adjust"),
            ("defensible", "defens"),
            ("computing", "comput"),
            ("computer", "comput"),
        ] {
            assert_eq!(porter(word), stem, "stem of {word:?}");
        }
    }

    #[test]
    fn short_and_non_alpha_words_pass_through() {
        assert_eq!(porter("is"), "is");
        assert_eq!(porter("a"), "a");
        assert_eq!(porter("don't"), "don't");
        assert_eq!(porter("42"), "42");
    }
}
