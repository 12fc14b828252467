//! Unicode normalization and char-offset helpers.
//!
//! All spans in the data model are counted in Unicode scalar values over
//! NFKC-normalized text.

use unicode_normalization::UnicodeNormalization;

pub fn normalize(text: &str) -> String {
    text.nfkc().collect()
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `char_idx`-th char, or `text.len()` when it is one past the end.
pub fn byte_offset(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (b, _) in text.char_indices() {
        if count == char_idx {
            return Some(b);
        }
        count += 1;
    }
    (count == char_idx).then_some(text.len())
}

/// Substring by char offsets; `None` if out of bounds or reversed.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let s = byte_offset(text, start)?;
    let e = byte_offset(text, end)?;
    Some(&text[s..e])
}

/// Char offset of the first occurrence of `needle` at or after char `from`.
pub fn find_chars(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let start_byte = byte_offset(haystack, from)?;
    let found = haystack[start_byte..].find(needle)?;
    Some(from + char_len(&haystack[start_byte..start_byte + found]))
}
