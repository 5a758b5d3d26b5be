use serde::{Deserialize, Serialize};

/// Smallest supported per-message budget.
pub const MIN_CHUNK_LIMIT: usize = 64;
pub const DEFAULT_CHUNK_LIMIT: usize = 1000;

/// A long answer split into message-sized pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunks: Vec<String>,
    pub chunk_limit: usize,
}

impl ChunkPlan {
    pub fn concat(&self) -> String {
        self.chunks.concat()
    }
}

/// Byte offset just past the best boundary inside `window`: a paragraph
/// break, else a line break, else any whitespace.
fn find_cut(window: &str) -> Option<usize> {
    if let Some(i) = window.rfind("\n\n") {
        return Some(i + 2);
    }
    if let Some(i) = window.rfind('\n') {
        return Some(i + 1);
    }
    window
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
}

/// Splits `text` into chunks of at most `chunk_limit` characters. The
/// separator stays at the end of the chunk it closes, so the chunks
/// concatenate back to the input.
pub fn chunk_text(text: &str, chunk_limit: usize) -> ChunkPlan {
    debug_assert!(chunk_limit >= MIN_CHUNK_LIMIT, "chunk limit below minimum");
    let limit = chunk_limit.max(1);
    let mut chunks = Vec::new();
    let mut rest = text;
    loop {
        let Some((window_end, _)) = rest.char_indices().nth(limit) else {
            break;
        };
        let cut = find_cut(&rest[..window_end]).unwrap_or(window_end);
        chunks.push(rest[..cut].to_string());
        rest = &rest[cut..];
    }
    if !rest.is_empty() || chunks.is_empty() {
        chunks.push(rest.to_string());
    }
    ChunkPlan { chunks, chunk_limit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paragraph(n: usize, seed: char) -> String {
        let word = format!("{seed}{seed}{seed}{seed} ");
        let mut p = word.repeat(n / 5 + 1);
        p.truncate(n);
        p
    }

    #[test]
    fn short_text_is_one_chunk() {
        let t = "x".repeat(300);
        assert_eq!(chunk_text(&t, 1000).chunks, vec![t]);
    }

    #[test]
    fn exact_limit_is_one_chunk() {
        let t = "é".repeat(1000);
        assert_eq!(chunk_text(&t, 1000).chunks.len(), 1);
        assert_eq!(chunk_text(&format!("{t}é"), 1000).chunks.len(), 2);
    }

    #[test]
    fn paragraphs_split_at_boundaries() {
        let paras: Vec<String> = ['a', 'b', 'c', 'd', 'e'].iter().map(|c| paragraph(498, *c)).collect();
        let text = paras.join("\n\n");
        assert_eq!(text.chars().count(), 2498);
        let plan = chunk_text(&text, 1000);
        assert_eq!(plan.chunks.len(), 3);
        assert_eq!(plan.concat(), text);
        // oracle: every non-final chunk ends right after a paragraph break
        // that is also a break in the source
        let mut offset = 0;
        for c in &plan.chunks[..plan.chunks.len() - 1] {
            offset += c.len();
            assert!(text[..offset].ends_with("\n\n"));
            assert!(c.chars().count() <= 1000);
        }
    }

    #[test]
    fn unbroken_text_hard_splits() {
        let t = "x".repeat(250);
        let plan = chunk_text(&t, 100);
        let lens: Vec<usize> = plan.chunks.iter().map(|c| c.len()).collect();
        assert_eq!(lens, vec![100, 100, 50]);
    }

    #[test]
    fn empty_text() {
        assert_eq!(chunk_text("", 64).chunks, vec![String::new()]);
    }

    proptest! {
        #[test]
        fn conservation_and_budget(text in "[a-z \\n.é🍌]{0,3000}", limit in 64usize..1500) {
            let plan = chunk_text(&text, limit);
            prop_assert_eq!(plan.concat(), text.clone());
            prop_assert!(plan.chunks.iter().all(|c| c.chars().count() <= limit));
            prop_assert_eq!(plan.chunks.len() == 1, text.chars().count() <= limit);
        }

        #[test]
        fn splits_at_whitespace_when_available(text in "[a-z]{1,20}( [a-z]{1,20}){0,200}", limit in 64usize..300) {
            let plan = chunk_text(&text, limit);
            // every word is at most 20 chars, so a space always fits in the window
            for c in &plan.chunks[..plan.chunks.len() - 1] {
                prop_assert!(c.ends_with(' '));
            }
        }
    }
}
