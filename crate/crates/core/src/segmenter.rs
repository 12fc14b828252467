//! Argument proposition segmentation: the full sentence(s) of the host
//! utterance that contain a monetary expression.

use serde::{Deserialize, Serialize};

use crate::corpus::{MonetaryExpression, Utterance};
use crate::error::{Error, Result};
use crate::text;

pub const DEFAULT_TERMINATORS: [char; 6] = ['。', '？', '！', '?', '!', '\n'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposition {
    pub expr_id: String,
    pub text: String,
    /// Char spans into the host text, ordered and non-overlapping.
    pub sentence_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmenter {
    pub terminators: Vec<char>,
    /// Extra sentences of context on each side of the covering run.
    pub context: usize,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter {
            terminators: DEFAULT_TERMINATORS.to_vec(),
            context: 0,
        }
    }
}

impl Segmenter {
    pub fn with_context(context: usize) -> Self {
        Segmenter {
            context,
            ..Segmenter::default()
        }
    }

    /// Sentence spans (char offsets) that exactly tile `text`.
    ///
    /// A sentence ends after a run of terminators; text after the last
    /// terminator forms a final sentence.
    pub fn split_sentences(&self, text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let mut spans = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            if self.terminators.contains(&chars[i]) {
                // absorb consecutive terminators (e.g. "？！" or "。\n")
                while i + 1 < chars.len() && self.terminators.contains(&chars[i + 1]) {
                    i += 1;
                }
                spans.push((start, i + 1));
                start = i + 1;
            }
            i += 1;
        }
        if start < chars.len() {
            spans.push((start, chars.len()));
        }
        spans
    }

    pub fn segment_span(
        &self,
        expr_id: &str,
        host_text: &str,
        span: (usize, usize),
    ) -> Result<Proposition> {
        let len = text::char_len(host_text);
        let (start, end) = span;
        if start > end || end > len {
            return Err(Error::SpanOutOfBounds {
                expr_id: expr_id.into(),
                start,
                end,
                len,
                detail: "span exceeds host text".into(),
            });
        }
        let sentences = self.split_sentences(host_text);
        if sentences.is_empty() {
            return Ok(Proposition {
                expr_id: expr_id.into(),
                text: String::new(),
                sentence_spans: Vec::new(),
            });
        }
        let first = sentences
            .iter()
            .position(|&(_, e)| e > start)
            .unwrap_or(sentences.len() - 1);
        // an empty span at a boundary belongs to the sentence starting there
        let last = sentences
            .iter()
            .rposition(|&(s, _)| s < end.max(start + 1))
            .unwrap_or(first)
            .max(first);
        let lo = first.saturating_sub(self.context);
        let hi = (last + self.context).min(sentences.len() - 1);
        let run = sentences[lo..=hi].to_vec();
        let text = text::char_slice(host_text, run[0].0, run[run.len() - 1].1)
            .expect("sentence spans lie within text")
            .to_string();
        Ok(Proposition {
            expr_id: expr_id.into(),
            text,
            sentence_spans: run,
        })
    }

    pub fn segment(&self, expr: &MonetaryExpression, host: &Utterance) -> Result<Proposition> {
        self.segment_span(&expr.expr_id, &host.text, expr.span)
    }
}
