//! B/I/O chunk tags and B/I segmentation tags to spans and back.

use crate::error::{Error, Result};

/// Label given to spans decoded from label-less `B`/`I` tags.
pub const WORD_LABEL: &str = "WORD";

/// Inclusive token range with a chunk label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Span {
        Span {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Result<Tag<'_>> {
    match tag {
        "O" => Ok(Tag::Outside),
        "B" => Ok(Tag::Begin(WORD_LABEL)),
        "I" => Ok(Tag::Inside(WORD_LABEL)),
        _ => {
            let (prefix, label) = tag
                .split_once('-')
                .ok_or_else(|| Error::MalformedTag(tag.to_owned()))?;
            if label.is_empty() {
                return Err(Error::MalformedTag(tag.to_owned()));
            }
            match prefix {
                "B" => Ok(Tag::Begin(label)),
                "I" => Ok(Tag::Inside(label)),
                _ => Err(Error::MalformedTag(tag.to_owned())),
            }
        }
    }
}

/// Decodes B/I/O tags into maximal spans. An `I-X` that follows `O`, the
/// sentence start, or a different label opens a new span.
pub fn decode_bio<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (i, tag) in tags.iter().enumerate() {
        match parse_tag(tag.as_ref())? {
            Tag::Outside => {
                spans.extend(open.take());
            }
            Tag::Begin(label) => {
                spans.extend(open.take());
                open = Some(Span::new(i, i, label));
            }
            Tag::Inside(label) => match open.as_mut() {
                Some(span) if span.label == label => span.end = i,
                _ => {
                    spans.extend(open.take());
                    open = Some(Span::new(i, i, label));
                }
            },
        }
    }
    spans.extend(open);
    Ok(spans)
}

/// Inverse of [`decode_bio`] for well-formed span sets.
pub fn encode_bio(spans: &[Span], length: usize) -> Result<Vec<String>> {
    let mut tags = vec!["O".to_owned(); length];
    let mut covered = vec![false; length];
    for span in spans {
        if span.start > span.end || span.end >= length {
            return Err(Error::InvalidSpans(format!(
                "span {}..={} outside length {length}",
                span.start, span.end
            )));
        }
        for i in span.start..=span.end {
            if covered[i] {
                return Err(Error::InvalidSpans(format!("overlap at position {i}")));
            }
            covered[i] = true;
            let prefix = if i == span.start { "B" } else { "I" };
            tags[i] = if span.label == WORD_LABEL {
                prefix.to_owned()
            } else {
                format!("{prefix}-{}", span.label)
            };
        }
    }
    Ok(tags)
}

/// Decodes `B`/`I` segmentation tags into word spans labelled [`WORD_LABEL`].
pub fn decode_segmentation<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Span>> {
    for tag in tags {
        if !matches!(tag.as_ref(), "B" | "I") {
            return Err(Error::MalformedTag(tag.as_ref().to_owned()));
        }
    }
    decode_bio(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn example_sentence_chunks() {
        let tags = [
            "B-NP", "I-NP", "B-ADVP", "B-VP", "B-NP", "I-NP", "B-ADJP", "O",
        ];
        assert_eq!(
            decode_bio(&tags).unwrap(),
            vec![
                Span::new(0, 1, "NP"),
                Span::new(2, 2, "ADVP"),
                Span::new(3, 3, "VP"),
                Span::new(4, 5, "NP"),
                Span::new(6, 6, "ADJP"),
            ]
        );
    }

    #[test]
    fn outside_only_and_orphans() {
        assert!(decode_bio(&["O", "O"]).unwrap().is_empty());
        assert_eq!(decode_bio(&["I-NP"]).unwrap(), vec![Span::new(0, 0, "NP")]);
        assert_eq!(
            decode_bio(&["B-NP", "I-VP"]).unwrap(),
            vec![Span::new(0, 0, "NP"), Span::new(1, 1, "VP")]
        );
        assert!(decode_bio(&["X-NP"]).is_err());
        assert!(decode_bio(&["B-"]).is_err());
    }

    #[test]
    fn encode_examples() {
        assert_eq!(
            encode_bio(&[Span::new(0, 1, "NP")], 3).unwrap(),
            ["B-NP", "I-NP", "O"]
        );
        assert_eq!(encode_bio(&[], 2).unwrap(), ["O", "O"]);
        let adjacent = vec![Span::new(0, 0, "NP"), Span::new(1, 1, "NP")];
        let tags = encode_bio(&adjacent, 2).unwrap();
        assert_eq!(tags, ["B-NP", "B-NP"]);
        assert_eq!(decode_bio(&tags).unwrap(), adjacent);
        assert!(encode_bio(&[Span::new(0, 1, "NP"), Span::new(1, 2, "VP")], 3).is_err());
        assert!(encode_bio(&[Span::new(2, 3, "NP")], 3).is_err());
    }

    #[test]
    fn segmentation_examples() {
        let words = |t: &[&str]| -> Vec<(usize, usize)> {
            decode_segmentation(t)
                .unwrap()
                .into_iter()
                .map(|s| (s.start, s.end))
                .collect()
        };
        assert_eq!(words(&["B", "I", "B"]), [(0, 1), (2, 2)]);
        assert_eq!(words(&["I", "I"]), [(0, 1)]);
        assert_eq!(words(&["B"]), [(0, 0)]);
        assert!(decode_segmentation(&["B", "O"]).is_err());
    }

    fn tag_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("O".to_owned()),
            prop::sample::select(vec!["NP", "VP", "PP"]).prop_map(|l| format!("B-{l}")),
            prop::sample::select(vec!["NP", "VP", "PP"]).prop_map(|l| format!("I-{l}")),
        ]
    }

    fn has_orphan(tags: &[String]) -> bool {
        tags.iter().enumerate().any(|(i, t)| {
            t.strip_prefix("I-").is_some_and(|label| {
                i == 0
                    || tags[i - 1] == "O"
                    || tags[i - 1].get(2..).is_none_or(|prev| prev != label)
            })
        })
    }

    proptest! {
        #[test]
        fn decode_then_encode_without_orphans(tags in prop::collection::vec(tag_strategy(), 0..30)) {
            let spans = decode_bio(&tags).unwrap();
            if !has_orphan(&tags) {
                prop_assert_eq!(encode_bio(&spans, tags.len()).unwrap(), tags.clone());
            }
            // spans are sorted, disjoint and cover exactly the non-O positions
            let mut covered = vec![0; tags.len()];
            let mut last_end: Option<usize> = None;
            for s in &spans {
                prop_assert!(s.start <= s.end && s.end < tags.len());
                prop_assert!(last_end.is_none_or(|e| e < s.start));
                last_end = Some(s.end);
                for c in &mut covered[s.start..=s.end] { *c += 1; }
            }
            for (i, t) in tags.iter().enumerate() {
                prop_assert_eq!(covered[i], usize::from(t != "O"));
            }
            // decode is a fixed point after one round
            let again = decode_bio(&encode_bio(&spans, tags.len()).unwrap()).unwrap();
            prop_assert_eq!(again, spans);
        }
    }
}
