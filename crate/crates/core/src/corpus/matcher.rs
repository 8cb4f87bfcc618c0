use std::collections::{BTreeSet, HashMap};

use super::{tokenize, Document};
use crate::vocabulary::{porter_stem, MatchMode, TermId, Vocabulary};

/// Token-phrase matcher compiled from a vocabulary.
///
/// Every phrase (canonical form or synonym, or the stemmed canonical form in
/// stemming mode) is indexed by its first token; a hit requires the whole
/// token sequence to appear contiguously. Matching is on tokens, never raw
/// substrings, so "protein" does not hit "proteinase".
#[derive(Debug, Clone)]
pub struct TermMatcher {
    by_first: HashMap<String, Vec<Phrase>>,
    stemmed: bool,
}

#[derive(Debug, Clone)]
struct Phrase {
    rest: Vec<String>,
    term: TermId,
}

impl TermMatcher {
    /// Matcher over canonical forms and synonyms (or stems in stemming mode).
    pub fn new(vocab: &Vocabulary) -> Self {
        Self::build(vocab, true)
    }

    /// Matcher over canonical forms only; used for reference-text counts.
    pub fn canonical_only(vocab: &Vocabulary) -> Self {
        Self::build(vocab, false)
    }

    fn build(vocab: &Vocabulary, with_synonyms: bool) -> Self {
        let stemmed = vocab.mode() == MatchMode::Stemmed;
        let mut by_first: HashMap<String, Vec<Phrase>> = HashMap::new();
        for term in vocab.terms() {
            let mut forms: Vec<&str> = vec![term.canonical.as_str()];
            if with_synonyms && !stemmed {
                forms.extend(term.synonyms.iter().map(String::as_str));
            }
            for form in forms {
                let mut tokens = tokenize(form);
                if stemmed {
                    tokens = tokens.iter().map(|t| porter_stem(t)).collect();
                }
                let Some((first, rest)) = tokens.split_first() else {
                    continue;
                };
                let bucket = by_first.entry(first.clone()).or_default();
                let phrase = Phrase { rest: rest.to_vec(), term: term.id };
                if !bucket.iter().any(|p| p.term == phrase.term && p.rest == phrase.rest) {
                    bucket.push(phrase);
                }
            }
        }
        TermMatcher { by_first, stemmed }
    }

    fn tokens(&self, text: &str) -> Vec<String> {
        let tokens = tokenize(text);
        if self.stemmed {
            tokens.iter().map(|t| porter_stem(t)).collect()
        } else {
            tokens
        }
    }

    /// Visit every phrase occurrence in `text`.
    fn for_each_hit(&self, text: &str, mut f: impl FnMut(TermId)) {
        let tokens = self.tokens(text);
        for (i, token) in tokens.iter().enumerate() {
            let Some(phrases) = self.by_first.get(token) else {
                continue;
            };
            let after = &tokens[i + 1..];
            for phrase in phrases {
                if after.len() >= phrase.rest.len() && after[..phrase.rest.len()] == phrase.rest[..] {
                    f(phrase.term);
                }
            }
        }
    }

    pub fn match_text(&self, text: &str) -> BTreeSet<TermId> {
        let mut found = BTreeSet::new();
        self.for_each_hit(text, |t| {
            found.insert(t);
        });
        found
    }

    /// Terms occurring in any searchable field of `doc`.
    pub fn match_document(&self, doc: &Document) -> BTreeSet<TermId> {
        let mut found = BTreeSet::new();
        for field in doc.fields() {
            self.for_each_hit(field, |t| {
                found.insert(t);
            });
        }
        found
    }

    /// Occurrence counts per term (one count per phrase position, one
    /// count per term even if two of its forms hit the same position).
    pub fn count_occurrences(&self, text: &str, counts: &mut HashMap<TermId, u64>) {
        let tokens = self.tokens(text);
        let mut seen = Vec::new();
        for (i, token) in tokens.iter().enumerate() {
            let Some(phrases) = self.by_first.get(token) else {
                continue;
            };
            let after = &tokens[i + 1..];
            seen.clear();
            for phrase in phrases {
                if after.len() >= phrase.rest.len()
                    && after[..phrase.rest.len()] == phrase.rest[..]
                    && !seen.contains(&phrase.term)
                {
                    seen.push(phrase.term);
                    *counts.entry(phrase.term).or_insert(0) += 1;
                }
            }
        }
    }
}

/// Set of vocabulary terms occurring in `doc`. Builds a fresh matcher; use
/// [`TermMatcher`] directly when matching many documents.
pub fn match_terms(doc: &Document, vocab: &Vocabulary) -> BTreeSet<TermId> {
    TermMatcher::new(vocab).match_document(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::Vocabulary;
    use proptest::prelude::*;

    fn vocab(terms: &[&str]) -> Vocabulary {
        Vocabulary::from_canonicals(terms.iter().copied()).unwrap()
    }

    fn names(vocab: &Vocabulary, ids: &BTreeSet<TermId>) -> Vec<String> {
        ids.iter().map(|&id| vocab.term(id).canonical.clone()).collect()
    }

    #[test]
    fn title_hit() {
        let v = vocab(&["ribosome"]);
        let doc = Document::new("1").with_title("eukaryotic ribosome structure");
        assert_eq!(names(&v, &match_terms(&doc, &v)), ["ribosome"]);
    }

    #[test]
    fn mesh_hit() {
        let v = vocab(&["amyloid"]);
        let doc = Document::new("1").with_mesh(["Amyloid Plaque"]);
        assert_eq!(names(&v, &match_terms(&doc, &v)), ["amyloid"]);
    }

    // Token matching, not substring matching: a naive substring scan would
    // report "protein" inside "proteinase".
    #[test]
    fn token_not_substring() {
        let v = vocab(&["protein"]);
        let doc = Document::new("1").with_title("proteinase study");
        let substring_oracle = doc.title.to_lowercase().contains("protein");
        assert!(substring_oracle);
        assert!(match_terms(&doc, &v).is_empty());
    }

    #[test]
    fn multiword_phrase_is_contiguous() {
        let v = vocab(&["amyloid plaques"]);
        let hit = Document::new("1").with_abstract("reduces Amyloid plaques in mice");
        let miss = Document::new("2").with_abstract("amyloid and plaques");
        assert_eq!(match_terms(&hit, &v).len(), 1);
        assert!(match_terms(&miss, &v).is_empty());
    }

    #[test]
    fn phrase_does_not_span_fields() {
        let v = vocab(&["amyloid plaques"]);
        let doc = Document::new("1").with_title("amyloid").with_abstract("plaques");
        assert!(match_terms(&doc, &v).is_empty());
        let mesh = Document::new("1").with_mesh(["Amyloid", "Plaques"]);
        assert!(match_terms(&mesh, &v).is_empty());
    }

    #[test]
    fn synonym_counts_as_canonical() {
        let v = Vocabulary::parse_term_list("Metazoan\tanimals\n".as_bytes()).unwrap();
        let doc = Document::new("1").with_abstract("in animals");
        assert_eq!(names(&v, &match_terms(&doc, &v)), ["metazoan"]);
    }

    #[test]
    fn journal_is_tokenized() {
        let v = vocab(&["nature"]);
        let doc = Document::new("1").with_journal("Nature Structural Biology");
        assert_eq!(match_terms(&doc, &v).len(), 1);
    }

    #[test]
    fn stemmed_mode_matches_inflections() {
        let v = vocab(&["ponies"]).into_mode(MatchMode::Stemmed);
        let doc = Document::new("1").with_title("a pony");
        // "ponies" -> "poni", "pony" -> "poni"
        assert_eq!(match_terms(&doc, &v).len(), 1);
    }

    #[test]
    fn reference_counts() {
        let v = vocab(&["whale"]);
        let mut counts = HashMap::new();
        TermMatcher::canonical_only(&v).count_occurrences("the whale and the whale", &mut counts);
        assert_eq!(counts[&TermId(0)], 2);
    }

    const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta", "cell", "t-cells", "cd4"];

    fn text() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(WORDS), 0..12).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn field_union(title in text(), abs in text(), journal in text(), mesh in prop::collection::vec(text(), 0..3)) {
            let v = vocab(&["alpha", "beta gamma", "t-cells", "cd4 cell"]);
            let m = TermMatcher::new(&v);
            let doc = Document::new("x").with_title(title).with_abstract(abs).with_journal(journal).with_mesh(mesh);
            let mut union = BTreeSet::new();
            for f in doc.fields() {
                union.extend(m.match_text(f));
            }
            prop_assert_eq!(m.match_document(&doc), union.clone());
            prop_assert_eq!(m.match_document(&doc), union);
        }

        #[test]
        fn synonym_monotone(title in text()) {
            let base = Vocabulary::parse_term_list("alpha\n".as_bytes()).unwrap();
            let more = Vocabulary::parse_term_list("alpha\tdelta\n".as_bytes()).unwrap();
            let doc = Document::new("x").with_title(title);
            let a = match_terms(&doc, &base);
            let b = match_terms(&doc, &more);
            prop_assert!(a.is_subset(&b));
        }
    }
}
