//! Minimal MEDLINE citation XML reader.
//!
//! Reads `MedlineCitation` records and keeps PMID, ArticleTitle,
//! AbstractText (all sections, space-joined), the journal Title and every
//! MeshHeading/DescriptorName. Everything else is skipped.

use std::io::BufRead;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{CorpusError, Document};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Capture {
    Pmid,
    Title,
    Abstract,
    Journal,
    Descriptor,
}

fn capture_for(path: &[Vec<u8>]) -> Option<Capture> {
    let n = path.len();
    let last = path.last()?.as_slice();
    let parent = if n >= 2 { path[n - 2].as_slice() } else { b"" };
    match (parent, last) {
        (b"MedlineCitation", b"PMID") => Some(Capture::Pmid),
        (b"Article", b"ArticleTitle") => Some(Capture::Title),
        (b"Abstract", b"AbstractText") => Some(Capture::Abstract),
        (b"Journal", b"Title") => Some(Capture::Journal),
        (b"MeshHeading", b"DescriptorName") => Some(Capture::Descriptor),
        _ => None,
    }
}

#[derive(Default)]
struct Partial {
    pmid: String,
    title: String,
    abstract_parts: Vec<String>,
    journal: String,
    mesh: Vec<String>,
}

pub(super) fn parse<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut xml = Reader::from_reader(reader);
    let mut buf = Vec::new();
    let mut path: Vec<Vec<u8>> = Vec::new();
    let mut docs = Vec::new();
    let mut record = 0usize;
    let mut current: Option<Partial> = None;
    // (capture kind, depth at which it opened, text collected so far)
    let mut capture: Option<(Capture, usize, String)> = None;

    loop {
        let event = xml.read_event_into(&mut buf).map_err(|e| CorpusError::Malformed {
            record: record.max(1),
            message: format!("xml error at byte {}: {e}", xml.buffer_position()),
        })?;
        match event {
            Event::Start(start) => {
                let name = start.name().as_ref().to_vec();
                if name == b"MedlineCitation" {
                    record += 1;
                    current = Some(Partial::default());
                }
                path.push(name);
                if capture.is_none() && current.is_some() {
                    if let Some(kind) = capture_for(&path) {
                        capture = Some((kind, path.len(), String::new()));
                    }
                }
            }
            Event::Text(text) => {
                if let Some((_, _, acc)) = capture.as_mut() {
                    let s = text.unescape().map_err(|e| CorpusError::Malformed { record, message: e.to_string() })?;
                    acc.push_str(&s);
                }
            }
            Event::CData(data) => {
                if let Some((_, _, acc)) = capture.as_mut() {
                    acc.push_str(&String::from_utf8_lossy(&data));
                }
            }
            Event::End(_) => {
                if let Some((kind, depth, _)) = &capture {
                    if *depth == path.len() {
                        let kind = *kind;
                        let (_, _, text) = capture.take().expect("capture present");
                        if let Some(p) = current.as_mut() {
                            let text = text.trim().to_string();
                            match kind {
                                Capture::Pmid if p.pmid.is_empty() => p.pmid = text,
                                Capture::Pmid => {}
                                Capture::Title => p.title = text,
                                Capture::Abstract => p.abstract_parts.push(text),
                                Capture::Journal => p.journal = text,
                                Capture::Descriptor => p.mesh.push(text),
                            }
                        }
                    }
                }
                let closed = path.pop();
                if closed.as_deref() == Some(b"MedlineCitation".as_slice()) {
                    let p = current.take().expect("open citation");
                    if p.pmid.is_empty() {
                        return Err(CorpusError::MissingUid { record });
                    }
                    docs.push(Document {
                        uid: p.pmid,
                        title: p.title,
                        abstract_text: p.abstract_parts.join(" "),
                        journal: p.journal,
                        mesh: p.mesh,
                    });
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if current.is_some() {
        return Err(CorpusError::Malformed { record, message: "unterminated MedlineCitation".into() });
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use crate::corpus::{parse_corpus, CorpusError, CorpusFormat};

    const SAMPLE: &str = r#"<?xml version="1.0"?>
<PubmedArticleSet>
 <PubmedArticle>
  <MedlineCitation Status="MEDLINE">
   <PMID Version="1">12172083</PMID>
   <Article>
    <Journal><Title>AIDS (London, England)</Title></Journal>
    <ArticleTitle>Durability of <i>highly active</i> antiretroviral therapy</ArticleTitle>
    <Abstract>
      <AbstractText Label="OBJECTIVE">To assess HAART.</AbstractText>
      <AbstractText Label="RESULTS">CD4 counts &amp; outcomes.</AbstractText>
    </Abstract>
   </Article>
   <MeshHeadingList>
    <MeshHeading><DescriptorName UI="D1">HIV Infections</DescriptorName></MeshHeading>
    <MeshHeading><DescriptorName UI="D2">Adult</DescriptorName><QualifierName>drug therapy</QualifierName></MeshHeading>
   </MeshHeadingList>
   <CommentsCorrectionsList><CommentsCorrections><PMID>999</PMID></CommentsCorrections></CommentsCorrectionsList>
  </MedlineCitation>
 </PubmedArticle>
 <PubmedArticle>
  <MedlineCitation><PMID>13054692</PMID><Article><ArticleTitle>Molecular structure of nucleic acids</ArticleTitle></Article></MedlineCitation>
 </PubmedArticle>
</PubmedArticleSet>"#;

    #[test]
    fn reads_subset_fields() {
        let docs = parse_corpus(SAMPLE.as_bytes(), CorpusFormat::MedlineXml).unwrap();
        assert_eq!(docs.len(), 2);
        let d = &docs[0];
        assert_eq!(d.uid, "12172083");
        assert_eq!(d.title, "Durability of highly active antiretroviral therapy");
        assert_eq!(d.abstract_text, "To assess HAART. CD4 counts & outcomes.");
        assert_eq!(d.journal, "AIDS (London, England)");
        assert_eq!(d.mesh, ["HIV Infections", "Adult"]);
        assert_eq!(docs[1].uid, "13054692");
        assert!(docs[1].abstract_text.is_empty());
    }

    #[test]
    fn missing_pmid() {
        let xml =
            "<Set><MedlineCitation><PMID>1</PMID></MedlineCitation><MedlineCitation><Article/></MedlineCitation></Set>";
        let err = parse_corpus(xml.as_bytes(), CorpusFormat::MedlineXml).unwrap_err();
        assert!(matches!(err, CorpusError::MissingUid { record: 2 }), "{err}");
    }

    #[test]
    fn broken_xml() {
        let xml = "<Set><MedlineCitation><PMID>1</PMID></Oops></Set>";
        assert!(parse_corpus(xml.as_bytes(), CorpusFormat::MedlineXml).is_err());
    }
}
