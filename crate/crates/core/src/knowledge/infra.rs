use serde::{Deserialize, Serialize};

use super::embed::{Embedder, Embedding};
use super::topk::top_k;
use super::KnowledgeError;
use crate::symlang::FrameworkSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraChunk {
    pub doc_id: String,
    pub excerpt: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraHit {
    pub doc_id: String,
    pub excerpt: String,
    pub similarity: f64,
}

/// Infrastructure documentation split into chunks and embedded at ingest.
#[derive(Debug, Clone, Default)]
pub struct InfraCorpus {
    chunks: Vec<InfraChunk>,
}

impl InfraCorpus {
    pub fn build<'a>(
        docs: impl IntoIterator<Item = (&'a str, &'a str)>,
        embedder: &dyn Embedder,
        max_chars: usize,
    ) -> Result<Self, KnowledgeError> {
        let mut chunks = Vec::new();
        for (doc_id, text) in docs {
            for excerpt in chunk_text(text, max_chars) {
                let embedding = embedder.embed(&excerpt)?;
                chunks.push(InfraChunk {
                    doc_id: doc_id.to_string(),
                    excerpt,
                    embedding,
                });
            }
        }
        Ok(Self { chunks })
    }

    /// Indexes a schema's extension interfaces and template documentation.
    pub fn from_schema(schema: &FrameworkSchema, embedder: &dyn Embedder, max_chars: usize) -> Result<Self, KnowledgeError> {
        let mut docs: Vec<(String, String)> = Vec::new();
        for slot in schema.slots() {
            docs.push((
                format!("slot:{}", slot.name),
                format!(
                    "{} extension interface ({}).\n\n{}",
                    slot.name, slot.kind, slot.extension_interface.description
                ),
            ));
            for t in &slot.templates {
                let params = t
                    .parameters
                    .iter()
                    .map(|p| format!("{} ({})", p.name, p.domain.describe()))
                    .collect::<Vec<_>>()
                    .join(", ");
                docs.push((
                    format!("template:{}/{}", slot.name, t.name),
                    format!("{} template for {}. {}\n\nParameters: {params}", t.name, slot.name, t.doc),
                ));
            }
        }
        Self::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str())), embedder, max_chars)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[InfraChunk] {
        &self.chunks
    }

    pub(crate) fn search(&self, query: &Embedding, k: usize) -> Vec<InfraHit> {
        top_k(
            self.chunks
                .iter()
                .enumerate()
                .map(|(seq, c)| (query.cosine(&c.embedding), seq, c)),
            k,
        )
        .into_iter()
        .map(|(similarity, c)| InfraHit {
            doc_id: c.doc_id.clone(),
            excerpt: c.excerpt.clone(),
            similarity,
        })
        .collect()
    }
}

/// Paragraphs (blank-line separated), with long paragraphs cut at sentence
/// ends so that no chunk exceeds `max_chars` unless a single sentence does.
pub fn chunk_text(text: &str, max_chars: usize) -> Vec<String> {
    let mut out = Vec::new();
    for para in text.split("\n\n") {
        let para = para.split_whitespace().collect::<Vec<_>>().join(" ");
        if para.is_empty() {
            continue;
        }
        if para.len() <= max_chars {
            out.push(para);
            continue;
        }
        let mut current = String::new();
        for sentence in para.split_inclusive(". ") {
            if !current.is_empty() && current.len() + sentence.len() > max_chars {
                out.push(current.trim().to_string());
                current.clear();
            }
            current.push_str(sentence);
        }
        if !current.trim().is_empty() {
            out.push(current.trim().to_string());
        }
    }
    out
}
