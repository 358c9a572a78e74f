//! Vocabularies, documents, and streamable multi-category corpora.
//!
//! A corpus holds one sparse bag of coded events per document per category.
//! Token ids are dense integers assigned by vocabulary file order; documents
//! reference ids, not code strings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One category's code list. Token ids are dense `0..len()` in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    category: String,
    codes: Vec<String>,
    descriptions: Vec<String>,
}

impl Vocabulary {
    pub fn new(category: impl Into<String>, entries: Vec<(String, String)>) -> Result<Self> {
        let category = category.into();
        let mut seen = std::collections::HashSet::new();
        for (code, _) in &entries {
            if !seen.insert(code.clone()) {
                return Err(Error::invalid(format!(
                    "vocabulary {category:?}: duplicate code {code:?}"
                )));
            }
        }
        let (codes, descriptions) = entries.into_iter().unzip();
        Ok(Vocabulary {
            category,
            codes,
            descriptions,
        })
    }

    /// Load a `token_id<TAB>code<TAB>description` file. The token id column
    /// must equal the 0-based line index.
    pub fn load(path: impl AsRef<Path>, category: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let category = category.into();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut codes = Vec::new();
        let mut descriptions = Vec::new();
        let mut seen = std::collections::HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let id_field = fields.next().unwrap_or_default();
            let code = fields.next().ok_or_else(|| Error::Parse {
                path: path.into(),
                line: idx + 1,
                message: "expected token_id<TAB>code<TAB>description".into(),
            })?;
            let description = fields.next().unwrap_or_default();
            let id: usize = id_field.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: idx + 1,
                message: format!("invalid token_id {id_field:?}"),
            })?;
            if id != codes.len() {
                return Err(Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    message: format!("token_id {id} does not match line index {}", codes.len()),
                });
            }
            if let Some(_prev) = seen.insert(code.to_string(), idx + 1) {
                return Err(Error::DuplicateCode {
                    path: path.into(),
                    line: idx + 1,
                    code: code.to_string(),
                });
            }
            codes.push(code.to_string());
            descriptions.push(description.to_string());
        }
        Ok(Vocabulary {
            category,
            codes,
            descriptions,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, (code, desc)) in self.codes.iter().zip(&self.descriptions).enumerate() {
            writeln!(w, "{id}\t{code}\t{desc}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, token_id: u32) -> &str {
        &self.codes[token_id as usize]
    }

    pub fn description(&self, token_id: u32) -> &str {
        &self.descriptions[token_id as usize]
    }
}

/// One document: per category, a sparse `(token_id, count)` list sorted by
/// token id. A category may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    counts: Vec<Vec<(u32, u32)>>,
}

impl Document {
    /// Build a document, validating token ranges, positive counts, and
    /// uniqueness against the given vocabularies. Entries are sorted by token
    /// id per category.
    pub fn new(id: impl Into<String>, counts: Vec<Vec<(u32, u32)>>, vocabs: &[Vocabulary]) -> Result<Self> {
        let id = id.into();
        if counts.len() != vocabs.len() {
            return Err(Error::ShapeMismatch(format!(
                "document {id:?}: {} categories, expected {}",
                counts.len(),
                vocabs.len()
            )));
        }
        let mut counts = counts;
        for (cat, vocab) in counts.iter_mut().zip(vocabs) {
            cat.sort_unstable_by_key(|&(w, _)| w);
            let mut prev: Option<u32> = None;
            for &(w, n) in cat.iter() {
                if (w as usize) >= vocab.len() {
                    return Err(Error::TokenOutOfRange {
                        doc_id: id.clone(),
                        category: vocab.category.clone(),
                        token_id: w,
                        vocab_size: vocab.len(),
                    });
                }
                if n == 0 {
                    return Err(Error::NonPositiveCount {
                        doc_id: id.clone(),
                        category: vocab.category.clone(),
                        token_id: w,
                    });
                }
                if prev == Some(w) {
                    return Err(Error::DuplicateToken {
                        doc_id: id.clone(),
                        category: vocab.category.clone(),
                        token_id: w,
                    });
                }
                prev = Some(w);
            }
        }
        Ok(Document { id, counts })
    }

    pub fn category(&self, t: usize) -> &[(u32, u32)] {
        &self.counts[t]
    }

    pub fn num_categories(&self) -> usize {
        self.counts.len()
    }

    /// Token count within one category.
    pub fn category_tokens(&self, t: usize) -> u64 {
        self.counts[t].iter().map(|&(_, n)| n as u64).sum()
    }

    /// Total token count across categories.
    pub fn total_tokens(&self) -> u64 {
        (0..self.counts.len()).map(|t| self.category_tokens(t)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|c| c.is_empty())
    }
}

#[derive(Serialize, Deserialize)]
struct DocRecord {
    id: String,
    cats: BTreeMap<String, Vec<(u32, u32)>>,
}

/// Patient/document membership in one named cohort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortAssignment {
    pub doc_id: String,
    pub cohort_name: String,
}

/// Load a `doc_id<TAB>cohort_name` file. Each doc_id may appear at most once.
pub fn load_cohorts(path: impl AsRef<Path>) -> Result<Vec<CohortAssignment>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (doc_id, cohort_name) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: idx + 1,
            message: "expected doc_id<TAB>cohort_name".into(),
        })?;
        if !seen.insert(doc_id.to_string()) {
            return Err(Error::DuplicateCohortDoc {
                path: path.into(),
                line: idx + 1,
                doc_id: doc_id.to_string(),
            });
        }
        out.push(CohortAssignment {
            doc_id: doc_id.to_string(),
            cohort_name: cohort_name.to_string(),
        });
    }
    Ok(out)
}

pub fn save_cohorts(assignments: &[CohortAssignment], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in assignments {
        writeln!(w, "{}\t{}", a.doc_id, a.cohort_name).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
enum Source {
    Memory(Arc<[Document]>),
    File(PathBuf),
}

/// A streamable, resettable collection of documents over `T` fixed
/// vocabularies. File-backed corpora are parsed lazily; validation errors
/// surface on the offending record during iteration.
#[derive(Debug, Clone)]
pub struct MultiCorpus {
    vocabs: Arc<[Vocabulary]>,
    source: Source,
}

impl MultiCorpus {
    pub fn from_documents(vocabs: Vec<Vocabulary>, documents: Vec<Document>) -> Self {
        MultiCorpus {
            vocabs: vocabs.into(),
            source: Source::Memory(documents.into()),
        }
    }

    /// Open a JSONL document file against loaded vocabularies. With
    /// `validate`, the whole file is checked eagerly; otherwise records are
    /// validated as they stream.
    pub fn open(doc_path: impl AsRef<Path>, vocabs: Vec<Vocabulary>, validate: bool) -> Result<Self> {
        let path = doc_path.as_ref();
        if !path.is_file() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
        let corpus = MultiCorpus {
            vocabs: vocabs.into(),
            source: Source::File(path.into()),
        };
        if validate {
            for doc in corpus.iter()? {
                doc?;
            }
        }
        Ok(corpus)
    }

    pub fn vocabularies(&self) -> &[Vocabulary] {
        &self.vocabs
    }

    pub fn shared_vocabularies(&self) -> Arc<[Vocabulary]> {
        Arc::clone(&self.vocabs)
    }

    pub fn num_categories(&self) -> usize {
        self.vocabs.len()
    }

    /// Document count, if known without a pass over the data.
    pub fn known_len(&self) -> Option<usize> {
        match &self.source {
            Source::Memory(docs) => Some(docs.len()),
            Source::File(_) => None,
        }
    }

    /// Stream the documents in deterministic order. Each call starts a fresh
    /// cursor over the same sequence.
    pub fn iter(&self) -> Result<DocStream<'_>> {
        let inner = match &self.source {
            Source::Memory(docs) => StreamInner::Memory(docs.iter()),
            Source::File(path) => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                StreamInner::File {
                    path: path.clone(),
                    lines: BufReader::new(file).lines(),
                    line_no: 0,
                }
            }
        };
        Ok(DocStream {
            vocabs: &self.vocabs,
            inner,
        })
    }

    /// Materialize all documents, validating each.
    pub fn collect(&self) -> Result<Vec<Document>> {
        self.iter()?.collect()
    }

    /// Materialize a file-backed corpus into memory; in-memory corpora are
    /// returned as cheap clones.
    pub fn into_memory(&self) -> Result<MultiCorpus> {
        match &self.source {
            Source::Memory(_) => Ok(self.clone()),
            Source::File(_) => Ok(MultiCorpus {
                vocabs: Arc::clone(&self.vocabs),
                source: Source::Memory(self.collect()?.into()),
            }),
        }
    }

    /// Write as canonical JSONL (one document per line, categories in name
    /// order, empty categories omitted).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for doc in self.iter()? {
            let doc = doc?;
            let mut cats = BTreeMap::new();
            for (t, vocab) in self.vocabs.iter().enumerate() {
                let entries = doc.category(t);
                if !entries.is_empty() {
                    cats.insert(vocab.category.clone(), entries.to_vec());
                }
            }
            let record = DocRecord { id: doc.id.clone(), cats };
            serde_json::to_writer(&mut w, &record).map_err(|e| Error::Parse {
                path: path.into(),
                line: 0,
                message: e.to_string(),
            })?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

enum StreamInner<'a> {
    Memory(std::slice::Iter<'a, Document>),
    File {
        path: PathBuf,
        lines: std::io::Lines<BufReader<File>>,
        line_no: usize,
    },
}

/// Cursor over a [`MultiCorpus`].
pub struct DocStream<'a> {
    vocabs: &'a [Vocabulary],
    inner: StreamInner<'a>,
}

impl DocStream<'_> {
    fn parse_record(&self, line: &str, path: &Path, line_no: usize) -> Result<Document> {
        let record: DocRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        let mut counts = vec![Vec::new(); self.vocabs.len()];
        for (name, entries) in record.cats {
            let t = self
                .vocabs
                .iter()
                .position(|v| v.category == name)
                .ok_or_else(|| Error::UnknownCategory {
                    doc_id: record.id.clone(),
                    category: name.clone(),
                })?;
            counts[t] = entries;
        }
        Document::new(record.id, counts, self.vocabs)
    }
}

impl Iterator for DocStream<'_> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.inner {
            StreamInner::Memory(iter) => iter.next().map(|d| Ok(d.clone())),
            StreamInner::File { path, lines, line_no } => loop {
                *line_no += 1;
                match lines.next()? {
                    Err(e) => return Some(Err(Error::io(path.clone(), e))),
                    Ok(line) if line.trim().is_empty() => continue,
                    Ok(line) => {
                        let path = path.clone();
                        let n = *line_no;
                        return Some(self.parse_record(&line, &path, n));
                    }
                }
            },
        }
    }
}

/// Split every token occurrence into an observed half (probability
/// `1 - ratio`) and a held-out half, deterministically under `seed`.
/// Doc ids are preserved in both halves and counts are conserved exactly.
pub fn split_holdout(corpus: &MultiCorpus, ratio: f64, seed: u64) -> Result<(MultiCorpus, MultiCorpus)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "holdout ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = Vec::new();
    let mut held = Vec::new();
    for doc in corpus.iter()? {
        let doc = doc?;
        let mut obs_counts = Vec::with_capacity(doc.num_categories());
        let mut held_counts = Vec::with_capacity(doc.num_categories());
        for t in 0..doc.num_categories() {
            let mut obs_cat = Vec::new();
            let mut held_cat = Vec::new();
            for &(w, n) in doc.category(t) {
                let mut h: u32 = 0;
                for _ in 0..n {
                    if rng.random::<f64>() < ratio {
                        h += 1;
                    }
                }
                if n - h > 0 {
                    obs_cat.push((w, n - h));
                }
                if h > 0 {
                    held_cat.push((w, h));
                }
            }
            obs_counts.push(obs_cat);
            held_counts.push(held_cat);
        }
        observed.push(Document::new(doc.id.clone(), obs_counts, corpus.vocabularies())?);
        held.push(Document::new(doc.id, held_counts, corpus.vocabularies())?);
    }
    if observed.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    let vocabs = corpus.shared_vocabularies();
    Ok((
        MultiCorpus {
            vocabs: Arc::clone(&vocabs),
            source: Source::Memory(observed.into()),
        },
        MultiCorpus {
            vocabs,
            source: Source::Memory(held.into()),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(category: &str, n: usize) -> Vocabulary {
        let entries = (0..n)
            .map(|i| (format!("{}_{i:05}", category.to_uppercase()), format!("code {i}")))
            .collect();
        Vocabulary::new(category, entries).unwrap()
    }

    #[test]
    fn vocab_load_assigns_ids_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab_dx.tsv");
        std::fs::write(&path, "0\tA\talpha\n1\tB\tbeta\n2\tC\tgamma\n").unwrap();
        let v = Vocabulary::load(&path, "dx").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.code(0), "A");
        assert_eq!(v.code(2), "C");
        assert_eq!(v.description(1), "beta");
    }

    #[test]
    fn vocab_load_rejects_duplicate_code() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab_lab.tsv");
        std::fs::write(&path, "0\tC0362892\tx\n1\tC0362894\ty\n2\tC0362892\tz\n").unwrap();
        let err = Vocabulary::load(&path, "lab").unwrap_err();
        assert!(err.to_string().contains("C0362892"), "{err}");
        assert!(err.to_string().contains(":3"), "{err}");
    }

    #[test]
    fn vocab_load_rejects_bad_token_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tsv");
        std::fs::write(&path, "0\tA\t\n2\tB\t\n").unwrap();
        let err = Vocabulary::load(&path, "dx").unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn vocab_lab_scale() {
        // A realistically sized lab vocabulary: 3750 entries.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab_lab.tsv");
        let mut body = String::new();
        for i in 0..3750 {
            body.push_str(&format!("{i}\tLAB_{i:05}\tlab code {i}\n"));
        }
        std::fs::write(&path, body).unwrap();
        let v = Vocabulary::load(&path, "lab").unwrap();
        assert_eq!(v.len(), 3750);
    }

    #[test]
    fn open_corpus_round_trips_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"id\":\"p1\",\"cats\":{\"dx\":[[0,2],[2,1]],\"rx\":[[1,3]]}}\n",
                "{\"id\":\"p2\",\"cats\":{\"rx\":[[0,1]]}}\n"
            ),
        )
        .unwrap();
        let corpus = MultiCorpus::open(&path, vec![vocab("dx", 3), vocab("rx", 2)], true).unwrap();
        let docs = corpus.collect().unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "p1");
        assert_eq!(docs[0].category(0), &[(0, 2), (2, 1)]);
        assert_eq!(docs[0].category(1), &[(1, 3)]);
        assert_eq!(docs[1].category(0), &[]);
        assert_eq!(docs[1].category(1), &[(0, 1)]);
    }

    #[test]
    fn open_corpus_rejects_out_of_range_token() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        // token_id == V_t is one past the end
        std::fs::write(&path, "{\"id\":\"p9\",\"cats\":{\"dx\":[[3,1]]}}\n").unwrap();
        let err = MultiCorpus::open(&path, vec![vocab("dx", 3)], true).unwrap_err();
        assert!(err.to_string().contains("p9"), "{err}");
        assert!(err.to_string().contains("token_id 3"), "{err}");
    }

    #[test]
    fn open_corpus_rejects_unknown_category_and_bad_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "{\"id\":\"p1\",\"cats\":{\"px\":[[0,1]]}}\n").unwrap();
        let err = MultiCorpus::open(&path, vec![vocab("dx", 3)], true).unwrap_err();
        assert!(err.to_string().contains("px"), "{err}");

        std::fs::write(&path, "{\"id\":\"p2\",\"cats\":{\"dx\":[[0,0]]}}\n").unwrap();
        let err = MultiCorpus::open(&path, vec![vocab("dx", 3)], true).unwrap_err();
        assert!(err.to_string().contains("p2"), "{err}");
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn open_corpus_empty_file_yields_zero_docs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "").unwrap();
        let corpus = MultiCorpus::open(&path, vec![vocab("dx", 3)], true).unwrap();
        assert_eq!(corpus.collect().unwrap().len(), 0);
    }

    #[test]
    fn corpus_save_load_is_byte_stable() {
        let vocabs = vec![vocab("dx", 4), vocab("rx", 3)];
        let docs = vec![
            Document::new("a", vec![vec![(1, 2), (0, 1)], vec![]], &vocabs).unwrap(),
            Document::new("b", vec![vec![], vec![(2, 5)]], &vocabs).unwrap(),
        ];
        let corpus = MultiCorpus::from_documents(vocabs.clone(), docs);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("c1.jsonl");
        let p2 = dir.path().join("c2.jsonl");
        corpus.save(&p1).unwrap();
        let loaded = MultiCorpus::open(&p1, vocabs, true).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn iteration_is_repeatable() {
        let vocabs = vec![vocab("dx", 4)];
        let docs = (0..10)
            .map(|i| Document::new(format!("d{i}"), vec![vec![(i % 4, 1 + i)]], &vocabs).unwrap())
            .collect();
        let corpus = MultiCorpus::from_documents(vocabs, docs);
        let a = corpus.collect().unwrap();
        let b = corpus.collect().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_degenerate_ratio() {
        let vocabs = vec![vocab("dx", 2)];
        let docs = vec![Document::new("d", vec![vec![(0, 1)]], &vocabs).unwrap()];
        let corpus = MultiCorpus::from_documents(vocabs, docs);
        assert!(split_holdout(&corpus, 0.0, 42).is_err());
        assert!(split_holdout(&corpus, 1.0, 42).is_err());
    }

    #[test]
    fn split_conserves_counts() {
        let vocabs = vec![vocab("dx", 2)];
        let docs = vec![Document::new("d", vec![vec![(1, 10)]], &vocabs).unwrap()];
        let corpus = MultiCorpus::from_documents(vocabs, docs);
        for seed in [0u64, 1, 42, 1234] {
            let (obs, held) = split_holdout(&corpus, 0.5, seed).unwrap();
            let o = obs.collect().unwrap()[0].category_tokens(0);
            let h = held.collect().unwrap()[0].category_tokens(0);
            assert_eq!(o + h, 10);
        }
    }

    #[test]
    fn split_is_deterministic_under_seed() {
        let vocabs = vec![vocab("dx", 8), vocab("rx", 5)];
        let docs = (0..20)
            .map(|i| {
                Document::new(
                    format!("d{i}"),
                    vec![vec![(i % 8, 3), ((i + 1) % 8, 2)], vec![(i % 5, 4)]],
                    &vocabs,
                )
                .unwrap()
            })
            .collect();
        let corpus = MultiCorpus::from_documents(vocabs, docs);
        let (o1, h1) = split_holdout(&corpus, 0.5, 42).unwrap();
        let (o2, h2) = split_holdout(&corpus, 0.5, 42).unwrap();
        assert_eq!(o1.collect().unwrap(), o2.collect().unwrap());
        assert_eq!(h1.collect().unwrap(), h2.collect().unwrap());
        // ids preserved in both halves
        for (a, b) in o1.collect().unwrap().iter().zip(h1.collect().unwrap()) {
            assert_eq!(a.id, b.id);
        }
    }

    #[test]
    fn cohorts_load_and_reject_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohorts.tsv");
        std::fs::write(&path, "p1\tUC\np2\tRA\n").unwrap();
        let cohorts = load_cohorts(&path).unwrap();
        assert_eq!(cohorts.len(), 2);
        assert_eq!(cohorts[0].cohort_name, "UC");

        std::fs::write(&path, "p1\tUC\np1\tRA\n").unwrap();
        let err = load_cohorts(&path).unwrap_err();
        assert!(err.to_string().contains("p1"), "{err}");

        std::fs::write(&path, "").unwrap();
        assert!(load_cohorts(&path).unwrap().is_empty());
    }
}
