//! File formats and intrinsic-feature construction.
//!
//! * success CSV: header `llm_id,<instance_id>,...`, one row per LLM, cells `0`/`1`;
//! * embeddings JSONL: one object per line with `instance_id`, `embedding`,
//!   `dataset` and an optional `prompt`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureStore, InstanceId, LlmId, SuccessMatrix};
use crate::util::atomic_write;

pub fn load_success_csv(path: impl AsRef<Path>) -> Result<SuccessMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_success_csv(&text, &path.display().to_string())
}

pub fn parse_success_csv(text: &str, origin: &str) -> Result<SuccessMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let line_err = |line: usize, msg: String| Error::Line {
        path: origin.to_string(),
        line,
        msg,
    };
    let header = reader
        .headers()
        .map_err(|e| line_err(1, e.to_string()))?
        .clone();
    if header.get(0) != Some("llm_id") {
        return Err(line_err(1, "header must start with `llm_id`".into()));
    }
    let instance_ids = header
        .iter()
        .skip(1)
        .map(InstanceId::new)
        .collect::<Result<Vec<_>>>()?;
    let mut llm_ids = Vec::new();
    let mut values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| line_err(row + 1, e.to_string()))?;
        if record.len() != instance_ids.len() + 1 {
            return Err(line_err(
                row + 1,
                format!("ragged row: {} cells, expected {}", record.len(), instance_ids.len() + 1),
            ));
        }
        llm_ids.push(LlmId::new(&record[0])?);
        for (c, cell) in record.iter().enumerate().skip(1) {
            let v = match cell.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Cell {
                        path: origin.to_string(),
                        row,
                        col: c + 1,
                        msg: format!("non-binary value `{other}`"),
                    })
                }
            };
            values.push(v);
        }
    }
    SuccessMatrix::new(llm_ids, instance_ids, values)
}

pub fn success_csv_string(matrix: &SuccessMatrix) -> String {
    let mut out = String::from("llm_id");
    for id in matrix.instance_ids() {
        out.push(',');
        out.push_str(id.as_str());
    }
    out.push('\n');
    for (j, llm) in matrix.llm_ids().iter().enumerate() {
        out.push_str(llm.as_str());
        for &v in matrix.row(j) {
            out.push(',');
            out.push(if v == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn save_success_csv(matrix: &SuccessMatrix, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), success_csv_string(matrix).as_bytes())
}

/// One line of an embeddings file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub instance_id: InstanceId,
    pub embedding: Vec<f64>,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

pub fn load_embeddings_jsonl(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings_jsonl(&text, &path.display().to_string())
}

pub fn parse_embeddings_jsonl(text: &str, origin: &str) -> Result<FeatureStore> {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut prompts = Vec::new();
    let mut vectors = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Line {
            path: origin.to_string(),
            line: line_no,
            msg,
        };
        let rec: EmbeddingRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let expected = *dim.get_or_insert(rec.embedding.len());
        if rec.embedding.len() != expected {
            return Err(err(format!("dim {} ≠ {}", rec.embedding.len(), expected)));
        }
        if rec.embedding.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite embedding value".into()));
        }
        ids.push(rec.instance_id);
        labels.push(rec.dataset);
        prompts.push(rec.prompt);
        vectors.extend(rec.embedding);
    }
    let dim = dim.ok_or_else(|| Error::Invalid(format!("{origin}: no embeddings")))?;
    if dim == 0 {
        return Err(Error::Invalid(format!("{origin}: zero-length embeddings")));
    }
    FeatureStore::with_prompts(ids, dim, vectors, labels, prompts)
}

pub fn embeddings_jsonl_string(store: &FeatureStore) -> Result<String> {
    let mut out = String::new();
    for (i, id) in store.instance_ids().iter().enumerate() {
        let rec = EmbeddingRecord {
            instance_id: id.clone(),
            embedding: store.row(i).to_vec(),
            dataset: store.dataset_labels()[i].clone(),
            prompt: store.prompts()[i].clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_embeddings_jsonl(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), embeddings_jsonl_string(store)?.as_bytes())
}

/// Keep the first `k` coordinates of every vector.
pub fn truncate_embeddings(store: &FeatureStore, k: usize) -> Result<FeatureStore> {
    let d = store.dim();
    if k == 0 || k > d {
        return Err(Error::Invalid(format!("truncation length {k} outside 1..={d}")));
    }
    let mut vectors = Vec::with_capacity(store.len() * k);
    for i in 0..store.len() {
        vectors.extend_from_slice(&store.row(i)[..k]);
    }
    store.with_vectors(k, vectors)
}

pub const DEFAULT_VOCAB_CAP: usize = 5000;

/// Lowercase, split on whitespace, strip surrounding punctuation.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|w| {
        let t = w.trim_matches(|c: char| c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace()));
        (!t.is_empty()).then(|| t.to_lowercase())
    })
}

/// Vocabulary fitted on training prompts, with corpus counts per token.
#[derive(Clone, Debug, PartialEq)]
pub struct OneGramVocabulary {
    tokens: Vec<String>,
    corpus_counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl OneGramVocabulary {
    /// Keeps the `vocab_cap` most frequent tokens; equal counts ordered lexicographically.
    pub fn fit<S: AsRef<str>>(train_prompts: &[S], vocab_cap: usize) -> Result<Self> {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for p in train_prompts {
            for tok in tokenize(p.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::Invalid("empty training corpus".into()));
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(vocab_cap.max(1));
        let index = ranked
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        let (tokens, corpus_counts) = ranked.into_iter().unzip();
        Ok(Self {
            tokens,
            corpus_counts,
            index,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Entry t = count of t in `prompt` / corpus count of t. Unknown tokens are ignored.
    pub fn transform(&self, prompt: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.tokens.len()];
        for tok in tokenize(prompt) {
            if let Some(&t) = self.index.get(&tok) {
                v[t] += 1.0;
            }
        }
        for (x, &c) in v.iter_mut().zip(&self.corpus_counts) {
            *x /= c.max(1) as f64;
        }
        v
    }
}

/// 1-gram feature store for `prompts`, with the vocabulary built from `train_prompts` only.
pub fn one_gram_features<S: AsRef<str>>(
    train_prompts: &[S],
    instance_ids: Vec<InstanceId>,
    dataset_labels: Vec<String>,
    prompts: &[S],
    vocab_cap: usize,
) -> Result<FeatureStore> {
    let vocab = OneGramVocabulary::fit(train_prompts, vocab_cap)?;
    let mut vectors = Vec::with_capacity(prompts.len() * vocab.len());
    for p in prompts {
        vectors.extend(vocab.transform(p.as_ref()));
    }
    let texts = prompts.iter().map(|p| Some(p.as_ref().to_string())).collect();
    FeatureStore::with_prompts(instance_ids, vocab.len(), vectors, dataset_labels, texts)
}

/// 1-gram features from the prompts carried by a store, vocabulary from `train_ids`.
pub fn one_gram_from_store(store: &FeatureStore, train_ids: &[InstanceId], vocab_cap: usize) -> Result<FeatureStore> {
    let text = |i: usize| {
        store.prompts()[i]
            .clone()
            .ok_or_else(|| Error::Invalid(format!("instance `{}` has no prompt", store.instance_ids()[i])))
    };
    let train: Vec<String> = train_ids
        .iter()
        .map(|id| {
            store
                .position(id)
                .ok_or_else(|| Error::MissingIds(vec![id.to_string()]))
                .and_then(text)
        })
        .collect::<Result<_>>()?;
    let all: Vec<String> = (0..store.len()).map(text).collect::<Result<_>>()?;
    one_gram_features(
        &train,
        store.instance_ids().to_vec(),
        store.dataset_labels().to_vec(),
        &all,
        vocab_cap,
    )
}

/// Request body for an embedding provider: `{"texts": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub texts: Vec<String>,
}

/// Response body: `{"embeddings": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResponse {
    pub embeddings: Vec<Vec<f64>>,
}

impl EmbeddingResponse {
    pub fn check(&self, request: &EmbeddingRequest) -> Result<()> {
        if self.embeddings.len() != request.texts.len() {
            return Err(Error::Dimension {
                expected: request.texts.len(),
                got: self.embeddings.len(),
            });
        }
        let dim = self.embeddings.first().map_or(0, Vec::len);
        for e in &self.embeddings {
            if e.len() != dim {
                return Err(Error::Dimension { expected: dim, got: e.len() });
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite embedding from provider".into()));
            }
        }
        Ok(())
    }
}

/// Blocking client for an HTTP embedding endpoint.
#[cfg(feature = "provider")]
pub struct EmbeddingProvider {
    url: String,
    client: reqwest::blocking::Client,
}

#[cfg(feature = "provider")]
impl EmbeddingProvider {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn embed(&self, texts: Vec<String>) -> Result<Vec<Vec<f64>>> {
        let request = EmbeddingRequest { texts };
        let response: EmbeddingResponse = self
            .client
            .post(&self.url)
            .json(&request)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| Error::Http(e.to_string()))?;
        response.check(&request)?;
        Ok(response.embeddings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::instance_ids;
    use proptest::prelude::*;

    #[test]
    fn parses_small_csv() {
        let m = parse_success_csv("llm_id,a,b\nm1,1,0\nm2,0,1\n", "t").unwrap();
        assert_eq!(m.row(0), &[1, 0]);
        assert_eq!(m.row(1), &[0, 1]);
    }

    #[test]
    fn csv_rejects_fractional_cell() {
        match parse_success_csv("llm_id,a,b\nm1,0.7,0\n", "t") {
            Err(Error::Cell { row, col, .. }) => assert_eq!((row, col), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_duplicates_and_ragged_rows() {
        match parse_success_csv("llm_id,a,a\nm1,1,0\n", "t") {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_success_csv("llm_id,a\nm1,1\nm1,0\n", "t").is_err());
        assert!(parse_success_csv("llm_id,a,b\nm1,1\n", "t").is_err());
    }

    #[test]
    fn parses_jsonl() {
        let text = "{\"instance_id\":\"a\",\"embedding\":[1,2,3],\"dataset\":\"d\"}\n\
                    {\"instance_id\":\"b\",\"embedding\":[4,5,6],\"dataset\":\"d\",\"prompt\":\"hi\"}\n";
        let s = parse_embeddings_jsonl(text, "t").unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        assert_eq!(s.prompts()[1].as_deref(), Some("hi"));
    }

    #[test]
    fn jsonl_dimension_mismatch_names_line() {
        let text = "{\"instance_id\":\"a\",\"embedding\":[1,2,3],\"dataset\":\"d\"}\n\
                    {\"instance_id\":\"b\",\"embedding\":[4,5,6,7],\"dataset\":\"d\"}\n";
        let err = parse_embeddings_jsonl(text, "t").unwrap_err();
        assert!(err.to_string().contains("line 2: dim 4 ≠ 3"), "{err}");
    }

    #[test]
    fn jsonl_rejects_nan_token() {
        let text = "{\"instance_id\":\"a\",\"embedding\":[NaN],\"dataset\":\"d\"}\n";
        assert!(matches!(parse_embeddings_jsonl(text, "t"), Err(Error::Line { line: 1, .. })));
    }

    fn store(d: usize) -> FeatureStore {
        let rows = (0..3).map(|i| (0..d).map(|j| (i * d + j) as f64).collect()).collect();
        FeatureStore::from_rows(instance_ids(&["a", "b", "c"]), rows, vec!["x".into(); 3]).unwrap()
    }

    #[test]
    fn truncation() {
        let s = store(3072);
        assert_eq!(truncate_embeddings(&s, 1024).unwrap().dim(), 1024);
        assert_eq!(truncate_embeddings(&s, 3072).unwrap(), s);
        assert!(truncate_embeddings(&s, 0).is_err());
        assert!(truncate_embeddings(&s, 3073).is_err());
    }

    #[test]
    fn one_gram_hand_counts() {
        let vocab = OneGramVocabulary::fit(&["a a b"], DEFAULT_VOCAB_CAP).unwrap();
        assert_eq!(vocab.tokens(), &["a".to_string(), "b".to_string()]);
        assert_eq!(vocab.transform("a b"), vec![0.5, 1.0]);
        assert_eq!(vocab.transform("a a b"), vec![1.0, 1.0]);
        assert_eq!(vocab.transform("zzz qq"), vec![0.0, 0.0]);
        assert!(OneGramVocabulary::fit(&["  ", "!!"], 10).is_err());
    }

    #[test]
    fn tokenizer_strips_punctuation() {
        let toks: Vec<String> = tokenize("Hello, WORLD! (it's)").collect();
        assert_eq!(toks, vec!["hello", "world", "it's"]);
    }

    #[test]
    fn provider_wire_format() {
        let req = EmbeddingRequest { texts: vec!["x".into()] };
        assert_eq!(serde_json::to_string(&req).unwrap(), "{\"texts\":[\"x\"]}");
        let resp: EmbeddingResponse = serde_json::from_str("{\"embeddings\":[[0.5,1.0]]}").unwrap();
        resp.check(&req).unwrap();
        let short: EmbeddingResponse = serde_json::from_str("{\"embeddings\":[]}").unwrap();
        assert!(short.check(&req).is_err());
    }

    proptest! {
        #[test]
        fn truncation_composes(k1 in 1usize..8, k2 in 1usize..8) {
            let s = store(8);
            let (hi, lo) = (k1.max(k2), k1.min(k2));
            let twice = truncate_embeddings(&truncate_embeddings(&s, hi).unwrap(), lo).unwrap();
            prop_assert_eq!(twice, truncate_embeddings(&s, lo).unwrap());
        }

        #[test]
        fn one_gram_training_columns_sum_to_one(
            corpus in prop::collection::vec("[a-e]{1,2}( [a-e]{1,2}){0,6}", 1..6)
        ) {
            let vocab = OneGramVocabulary::fit(&corpus, 1000).unwrap();
            let mut sums = vec![0.0; vocab.len()];
            for p in &corpus {
                for (s, v) in sums.iter_mut().zip(vocab.transform(p)) {
                    *s += v;
                }
            }
            for s in sums {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(0u8..2, 3), 1..5)) {
            let llms: Vec<String> = (0..rows.len()).map(|j| format!("m{j}")).collect();
            let m = SuccessMatrix::from_rows(
                crate::model::llm_ids(&llms),
                instance_ids(&["x", "y", "z"]),
                rows,
            ).unwrap();
            let back = parse_success_csv(&success_csv_string(&m), "t").unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
