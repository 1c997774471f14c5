//! HTTP/JSON clients for remote extractor, embedder and cross-encoder
//! services.
//!
//! Each extractor operation posts to its own path under the base URL:
//!
//! | path                     | request fields                                                        |
//! |--------------------------|-----------------------------------------------------------------------|
//! | `extract_entities`       | `previous_messages`, `current_message`, `extracted_entities` (reflection only) |
//! | `resolve_entity`         | `previous_messages`, `current_message`, `existing_nodes`, `new_node`  |
//! | `extract_facts`          | `previous_messages`, `current_message`, `entities`                    |
//! | `resolve_fact`           | `existing_edges`, `new_edge`                                          |
//! | `extract_temporal`       | `previous_messages`, `current_message`, `reference_timestamp`, `fact` |
//! | `detect_contradictions`  | `new_edge`, `existing_edges`                                          |
//! | `summarize`              | `texts`                                                               |
//! | `key_terms`              | `summary`                                                             |
//!
//! Embedders post `{"texts": [...]}` to `embed` and expect
//! `{"embeddings": [[...]]}`; cross-encoders post `{"query", "texts"}` to
//! `score` and expect `{"scores": [...]}`.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embedding::{check_unit, normalize, EmbedError, Embedder};
use crate::extraction::{
    EdgeDescription, EntityCandidate, EntityPass, EntityResolution, EpisodeContext, ExtractedEntity, ExtractedFact,
    Extractor, ExtractorError, FactCandidate, FactResolution, TemporalAnnotation,
};
use crate::ids::EdgeId;
use crate::rerank::{CrossEncoder, CrossEncoderError};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    pub url: String,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            url: String::new(),
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 200,
        }
    }
}

impl AdapterConfig {
    pub fn new(url: impl Into<String>) -> Self {
        AdapterConfig {
            url: url.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdapterError {
    #[error("request to {path} failed: {message}")]
    Transport { path: String, message: String },
    #[error("{path} answered HTTP {status}: {body}")]
    Status { path: String, status: u16, body: String },
    #[error("{path} returned an unreadable body: {message}")]
    Decode { path: String, message: String },
}

impl AdapterError {
    fn retryable(&self) -> bool {
        match self {
            AdapterError::Transport { .. } => true,
            AdapterError::Status { status, .. } => *status >= 500 || *status == 429,
            AdapterError::Decode { .. } => false,
        }
    }
}

impl From<AdapterError> for ExtractorError {
    fn from(e: AdapterError) -> Self {
        match e {
            AdapterError::Decode { .. } => ExtractorError::Malformed(e.to_string()),
            AdapterError::Status { status, .. } if status < 500 => ExtractorError::Failed(e.to_string()),
            _ => ExtractorError::Unavailable(e.to_string()),
        }
    }
}

/// JSON POST client with timeout and retry.
#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    config: AdapterConfig,
}

impl JsonClient {
    pub fn new(config: AdapterConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        JsonClient { agent, config }
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.url.trim_end_matches('/'), path)
    }

    fn attempt<Resp: DeserializeOwned>(&self, path: &str, body: &serde_json::Value) -> Result<Resp, AdapterError> {
        match self.agent.post(&self.url(path)).send_json(body) {
            Ok(resp) => resp.into_json::<Resp>().map_err(|e| AdapterError::Decode {
                path: path.to_string(),
                message: e.to_string(),
            }),
            Err(ureq::Error::Status(status, resp)) => Err(AdapterError::Status {
                path: path.to_string(),
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(e) => Err(AdapterError::Transport {
                path: path.to_string(),
                message: e.to_string(),
            }),
        }
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, AdapterError> {
        let body = serde_json::to_value(body).map_err(|e| AdapterError::Decode {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut tries = 0;
        loop {
            match self.attempt(path, &body) {
                Err(e) if e.retryable() && tries < self.config.retries => {
                    tracing::debug!(path, attempt = tries + 1, error = %e, "retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Serialize)]
struct Prompt<'a, T: Serialize> {
    previous_messages: String,
    current_message: String,
    #[serde(flatten)]
    rest: &'a T,
}

fn prompt<'a, T: Serialize>(ctx: &EpisodeContext, rest: &'a T) -> Prompt<'a, T> {
    Prompt {
        previous_messages: ctx.previous_messages(),
        current_message: ctx.current_message(),
        rest,
    }
}

#[derive(Deserialize)]
struct EntitiesResponse {
    entities: Vec<ExtractedEntity>,
}

#[derive(Deserialize)]
struct FactsResponse {
    facts: Vec<ExtractedFact>,
}

#[derive(Deserialize)]
struct ContradictionsResponse {
    contradicted: Vec<EdgeId>,
}

#[derive(Deserialize)]
struct SummaryResponse {
    summary: String,
}

#[derive(Deserialize)]
struct KeyTermsResponse {
    name: String,
}

/// [`Extractor`] backed by an HTTP service.
#[derive(Debug, Clone)]
pub struct RemoteExtractor {
    client: JsonClient,
}

impl RemoteExtractor {
    pub fn new(config: AdapterConfig) -> Self {
        RemoteExtractor {
            client: JsonClient::new(config),
        }
    }
}

impl Extractor for RemoteExtractor {
    fn extract_entities(&self, ctx: &EpisodeContext, pass: EntityPass<'_>) -> Result<Vec<ExtractedEntity>, ExtractorError> {
        let found = match pass {
            EntityPass::Initial => None,
            EntityPass::Reflection { found } => Some(found),
        };
        let rest = serde_json::json!({ "extracted_entities": found });
        let r: EntitiesResponse = self.client.post("extract_entities", &prompt(ctx, &rest))?;
        Ok(r.entities)
    }

    fn resolve_entity(
        &self,
        ctx: &EpisodeContext,
        candidates: &[EntityCandidate],
        new: &ExtractedEntity,
    ) -> Result<EntityResolution, ExtractorError> {
        let rest = serde_json::json!({ "existing_nodes": candidates, "new_node": new });
        Ok(self.client.post("resolve_entity", &prompt(ctx, &rest))?)
    }

    fn extract_facts(&self, ctx: &EpisodeContext, entities: &[ExtractedEntity]) -> Result<Vec<ExtractedFact>, ExtractorError> {
        let rest = serde_json::json!({ "entities": entities });
        let r: FactsResponse = self.client.post("extract_facts", &prompt(ctx, &rest))?;
        Ok(r.facts)
    }

    fn resolve_fact(&self, existing: &[FactCandidate], new: &ExtractedFact) -> Result<FactResolution, ExtractorError> {
        let body = serde_json::json!({ "existing_edges": existing, "new_edge": new });
        Ok(self.client.post("resolve_fact", &body)?)
    }

    fn extract_temporal(
        &self,
        ctx: &EpisodeContext,
        reference: Timestamp,
        fact: &ExtractedFact,
    ) -> Result<TemporalAnnotation, ExtractorError> {
        let rest = serde_json::json!({ "reference_timestamp": reference.to_iso(), "fact": fact });
        Ok(self.client.post("extract_temporal", &prompt(ctx, &rest))?)
    }

    fn detect_contradictions(&self, new: &EdgeDescription, related: &[EdgeDescription]) -> Result<Vec<EdgeId>, ExtractorError> {
        let body = serde_json::json!({ "new_edge": new, "existing_edges": related });
        let r: ContradictionsResponse = self.client.post("detect_contradictions", &body)?;
        Ok(r.contradicted)
    }

    fn summarize(&self, texts: &[String]) -> Result<String, ExtractorError> {
        let r: SummaryResponse = self.client.post("summarize", &serde_json::json!({ "texts": texts }))?;
        Ok(r.summary)
    }

    fn key_terms(&self, summary: &str) -> Result<String, ExtractorError> {
        let r: KeyTermsResponse = self.client.post("key_terms", &serde_json::json!({ "summary": summary }))?;
        Ok(r.name)
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

/// [`Embedder`] backed by an HTTP service. Returned vectors are normalized
/// and checked against the configured dimension.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: JsonClient,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(config: AdapterConfig, dim: usize) -> Self {
        RemoteEmbedder {
            client: JsonClient::new(config),
            dim,
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = self.embed_batch(&[text.to_string()])?;
        v.pop().ok_or_else(|| EmbedError::Backend("empty embedding response".into()))
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let r: EmbedResponse = self
            .client
            .post("embed", &serde_json::json!({ "texts": texts }))
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        if r.embeddings.len() != texts.len() {
            return Err(EmbedError::Backend(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                r.embeddings.len()
            )));
        }
        r.embeddings
            .into_iter()
            .map(|mut v| {
                if v.len() != self.dim {
                    return Err(EmbedError::Dimension {
                        expected: self.dim,
                        got: v.len(),
                    });
                }
                if !normalize(&mut v) {
                    return Err(EmbedError::NotNormalized(0.0));
                }
                check_unit(&v, self.dim)?;
                Ok(v)
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// [`CrossEncoder`] backed by an HTTP batch-scoring service.
#[derive(Debug, Clone)]
pub struct RemoteCrossEncoder {
    client: JsonClient,
}

impl RemoteCrossEncoder {
    pub fn new(config: AdapterConfig) -> Self {
        RemoteCrossEncoder {
            client: JsonClient::new(config),
        }
    }
}

impl CrossEncoder for RemoteCrossEncoder {
    fn score(&self, query: &str, texts: &[String]) -> Result<Vec<f64>, CrossEncoderError> {
        let r: ScoreResponse = self
            .client
            .post("score", &serde_json::json!({ "query": query, "texts": texts }))
            .map_err(|e| CrossEncoderError(e.to_string()))?;
        Ok(r.scores)
    }
}
