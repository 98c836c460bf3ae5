//! Client for a Spotlight-compatible annotation service.
//!
//! Requests are `POST {endpoint}/rest/annotate` with form fields `text` and
//! `confidence` (plus any pass-through parameters) and
//! `Accept: application/json`. The response object's `Resources` array
//! carries one object per linked mention; every attribute arrives as a JSON
//! string:
//!
//! ```json
//! {"Resources": [{"@URI": "http://dbpedia.org/resource/Consumer",
//!                 "@surfaceForm": "consumers", "@offset": "42",
//!                 "@similarityScore": "0.45", "@types": ""}]}
//! ```
//!
//! The entity id is the final path segment of `@URI`. A missing or null
//! `Resources` key means no annotations. Unknown keys are ignored.

use std::fmt;
use std::time::Duration;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use crate::corpus::Document;

use super::{check_bounds, AnnotationCache, Annotator, EntityAnnotation, LinkError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpotlightParseError {
    /// Byte offset into the response body where parsing failed.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for SpotlightParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "byte {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for SpotlightParseError {}

#[derive(Deserialize)]
struct Response {
    #[serde(rename = "Resources", default)]
    resources: Option<Vec<Resource>>,
}

#[derive(Deserialize)]
struct Resource {
    #[serde(rename = "@URI", deserialize_with = "lenient_string")]
    uri: String,
    #[serde(rename = "@surfaceForm", deserialize_with = "lenient_string")]
    surface_form: String,
    #[serde(rename = "@offset", deserialize_with = "offset")]
    offset: usize,
    #[serde(rename = "@similarityScore", deserialize_with = "score")]
    similarity: f64,
}

/// Accepts a JSON string or number and yields its text.
fn lenient_string<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    struct V;
    impl Visitor<'_> for V {
        type Value = String;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a string or number")
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<String, E> {
            Ok(v.to_owned())
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<String, E> {
            Ok(v.to_string())
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<String, E> {
            Ok(v.to_string())
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<String, E> {
            Ok(v.to_string())
        }
    }
    d.deserialize_any(V)
}

fn offset<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let s = lenient_string(d)?;
    s.trim()
        .parse()
        .map_err(|_| de::Error::custom(format!("@offset {s:?} is not a non-negative integer")))
}

fn score<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let s = lenient_string(d)?;
    match s.trim().parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(de::Error::custom(format!(
            "@similarityScore {s:?} is not a number in [0, 1]"
        ))),
    }
}

/// Final path segment of a resource URI.
fn entity_id(uri: &str) -> &str {
    let trimmed = uri.trim_end_matches('/');
    trimmed.rsplit('/').next().unwrap_or(trimmed)
}

fn byte_offset(body: &[u8], line: usize, column: usize) -> usize {
    let line_start = body
        .split_inclusive(|&b| b == b'\n')
        .take(line.saturating_sub(1))
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(body.len())
}

/// Parses a service response body. All-or-nothing: any malformed resource
/// fails the whole body.
pub fn parse_spotlight_response(body: &[u8]) -> Result<Vec<EntityAnnotation>, SpotlightParseError> {
    let response: Response = serde_json::from_slice(body).map_err(|e| SpotlightParseError {
        offset: byte_offset(body, e.line(), e.column()),
        message: e.to_string(),
    })?;
    Ok(response
        .resources
        .unwrap_or_default()
        .into_iter()
        .map(|r| EntityAnnotation {
            entity_id: entity_id(&r.uri).to_owned(),
            surface_form: r.surface_form,
            offset: r.offset,
            confidence: r.similarity,
        })
        .collect())
}

/// Blocking client with an optional on-disk cache.
pub struct SpotlightClient {
    endpoint: String,
    confidence: f64,
    params: Vec<(String, String)>,
    agent: ureq::Agent,
    cache: Option<AnnotationCache>,
}

impl SpotlightClient {
    /// `endpoint` is the service base URL, e.g.
    /// `https://api.dbpedia-spotlight.org/en`; `/rest/annotate` is appended.
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            confidence: 0.0,
            params: Vec::new(),
            agent,
            cache: None,
        }
    }

    /// Value sent as the service-side `confidence` form field.
    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    /// Extra form fields passed through unchanged (e.g. `support`, `types`).
    pub fn with_params<I, K, V>(mut self, params: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        self.params = params.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        self.params.sort();
        self
    }

    pub fn with_cache(mut self, cache: AnnotationCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Identity of a request for caching: endpoint plus all parameters.
    fn request_signature(&self) -> String {
        let mut sig = format!("{}\0confidence={}", self.endpoint, self.confidence);
        for (k, v) in &self.params {
            sig.push_str(&format!("\0{k}={v}"));
        }
        sig
    }

    fn fetch(&self, document: &Document) -> Result<Vec<EntityAnnotation>, LinkError> {
        let service_err = |message: String| LinkError::Service {
            doc_id: document.doc_id.clone(),
            message,
            retryable: true,
        };
        let confidence = self.confidence.to_string();
        let mut form: Vec<(&str, &str)> = vec![
            ("text", document.raw_text.as_str()),
            ("confidence", confidence.as_str()),
        ];
        form.extend(self.params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        let mut response = self
            .agent
            .post(format!("{}/rest/annotate", self.endpoint))
            .header("Accept", "application/json")
            .send_form(form)
            .map_err(|e| service_err(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(service_err(format!("HTTP {}", status.as_u16())));
        }
        let body = response
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| service_err(e.to_string()))?;
        let annotations = parse_spotlight_response(&body).map_err(|error| LinkError::Parse {
            doc_id: document.doc_id.clone(),
            error,
        })?;
        check_bounds(document, &annotations)?;
        Ok(annotations)
    }
}

impl Annotator for SpotlightClient {
    fn annotate(&self, document: &Document) -> Result<Vec<EntityAnnotation>, LinkError> {
        annotate_remote(self, document)
    }
}

/// Annotates one document through the service, consulting the cache first
/// and recording successful responses in it.
pub fn annotate_remote(
    client: &SpotlightClient,
    document: &Document,
) -> Result<Vec<EntityAnnotation>, LinkError> {
    if document.raw_text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let signature = client.request_signature();
    if let Some(cache) = &client.cache {
        if let Some(hit) = cache.get(document, &signature)? {
            return Ok(hit);
        }
    }
    let annotations = client.fetch(document)?;
    if let Some(cache) = &client.cache {
        cache.put(document, &signature, &annotations)?;
    }
    Ok(annotations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_resources() {
        let body = br#"{"@text":"x","@confidence":"0.1","Resources":[
            {"@URI":"http://dbpedia.org/resource/Consumer","@support":"1","@types":"","@surfaceForm":"consumers","@offset":"4","@similarityScore":"0.45","@percentageOfSecondRank":"0.1"},
            {"@URI":"http://dbpedia.org/resource/Genetically_modified_organism","@surfaceForm":"GMOs","@offset":"20","@similarityScore":"0.9999"}]}"#;
        let out = parse_spotlight_response(body).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].entity_id, "Consumer");
        assert_eq!(out[0].offset, 4);
        assert_eq!(out[0].confidence, 0.45);
        assert_eq!(out[1].entity_id, "Genetically_modified_organism");
    }

    #[test]
    fn empty_or_missing_resources() {
        assert!(parse_spotlight_response(br#"{"Resources":[]}"#).unwrap().is_empty());
        assert!(parse_spotlight_response(br#"{"@text":"nothing"}"#).unwrap().is_empty());
        assert!(parse_spotlight_response(br#"{"Resources":null}"#).unwrap().is_empty());
    }

    #[test]
    fn numeric_surface_form_accepted() {
        let out = parse_spotlight_response(
            br#"{"Resources":[{"@URI":"http://dbpedia.org/resource/1999","@surfaceForm":1999,"@offset":3,"@similarityScore":"1.0"}]}"#,
        )
        .unwrap();
        assert_eq!(out[0].surface_form, "1999");
    }

    #[test]
    fn malformed_reports_byte_offset() {
        let body = b"{\"Resources\": [\n  {\"@URI\": \"x\", \"@offset\": \"nope\"";
        let err = parse_spotlight_response(body).unwrap_err();
        assert!(err.offset > 16 && err.offset <= body.len(), "{err}");
        let err = parse_spotlight_response(b"<html>502</html>").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn score_out_of_range_rejected() {
        let body = br#"{"Resources":[{"@URI":"a/B","@surfaceForm":"b","@offset":"0","@similarityScore":"1.7"}]}"#;
        assert!(parse_spotlight_response(body).is_err());
    }

    #[test]
    fn entity_id_is_last_segment() {
        assert_eq!(entity_id("http://dbpedia.org/resource/Basque_people"), "Basque_people");
        assert_eq!(entity_id("http://dbpedia.org/resource/X/"), "X");
        assert_eq!(entity_id("Plain"), "Plain");
    }
}
