//! Prediction collection from a chat-completions-compatible vision endpoint.
//!
//! One request per scene: the encoded PNG rides along as a base64 data URL
//! in a multimodal user message. Responses are run through a tolerant parser
//! that accepts fenced or prose-wrapped JSON, coerces stringly-typed
//! numbers, drops malformed records with per-record reasons, and clamps
//! out-of-range centers. Transient failures (HTTP 429/5xx, timeouts) retry
//! with exponential backoff; anything else fails fast. Failed scenes stay in
//! the output as explicit failures so downstream metrics keep the full
//! example count.
//!
//! The API credential comes from the `VOXREP_API_KEY` environment variable
//! and is never written to logs or prediction files.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{GridCoord, ObjectRecord, SceneAnnotation};
use crate::grid::GridDims;
use crate::synth::{AnnotationPayload, DatasetManifest};

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "VOXREP_API_KEY";

/// Instruction sent with every image unless overridden.
pub const DEFAULT_PROMPT: &str = "The image encodes a 3D voxel scene as 16 depth slices tiled \
row-major (z=0 top-left). Identify every object and return only a JSON array of objects with \
fields id, color, description, number_of_occupied_voxel, voxel_coords_center (an object with \
integer x, y, z). No prose, no code fences.";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Retry schedule for transient endpoint failures.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_secs(1), factor: 2.0, jitter: true }
    }
}

impl RetryPolicy {
    fn delay_before(&self, next_attempt: u32) -> Duration {
        let exp = self.base_delay.as_secs_f64() * self.factor.powi(next_attempt as i32 - 2);
        let scaled = if self.jitter {
            // full jitter would allow zero waits; keep at least half
            exp * (0.5 + 0.5 * rand::random::<f64>())
        } else {
            exp
        };
        Duration::from_secs_f64(scaled)
    }
}

/// Everything constant across a batch; per-scene requests add the image.
#[derive(Debug, Clone)]
pub struct RequestTemplate {
    pub endpoint_url: String,
    pub model_name: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub dims: GridDims,
    /// Expected decoded size of every request image (width, height).
    pub image_size: (usize, usize),
}

impl RequestTemplate {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        RequestTemplate {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            prompt: DEFAULT_PROMPT.to_string(),
            temperature: 0.0,
            max_output_tokens: 2048,
            dims: GridDims::default_scene(),
            image_size: (896, 896),
        }
    }
}

/// One fully-specified prediction request.
#[derive(Debug, Clone)]
pub struct PredictionRequest {
    pub scene_id: String,
    pub image_png: Vec<u8>,
    pub template: RequestTemplate,
}

impl PredictionRequest {
    /// Check the image decodes to the template's expected RGB size.
    pub fn validate(&self) -> Result<(), ClientError> {
        let raster = crate::codec::decode_png(&self.image_png)
            .map_err(|e| ClientError::Config(format!("request image: {e}")))?;
        let (w, h) = self.template.image_size;
        if raster.width != w || raster.height != h {
            return Err(ClientError::Config(format!(
                "request image is {}x{}, expected {w}x{h}",
                raster.width, raster.height
            )));
        }
        Ok(())
    }
}

/// What came back for one scene. Exactly one variant per scene.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionOutcome {
    Parsed { annotation: SceneAnnotation, issues: Vec<String> },
    ParseFailure { raw: String, reason: String },
    TransportFailure { detail: String },
}

#[derive(Debug, Clone)]
pub struct PredictionResult {
    pub scene_id: String,
    pub outcome: PredictionOutcome,
    pub attempts: u32,
    pub latency: Duration,
    /// Raw response text, retained when the endpoint answered at all.
    pub raw_text: Option<String>,
}

impl PredictionResult {
    /// The annotation to evaluate: failures count as empty predictions.
    pub fn annotation_or_empty(&self, dims: GridDims) -> SceneAnnotation {
        match &self.outcome {
            PredictionOutcome::Parsed { annotation, .. } => annotation.clone(),
            _ => SceneAnnotation::new(self.scene_id.clone(), dims),
        }
    }
}

/// Outcome of the tolerant parser.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPrediction {
    pub annotation: SceneAnnotation,
    /// Per-record drop reasons and clamp notes.
    pub issues: Vec<String>,
}

/// Parse model output into a scene annotation.
///
/// Strips markdown code fences, locates the first balanced top-level JSON
/// array, coerces numeric fields given as strings, drops records missing a
/// required field (with a reason), and clamps centers into `dims`.
pub fn tolerant_parse(text: &str, dims: GridDims) -> Result<ParsedPrediction, ClientError> {
    let defenced: String = text
        .lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");

    let start = defenced
        .find('[')
        .ok_or_else(|| ClientError::Parse("no JSON array found".into()))?;
    let slice = balanced_array(&defenced[start..])
        .ok_or_else(|| ClientError::Parse("unbalanced JSON array".into()))?;
    let values: Vec<serde_json::Value> = serde_json::from_str(slice)
        .map_err(|e| ClientError::Parse(format!("array does not parse as JSON: {e}")))?;

    let mut annotation = SceneAnnotation::new("", dims);
    let mut issues = Vec::new();
    for (index, value) in values.iter().enumerate() {
        match parse_record(value, dims) {
            Ok((record, mut notes)) => {
                annotation.objects.push(record);
                issues.append(&mut notes);
            }
            Err(reason) => issues.push(format!("record {index} dropped: {reason}")),
        }
    }
    Ok(ParsedPrediction { annotation, issues })
}

/// Extract the first balanced `[...]`, honoring strings and escapes.
fn balanced_array(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' => depth += 1,
            b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(&text[..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_record(
    value: &serde_json::Value,
    dims: GridDims,
) -> Result<(ObjectRecord, Vec<String>), String> {
    let obj = value.as_object().ok_or("not a JSON object")?;
    let id = match obj.get("id") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err("id is neither string nor number".into()),
        None => return Err("missing id".into()),
    };
    let color = obj
        .get("color")
        .and_then(|v| v.as_str())
        .ok_or("missing color")?
        .to_string();
    let description = obj
        .get("description")
        .and_then(|v| v.as_str())
        .ok_or("missing description")?
        .to_string();
    let count = coerce_u64(obj.get("number_of_occupied_voxel").ok_or("missing number_of_occupied_voxel")?)
        .ok_or("number_of_occupied_voxel is not a non-negative integer")?;
    let center = obj
        .get("voxel_coords_center")
        .and_then(|v| v.as_object())
        .ok_or("missing voxel_coords_center")?;

    let mut notes = Vec::new();
    let mut axis = |name: &str, limit: usize| -> Result<u32, String> {
        let raw = coerce_i64(center.get(name).ok_or_else(|| format!("missing center {name}"))?)
            .ok_or_else(|| format!("center {name} is not numeric"))?;
        let clamped = raw.clamp(0, limit as i64 - 1);
        if clamped != raw {
            notes.push(format!("object {id}: center {name}={raw} clamped to {clamped}"));
        }
        Ok(clamped as u32)
    };
    let x = axis("x", dims.w)?;
    let y = axis("y", dims.h)?;
    let z = axis("z", dims.d)?;

    Ok((
        ObjectRecord {
            id,
            color,
            description,
            number_of_occupied_voxel: count,
            voxel_coords_center: GridCoord::new(x, y, z),
        },
        notes,
    ))
}

fn coerce_u64(value: &serde_json::Value) -> Option<u64> {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Some(u)
            } else {
                let f = n.as_f64()?;
                (f >= 0.0).then(|| f.round() as u64)
            }
        }
        serde_json::Value::String(s) => {
            let s = s.trim();
            s.parse::<u64>()
                .ok()
                .or_else(|| s.parse::<f64>().ok().filter(|f| *f >= 0.0).map(|f| f.round() as u64))
        }
        _ => None,
    }
}

fn coerce_i64(value: &serde_json::Value) -> Option<i64> {
    match value {
        serde_json::Value::Number(n) => {
            n.as_i64().or_else(|| n.as_f64().map(|f| f.round() as i64))
        }
        serde_json::Value::String(s) => {
            let s = s.trim();
            s.parse::<i64>().ok().or_else(|| s.parse::<f64>().ok().map(|f| f.round() as i64))
        }
        _ => None,
    }
}

/// Blocking HTTP client with retry handling.
pub struct VlmClient {
    http: reqwest::blocking::Client,
    policy: RetryPolicy,
    api_key: Option<String>,
}

enum AttemptOutcome {
    Success(String),
    Retryable(String),
    Fatal(String),
}

impl VlmClient {
    pub fn new(policy: RetryPolicy, request_timeout: Duration) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(request_timeout)
            .build()
            .map_err(|e| ClientError::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(VlmClient { http, policy, api_key })
    }

    /// Send one request, retrying 429/5xx/timeouts with exponential backoff.
    pub fn predict(&self, request: &PredictionRequest) -> PredictionResult {
        let started = std::time::Instant::now();
        if let Err(err) = request.validate() {
            return PredictionResult {
                scene_id: request.scene_id.clone(),
                outcome: PredictionOutcome::TransportFailure { detail: err.to_string() },
                attempts: 0,
                latency: started.elapsed(),
                raw_text: None,
            };
        }

        let url = format!(
            "{}/chat/completions",
            request.template.endpoint_url.trim_end_matches('/')
        );
        let image_b64 = base64::engine::general_purpose::STANDARD.encode(&request.image_png);
        let body = serde_json::json!({
            "model": request.template.model_name,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": request.template.prompt},
                    {"type": "image_url", "image_url": {
                        "url": format!("data:image/png;base64,{image_b64}")
                    }},
                ],
            }],
            "temperature": request.template.temperature,
            "max_tokens": request.template.max_output_tokens,
        });

        let mut attempts = 0u32;
        let mut last_detail = String::new();
        while attempts < self.policy.max_attempts {
            attempts += 1;
            if attempts > 1 {
                std::thread::sleep(self.policy.delay_before(attempts));
            }
            match self.attempt(&url, &body) {
                AttemptOutcome::Success(content) => {
                    let outcome = match tolerant_parse(&content, request.template.dims) {
                        Ok(parsed) => {
                            let mut annotation = parsed.annotation;
                            annotation.scene_id = request.scene_id.clone();
                            PredictionOutcome::Parsed { annotation, issues: parsed.issues }
                        }
                        Err(err) => PredictionOutcome::ParseFailure {
                            raw: content.clone(),
                            reason: err.to_string(),
                        },
                    };
                    return PredictionResult {
                        scene_id: request.scene_id.clone(),
                        outcome,
                        attempts,
                        latency: started.elapsed(),
                        raw_text: Some(content),
                    };
                }
                AttemptOutcome::Retryable(detail) => {
                    log::debug!("attempt {attempts} for {}: {detail}", request.scene_id);
                    last_detail = detail;
                }
                AttemptOutcome::Fatal(detail) => {
                    return PredictionResult {
                        scene_id: request.scene_id.clone(),
                        outcome: PredictionOutcome::TransportFailure { detail },
                        attempts,
                        latency: started.elapsed(),
                        raw_text: None,
                    };
                }
            }
        }
        PredictionResult {
            scene_id: request.scene_id.clone(),
            outcome: PredictionOutcome::TransportFailure {
                detail: format!("retries exhausted: {last_detail}"),
            },
            attempts,
            latency: started.elapsed(),
            raw_text: None,
        }
    }

    fn attempt(&self, url: &str, body: &serde_json::Value) -> AttemptOutcome {
        let mut builder = self.http.post(url).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = match builder.send() {
            Ok(r) => r,
            // connection/timeout problems are transient
            Err(e) => return AttemptOutcome::Retryable(format!("request failed: {e}")),
        };
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return AttemptOutcome::Retryable(format!("status {status}"));
        }
        if !status.is_success() {
            return AttemptOutcome::Fatal(format!("status {status}"));
        }
        let envelope: serde_json::Value = match response.json() {
            Ok(v) => v,
            Err(e) => return AttemptOutcome::Fatal(format!("malformed response body: {e}")),
        };
        match envelope["choices"][0]["message"]["content"].as_str() {
            Some(content) => AttemptOutcome::Success(content.to_string()),
            None => AttemptOutcome::Fatal("response has no choices[0].message.content".into()),
        }
    }

    /// Run the whole manifest with at most `parallelism` requests in flight.
    /// Results come back in scene order; per-scene failures never abort the
    /// batch.
    pub fn predict_batch(
        &self,
        manifest: &DatasetManifest,
        template: &RequestTemplate,
        parallelism: usize,
    ) -> Vec<PredictionResult> {
        let parallelism = parallelism.max(1);
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<PredictionResult>>> =
            Mutex::new((0..manifest.entries.len()).map(|_| None).collect());

        std::thread::scope(|scope| {
            for _ in 0..parallelism.min(manifest.entries.len().max(1)) {
                scope.spawn(|| loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if index >= manifest.entries.len() {
                        break;
                    }
                    let entry = &manifest.entries[index];
                    let result = match std::fs::read(manifest.image_path(entry)) {
                        Ok(image_png) => self.predict(&PredictionRequest {
                            scene_id: entry.scene_id.clone(),
                            image_png,
                            template: template.clone(),
                        }),
                        Err(err) => PredictionResult {
                            scene_id: entry.scene_id.clone(),
                            outcome: PredictionOutcome::TransportFailure {
                                detail: format!("image read: {err}"),
                            },
                            attempts: 0,
                            latency: Duration::ZERO,
                            raw_text: None,
                        },
                    };
                    slots.lock().unwrap()[index] = Some(result);
                });
            }
        });

        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|slot| slot.expect("every scene produced a result"))
            .collect()
    }
}

/// One line of a predictions file. Volatile fields (latency) stay out so a
/// deterministic endpoint yields a byte-identical file at any parallelism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub scene_id: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<AnnotationPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub issues: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl PredictionLine {
    pub fn from_result(result: &PredictionResult, dims: GridDims) -> Self {
        match &result.outcome {
            PredictionOutcome::Parsed { annotation, issues } => PredictionLine {
                scene_id: result.scene_id.clone(),
                status: "ok".into(),
                annotation: Some(AnnotationPayload {
                    dims,
                    objects: annotation.objects.clone(),
                }),
                reason: None,
                attempts: result.attempts,
                issues: issues.clone(),
                raw: result.raw_text.clone(),
            },
            PredictionOutcome::ParseFailure { raw, reason } => PredictionLine {
                scene_id: result.scene_id.clone(),
                status: "parse_failure".into(),
                annotation: None,
                reason: Some(reason.clone()),
                attempts: result.attempts,
                issues: Vec::new(),
                raw: Some(raw.clone()),
            },
            PredictionOutcome::TransportFailure { detail } => PredictionLine {
                scene_id: result.scene_id.clone(),
                status: "transport_failure".into(),
                annotation: None,
                reason: Some(detail.clone()),
                attempts: result.attempts,
                issues: Vec::new(),
                raw: None,
            },
        }
    }

    /// The prediction to evaluate; failures are empty object lists.
    pub fn annotation_for_eval(&self, dims: GridDims) -> SceneAnnotation {
        SceneAnnotation {
            scene_id: self.scene_id.clone(),
            dims,
            objects: self
                .annotation
                .as_ref()
                .map(|a| a.objects.clone())
                .unwrap_or_default(),
        }
    }
}

pub fn write_predictions<P: AsRef<Path>>(
    path: P,
    results: &[PredictionResult],
    dims: GridDims,
) -> Result<(), ClientError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for result in results {
        let line = PredictionLine::from_result(result, dims);
        serde_json::to_writer(&mut out, &line)
            .map_err(|e| ClientError::Config(format!("serialize prediction: {e}")))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions<P: AsRef<Path>>(path: P) -> Result<Vec<PredictionLine>, ClientError> {
    let file = std::fs::File::open(path)?;
    let mut lines = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PredictionLine = serde_json::from_str(&line)
            .map_err(|e| ClientError::Parse(format!("predictions line {}: {e}", i + 1)))?;
        lines.push(parsed);
    }
    Ok(lines)
}
