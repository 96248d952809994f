use std::path::{Path, PathBuf};

use base64::Engine;
use diagbench_core::digest::DigestBuilder;
use diagbench_core::{BenchmarkProblem, Digest};
use serde::Serialize;
use serde_json::{json, Value};

use crate::decoding::DecodingConfig;
use crate::ClientError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImagePayload {
    pub media_type: String,
    pub sha256: Digest,
    pub source: PathBuf,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

impl ImagePayload {
    pub fn from_bytes(bytes: Vec<u8>, source: impl Into<PathBuf>) -> Self {
        let source = source.into();
        ImagePayload {
            media_type: media_type(&bytes, &source).to_string(),
            sha256: Digest::of(&bytes),
            source,
            bytes,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let bytes = std::fs::read(path).map_err(|e| ClientError::MissingImage {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(Self::from_bytes(bytes, path))
    }

    pub fn data_url(&self) -> String {
        format!(
            "data:{};base64,{}",
            self.media_type,
            base64::engine::general_purpose::STANDARD.encode(&self.bytes)
        )
    }
}

fn media_type(bytes: &[u8], path: &Path) -> &'static str {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        return "image/png";
    }
    if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        return "image/jpeg";
    }
    if bytes.starts_with(b"GIF8") {
        return "image/gif";
    }
    if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        return "image/webp";
    }
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

/// One model query. `request_digest` hashes every field that can change the
/// reply, including the image bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub instruction: String,
    pub images: Vec<ImagePayload>,
    pub decoding: DecodingConfig,
    /// Distinguishes repeated samples of the same prompt.
    pub sample_index: u32,
    pub request_digest: Digest,
}

impl ModelRequest {
    pub fn new(
        model_id: impl Into<String>,
        instruction: impl Into<String>,
        images: Vec<ImagePayload>,
        decoding: DecodingConfig,
        sample_index: u32,
    ) -> Self {
        let mut req = ModelRequest {
            model_id: model_id.into(),
            instruction: instruction.into(),
            images,
            decoding,
            sample_index,
            request_digest: Digest::of(""),
        };
        req.request_digest = req.compute_digest();
        req
    }

    pub fn compute_digest(&self) -> Digest {
        let mut b = DigestBuilder::new();
        b.part("model-request/1");
        b.part(&self.model_id);
        b.part(&self.instruction);
        b.part(self.images.len().to_string());
        for img in &self.images {
            b.part(&img.media_type);
            b.part(img.sha256.as_str());
        }
        b.part(serde_json::to_vec(&self.decoding).expect("decoding serializes"));
        b.part(self.sample_index.to_string());
        b.finish()
    }

    pub fn is_text_only(&self) -> bool {
        self.images.is_empty()
    }

    /// Chat-completions body: one user message, images before the text, no
    /// system prompt.
    pub fn to_wire(&self) -> Value {
        let mut content: Vec<Value> = self
            .images
            .iter()
            .map(|img| json!({"type": "image_url", "image_url": {"url": img.data_url()}}))
            .collect();
        content.push(json!({"type": "text", "text": self.instruction}));
        json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.decoding.temperature,
            "top_p": self.decoding.top_p,
            "max_tokens": self.decoding.max_output_tokens,
            "stream": false,
        })
    }
}

/// Request for one problem: the prompt verbatim, plus its diagram unless the
/// text-only ablation is selected.
pub fn build_request(
    problem: &BenchmarkProblem,
    with_diagram: bool,
    decoding: DecodingConfig,
    model_id: &str,
    sample_index: u32,
) -> Result<ModelRequest, ClientError> {
    let images = if with_diagram {
        vec![ImagePayload::load(&problem.diagram.resolved)?]
    } else {
        Vec::new()
    };
    Ok(ModelRequest::new(model_id, problem.prompt.clone(), images, decoding, sample_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png() -> Vec<u8> {
        let mut v = b"\x89PNG\r\n\x1a\n".to_vec();
        v.extend_from_slice(b"rest-of-image");
        v
    }

    #[test]
    fn digest_covers_every_field() {
        let base = ModelRequest::new("m", "do it", vec![], DecodingConfig::greedy(), 0);
        let variants = [
            ModelRequest::new("m2", "do it", vec![], DecodingConfig::greedy(), 0),
            ModelRequest::new("m", "do it!", vec![], DecodingConfig::greedy(), 0),
            ModelRequest::new("m", "do it", vec![ImagePayload::from_bytes(png(), "a.png")], DecodingConfig::greedy(), 0),
            ModelRequest::new("m", "do it", vec![], DecodingConfig::thinking(), 0),
            ModelRequest::new("m", "do it", vec![], DecodingConfig::greedy(), 1),
        ];
        for v in &variants {
            assert_ne!(v.request_digest, base.request_digest);
        }
        let again = ModelRequest::new("m", "do it", vec![], DecodingConfig::greedy(), 0);
        assert_eq!(again.request_digest, base.request_digest);
    }

    #[test]
    fn image_precedes_text_in_wire_payload() {
        let req = ModelRequest::new("m", "hello", vec![ImagePayload::from_bytes(png(), "a.png")], DecodingConfig::greedy(), 0);
        let wire = req.to_wire();
        let content = wire["messages"][0]["content"].as_array().unwrap();
        assert_eq!(content.len(), 2);
        assert_eq!(content[0]["type"], "image_url");
        assert!(content[0]["image_url"]["url"].as_str().unwrap().starts_with("data:image/png;base64,"));
        assert_eq!(content[1]["text"], "hello");
        assert_eq!(wire["messages"].as_array().unwrap().len(), 1);
        assert_eq!(wire["max_tokens"], 2048);
        assert_eq!(wire["temperature"], 0.0);
    }

    #[test]
    fn text_only_payload_has_no_image_bytes() {
        let bytes = png();
        let encoded = base64::engine::general_purpose::STANDARD.encode(&bytes);
        let req = ModelRequest::new("m", "hello", vec![], DecodingConfig::greedy(), 0);
        let text = serde_json::to_string(&req.to_wire()).unwrap();
        assert!(!text.contains("image_url"));
        assert!(!text.contains("base64"));
        assert!(!text.contains(&encoded));
    }

    #[test]
    fn media_type_sniffed_before_extension() {
        assert_eq!(media_type(&png(), Path::new("x.jpg")), "image/png");
        assert_eq!(media_type(b"????", Path::new("x.JPG")), "image/jpeg");
        assert_eq!(media_type(b"????", Path::new("x")), "application/octet-stream");
    }
}
