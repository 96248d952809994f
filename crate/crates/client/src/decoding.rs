use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodingMode {
    Greedy,
    Thinking,
    Custom,
}

/// Sampling parameters sent with every request. The named modes carry
/// fixed values; only `custom` is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDecoding")]
pub struct DecodingConfig {
    pub mode: DecodingMode,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecoding {
    mode: DecodingMode,
    temperature: Option<f64>,
    top_p: Option<f64>,
    max_output_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid decoding config: {0}")]
pub struct InvalidDecoding(pub String);

impl DecodingConfig {
    pub const fn greedy() -> Self {
        DecodingConfig {
            mode: DecodingMode::Greedy,
            temperature: 0.0,
            top_p: 1.0,
            max_output_tokens: 2048,
        }
    }

    pub const fn thinking() -> Self {
        DecodingConfig {
            mode: DecodingMode::Thinking,
            temperature: 0.6,
            top_p: 0.95,
            max_output_tokens: 4096,
        }
    }

    pub fn custom(temperature: f64, top_p: f64, max_output_tokens: u32) -> Result<Self, InvalidDecoding> {
        let c = DecodingConfig {
            mode: DecodingMode::Custom,
            temperature,
            top_p,
            max_output_tokens,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn for_mode(mode: DecodingMode) -> Option<Self> {
        match mode {
            DecodingMode::Greedy => Some(Self::greedy()),
            DecodingMode::Thinking => Some(Self::thinking()),
            DecodingMode::Custom => None,
        }
    }

    pub fn validate(&self) -> Result<(), InvalidDecoding> {
        if let Some(fixed) = Self::for_mode(self.mode) {
            if *self != fixed {
                return Err(InvalidDecoding(format!("{:?} mode has fixed parameters", self.mode)));
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(InvalidDecoding(format!("temperature {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(InvalidDecoding(format!("top_p {}", self.top_p)));
        }
        if self.max_output_tokens == 0 {
            return Err(InvalidDecoding("max_output_tokens = 0".into()));
        }
        Ok(())
    }
}

impl TryFrom<RawDecoding> for DecodingConfig {
    type Error = InvalidDecoding;

    fn try_from(raw: RawDecoding) -> Result<Self, Self::Error> {
        let config = match Self::for_mode(raw.mode) {
            Some(fixed) => DecodingConfig {
                mode: raw.mode,
                temperature: raw.temperature.unwrap_or(fixed.temperature),
                top_p: raw.top_p.unwrap_or(fixed.top_p),
                max_output_tokens: raw.max_output_tokens.unwrap_or(fixed.max_output_tokens),
            },
            None => DecodingConfig {
                mode: raw.mode,
                temperature: raw
                    .temperature
                    .ok_or_else(|| InvalidDecoding("custom mode needs temperature".into()))?,
                top_p: raw.top_p.unwrap_or(1.0),
                max_output_tokens: raw
                    .max_output_tokens
                    .ok_or_else(|| InvalidDecoding("custom mode needs max_output_tokens".into()))?,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_modes_have_fixed_parameters() {
        let g = DecodingConfig::greedy();
        assert_eq!((g.temperature, g.max_output_tokens), (0.0, 2048));
        let t = DecodingConfig::thinking();
        assert_eq!((t.temperature, t.top_p, t.max_output_tokens), (0.6, 0.95, 4096));
        g.validate().unwrap();
        t.validate().unwrap();
    }

    #[test]
    fn overriding_a_named_mode_is_rejected() {
        let bad = serde_json::from_str::<DecodingConfig>(r#"{"mode":"greedy","temperature":0.2}"#);
        assert!(bad.is_err());
        let ok: DecodingConfig = serde_json::from_str(r#"{"mode":"thinking"}"#).unwrap();
        assert_eq!(ok, DecodingConfig::thinking());
    }

    #[test]
    fn custom_is_validated() {
        assert!(DecodingConfig::custom(0.8, 0.9, 1024).is_ok());
        assert!(DecodingConfig::custom(-1.0, 0.9, 1024).is_err());
        assert!(DecodingConfig::custom(0.8, 0.0, 1024).is_err());
        assert!(DecodingConfig::custom(0.8, 0.9, 0).is_err());
        let c: DecodingConfig =
            serde_json::from_str(r#"{"mode":"custom","temperature":0.8,"max_output_tokens":512}"#).unwrap();
        assert_eq!(c.top_p, 1.0);
    }

    #[test]
    fn round_trips_through_json() {
        for c in [DecodingConfig::greedy(), DecodingConfig::thinking()] {
            let back: DecodingConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }
}
