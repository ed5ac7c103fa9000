//! Architecture-quality proxies. Every score is oriented "higher is better".

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::error::{NasError, Result};
use crate::params::{count_decoder, count_total, AdaptiveEmbeddingSpec};
use crate::plugin::PluginCommand;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyScore {
    pub value: f64,
    pub cost_flops: u64,
    pub proxy_name: String,
}

pub trait Proxy: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, config: &ArchConfig) -> Result<ProxyScore>;

    /// Whether concurrent calls are safe and cheap.
    fn parallel_safe(&self) -> bool {
        true
    }
}

/// Decoder parameter count; zero compute.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecoderParams;

impl Proxy for DecoderParams {
    fn name(&self) -> &str {
        "decoder_params"
    }

    fn score(&self, config: &ArchConfig) -> Result<ProxyScore> {
        score_decoder_params(config)
    }
}

/// Total (decoder + embedding) parameter count.
///
/// With no explicit spec the default adaptive-embedding layout for each
/// config is used.
#[derive(Debug, Clone, Default)]
pub struct TotalParams {
    pub spec: Option<AdaptiveEmbeddingSpec>,
}

impl Proxy for TotalParams {
    fn name(&self) -> &str {
        "total_params"
    }

    fn score(&self, config: &ArchConfig) -> Result<ProxyScore> {
        let spec = self
            .spec
            .clone()
            .unwrap_or_else(|| AdaptiveEmbeddingSpec::for_config(config));
        score_total_params(config, &spec)
    }
}

/// A proxy computed by an external command.
#[derive(Debug, Clone)]
pub struct ExternalProxy {
    pub name: String,
    pub command: PluginCommand,
    /// Processes allowed at once when evaluating a batch.
    pub max_parallel: usize,
}

impl ExternalProxy {
    pub fn new(command: PluginCommand) -> Self {
        ExternalProxy {
            name: format!("plugin:{}", command.program),
            command,
            max_parallel: 1,
        }
    }
}

impl Proxy for ExternalProxy {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, config: &ArchConfig) -> Result<ProxyScore> {
        let mut s = score_external(config, &self.command)?;
        s.proxy_name = self.name.clone();
        Ok(s)
    }

    fn parallel_safe(&self) -> bool {
        self.max_parallel > 1
    }
}

pub fn score_decoder_params(config: &ArchConfig) -> Result<ProxyScore> {
    let b = count_decoder(config)?;
    Ok(ProxyScore {
        value: b.decoder_total as f64,
        cost_flops: 0,
        proxy_name: "decoder_params".into(),
    })
}

pub fn score_total_params(config: &ArchConfig, spec: &AdaptiveEmbeddingSpec) -> Result<ProxyScore> {
    let b = count_total(config, spec)?;
    Ok(ProxyScore {
        value: b.grand_total as f64,
        cost_flops: 0,
        proxy_name: "total_params".into(),
    })
}

#[derive(Debug, Deserialize)]
struct PluginReply {
    value: f64,
    cost_flops: u64,
}

pub fn score_external(config: &ArchConfig, plugin: &PluginCommand) -> Result<ProxyScore> {
    let reply: PluginReply = plugin.call(config, &[]).map_err(NasError::PluginFailure)?;
    if !reply.value.is_finite() {
        return Err(NasError::PluginFailure(format!(
            "non-finite score {}",
            reply.value
        )));
    }
    Ok(ProxyScore {
        value: reply.value,
        cost_flops: reply.cost_flops,
        proxy_name: format!("plugin:{}", plugin.program),
    })
}

/// Resolves a built-in proxy by name.
pub fn builtin(name: &str) -> Option<Box<dyn Proxy>> {
    match name {
        "decoder_params" | "decoder" => Some(Box::new(DecoderParams)),
        "total_params" | "total" => Some(Box::new(TotalParams::default())),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Backbone;

    #[test]
    fn decoder_proxy_is_free_and_exact() {
        let c = ArchConfig::homogeneous(Backbone::opt_style(), 24, 1024, 16, 4096);
        let s = DecoderParams.score(&c).unwrap();
        assert_eq!(s.value, 304_408_576.0);
        assert_eq!(s.cost_flops, 0);
    }

    #[test]
    fn n_head_does_not_change_score() {
        let a = ArchConfig::homogeneous(Backbone::gpt2(), 4, 512, 2, 2048);
        let b = ArchConfig::homogeneous(Backbone::gpt2(), 4, 512, 8, 2048);
        assert_eq!(
            DecoderParams.score(&a).unwrap().value,
            DecoderParams.score(&b).unwrap().value
        );
    }

    #[test]
    fn extra_layer_scores_higher() {
        let a = ArchConfig::homogeneous(Backbone::transformer_xl(), 3, 256, 2, 1024);
        let b = ArchConfig::homogeneous(Backbone::transformer_xl(), 4, 256, 2, 1024);
        assert!(DecoderParams.score(&b).unwrap().value > DecoderParams.score(&a).unwrap().value);
    }

    #[test]
    fn total_proxy_matches_count_total() {
        let c = ArchConfig::homogeneous(Backbone::gpt2(), 2, 1024, 16, 4096);
        let s = TotalParams::default().score(&c).unwrap();
        let d = DecoderParams.score(&c).unwrap();
        assert_eq!(s.value - d.value, 50257.0 * 1024.0);
    }

    #[cfg(unix)]
    #[test]
    fn external_pass_through_and_failure() {
        let c = ArchConfig::homogeneous(Backbone::gpt2(), 2, 64, 2, 128);
        let ok = PluginCommand::new(
            "sh",
            [
                "-c",
                "cat >/dev/null; echo '{\"value\":1.0,\"cost_flops\":5}'",
            ],
        );
        let s = score_external(&c, &ok).unwrap();
        assert_eq!((s.value, s.cost_flops), (1.0, 5));
        let bad = PluginCommand::new("sh", ["-c", "cat >/dev/null; exit 1"]);
        assert!(matches!(
            score_external(&c, &bad),
            Err(NasError::PluginFailure(_))
        ));
    }
}
