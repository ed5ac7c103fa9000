//! Exact integer parameter accounting.
//!
//! Decoder parameters cover the stacked blocks (attention, FFN, per-block
//! LayerNorms) plus the final LayerNorm and learned positional table when the
//! backbone carries them. Embedding parameters cover the input embedding and
//! the softmax projection.

use serde::{Deserialize, Serialize};

use crate::arch::{ArchConfig, Backbone, BiasConvention};
use crate::error::{NasError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub per_layer: Vec<u64>,
    pub decoder_total: u64,
    pub embedding_total: u64,
    pub grand_total: u64,
}

/// Parameters in one decoder block.
///
/// Biased attention: q/k/v/out with biases `4(d^2 + d)`, FFN `2 d f + f + d`,
/// two LayerNorms `4 d`. Unbiased (relative) attention replaces the first term
/// with q/k/v/out/r projections `5 d^2` and the `r_w`/`r_r` bias vectors `2 d`.
pub fn count_layer(backbone: &Backbone, d_model: u32, n_head: u32, d_inner: u32) -> Result<u64> {
    if n_head == 0 || !d_model.is_multiple_of(n_head) {
        return Err(NasError::Divisibility {
            d_model: d_model as u64,
            n_head: n_head as u64,
        });
    }
    let d = d_model as u64;
    let f = d_inner as u64;
    let attention = match backbone.bias_convention {
        BiasConvention::AttnBiased => 4 * (d * d + d),
        BiasConvention::AttnUnbiased => 5 * d * d + 2 * d,
    };
    let ffn = 2 * d * f + f + d;
    let layernorms = 4 * d;
    Ok(attention + ffn + layernorms)
}

/// Decoder parameter count. Embedding fields are zero.
pub fn count_decoder(config: &ArchConfig) -> Result<ParamBreakdown> {
    config.check_structure()?;
    let per_layer = config
        .n_head
        .iter()
        .zip(&config.d_inner)
        .map(|(&h, &f)| count_layer(&config.backbone, config.d_model, h, f))
        .collect::<Result<Vec<_>>>()?;
    let d = config.d_model as u64;
    let mut decoder_total: u64 = per_layer.iter().sum();
    if config.backbone.include_final_layernorm {
        decoder_total += 2 * d;
    }
    if config.backbone.include_positional_embedding {
        decoder_total += config.backbone.max_positions as u64 * d;
    }
    Ok(ParamBreakdown {
        per_layer,
        decoder_total,
        embedding_total: 0,
        grand_total: decoder_total,
    })
}

/// Vocabulary-banded input embedding description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptiveEmbeddingSpec {
    pub cutoffs: Vec<u32>,
    pub d_embed: u32,
    pub k_factor: u32,
    pub tied_softmax: bool,
}

pub const DEFAULT_CUTOFFS: [u32; 2] = [20_000, 40_000];

impl AdaptiveEmbeddingSpec {
    /// Default spec for a config: a single band when `k = 1`, otherwise bands
    /// split at 20000 and 40000 (those below the vocabulary), tied softmax.
    pub fn for_config(config: &ArchConfig) -> Self {
        let cutoffs = if config.k_factor == 1 {
            vec![config.vocab_size]
        } else {
            DEFAULT_CUTOFFS
                .iter()
                .copied()
                .filter(|&c| c < config.vocab_size)
                .chain(std::iter::once(config.vocab_size))
                .collect()
        };
        AdaptiveEmbeddingSpec {
            cutoffs,
            d_embed: config.d_embed,
            k_factor: config.k_factor,
            tied_softmax: true,
        }
    }

    pub fn check(&self, vocab_size: u32) -> Result<()> {
        let Some(&last) = self.cutoffs.last() else {
            return Err(NasError::Cutoff("cutoffs are empty".into()));
        };
        if self.cutoffs[0] == 0 {
            return Err(NasError::Cutoff("first cutoff must be positive".into()));
        }
        if self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NasError::Cutoff(format!(
                "{:?} is not strictly increasing",
                self.cutoffs
            )));
        }
        if last != vocab_size {
            return Err(NasError::Cutoff(format!(
                "last cutoff {last} != vocab_size {vocab_size}"
            )));
        }
        if self.d_embed == 0 || self.k_factor == 0 {
            return Err(NasError::Cutoff(
                "d_embed and k_factor must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Embedding width of band `j`: `max(1, d_embed / k^j)`.
    pub fn band_width(&self, j: usize) -> u64 {
        let div = (self.k_factor as u64)
            .checked_pow(j as u32)
            .unwrap_or(u64::MAX);
        (self.d_embed as u64 / div).max(1)
    }

    /// `(band_size, width)` for each band.
    pub fn bands(&self) -> Vec<(u64, u64)> {
        let mut lo = 0u64;
        self.cutoffs
            .iter()
            .enumerate()
            .map(|(j, &hi)| {
                let size = hi as u64 - lo;
                lo = hi as u64;
                (size, self.band_width(j))
            })
            .collect()
    }
}

/// Input-embedding plus softmax parameters. A band whose width equals
/// `d_model` needs no projection. Untied softmax doubles the count.
pub fn count_embedding(config: &ArchConfig, spec: &AdaptiveEmbeddingSpec) -> Result<u64> {
    spec.check(config.vocab_size)?;
    let d = config.d_model as u64;
    let one_side: u64 = spec
        .bands()
        .into_iter()
        .map(|(size, width)| size * width + if width == d { 0 } else { width * d })
        .sum();
    Ok(if spec.tied_softmax {
        one_side
    } else {
        2 * one_side
    })
}

pub fn count_total(config: &ArchConfig, spec: &AdaptiveEmbeddingSpec) -> Result<ParamBreakdown> {
    let mut breakdown = count_decoder(config)?;
    breakdown.embedding_total = count_embedding(config, spec)?;
    breakdown.grand_total = breakdown.decoder_total + breakdown.embedding_total;
    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Term-by-term sum written out independently of `count_layer`.
    fn biased_oracle(d: u64, f: u64) -> u64 {
        let qkv = 3 * (d * d + d);
        let out = d * d + d;
        let fc1 = d * f + f;
        let fc2 = f * d + d;
        let ln = 2 * (2 * d);
        qkv + out + fc1 + fc2 + ln
    }

    fn unbiased_oracle(d: u64, f: u64) -> u64 {
        let qkv = 3 * d * d;
        let out = d * d;
        let r_net = d * d;
        let r_biases = 2 * d;
        let fc1 = d * f + f;
        let fc2 = f * d + d;
        let ln = 2 * (2 * d);
        qkv + out + r_net + r_biases + fc1 + fc2 + ln
    }

    #[test]
    fn layer_examples() {
        let gpt2 = Backbone::gpt2();
        let txl = Backbone::transformer_xl();
        assert_eq!(biased_oracle(960, 3968), 11_317_568);
        assert_eq!(count_layer(&gpt2, 960, 2, 3968).unwrap(), 11_317_568);
        assert_eq!(count_layer(&gpt2, 1, 1, 2).unwrap(), 19);
        assert_eq!(unbiased_oracle(512, 1216), 2_560_704);
        assert_eq!(count_layer(&txl, 512, 2, 1216).unwrap(), 2_560_704);
    }

    #[test]
    fn layer_divisibility_error() {
        assert!(matches!(
            count_layer(&Backbone::gpt2(), 256, 3, 512),
            Err(NasError::Divisibility {
                d_model: 256,
                n_head: 3
            })
        ));
    }

    #[test]
    fn decoder_anchor_rows() {
        let opt = ArchConfig::homogeneous(Backbone::opt_style(), 24, 1024, 16, 4096);
        assert_eq!(count_decoder(&opt).unwrap().decoder_total, 304_408_576);
        let opt_m1 = ArchConfig::homogeneous(Backbone::opt_style(), 26, 1024, 16, 2816);
        assert_eq!(count_decoder(&opt_m1).unwrap().decoder_total, 261_410_304);
        let gpt = ArchConfig::heterogeneous(Backbone::gpt2(), 960, vec![2, 2], vec![3968, 3584]);
        assert_eq!(count_decoder(&gpt).unwrap().decoder_total, 21_899_392);
        let txl = ArchConfig::heterogeneous(
            Backbone::transformer_xl(),
            512,
            vec![2, 2],
            vec![1216, 1280],
        );
        assert_eq!(count_decoder(&txl).unwrap().decoder_total, 5_187_008);
        let txl9 = ArchConfig::heterogeneous(
            Backbone::transformer_xl(),
            960,
            vec![2, 2],
            vec![3904, 3968],
        );
        assert_eq!(count_decoder(&txl9).unwrap().decoder_total, 24_351_552);
    }

    #[test]
    fn embedding_single_band() {
        let c = ArchConfig::homogeneous(Backbone::opt_style(), 2, 1024, 16, 4096);
        let spec = AdaptiveEmbeddingSpec::for_config(&c);
        assert_eq!(spec.cutoffs, vec![50257]);
        assert_eq!(count_embedding(&c, &spec).unwrap(), 51_463_168);
        let untied = AdaptiveEmbeddingSpec {
            tied_softmax: false,
            ..spec
        };
        assert_eq!(count_embedding(&c, &untied).unwrap(), 2 * 51_463_168);
    }

    #[test]
    fn embedding_adaptive_bands() {
        let mut c = ArchConfig::homogeneous(Backbone::transformer_xl(), 2, 512, 2, 1024);
        c.k_factor = 4;
        c.d_embed = 512;
        let spec = AdaptiveEmbeddingSpec {
            cutoffs: vec![20000, 40000, 267_735],
            d_embed: 512,
            k_factor: 4,
            tied_softmax: true,
        };
        // Band oracle: widths 512/128/32, projection skipped where width == d_model.
        let expected = 20000 * 512 + (20000 * 128 + 128 * 512) + (227_735 * 32 + 32 * 512);
        assert_eq!(expected, 20_169_440);
        assert_eq!(count_embedding(&c, &spec).unwrap(), expected);
        assert_eq!(AdaptiveEmbeddingSpec::for_config(&c), spec);
    }

    #[test]
    fn embedding_cutoff_errors() {
        let c = ArchConfig::homogeneous(Backbone::gpt2(), 2, 64, 2, 128);
        let bad = |cutoffs: Vec<u32>| AdaptiveEmbeddingSpec {
            cutoffs,
            d_embed: 64,
            k_factor: 2,
            tied_softmax: true,
        };
        for cutoffs in [
            vec![],
            vec![0, 50257],
            vec![30000, 20000, 50257],
            vec![20000, 40000],
        ] {
            assert!(matches!(
                count_embedding(&c, &bad(cutoffs)),
                Err(NasError::Cutoff(_))
            ));
        }
    }

    #[test]
    fn total_identity_and_k_independence() {
        let mut a = ArchConfig::heterogeneous(
            Backbone::transformer_xl(),
            512,
            vec![2, 8],
            vec![1216, 2048],
        );
        let ta = count_total(&a, &AdaptiveEmbeddingSpec::for_config(&a)).unwrap();
        assert_eq!(ta.grand_total - ta.embedding_total, ta.decoder_total);
        a.k_factor = 4;
        let tb = count_total(&a, &AdaptiveEmbeddingSpec::for_config(&a)).unwrap();
        assert_eq!(ta.decoder_total, tb.decoder_total);
        assert_ne!(ta.grand_total, tb.grand_total);
    }

    #[test]
    fn unit_config_total_by_hand() {
        let mut c = ArchConfig::homogeneous(Backbone::gpt2(), 1, 1, 1, 2);
        c.vocab_size = 10;
        let t = count_total(&c, &AdaptiveEmbeddingSpec::for_config(&c)).unwrap();
        // 19 per layer + final LN 2; embedding 10 x 1 with no projection.
        assert_eq!(t.decoder_total, 21);
        assert_eq!(t.embedding_total, 10);
        assert_eq!(t.grand_total, 31);
    }
}
