//! Architecture configurations and the search spaces they are drawn from.
//!
//! Per-layer genes (`n_head`, `d_inner`) are always stored as explicit lists,
//! even for homogeneous spaces where every entry is the same value.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};

pub const GPT2_VOCAB: u32 = 50257;
pub const WORD_LEVEL_VOCAB: u32 = 267_735;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackboneTag {
    Gpt2,
    TransformerXl,
    OptStyle,
}

impl BackboneTag {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Gpt2" | "gpt2" | "GPT2" | "GPT-2" => Some(BackboneTag::Gpt2),
            "TransformerXl" | "transformer_xl" | "txl" => Some(BackboneTag::TransformerXl),
            "OptStyle" | "opt_style" | "opt" | "OPT" => Some(BackboneTag::OptStyle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BiasConvention {
    /// q/k/v/out projections carry biases (GPT-2, OPT).
    AttnBiased,
    /// Unbiased projections plus relative-position biases (Transformer-XL).
    AttnUnbiased,
}

/// Deserializes from the full struct or from a bare tag such as `"gpt2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BackboneRepr")]
pub struct Backbone {
    pub tag: BackboneTag,
    pub include_final_layernorm: bool,
    pub include_positional_embedding: bool,
    pub max_positions: u32,
    pub bias_convention: BiasConvention,
}

#[derive(Deserialize)]
struct BackboneFields {
    tag: BackboneTag,
    include_final_layernorm: bool,
    include_positional_embedding: bool,
    max_positions: u32,
    bias_convention: BiasConvention,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BackboneRepr {
    Tag(String),
    Full(BackboneFields),
}

impl TryFrom<BackboneRepr> for Backbone {
    type Error = String;

    fn try_from(r: BackboneRepr) -> std::result::Result<Self, String> {
        match r {
            BackboneRepr::Tag(s) => BackboneTag::parse(&s)
                .map(Backbone::from_tag)
                .ok_or_else(|| format!("unknown backbone {s:?}")),
            BackboneRepr::Full(f) => Ok(Backbone {
                tag: f.tag,
                include_final_layernorm: f.include_final_layernorm,
                include_positional_embedding: f.include_positional_embedding,
                max_positions: f.max_positions,
                bias_convention: f.bias_convention,
            }),
        }
    }
}

impl Backbone {
    pub fn gpt2() -> Self {
        Backbone {
            tag: BackboneTag::Gpt2,
            include_final_layernorm: true,
            include_positional_embedding: false,
            max_positions: 1024,
            bias_convention: BiasConvention::AttnBiased,
        }
    }

    pub fn transformer_xl() -> Self {
        Backbone {
            tag: BackboneTag::TransformerXl,
            include_final_layernorm: false,
            include_positional_embedding: false,
            max_positions: 1024,
            bias_convention: BiasConvention::AttnUnbiased,
        }
    }

    pub fn opt_style() -> Self {
        Backbone {
            tag: BackboneTag::OptStyle,
            include_final_layernorm: true,
            include_positional_embedding: true,
            max_positions: 2048,
            bias_convention: BiasConvention::AttnBiased,
        }
    }

    pub fn from_tag(tag: BackboneTag) -> Self {
        match tag {
            BackboneTag::Gpt2 => Self::gpt2(),
            BackboneTag::TransformerXl => Self::transformer_xl(),
            BackboneTag::OptStyle => Self::opt_style(),
        }
    }

    pub fn default_vocab_size(&self) -> u32 {
        match self.tag {
            BackboneTag::TransformerXl => WORD_LEVEL_VOCAB,
            BackboneTag::Gpt2 | BackboneTag::OptStyle => GPT2_VOCAB,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.include_positional_embedding && self.max_positions == 0 {
            return Err(NasError::InvalidConfig(
                "max_positions must be >= 1 when positional embeddings are enabled".into(),
            ));
        }
        Ok(())
    }
}

/// One candidate architecture.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "ArchConfigRepr")]
pub struct ArchConfig {
    pub backbone: Backbone,
    pub n_layer: u32,
    pub d_model: u32,
    pub d_embed: u32,
    pub k_factor: u32,
    pub n_head: Vec<u32>,
    pub d_inner: Vec<u32>,
    pub vocab_size: u32,
}

/// Input form: `d_embed`, `k_factor` and `vocab_size` may be omitted.
#[derive(Deserialize)]
struct ArchConfigRepr {
    backbone: Backbone,
    n_layer: u32,
    d_model: u32,
    d_embed: Option<u32>,
    k_factor: Option<u32>,
    n_head: Vec<u32>,
    d_inner: Vec<u32>,
    vocab_size: Option<u32>,
}

impl From<ArchConfigRepr> for ArchConfig {
    fn from(r: ArchConfigRepr) -> Self {
        ArchConfig {
            d_embed: r.d_embed.unwrap_or(r.d_model),
            k_factor: r.k_factor.unwrap_or(1),
            vocab_size: r.vocab_size.unwrap_or_else(|| r.backbone.default_vocab_size()),
            backbone: r.backbone,
            n_layer: r.n_layer,
            d_model: r.d_model,
            n_head: r.n_head,
            d_inner: r.d_inner,
        }
    }
}

impl ArchConfig {
    /// Builds a config whose layers all share one `(n_head, d_inner)` block.
    pub fn homogeneous(
        backbone: Backbone,
        n_layer: u32,
        d_model: u32,
        n_head: u32,
        d_inner: u32,
    ) -> Self {
        ArchConfig {
            backbone,
            n_layer,
            d_model,
            d_embed: d_model,
            k_factor: 1,
            n_head: vec![n_head; n_layer as usize],
            d_inner: vec![d_inner; n_layer as usize],
            vocab_size: backbone.default_vocab_size(),
        }
    }

    /// Builds a heterogeneous config; `n_layer` is taken from the list lengths.
    pub fn heterogeneous(
        backbone: Backbone,
        d_model: u32,
        n_head: Vec<u32>,
        d_inner: Vec<u32>,
    ) -> Self {
        ArchConfig {
            backbone,
            n_layer: n_head.len() as u32,
            d_model,
            d_embed: d_model,
            k_factor: 1,
            n_head,
            d_inner,
            vocab_size: backbone.default_vocab_size(),
        }
    }

    /// Structural checks needed for parameter counting: positive dimensions,
    /// consistent list lengths and head divisibility. The `d_inner` floor is a
    /// search-space rule and is reported by [`validate`] instead.
    pub fn check_structure(&self) -> Result<()> {
        self.backbone.check()?;
        if self.n_layer == 0
            || self.d_model == 0
            || self.d_embed == 0
            || self.k_factor == 0
            || self.vocab_size == 0
        {
            return Err(NasError::InvalidConfig(
                "dimensions must be positive".into(),
            ));
        }
        if self.n_head.len() != self.n_layer as usize || self.d_inner.len() != self.n_layer as usize
        {
            return Err(NasError::InvalidConfig(format!(
                "per-layer lists must have length n_layer={} (n_head: {}, d_inner: {})",
                self.n_layer,
                self.n_head.len(),
                self.d_inner.len()
            )));
        }
        if self.d_inner.contains(&0) {
            return Err(NasError::InvalidConfig(
                "d_inner entries must be positive".into(),
            ));
        }
        for &h in &self.n_head {
            if h == 0 || !self.d_model.is_multiple_of(h) {
                return Err(NasError::Divisibility {
                    d_model: self.d_model as u64,
                    n_head: h as u64,
                });
            }
        }
        Ok(())
    }

    pub fn is_homogeneous(&self) -> bool {
        self.n_head.windows(2).all(|w| w[0] == w[1])
            && self.d_inner.windows(2).all(|w| w[0] == w[1])
    }
}

/// Width-to-depth aspect ratio, `d_model / n_layer`, as a double.
pub fn aspect_ratio(config: &ArchConfig) -> f64 {
    config.d_model as f64 / config.n_layer as f64
}

/// Inclusive integer grid `{min, min+step, ..., <= max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: u32,
    pub max: u32,
    pub step: u32,
}

impl GridRange {
    pub const fn new(min: u32, max: u32, step: u32) -> Self {
        GridRange { min, max, step }
    }

    pub const fn point(v: u32) -> Self {
        GridRange {
            min: v,
            max: v,
            step: 1,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.step >= 1 && self.min <= self.max
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: u32) -> bool {
        v >= self.min && v <= self.max && (v - self.min).is_multiple_of(self.step)
    }

    pub fn values(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len()).map(move |j| self.min + j as u32 * self.step)
    }

    /// Smallest grid value `>= v`, if any.
    pub fn ceil(&self, v: u32) -> Option<u32> {
        if v <= self.min {
            return Some(self.min);
        }
        let j = (v - self.min).div_ceil(self.step);
        let out = self.min as u64 + j as u64 * self.step as u64;
        (out <= self.max as u64).then_some(out as u32)
    }

    fn sample_from(&self, lo: u32, rng: &mut impl Rng) -> Option<u32> {
        let start = self.ceil(lo)?;
        let n = (self.max - start) / self.step + 1;
        Some(start + rng.gen_range(0..n) * self.step)
    }
}

impl fmt::Display for GridRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},...,{}|{}}}", self.min, self.max, self.step)
    }
}

/// Legal ranges for every architectural gene.
///
/// An empty `d_embed_choices` ties `d_embed` to `d_model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    #[serde(default = "Backbone::gpt2")]
    pub backbone: Backbone,
    #[serde(default)]
    pub vocab_size: Option<u32>,
    pub n_layer_range: GridRange,
    pub d_model_range: GridRange,
    pub d_inner_range: GridRange,
    pub n_head_choices: Vec<u32>,
    #[serde(default)]
    pub d_embed_choices: Vec<u32>,
    #[serde(default = "default_k_choices")]
    pub k_choices: Vec<u32>,
    #[serde(default)]
    pub homogeneous: bool,
    #[serde(default)]
    pub fixed_k: Option<u32>,
}

fn default_k_choices() -> Vec<u32> {
    vec![1]
}

impl SearchSpace {
    /// The main heterogeneous space: n_layer {2..16|1}, d_model {128..1024|64},
    /// d_inner {256..4096|64}, n_head {2,4,8}, k {1,2,4}.
    pub fn standard(backbone: Backbone) -> Self {
        SearchSpace {
            backbone,
            vocab_size: None,
            n_layer_range: GridRange::new(2, 16, 1),
            d_model_range: GridRange::new(128, 1024, 64),
            d_inner_range: GridRange::new(256, 4096, 64),
            n_head_choices: vec![2, 4, 8],
            d_embed_choices: Vec::new(),
            k_choices: vec![1, 2, 4],
            homogeneous: false,
            fixed_k: None,
        }
    }

    /// Same ranges as [`SearchSpace::standard`] with adaptive-embedding widths
    /// {128, 256, 512} searched rather than tied to `d_model`.
    pub fn standard_with_embed_choices(backbone: Backbone) -> Self {
        SearchSpace {
            d_embed_choices: vec![128, 256, 512],
            ..Self::standard(backbone)
        }
    }

    /// OPT-350M-budget space with a plain (k = 1) embedding and d_embed = d_model.
    pub fn opt_range() -> Self {
        SearchSpace {
            backbone: Backbone::opt_style(),
            vocab_size: None,
            n_layer_range: GridRange::new(3, 29, 1),
            d_model_range: GridRange::new(512, 1472, 64),
            d_inner_range: GridRange::new(512, 6080, 64),
            n_head_choices: vec![2, 4, 8, 16],
            d_embed_choices: Vec::new(),
            k_choices: vec![1],
            homogeneous: false,
            fixed_k: Some(1),
        }
    }

    pub fn homogeneous(mut self) -> Self {
        self.homogeneous = true;
        self
    }

    pub fn vocab(&self) -> u32 {
        self.vocab_size
            .unwrap_or_else(|| self.backbone.default_vocab_size())
    }

    pub fn check(&self) -> Result<()> {
        for (name, r) in [
            ("n_layer_range", self.n_layer_range),
            ("d_model_range", self.d_model_range),
            ("d_inner_range", self.d_inner_range),
        ] {
            if !r.is_well_formed() {
                return Err(NasError::InvalidConfig(format!("{name} {r} is malformed")));
            }
        }
        if self.n_layer_range.min == 0 || self.d_model_range.min == 0 || self.d_inner_range.min == 0
        {
            return Err(NasError::InvalidConfig(
                "range minimums must be positive".into(),
            ));
        }
        if self.n_head_choices.is_empty() || self.n_head_choices.contains(&0) {
            return Err(NasError::InvalidConfig(
                "n_head_choices must be nonempty and positive".into(),
            ));
        }
        if self.d_embed_choices.contains(&0) {
            return Err(NasError::InvalidConfig(
                "d_embed_choices must be positive".into(),
            ));
        }
        if self.fixed_k.is_none() && (self.k_choices.is_empty() || self.k_choices.contains(&0)) {
            return Err(NasError::InvalidConfig(
                "k_choices must be nonempty and positive".into(),
            ));
        }
        if self.fixed_k == Some(0) {
            return Err(NasError::InvalidConfig("fixed_k must be positive".into()));
        }
        self.backbone.check()
    }

    /// Lowest legal `d_inner` for a given `d_model`.
    pub fn d_inner_floor(&self, d_model: u32) -> Option<u32> {
        self.d_inner_range
            .ceil(self.d_inner_range.min.max(2 * d_model))
    }

    pub fn head_choices_for(&self, d_model: u32) -> Vec<u32> {
        self.n_head_choices
            .iter()
            .copied()
            .filter(|&h| d_model.is_multiple_of(h))
            .collect()
    }

    /// Grid values of `d_model` admitting at least one head choice and a legal `d_inner`.
    pub fn feasible_d_models(&self) -> Vec<u32> {
        self.d_model_range
            .values()
            .filter(|&d| !self.head_choices_for(d).is_empty() && self.d_inner_floor(d).is_some())
            .collect()
    }

    pub(crate) fn feasibility(&self) -> Result<Vec<u32>> {
        self.check()?;
        if 2 * self.d_model_range.min as u64 > self.d_inner_range.max as u64 {
            return Err(NasError::EmptyFeasibleSet(format!(
                "2*d_model_min = {} exceeds d_inner_max = {}",
                2 * self.d_model_range.min,
                self.d_inner_range.max
            )));
        }
        let feasible = self.feasible_d_models();
        if feasible.is_empty() {
            return Err(NasError::EmptyFeasibleSet(
                "no n_head choice divides any d_model grid point".into(),
            ));
        }
        Ok(feasible)
    }

    pub(crate) fn sample_n_layer(&self, rng: &mut impl Rng) -> u32 {
        let r = self.n_layer_range;
        r.sample_from(r.min, rng).expect("well-formed range")
    }

    pub(crate) fn sample_head(&self, d_model: u32, rng: &mut impl Rng) -> u32 {
        *self
            .head_choices_for(d_model)
            .choose(rng)
            .expect("d_model drawn from feasible set")
    }

    pub(crate) fn sample_d_inner(&self, d_model: u32, rng: &mut impl Rng) -> u32 {
        let floor = self
            .d_inner_floor(d_model)
            .expect("d_model drawn from feasible set");
        self.d_inner_range
            .sample_from(floor, rng)
            .expect("floor lies on grid")
    }

    pub(crate) fn sample_d_embed(&self, d_model: u32, rng: &mut impl Rng) -> u32 {
        if self.d_embed_choices.is_empty() {
            d_model
        } else {
            *self.d_embed_choices.choose(rng).expect("nonempty")
        }
    }

    pub(crate) fn sample_k(&self, rng: &mut impl Rng) -> u32 {
        match self.fixed_k {
            Some(k) => k,
            None => *self.k_choices.choose(rng).expect("nonempty"),
        }
    }

    /// Draws one configuration, consuming randomness from `rng`.
    ///
    /// Genes are drawn in the fixed order n_layer, d_model, n_head[..],
    /// d_inner[..], d_embed, k.
    pub fn sample_with(&self, rng: &mut impl Rng) -> Result<ArchConfig> {
        let feasible = self.feasibility()?;
        Ok(self.sample_unchecked(&feasible, rng))
    }

    pub(crate) fn sample_unchecked(
        &self,
        feasible_d_models: &[u32],
        rng: &mut impl Rng,
    ) -> ArchConfig {
        let n_layer = self.sample_n_layer(rng);
        let d_model = *feasible_d_models
            .choose(rng)
            .expect("nonempty feasible set");
        let layers = n_layer as usize;
        let (n_head, d_inner) = if self.homogeneous {
            let h = self.sample_head(d_model, rng);
            let di = self.sample_d_inner(d_model, rng);
            (vec![h; layers], vec![di; layers])
        } else {
            let heads: Vec<u32> = (0..layers)
                .map(|_| self.sample_head(d_model, rng))
                .collect();
            let inner: Vec<u32> = (0..layers)
                .map(|_| self.sample_d_inner(d_model, rng))
                .collect();
            (heads, inner)
        };
        let d_embed = self.sample_d_embed(d_model, rng);
        let k_factor = self.sample_k(rng);
        ArchConfig {
            backbone: self.backbone,
            n_layer,
            d_model,
            d_embed,
            k_factor,
            n_head,
            d_inner,
            vocab_size: self.vocab(),
        }
    }
}

/// Samples one configuration; a pure function of `(space, seed)`.
pub fn sample(space: &SearchSpace, rng_seed: u64) -> Result<ArchConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    space.sample_with(&mut rng)
}

/// One failed rule, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Lists every rule `config` breaks with respect to `space`. Empty means valid.
pub fn validate(config: &ArchConfig, space: &SearchSpace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, message: String| out.push(Violation { field, message });

    if config.backbone != space.backbone {
        push(
            "backbone".into(),
            format!(
                "{:?} does not match the space backbone {:?}",
                config.backbone.tag, space.backbone.tag
            ),
        );
    }
    if config.backbone.include_positional_embedding && config.backbone.max_positions == 0 {
        push(
            "backbone.max_positions".into(),
            "must be >= 1 with positional embeddings".into(),
        );
    }
    if !space.n_layer_range.contains(config.n_layer) {
        push(
            "n_layer".into(),
            format!("{} is not on grid {}", config.n_layer, space.n_layer_range),
        );
    }
    if !space.d_model_range.contains(config.d_model) {
        push(
            "d_model".into(),
            format!("{} is not on grid {}", config.d_model, space.d_model_range),
        );
    }
    if config.vocab_size == 0 {
        push("vocab_size".into(), "must be positive".into());
    }
    if config.n_head.len() != config.n_layer as usize {
        push(
            "n_head".into(),
            format!(
                "length {} != n_layer {}",
                config.n_head.len(),
                config.n_layer
            ),
        );
    }
    if config.d_inner.len() != config.n_layer as usize {
        push(
            "d_inner".into(),
            format!(
                "length {} != n_layer {}",
                config.d_inner.len(),
                config.n_layer
            ),
        );
    }
    for (i, &h) in config.n_head.iter().enumerate() {
        if !space.n_head_choices.contains(&h) {
            push(
                format!("n_head[{i}]"),
                format!("{h} is not one of {:?}", space.n_head_choices),
            );
        }
        if h == 0 || !config.d_model.is_multiple_of(h) {
            push(
                format!("n_head[{i}]"),
                format!(
                    "divisibility: d_model {} is not divisible by {h}",
                    config.d_model
                ),
            );
        }
    }
    for (i, &d) in config.d_inner.iter().enumerate() {
        if !space.d_inner_range.contains(d) {
            push(
                format!("d_inner[{i}]"),
                format!("{d} is not on grid {}", space.d_inner_range),
            );
        }
        if (d as u64) < 2 * config.d_model as u64 {
            push(
                format!("d_inner[{i}]"),
                format!(
                    "lower bound: {d} < 2*d_model = {}",
                    2 * config.d_model as u64
                ),
            );
        }
    }
    if space.homogeneous && !config.is_homogeneous() {
        push(
            "n_head/d_inner".into(),
            "homogeneous space requires identical layers".into(),
        );
    }
    if space.d_embed_choices.is_empty() {
        if config.d_embed != config.d_model {
            push(
                "d_embed".into(),
                format!("{} must equal d_model {}", config.d_embed, config.d_model),
            );
        }
    } else if !space.d_embed_choices.contains(&config.d_embed) {
        push(
            "d_embed".into(),
            format!(
                "{} is not one of {:?}",
                config.d_embed, space.d_embed_choices
            ),
        );
    }
    match space.fixed_k {
        Some(k) if config.k_factor != k => push(
            "k_factor".into(),
            format!("{} != fixed_k {k}", config.k_factor),
        ),
        None if !space.k_choices.contains(&config.k_factor) => push(
            "k_factor".into(),
            format!("{} is not one of {:?}", config.k_factor, space.k_choices),
        ),
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_json_fills_defaults() {
        let c: ArchConfig = serde_json::from_str(
            r#"{"backbone":"txl","n_layer":2,"d_model":256,"n_head":[4,8],"d_inner":[512,1024]}"#,
        )
        .unwrap();
        assert_eq!((c.d_embed, c.k_factor, c.vocab_size), (256, 1, WORD_LEVEL_VOCAB));
        let back: ArchConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    fn collapsed() -> SearchSpace {
        SearchSpace {
            backbone: Backbone::gpt2(),
            vocab_size: None,
            n_layer_range: GridRange::point(2),
            d_model_range: GridRange::point(512),
            d_inner_range: GridRange::point(2048),
            n_head_choices: vec![8],
            d_embed_choices: vec![512],
            k_choices: vec![1],
            homogeneous: false,
            fixed_k: None,
        }
    }

    #[test]
    fn sample_satisfies_postconditions() {
        let space = SearchSpace::standard(Backbone::gpt2());
        for seed in 0..200 {
            let c = sample(&space, seed).unwrap();
            assert!((2..=16).contains(&c.n_layer));
            assert!(c.d_inner.iter().all(|&d| d >= 2 * c.d_model));
            assert!(
                validate(&c, &space).is_empty(),
                "{:?}",
                validate(&c, &space)
            );
        }
    }

    #[test]
    fn collapsed_space_yields_the_single_point() {
        let c = sample(&collapsed(), 99).unwrap();
        assert_eq!(c.n_layer, 2);
        assert_eq!(c.d_model, 512);
        assert_eq!(c.n_head, vec![8, 8]);
        assert_eq!(c.d_inner, vec![2048, 2048]);
        assert_eq!(c.d_embed, 512);
        assert_eq!(c.k_factor, 1);
    }

    #[test]
    fn d_model_marginal_covers_grid() {
        let space = SearchSpace::standard(Backbone::transformer_xl());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..10_000 {
            seen.insert(space.sample_with(&mut rng).unwrap().d_model);
        }
        let grid: std::collections::BTreeSet<u32> = (128..=1024).step_by(64).collect();
        assert_eq!(seen, grid);
    }

    #[test]
    fn empty_feasible_set_errors() {
        let mut space = collapsed();
        space.n_head_choices = vec![3];
        assert!(matches!(
            sample(&space, 0),
            Err(NasError::EmptyFeasibleSet(_))
        ));

        let mut space = collapsed();
        space.d_inner_range = GridRange::point(1000);
        assert!(matches!(
            sample(&space, 0),
            Err(NasError::EmptyFeasibleSet(_))
        ));
    }

    #[test]
    fn homogeneous_lists_are_constant() {
        let space = SearchSpace::standard(Backbone::gpt2()).homogeneous();
        for seed in 0..100 {
            let c = sample(&space, seed).unwrap();
            assert!(c.is_homogeneous());
            assert!(validate(&c, &space).is_empty());
        }
    }

    #[test]
    fn validate_reports_lower_bound() {
        let space = SearchSpace::standard(Backbone::gpt2());
        let mut c = sample(&space, 3).unwrap();
        c.d_inner[0] = c.d_model;
        let v = validate(&c, &space);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "d_inner[0]");
        assert!(v[0].message.contains("lower bound"));
    }

    #[test]
    fn validate_reports_divisibility() {
        let space = SearchSpace::standard(Backbone::gpt2());
        let c = ArchConfig {
            n_head: vec![2, 3],
            d_inner: vec![512, 512],
            ..ArchConfig::homogeneous(Backbone::gpt2(), 2, 256, 2, 512)
        };
        let v = validate(&c, &space);
        assert!(v
            .iter()
            .any(|x| x.field == "n_head[1]" && x.message.contains("divisibility")));
    }

    #[test]
    fn aspect_ratio_examples() {
        let wide = ArchConfig::homogeneous(Backbone::transformer_xl(), 3, 1024, 2, 2048);
        assert!((aspect_ratio(&wide) - 1024.0 / 3.0).abs() < 1e-12);
        assert!((aspect_ratio(&wide) - 341.333_333).abs() < 1e-5);
        let narrow = ArchConfig::homogeneous(Backbone::transformer_xl(), 35, 128, 2, 256);
        assert!((aspect_ratio(&narrow) - 3.657_142_857).abs() < 1e-8);
        let unit = ArchConfig::homogeneous(Backbone::gpt2(), 7, 7, 7, 14);
        assert_eq!(aspect_ratio(&unit), 1.0);
    }

    #[test]
    fn grid_ceil() {
        let g = GridRange::new(256, 4096, 64);
        assert_eq!(g.ceil(100), Some(256));
        assert_eq!(g.ceil(257), Some(320));
        assert_eq!(g.ceil(4096), Some(4096));
        assert_eq!(g.ceil(4097), None);
    }

    #[test]
    fn json_field_names() {
        let c = ArchConfig::homogeneous(Backbone::gpt2(), 2, 64, 2, 128);
        let v = serde_json::to_value(&c).unwrap();
        for key in [
            "backbone",
            "n_layer",
            "d_model",
            "d_embed",
            "k_factor",
            "n_head",
            "d_inner",
            "vocab_size",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["n_head"].is_array());
        let back: ArchConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
