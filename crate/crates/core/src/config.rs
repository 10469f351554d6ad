//! Hardware-shape and network configuration types, plus the compact
//! layer-list grammar used by config files.
//!
//! A network is described by a TOML document:
//!
//! ```toml
//! name = "cifar-net"
//! timesteps = 4
//! layers = "3x32x32-32c3-256c3-256c3-mp2-256c3-256c3-256c3-mp2-512c3-mp2-1024c3-ap-10"
//!
//! [sparsity]
//! kind = "bernoulli"
//! rate = 0.75
//! seed = 7
//! ```
//!
//! Layer-list tokens, separated by `-`:
//!
//! * `CxHxW` — input dimensions (channels, height, width); first token only.
//! * `<N>c<K>[s<S>][p<P>]` — conv with `N` output channels and `K`x`K`
//!   kernel; stride `S` (default 1) and padding `P` (default `K/2`).
//! * `mp<S>` — max pooling with size/stride `S` (pass-through rate adapter).
//! * `ap` — global average pooling to 1x1.
//! * `fc<N>` or a bare integer — fully-connected layer with `N` outputs.
//! * `attn(<heads>,<head_dim>)` — a binary-attention block; expands into
//!   the Q/K/V projection layers and registers an attention block whose
//!   sequence length is the feeding layer's spatial size.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Hardware parallelism tuple: spatial/temporal/channel lane counts, the
/// worker and decoder-lane split, baseline bank count, and the binary
/// engine's systolic dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParallelismConfig {
    pub p_ts: usize,
    pub p_fx: usize,
    pub p_ci: usize,
    pub p_co: usize,
    /// Workers per grid point.
    pub p_wo: usize,
    /// Decoder lanes per worker.
    pub m: usize,
    /// Bank count of the crossbar baseline (crossbar model only).
    pub b_m: usize,
    pub p_bm: usize,
    pub p_bn: usize,
    pub p_bk: usize,
    /// Accumulation lanes folded onto one DSP in the resource model.
    pub lanes_per_dsp: usize,
}

impl Default for ParallelismConfig {
    fn default() -> Self {
        Self {
            p_ts: 2,
            p_fx: 4,
            p_ci: 16,
            p_co: 64,
            p_wo: 2,
            m: 2,
            b_m: 8,
            p_bm: 4,
            p_bn: 4,
            p_bk: 16,
            lanes_per_dsp: 4,
        }
    }
}

impl ParallelismConfig {
    /// Per-grid-point throughput in spikes per cycle.
    pub fn g(&self) -> usize {
        self.p_wo * self.m
    }

    /// Grid points simulated in parallel.
    pub fn grid_points(&self) -> usize {
        self.p_ts * self.p_fx
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("p_ts", self.p_ts),
            ("p_fx", self.p_fx),
            ("p_ci", self.p_ci),
            ("p_co", self.p_co),
            ("p_wo", self.p_wo),
            ("m", self.m),
            ("b_m", self.b_m),
            ("p_bm", self.p_bm),
            ("p_bn", self.p_bn),
            ("p_bk", self.p_bk),
            ("lanes_per_dsp", self.lanes_per_dsp),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(SimError::Config(format!("{name} must be >= 1")));
            }
        }
        if self.p_ci % self.m != 0 {
            return Err(SimError::Config(format!(
                "p_ci ({}) must be a multiple of decoder lanes m ({})",
                self.p_ci, self.m
            )));
        }
        Ok(())
    }

    /// Returns a copy with a new worker/lane split, keeping everything else.
    pub fn with_workers(&self, p_wo: usize, m: usize) -> Self {
        Self {
            p_wo,
            m,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Linear,
    AttentionProj,
}

/// Shape of one compute layer as seen by the engines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub t_s: usize,
    pub f_h: usize,
    pub f_w: usize,
    pub c_i: usize,
    pub c_o: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub kind: LayerKind,
}

impl LayerShape {
    pub fn out_h(&self) -> usize {
        (self.f_h + 2 * self.padding - self.k_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.f_w + 2 * self.padding - self.k_w) / self.stride + 1
    }

    /// Kernel-window size in activation bits.
    pub fn window_bits(&self) -> usize {
        self.k_h * self.k_w * self.c_i
    }

    pub fn validate(&self, name: &str) -> Result<(), SimError> {
        if !matches!(self.stride, 1 | 2) {
            return Err(SimError::ShapeMismatch {
                layer: name.to_string(),
                msg: format!("stride must be 1 or 2, got {}", self.stride),
            });
        }
        for (dim, f, k) in [("height", self.f_h, self.k_h), ("width", self.f_w, self.k_w)] {
            let span = f + 2 * self.padding;
            if span < k || (span - k) % self.stride != 0 || (span - k) / self.stride + 1 == 0 {
                return Err(SimError::ShapeMismatch {
                    layer: name.to_string(),
                    msg: format!(
                        "output {dim} (({f} - {k} + 2*{})/{} + 1) is not a positive integer",
                        self.padding, self.stride
                    ),
                });
            }
        }
        Ok(())
    }
}

/// One attention block: head geometry, sequence length, and the two
/// binarization thresholds applied after the score and output matmuls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBlock {
    pub heads: usize,
    pub head_dim: usize,
    pub seq_len: usize,
    pub delta1: i64,
    pub delta2: i64,
    /// Index into `NetworkConfig::layers` of this block's Q projection.
    pub q_layer: usize,
}

/// A token of the compact layer-list grammar. Kept so a parsed network can
/// be serialized back to an equivalent string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerToken {
    Conv {
        c_o: usize,
        k: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        size: usize,
    },
    AvgPool,
    Fc {
        c_o: usize,
    },
    Attn {
        heads: usize,
        head_dim: usize,
    },
}

impl LayerToken {
    fn to_token_string(&self) -> String {
        match self {
            LayerToken::Conv {
                c_o,
                k,
                stride,
                padding,
            } => {
                let mut s = format!("{c_o}c{k}");
                if *stride != 1 {
                    s.push_str(&format!("s{stride}"));
                }
                if *padding != k / 2 {
                    s.push_str(&format!("p{padding}"));
                }
                s
            }
            LayerToken::MaxPool { size } => format!("mp{size}"),
            LayerToken::AvgPool => "ap".to_string(),
            LayerToken::Fc { c_o } => format!("fc{c_o}"),
            LayerToken::Attn { heads, head_dim } => format!("attn({heads},{head_dim})"),
        }
    }
}

/// A fully-resolved network: input dims, the token list, the derived
/// per-layer shapes, and the attention blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub name: String,
    pub timesteps: usize,
    pub input: (usize, usize, usize),
    pub tokens: Vec<LayerToken>,
    pub layers: Vec<LayerShape>,
    pub attention_blocks: Vec<AttentionBlock>,
}

impl NetworkConfig {
    /// Re-emits the layer-list string this network was parsed from.
    pub fn layer_list_string(&self) -> String {
        let (c, h, w) = self.input;
        let mut parts = vec![format!("{c}x{h}x{w}")];
        parts.extend(self.tokens.iter().map(|t| t.to_token_string()));
        parts.join("-")
    }

    /// Serializes back to a config document that re-parses to an equal network.
    pub fn to_config_string(&self) -> String {
        format!(
            "name = {:?}\ntimesteps = {}\nlayers = {:?}\n",
            self.name,
            self.timesteps,
            self.layer_list_string()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityKind {
    Bernoulli,
    PerLayerProfile,
}

/// Random sparsity model. `rate` is the probability that a bit is ZERO, so
/// generated bitmaps have expected density `1 - rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsityModel {
    pub kind: SparsityKind,
    pub rate: f64,
    /// Per-layer zero rates; used when `kind` is `per_layer_profile`.
    pub rates: Vec<f64>,
    pub seed: u64,
}

impl Default for SparsityModel {
    fn default() -> Self {
        Self {
            kind: SparsityKind::Bernoulli,
            rate: 0.75,
            rates: Vec::new(),
            seed: 1,
        }
    }
}

impl SparsityModel {
    pub fn bernoulli(rate: f64, seed: u64) -> Self {
        Self {
            kind: SparsityKind::Bernoulli,
            rate,
            rates: Vec::new(),
            seed,
        }
    }

    /// Zero rate for a given layer index.
    pub fn rate_for(&self, layer_index: usize) -> f64 {
        match self.kind {
            SparsityKind::Bernoulli => self.rate,
            SparsityKind::PerLayerProfile => {
                self.rates.get(layer_index).copied().unwrap_or(self.rate)
            }
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (i, &r) in std::iter::once(&self.rate).chain(&self.rates).enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(SimError::Config(format!(
                    "sparsity rate #{i} must be in [0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Attention threshold defaults applied when a config has no `[attention]` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionDefaults {
    pub delta1: i64,
    pub delta2: i64,
}

impl Default for AttentionDefaults {
    fn default() -> Self {
        Self {
            delta1: 1,
            delta2: 1,
        }
    }
}

/// Whole simulator config document: network plus sparsity and hardware shape.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub sparsity: SparsityModel,
    pub parallelism: ParallelismConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    timesteps: Option<usize>,
    layers: String,
    #[serde(default)]
    sparsity: SparsityModel,
    #[serde(default)]
    parallelism: ParallelismConfig,
    #[serde(default)]
    attention: AttentionDefaults,
}

/// Parses a structured config document into a fully-resolved network.
pub fn parse_network_config(text: &str) -> Result<NetworkConfig, SimError> {
    parse_sim_config(text).map(|c| c.network)
}

/// Parses a config document including sparsity and parallelism sections.
pub fn parse_sim_config(text: &str) -> Result<SimConfig, SimError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let timesteps = raw.timesteps.unwrap_or(1);
    if timesteps == 0 {
        return Err(SimError::Config("timesteps must be >= 1".into()));
    }
    raw.parallelism.validate()?;
    raw.sparsity.validate()?;
    let name = raw.name.unwrap_or_else(|| "unnamed".to_string());
    let network = parse_layer_list(&raw.layers, &name, timesteps, &raw.attention)
        .map_err(|e| offset_layer_error(text, &raw.layers, e))?;
    Ok(SimConfig {
        network,
        sparsity: raw.sparsity,
        parallelism: raw.parallelism,
    })
}

fn toml_error(text: &str, err: toml::de::Error) -> SimError {
    let (line, column) = err
        .span()
        .map(|s| offset_to_line_col(text, s.start))
        .unwrap_or((1, 1));
    SimError::Parse {
        line,
        column,
        msg: err.message().to_string(),
    }
}

fn offset_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(text.len());
    let before = &text[..clamped];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(1, |l| l.chars().count() + 1);
    (line, column)
}

/// Re-anchors a layer-string column to the full document, when possible.
fn offset_layer_error(doc: &str, layers: &str, err: SimError) -> SimError {
    match err {
        SimError::Parse { column, msg, .. } => {
            if let Some(value_at) = doc.find(layers) {
                let (line, base_col) = offset_to_line_col(doc, value_at);
                SimError::Parse {
                    line,
                    column: base_col + column - 1,
                    msg,
                }
            } else {
                SimError::Parse {
                    line: 1,
                    column,
                    msg,
                }
            }
        }
        other => other,
    }
}

/// Parses a bare layer-list string (no surrounding document).
pub fn parse_layer_list(
    list: &str,
    name: &str,
    timesteps: usize,
    att: &AttentionDefaults,
) -> Result<NetworkConfig, SimError> {
    let mut tokens_with_cols = Vec::new();
    let mut col = 1;
    for part in list.split('-') {
        tokens_with_cols.push((part, col));
        col += part.chars().count() + 1;
    }
    if tokens_with_cols.is_empty() {
        return Err(parse_err(1, "empty layer list"));
    }

    let (first, first_col) = tokens_with_cols[0];
    let input = parse_input_dims(first, first_col)?;
    let (mut c, mut h, mut w) = input;

    let mut tokens = Vec::new();
    let mut layers: Vec<LayerShape> = Vec::new();
    let mut attention_blocks = Vec::new();

    for &(tok, tok_col) in &tokens_with_cols[1..] {
        let token = parse_token(tok, tok_col)?;
        match token {
            LayerToken::Conv {
                c_o,
                k,
                stride,
                padding,
            } => {
                let layer = LayerShape {
                    t_s: timesteps,
                    f_h: h,
                    f_w: w,
                    c_i: c,
                    c_o,
                    k_h: k,
                    k_w: k,
                    stride,
                    padding,
                    kind: LayerKind::Conv,
                };
                layer.validate(tok)?;
                h = layer.out_h();
                w = layer.out_w();
                c = c_o;
                layers.push(layer);
            }
            LayerToken::MaxPool { size } => {
                if h % size != 0 || w % size != 0 {
                    return Err(SimError::ShapeMismatch {
                        layer: tok.to_string(),
                        msg: format!("pool size {size} does not divide spatial dims {h}x{w}"),
                    });
                }
                h /= size;
                w /= size;
            }
            LayerToken::AvgPool => {
                h = 1;
                w = 1;
            }
            LayerToken::Fc { c_o } => {
                // A bare classifier head flattens whatever is left.
                let c_in = c * h * w;
                let layer = LayerShape {
                    t_s: timesteps,
                    f_h: 1,
                    f_w: 1,
                    c_i: c_in,
                    c_o,
                    k_h: 1,
                    k_w: 1,
                    stride: 1,
                    padding: 0,
                    kind: LayerKind::Linear,
                };
                h = 1;
                w = 1;
                c = c_o;
                layers.push(layer);
            }
            LayerToken::Attn { heads, head_dim } => {
                if heads * head_dim != c {
                    return Err(SimError::ShapeMismatch {
                        layer: tok.to_string(),
                        msg: format!(
                            "attention heads*head_dim = {} but feeding layer has {} channels",
                            heads * head_dim,
                            c
                        ),
                    });
                }
                let q_layer = layers.len();
                for _ in 0..3 {
                    layers.push(LayerShape {
                        t_s: timesteps,
                        f_h: h,
                        f_w: w,
                        c_i: c,
                        c_o: c,
                        k_h: 1,
                        k_w: 1,
                        stride: 1,
                        padding: 0,
                        kind: LayerKind::AttentionProj,
                    });
                }
                attention_blocks.push(AttentionBlock {
                    heads,
                    head_dim,
                    seq_len: h * w,
                    delta1: att.delta1,
                    delta2: att.delta2,
                    q_layer,
                });
            }
        }
        tokens.push(token);
    }

    Ok(NetworkConfig {
        name: name.to_string(),
        timesteps,
        input,
        tokens,
        layers,
        attention_blocks,
    })
}

fn parse_err(column: usize, msg: impl Into<String>) -> SimError {
    SimError::Parse {
        line: 1,
        column,
        msg: msg.into(),
    }
}

fn parse_input_dims(tok: &str, col: usize) -> Result<(usize, usize, usize), SimError> {
    let dims: Vec<&str> = tok.split('x').collect();
    if dims.len() != 3 {
        return Err(parse_err(
            col,
            format!("expected input dims `CxHxW`, got `{tok}`"),
        ));
    }
    let mut out = [0usize; 3];
    for (i, d) in dims.iter().enumerate() {
        out[i] = d
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid input dim `{d}` in `{tok}`")))?;
    }
    Ok((out[0], out[1], out[2]))
}

fn parse_token(tok: &str, col: usize) -> Result<LayerToken, SimError> {
    if tok == "ap" {
        return Ok(LayerToken::AvgPool);
    }
    if let Some(rest) = tok.strip_prefix("mp") {
        let size = rest
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid pool size in `{tok}`")))?;
        return Ok(LayerToken::MaxPool { size });
    }
    if let Some(rest) = tok.strip_prefix("fc") {
        let c_o = rest
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid fc width in `{tok}`")))?;
        return Ok(LayerToken::Fc { c_o });
    }
    if let Some(rest) = tok.strip_prefix("attn(") {
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| parse_err(col, format!("unterminated `attn(` in `{tok}`")))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            return Err(parse_err(col, format!("expected `attn(heads,dim)`, got `{tok}`")));
        }
        let heads = parts[0]
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid head count in `{tok}`")))?;
        let head_dim = parts[1]
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid head dim in `{tok}`")))?;
        return Ok(LayerToken::Attn { heads, head_dim });
    }
    if let Ok(c_o) = tok.parse::<usize>() {
        if c_o == 0 {
            return Err(parse_err(col, "layer width must be positive"));
        }
        return Ok(LayerToken::Fc { c_o });
    }
    // `<N>c<K>[s<S>][p<P>]`
    if let Some(cpos) = tok.find('c') {
        let (n, rest) = tok.split_at(cpos);
        let c_o = n
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid channel count in `{tok}`")))?;
        let rest = &rest[1..];
        let (k_str, rest) = split_at_any(rest, &['s', 'p']);
        let k = k_str
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| parse_err(col, format!("invalid kernel size in `{tok}`")))?;
        let mut stride = 1;
        let mut padding = k / 2;
        let mut rem = rest;
        while !rem.is_empty() {
            let (which, body) = rem.split_at(1);
            let (num, next) = split_at_any(body, &['s', 'p']);
            let value = num
                .parse::<usize>()
                .ok()
                .ok_or_else(|| parse_err(col, format!("invalid `{which}` value in `{tok}`")))?;
            match which {
                "s" => stride = value,
                "p" => padding = value,
                _ => unreachable!(),
            }
            rem = next;
        }
        return Ok(LayerToken::Conv {
            c_o,
            k,
            stride,
            padding,
        });
    }
    Err(parse_err(col, format!("unknown layer token `{tok}`")))
}

fn split_at_any<'a>(s: &'a str, seps: &[char]) -> (&'a str, &'a str) {
    match s.find(|c| seps.contains(&c)) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}
