use std::ops::Range;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::features::{CON_FEATS, VAR_FEATS};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatConfig {
    pub hidden: usize,
    pub heads: usize,
    pub var_feats: usize,
    pub con_feats: usize,
}

impl Default for GatConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            heads: 2,
            var_feats: VAR_FEATS,
            con_feats: CON_FEATS,
        }
    }
}

impl GatConfig {
    pub fn with_hidden(hidden: usize, heads: usize) -> Self {
        Self {
            hidden,
            heads,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
    /// (rows, cols); vectors use cols = 1.
    pub shape: (usize, usize),
    pub fan_in: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct MlpOffsets {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PassOffsets {
    pub theta: usize,
    pub edge_w: usize,
    pub edge_b: usize,
    pub attn: usize,
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub var_emb: MlpOffsets,
    pub con_emb: MlpOffsets,
    pub con_pass: Vec<PassOffsets>,
    pub var_pass: Vec<PassOffsets>,
    pub out: MlpOffsets,
    pub segments: Vec<Segment>,
    pub len: usize,
}

struct Builder {
    segments: Vec<Segment>,
    at: usize,
}

impl Builder {
    fn push(&mut self, name: String, rows: usize, cols: usize, fan_in: usize) -> usize {
        let start = self.at;
        self.at += rows * cols;
        self.segments.push(Segment {
            name,
            range: start..self.at,
            shape: (rows, cols),
            fan_in,
        });
        start
    }

    fn mlp(&mut self, prefix: &str, d_in: usize, d_hidden: usize, d_out: usize) -> MlpOffsets {
        MlpOffsets {
            w1: self.push(format!("{prefix}.w1"), d_hidden, d_in, d_in),
            b1: self.push(format!("{prefix}.b1"), d_hidden, 1, d_in),
            w2: self.push(format!("{prefix}.w2"), d_out, d_hidden, d_hidden),
            b2: self.push(format!("{prefix}.b2"), d_out, 1, d_hidden),
        }
    }

    fn pass(&mut self, side: &str, head: usize, h: usize) -> PassOffsets {
        PassOffsets {
            theta: self.push(format!("{side}.{head}.theta"), h, h, h),
            edge_w: self.push(format!("{side}.{head}.edge_w"), h, 1, 1),
            edge_b: self.push(format!("{side}.{head}.edge_b"), h, 1, 1),
            attn: self.push(format!("{side}.{head}.attn"), 3 * h, 1, 3 * h),
        }
    }
}

impl Layout {
    pub fn new(cfg: &GatConfig) -> Self {
        let h = cfg.hidden;
        let k = cfg.heads;
        let mut b = Builder {
            segments: Vec::new(),
            at: 0,
        };
        let var_emb = b.mlp("var_emb", cfg.var_feats, h, h);
        let con_emb = b.mlp("con_emb", cfg.con_feats, h, h);
        let con_pass = (0..k).map(|i| b.pass("con_pass", i, h)).collect();
        let var_pass = (0..k).map(|i| b.pass("var_pass", i, h)).collect();
        let out = b.mlp("out", k * h, h, 1);
        Self {
            var_emb,
            con_emb,
            con_pass,
            var_pass,
            out,
            segments: b.segments,
            len: b.at,
        }
    }
}

/// All trainable tensors of the policy as one flat vector.
#[derive(Debug, Clone)]
pub struct GatParams {
    config: GatConfig,
    pub(crate) layout: Layout,
    data: Vec<f64>,
}

impl PartialEq for GatParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.data == other.data
    }
}

impl GatParams {
    pub fn zeros(config: GatConfig) -> Self {
        let layout = Layout::new(&config);
        let data = vec![0.0; layout.len];
        Self {
            config,
            layout,
            data,
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor.
    pub fn init(config: GatConfig, seed: u64) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = rng::rng_for(seed, rng::stream::INIT);
        for seg in &p.layout.segments {
            let bound = 1.0 / (seg.fan_in as f64).sqrt();
            for v in &mut p.data[seg.range.clone()] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn config(&self) -> &GatConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.layout.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.layout.segments.iter().find(|s| s.name == name)
    }

    pub fn flatten(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn unflatten(config: GatConfig, data: Vec<f64>) -> crate::Result<Self> {
        let layout = Layout::new(&config);
        if data.len() != layout.len {
            return Err(crate::Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.len,
                data.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            data,
        })
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.segment(name).map(|s| &self.data[s.range.clone()])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.segment(name)?.range.clone();
        Some(&mut self.data[r])
    }
}

/// Parameter count as a function of the architecture.
pub fn param_count(cfg: &GatConfig) -> usize {
    let h = cfg.hidden;
    let k = cfg.heads;
    let mlp = |i: usize, hid: usize, o: usize| hid * i + hid + o * hid + o;
    let pass = h * h + h + h + 3 * h;
    mlp(cfg.var_feats, h, h) + mlp(cfg.con_feats, h, h) + 2 * k * pass + mlp(k * h, h, 1)
}
