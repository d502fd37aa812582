//! The two-branch feature head: a mask module that gates spatial pooling of
//! the person feature map, plain average pooling of the clothes map, and a
//! linear fusion layer with L2 normalization on top.
//!
//! Forward produces the biometric feature
//! `f^B_k = (1/(H*W)) * sum_{i,j} A[i,j,k] * M[i,j]` where the mask `M` is a
//! channel-wise max over per-channel spatial softmaxes of a three-layer 1x1
//! convolution stack. The fused feature is
//! `f = normalize(W [f^B; f^C] + b)`. Backward passes are hand-derived and
//! checked against central finite differences.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::StageRng;
use crate::tensor::{avg_pool, l2_normalize, Embedding, FeatureMap};

/// A dense affine map, weight stored in-major: `out_j = b_j + sum_i x_i W[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    in_dim: usize,
    out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape(format!(
                "linear layer {in_dim}->{out_dim}: weight len {} bias len {}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self { in_dim, out_dim, weight, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weight: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut StageRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias = (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { in_dim, out_dim, weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.weight[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    /// Accumulates parameter gradients for one sample and returns the input
    /// gradient: `gx_i = sum_j W[i,j] * gout_j`.
    fn backward(&self, x: &[f64], gout: &[f64], grad: &mut LinearLayer, gx: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate() {
            let wrow = &self.weight[i * self.out_dim..(i + 1) * self.out_dim];
            let grow = &mut grad.weight[i * self.out_dim..(i + 1) * self.out_dim];
            let mut acc = 0.0;
            for j in 0..self.out_dim {
                grow[j] += xi * gout[j];
                acc += wrow[j] * gout[j];
            }
            gx[i] = acc;
        }
        for (gb, g) in grad.bias.iter_mut().zip(gout) {
            *gb += g;
        }
    }
}

/// Parameters of the mask module: three 1x1 convolutions realized as
/// per-location linear maps `D -> h1 -> h2 -> n`, rectifiers after the first
/// two.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskParams {
    pub layer1: LinearLayer,
    pub layer2: LinearLayer,
    pub layer3: LinearLayer,
}

impl MaskParams {
    pub fn new(layer1: LinearLayer, layer2: LinearLayer, layer3: LinearLayer) -> Result<Self> {
        if layer1.out_dim != layer2.in_dim || layer2.out_dim != layer3.in_dim {
            return Err(Error::shape(format!(
                "mask layers not chain-compatible: {}->{} / {}->{} / {}->{}",
                layer1.in_dim,
                layer1.out_dim,
                layer2.in_dim,
                layer2.out_dim,
                layer3.in_dim,
                layer3.out_dim
            )));
        }
        Ok(Self { layer1, layer2, layer3 })
    }

    /// Default widths for a given input depth: n = 8 reduced channels,
    /// hidden widths max(D/4, n).
    pub fn default_widths(depth: usize) -> (usize, usize, usize) {
        let n = 8;
        let h = (depth / 4).max(n);
        (n, h, h)
    }

    pub fn init(depth: usize, n: usize, h1: usize, h2: usize, rng: &mut StageRng) -> Self {
        Self {
            layer1: LinearLayer::init(depth, h1, rng),
            layer2: LinearLayer::init(h1, h2, rng),
            layer3: LinearLayer::init(h2, n, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layer1: LinearLayer::zeros(self.layer1.in_dim, self.layer1.out_dim),
            layer2: LinearLayer::zeros(self.layer2.in_dim, self.layer2.out_dim),
            layer3: LinearLayer::zeros(self.layer3.in_dim, self.layer3.out_dim),
        }
    }

    /// Input feature depth D.
    pub fn depth(&self) -> usize {
        self.layer1.in_dim
    }

    /// Number of reduced channels n.
    pub fn channels(&self) -> usize {
        self.layer3.out_dim
    }
}

/// Spatial attention mask, every entry in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Mask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Fusion layer: `f = normalize(W [f^B; f^C] + b)` with `W` of shape
/// `d x (D_b + D_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// Row-major `d x in_dim` matrix.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl FusionParams {
    pub fn new(out_dim: usize, in_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if out_dim == 0 {
            return Err(Error::shape("fusion output dim must be >= 1"));
        }
        if weight.len() != out_dim * in_dim || bias.len() != out_dim {
            return Err(Error::shape(format!(
                "fusion params {out_dim}x{in_dim}: weight len {} bias len {}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    pub fn init(out_dim: usize, in_dim: usize, rng: &mut StageRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = (0..out_dim * in_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias = (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self { weight, bias: vec![0.0; dim], in_dim: dim, out_dim: dim }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.out_dim * self.in_dim],
            bias: vec![0.0; self.out_dim],
            in_dim: self.in_dim,
            out_dim: self.out_dim,
        }
    }
}

/// Intermediates retained by [`mask_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MaskCache {
    input: FeatureMap,
    /// Pre- and post-rectifier activations per location, locations-major.
    z1_pre: Vec<f64>,
    z1: Vec<f64>,
    z2_pre: Vec<f64>,
    z2: Vec<f64>,
    /// Per-channel spatial softmax values, `locations x n`.
    softmax: Vec<f64>,
    /// Channel attaining the max at each location (lowest index on ties).
    argmax: Vec<usize>,
    mask: Mask,
}

/// Intermediates retained by [`fuse`] for the backward pass.
#[derive(Debug, Clone)]
pub struct FuseCache {
    concat: Vec<f64>,
    norm: f64,
    fused: Vec<f64>,
}

/// Everything the combined forward pass retains for [`head_backward`].
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub mask_cache: MaskCache,
    clothes_shape: (usize, usize, usize),
    fuse_cache: FuseCache,
}

/// Forward output of the full head on one sample.
#[derive(Debug, Clone)]
pub struct HeadOutput {
    pub mask: Mask,
    pub biometric: Embedding,
    pub clothes: Embedding,
    pub fused: Embedding,
}

/// Gradients with the same shapes as the head parameters and its inputs.
#[derive(Debug, Clone)]
pub struct HeadGradients {
    pub mask: MaskParams,
    pub fusion: FusionParams,
    pub input_person: FeatureMap,
    pub input_clothes: FeatureMap,
}

/// Runs the mask module over a person feature map.
///
/// Returns the mask, the pooled biometric feature and the cache for the
/// backward pass. Each reduced channel is softmax-normalized over all `H*W`
/// locations; the mask is the channel-wise max of those normalized maps.
pub fn mask_forward(
    input: &FeatureMap,
    params: &MaskParams,
) -> Result<(Mask, Embedding, MaskCache)> {
    if input.depth() != params.depth() {
        return Err(Error::shape(format!(
            "mask module expects depth {}, feature map has {}",
            params.depth(),
            input.depth()
        )));
    }
    let locations = input.locations();
    let (h1, h2, n) = (
        params.layer1.out_dim(),
        params.layer2.out_dim(),
        params.layer3.out_dim(),
    );

    let mut z1_pre = vec![0.0; locations * h1];
    let mut z1 = vec![0.0; locations * h1];
    let mut z2_pre = vec![0.0; locations * h2];
    let mut z2 = vec![0.0; locations * h2];
    let mut logits = vec![0.0; locations * n];

    for loc in 0..locations {
        let (row, col) = (loc / input.width(), loc % input.width());
        let x = input.at(row, col);
        let a_pre = &mut z1_pre[loc * h1..(loc + 1) * h1];
        params.layer1.forward(x, a_pre);
        let a = &mut z1[loc * h1..(loc + 1) * h1];
        for (dst, src) in a.iter_mut().zip(a_pre.iter()) {
            *dst = src.max(0.0);
        }
        let b_pre = &mut z2_pre[loc * h2..(loc + 1) * h2];
        params.layer2.forward(&z1[loc * h1..(loc + 1) * h1], b_pre);
        let b = &mut z2[loc * h2..(loc + 1) * h2];
        for (dst, src) in b.iter_mut().zip(b_pre.iter()) {
            *dst = src.max(0.0);
        }
        params
            .layer3
            .forward(&z2[loc * h2..(loc + 1) * h2], &mut logits[loc * n..(loc + 1) * n]);
    }

    // per-channel softmax across all spatial locations
    let mut softmax = vec![0.0; locations * n];
    for c in 0..n {
        let mut max = f64::NEG_INFINITY;
        for loc in 0..locations {
            max = max.max(logits[loc * n + c]);
        }
        let mut denom = 0.0;
        for loc in 0..locations {
            let e = (logits[loc * n + c] - max).exp();
            softmax[loc * n + c] = e;
            denom += e;
        }
        for loc in 0..locations {
            softmax[loc * n + c] /= denom;
        }
    }

    // channel-wise max pooling, lowest channel wins on ties
    let mut mask_values = vec![0.0; locations];
    let mut argmax = vec![0usize; locations];
    for loc in 0..locations {
        let mut best = softmax[loc * n];
        let mut best_c = 0;
        for c in 1..n {
            let v = softmax[loc * n + c];
            if v > best {
                best = v;
                best_c = c;
            }
        }
        mask_values[loc] = best;
        argmax[loc] = best_c;
    }
    let mask = Mask { height: input.height(), width: input.width(), values: mask_values };

    // Eq.-1 pooling of the gated map
    let scale = 1.0 / locations as f64;
    let mut biometric = vec![0.0; input.depth()];
    for loc in 0..locations {
        let (row, col) = (loc / input.width(), loc % input.width());
        let gate = mask.values[loc];
        for (acc, v) in biometric.iter_mut().zip(input.at(row, col)) {
            *acc += v * gate;
        }
    }
    for v in &mut biometric {
        *v *= scale;
    }

    let cache = MaskCache {
        input: input.clone(),
        z1_pre,
        z1,
        z2_pre,
        z2,
        softmax,
        argmax,
        mask: mask.clone(),
    };
    Ok((mask, Embedding::new(biometric)?, cache))
}

/// Linear fusion of the two branch features followed by L2 normalization.
pub fn fuse(
    biometric: &Embedding,
    clothes: &Embedding,
    params: &FusionParams,
) -> Result<(Embedding, FuseCache)> {
    if biometric.dim() + clothes.dim() != params.in_dim {
        return Err(Error::shape(format!(
            "fusion expects concat dim {}, got {} + {}",
            params.in_dim,
            biometric.dim(),
            clothes.dim()
        )));
    }
    let mut concat = Vec::with_capacity(params.in_dim);
    concat.extend_from_slice(biometric.values());
    concat.extend_from_slice(clothes.values());

    let mut pre = params.bias.clone();
    for (r, out) in pre.iter_mut().enumerate() {
        let row = &params.weight[r * params.in_dim..(r + 1) * params.in_dim];
        *out += row.iter().zip(&concat).map(|(w, z)| w * z).sum::<f64>();
    }
    let pre_embedding = Embedding::new(pre.clone())?;
    let fused = l2_normalize(&pre_embedding)?;
    let norm = pre_embedding.norm();
    let cache = FuseCache { concat, norm, fused: fused.values().to_vec() };
    Ok((fused, cache))
}

/// Full head forward: mask-gated pooling on the person map, average pooling
/// on the clothes map, fusion, normalization.
pub fn head_forward(
    person: &FeatureMap,
    clothes: &FeatureMap,
    mask_params: &MaskParams,
    fusion_params: &FusionParams,
) -> Result<(HeadOutput, HeadCache)> {
    let (mask, biometric, mask_cache) = mask_forward(person, mask_params)?;
    let clothes_feature = avg_pool(clothes);
    let (fused, fuse_cache) = fuse(&biometric, &clothes_feature, fusion_params)?;
    let output = HeadOutput { mask, biometric, clothes: clothes_feature, fused };
    let cache = HeadCache {
        mask_cache,
        clothes_shape: (clothes.height(), clothes.width(), clothes.depth()),
        fuse_cache,
    };
    Ok((output, cache))
}

/// Backward through the whole head given the loss gradient w.r.t. the fused
/// feature. See [`head_backward_with_aux`] for the variant used in training,
/// which also injects a direct gradient on `f^B`.
pub fn head_backward(
    upstream: &Embedding,
    cache: &HeadCache,
    mask_params: &MaskParams,
    fusion_params: &FusionParams,
) -> Result<HeadGradients> {
    let zero = Embedding::zeros(mask_params.depth());
    head_backward_with_aux(upstream, &zero, cache, mask_params, fusion_params)
}

/// Backward pass with an extra direct gradient on the biometric feature
/// (the auxiliary identification loss attaches there, bypassing fusion).
pub fn head_backward_with_aux(
    upstream: &Embedding,
    aux_biometric_grad: &Embedding,
    cache: &HeadCache,
    mask_params: &MaskParams,
    fusion_params: &FusionParams,
) -> Result<HeadGradients> {
    let depth = mask_params.depth();
    let locations = cache.mask_cache.input.locations();
    let clothes_dim = fusion_params.in_dim() - depth;
    if cache.fuse_cache.concat.len() != fusion_params.in_dim() {
        return Err(Error::StaleCache {
            context: format!(
                "cache concat dim {} vs fusion in dim {}",
                cache.fuse_cache.concat.len(),
                fusion_params.in_dim()
            ),
        });
    }
    if cache.mask_cache.input.depth() != depth
        || cache.mask_cache.z1.len() != locations * mask_params.layer1.out_dim()
    {
        return Err(Error::StaleCache {
            context: "mask cache shapes disagree with parameters".into(),
        });
    }
    if upstream.dim() != fusion_params.out_dim() || aux_biometric_grad.dim() != depth {
        return Err(Error::StaleCache {
            context: format!(
                "upstream dims {}/{} vs head dims {}/{}",
                upstream.dim(),
                aux_biometric_grad.dim(),
                fusion_params.out_dim(),
                depth
            ),
        });
    }

    // normalization: du = (g - f (g . f)) / norm
    let f = &cache.fuse_cache.fused;
    let g = upstream.values();
    let gf: f64 = g.iter().zip(f).map(|(a, b)| a * b).sum();
    let du: Vec<f64> =
        g.iter().zip(f).map(|(gi, fi)| (gi - fi * gf) / cache.fuse_cache.norm).collect();

    // fusion layer
    let in_dim = fusion_params.in_dim();
    let mut fusion_grad = fusion_params.zeros_like();
    let mut dconcat = vec![0.0; in_dim];
    for (r, dur) in du.iter().enumerate() {
        let wrow = &fusion_params.weight[r * in_dim..(r + 1) * in_dim];
        let grow = &mut fusion_grad.weight[r * in_dim..(r + 1) * in_dim];
        for c in 0..in_dim {
            grow[c] += dur * cache.fuse_cache.concat[c];
            dconcat[c] += dur * wrow[c];
        }
        fusion_grad.bias[r] += dur;
    }

    let mut d_biometric = dconcat[..depth].to_vec();
    for (d, aux) in d_biometric.iter_mut().zip(aux_biometric_grad.values()) {
        *d += aux;
    }
    let d_clothes = &dconcat[depth..];

    // clothes branch: average pooling spreads the gradient uniformly
    let (ch, cw, cd) = cache.clothes_shape;
    if cd != clothes_dim {
        return Err(Error::StaleCache {
            context: format!("clothes cache depth {cd} vs fusion layout {clothes_dim}"),
        });
    }
    let mut input_clothes = FeatureMap::zeros(ch, cw, cd);
    let cscale = 1.0 / (ch * cw) as f64;
    for loc in 0..ch * cw {
        for k in 0..cd {
            input_clothes.values_mut()[loc * cd + k] = d_clothes[k] * cscale;
        }
    }

    // biometric branch, Eq.-1 pooling
    let mc = &cache.mask_cache;
    let input = &mc.input;
    let scale = 1.0 / locations as f64;
    let mut input_person = FeatureMap::zeros(input.height(), input.width(), depth);
    let mut d_mask = vec![0.0; locations];
    for loc in 0..locations {
        let (row, col) = (loc / input.width(), loc % input.width());
        let x = input.at(row, col);
        let gate = mc.mask.values[loc];
        let mut acc = 0.0;
        for k in 0..depth {
            input_person.values_mut()[loc * depth + k] += d_biometric[k] * gate * scale;
            acc += d_biometric[k] * x[k];
        }
        d_mask[loc] = acc * scale;
        let _ = (row, col);
    }

    // channel-wise max pooling routes each location's gradient to one channel
    let n = mask_params.channels();
    let mut d_softmax = vec![0.0; locations * n];
    for loc in 0..locations {
        d_softmax[loc * n + mc.argmax[loc]] = d_mask[loc];
    }

    // spatial softmax per channel: dG = s * (t - sum_m t_m s_m)
    let mut d_logits = vec![0.0; locations * n];
    for c in 0..n {
        let mut weighted = 0.0;
        for loc in 0..locations {
            weighted += d_softmax[loc * n + c] * mc.softmax[loc * n + c];
        }
        for loc in 0..locations {
            let s = mc.softmax[loc * n + c];
            d_logits[loc * n + c] = s * (d_softmax[loc * n + c] - weighted);
        }
    }

    // per-location MLP backward
    let (h1, h2) = (mask_params.layer1.out_dim(), mask_params.layer2.out_dim());
    let mut mask_grad = mask_params.zeros_like();
    let mut gz2 = vec![0.0; h2];
    let mut gz1 = vec![0.0; h1];
    let mut gx = vec![0.0; depth];
    for loc in 0..locations {
        let (row, col) = (loc / input.width(), loc % input.width());
        let x = input.at(row, col);
        let z1 = &mc.z1[loc * h1..(loc + 1) * h1];
        let z2 = &mc.z2[loc * h2..(loc + 1) * h2];
        let gout = &d_logits[loc * n..(loc + 1) * n];

        mask_params.layer3.backward(z2, gout, &mut mask_grad.layer3, &mut gz2);
        for (g, pre) in gz2.iter_mut().zip(&mc.z2_pre[loc * h2..(loc + 1) * h2]) {
            if *pre <= 0.0 {
                *g = 0.0;
            }
        }
        mask_params.layer2.backward(z1, &gz2, &mut mask_grad.layer2, &mut gz1);
        for (g, pre) in gz1.iter_mut().zip(&mc.z1_pre[loc * h1..(loc + 1) * h1]) {
            if *pre <= 0.0 {
                *g = 0.0;
            }
        }
        mask_params.layer1.backward(x, &gz1, &mut mask_grad.layer1, &mut gx);
        for k in 0..depth {
            input_person.values_mut()[loc * depth + k] += gx[k];
        }
        let _ = (row, col);
    }

    Ok(HeadGradients {
        mask: mask_grad,
        fusion: fusion_grad,
        input_person,
        input_clothes,
    })
}
