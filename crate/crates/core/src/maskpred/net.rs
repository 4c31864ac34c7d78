//! The mask-predictor network: a small encoder-decoder over the stacked
//! pair of observations.
//!
//! Input is the two RGB views as a 6-channel image. The encoder halves the
//! resolution per level with stride-2 3x3 convolutions; the decoder mirrors
//! it with nearest-neighbor upsampling, a skip concatenation from the
//! matching encoder level (the raw input at full resolution), and a 3x3
//! convolution. A global context block — the channel means of the deepest
//! feature map, broadcast back over space — is concatenated into the first
//! decoder step and again into the output head, so scene-wide evidence has
//! a direct path to every output pixel. A final 1x1 convolution and sigmoid
//! produce two probability masks, one per observation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bytesio::{ByteReader, ByteWriter};
use crate::render::Observation;

use super::tensor::{
    concat, concat_backward, conv2d, conv2d_backward, mean_broadcast, mean_broadcast_backward,
    relu, relu_backward, sigmoid, upsample2, upsample2_backward, ShapeError, Tensor,
};
use super::MaskPredError;

/// Input channels: two stacked RGB images.
const IN_CHANNELS: usize = 6;
/// Output channels: one probability mask per observation.
const OUT_CHANNELS: usize = 2;

/// Architecture descriptor: input size plus encoder channel widths.
/// Everything else (decoder widths, layer list) is derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arch {
    pub width: usize,
    pub height: usize,
    /// Output channels of each stride-2 encoder level.
    pub enc: Vec<usize>,
}

/// One convolution's place in the parameter list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    /// OxCxKxK kernel shape.
    pub kernel: Vec<usize>,
}

impl Arch {
    /// The default predictor for a given camera size. Four stride-2 levels:
    /// at 64x64 input the deepest feature map is 4x4, which stretches an
    /// output pixel's receptive field across nearly the whole frame. That
    /// reach is load-bearing — wholesale-disagreement masks are all ones,
    /// so pixels far from any visible change must still know about it; the
    /// broadcast context block extends the same reach to scene-level
    /// evidence that never enters any one pixel's cone.
    pub fn small(width: usize, height: usize) -> Arch {
        Arch { width, height, enc: vec![16, 32, 64, 64] }
    }

    pub fn levels(&self) -> usize {
        self.enc.len()
    }

    pub fn validate(&self) -> Result<(), MaskPredError> {
        let div = 1usize << self.levels();
        if self.enc.is_empty() || self.enc.iter().any(|c| *c == 0) {
            return Err(MaskPredError::BadArch("encoder channel list must be nonempty".into()));
        }
        if self.width % div != 0 || self.height % div != 0 || self.width / div == 0 {
            return Err(MaskPredError::BadArch(format!(
                "{}x{} input not divisible by 2^{}",
                self.width,
                self.height,
                self.levels()
            )));
        }
        Ok(())
    }

    /// Output channels of decoder step `j` (step j produces the feature map
    /// at 1/2^j resolution; step 0 is full resolution).
    fn dec_out(&self, j: usize) -> usize {
        if j > 0 {
            self.enc[j - 1]
        } else {
            (self.enc[0] / 2).max(2)
        }
    }

    /// Skip-partner channels at decoder step `j`.
    fn skip_channels(&self, j: usize) -> usize {
        if j > 0 {
            self.enc[j - 1]
        } else {
            IN_CHANNELS
        }
    }

    /// Channels of the global context block (the deepest map's means),
    /// concatenated into the first decoder convolution and the output head.
    fn ctx_channels(&self) -> usize {
        *self.enc.last().expect("validated nonempty")
    }

    /// All convolutions in execution order.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        let mut prev = IN_CHANNELS;
        for (i, ch) in self.enc.iter().enumerate() {
            out.push(LayerSpec { name: format!("enc{i}"), kernel: vec![*ch, prev, 3, 3] });
            prev = *ch;
        }
        for j in (0..self.levels()).rev() {
            let ctx = if j + 1 == self.levels() { self.ctx_channels() } else { 0 };
            let cin = prev + self.skip_channels(j) + ctx;
            let cout = self.dec_out(j);
            out.push(LayerSpec { name: format!("dec{j}"), kernel: vec![cout, cin, 3, 3] });
            prev = cout;
        }
        out.push(LayerSpec {
            name: "out".into(),
            kernel: vec![OUT_CHANNELS, prev + self.ctx_channels(), 1, 1],
        });
        out
    }

    /// Total parameter count (kernels plus biases).
    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.kernel.iter().product::<usize>() + l.kernel[0])
            .sum()
    }
}

/// Trained weights: the architecture plus one (kernel, bias) tensor pair per
/// layer, in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    /// Interleaved `name.w` / `name.b` tensors matching [`Arch::layers`].
    pub tensors: Vec<(String, Tensor)>,
}

impl ModelParams {
    /// Kernel and bias of layer `idx` in execution order.
    fn layer(&self, idx: usize) -> (&Tensor, &Tensor) {
        (&self.tensors[2 * idx].1, &self.tensors[2 * idx + 1].1)
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Check that tensor names and shapes agree with the descriptor.
    pub fn validate(&self) -> Result<(), MaskPredError> {
        self.arch.validate()?;
        let layers = self.arch.layers();
        if self.tensors.len() != 2 * layers.len() {
            return Err(MaskPredError::BadArch(format!(
                "{} tensors for {} layers",
                self.tensors.len(),
                layers.len()
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            let (wname, w) = &self.tensors[2 * i];
            let (bname, b) = &self.tensors[2 * i + 1];
            if *wname != format!("{}.w", layer.name) || w.shape != layer.kernel {
                return Err(MaskPredError::BadArch(format!("layer {} kernel mismatch", layer.name)));
            }
            if *bname != format!("{}.b", layer.name) || b.shape != vec![layer.kernel[0]] {
                return Err(MaskPredError::BadArch(format!("layer {} bias mismatch", layer.name)));
            }
        }
        Ok(())
    }
}

/// Seeded uniform init: every weight and bias drawn from
/// U(-sqrt(1/fan_in), sqrt(1/fan_in)).
pub fn init_params(arch: &Arch, seed: u64) -> Result<ModelParams, MaskPredError> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for layer in arch.layers() {
        let fan_in: usize = layer.kernel[1..].iter().product();
        let bound = (1.0 / fan_in as f64).sqrt();
        let n: usize = layer.kernel.iter().product();
        let w = Tensor::new(
            layer.kernel.clone(),
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect(),
        );
        let b = Tensor::new(
            vec![layer.kernel[0]],
            (0..layer.kernel[0]).map(|_| rng.gen_range(-bound..bound)).collect(),
        );
        tensors.push((format!("{}.w", layer.name), w));
        tensors.push((format!("{}.b", layer.name), b));
    }
    Ok(ModelParams { arch: arch.clone(), tensors })
}

/// Everything the backward pass needs from a forward pass.
pub(crate) struct Cache {
    input: Tensor,
    enc_pre: Vec<Tensor>,
    enc_out: Vec<Tensor>,
    dec_pre: Vec<Tensor>,
    dec_cat: Vec<Tensor>,
    final_in: Tensor,
    pub(crate) probs: Tensor,
}

/// Stack two observations into the normalized 6-channel input tensor.
pub fn input_from_obs(obs1: &Observation, obs2: &Observation) -> Result<Tensor, ShapeError> {
    if (obs1.width, obs1.height) != (obs2.width, obs2.height) {
        return Err(ShapeError::Mismatch(format!(
            "observations {}x{} vs {}x{}",
            obs1.width, obs1.height, obs2.width, obs2.height
        )));
    }
    let (w, h) = (obs1.width, obs1.height);
    let mut data = vec![0.0; IN_CHANNELS * h * w];
    for (half, obs) in [(0, obs1), (1, obs2)] {
        for p in 0..w * h {
            for c in 0..3 {
                data[(half * 3 + c) * h * w + p] = obs.rgb[3 * p + c] as f64 / 255.0;
            }
        }
    }
    Ok(Tensor::new(vec![IN_CHANNELS, h, w], data))
}

pub(crate) fn forward_cached(params: &ModelParams, input: &Tensor) -> Result<Cache, ShapeError> {
    let arch = &params.arch;
    let levels = arch.levels();
    let (c, h, w) = input.chw();
    if c != IN_CHANNELS || h != arch.height || w != arch.width {
        return Err(ShapeError::Mismatch(format!(
            "input {c}x{h}x{w}, expected {IN_CHANNELS}x{}x{}",
            arch.height, arch.width
        )));
    }

    let mut enc_pre = Vec::with_capacity(levels);
    let mut enc_out = Vec::with_capacity(levels);
    let mut cur = input.clone();
    for i in 0..levels {
        let (kernel, bias) = params.layer(i);
        let pre = conv2d(&cur, kernel, &bias.data, 2, 1)?;
        cur = relu(&pre);
        enc_pre.push(pre);
        enc_out.push(cur.clone());
    }

    let mut dec_pre = Vec::with_capacity(levels);
    let mut dec_cat = Vec::with_capacity(levels);
    for (step, j) in (0..levels).rev().enumerate() {
        let (kernel, bias) = params.layer(levels + step);
        let up = upsample2(&cur);
        let skip = if j > 0 { &enc_out[j - 1] } else { input };
        let mut cat = concat(&up, skip)?;
        if step == 0 {
            let (_, uh, uw) = up.chw();
            let ctx = mean_broadcast(&enc_out[levels - 1], uh, uw);
            cat = concat(&cat, &ctx)?;
        }
        let pre = conv2d(&cat, kernel, &bias.data, 1, 1)?;
        cur = relu(&pre);
        dec_pre.push(pre);
        dec_cat.push(cat);
    }

    let (kernel, bias) = params.layer(2 * levels);
    let (_, fh, fw) = cur.chw();
    let ctx = mean_broadcast(&enc_out[levels - 1], fh, fw);
    let final_in = concat(&cur, &ctx)?;
    let logits = conv2d(&final_in, kernel, &bias.data, 1, 0)?;
    let probs = sigmoid(&logits);
    Ok(Cache {
        input: input.clone(),
        enc_pre,
        enc_out,
        dec_pre,
        dec_cat,
        final_in,
        probs,
    })
}

/// Predict the two difference masks for a pair of observations.
/// Deterministic: same params and images give bit-identical outputs.
pub fn forward(
    params: &ModelParams,
    obs1: &Observation,
    obs2: &Observation,
) -> Result<(Tensor, Tensor), MaskPredError> {
    let input = input_from_obs(obs1, obs2)?;
    let cache = forward_cached(params, &input)?;
    let (_, h, w) = cache.probs.chw();
    let plane = h * w;
    Ok((
        Tensor::new(vec![h, w], cache.probs.data[..plane].to_vec()),
        Tensor::new(vec![h, w], cache.probs.data[plane..].to_vec()),
    ))
}

/// Reverse-mode pass from a gradient on the *logits* (pre-sigmoid), which
/// the cross-entropy loss supplies in closed form. Returns gradients in the
/// same order as `params.tensors`.
pub(crate) fn backward_cached(
    params: &ModelParams,
    cache: &Cache,
    grad_logits: &Tensor,
) -> Result<Vec<Tensor>, ShapeError> {
    let arch = &params.arch;
    let levels = arch.levels();
    let mut grads: Vec<Option<(Tensor, Tensor)>> = vec![None; 2 * levels + 1];

    let (out_kernel, _) = params.layer(2 * levels);
    let (grad_final, gw, gb) =
        conv2d_backward(&cache.final_in, out_kernel, 1, 0, grad_logits)?;
    grads[2 * levels] = Some((gw, Tensor::new(vec![gb.len()], gb)));
    // The output head sees the full-resolution decoder map with the context
    // block as trailing channels; peel the context part off and hold it until
    // the walk reaches the deepest encoder output it was computed from.
    let (mut grad_cur, grad_head_ctx) = concat_backward(&grad_final, arch.dec_out(0));
    let head_ctx_grad = {
        let (_, dh, dw) = cache.enc_out[levels - 1].chw();
        mean_broadcast_backward(&grad_head_ctx, dh, dw)
    };

    // Skip gradients flow backward into encoder outputs (or the input,
    // which has no parameters and is dropped).
    let mut skip_grads: Vec<Option<Tensor>> = vec![None; levels];
    for (step, j) in (0..levels).rev().enumerate().rev() {
        let (kernel, _) = params.layer(levels + step);
        let grad_pre = relu_backward(&cache.dec_pre[step], &grad_cur);
        let (grad_cat, gw, gb) =
            conv2d_backward(&cache.dec_cat[step], kernel, 1, 1, &grad_pre)?;
        grads[levels + step] = Some((gw, Tensor::new(vec![gb.len()], gb)));
        let up_channels = if step == 0 {
            arch.enc[levels - 1]
        } else {
            arch.dec_out(j + 1)
        };
        // The first decoder step carries the context block as its trailing
        // channels; its gradient reaches the deepest encoder output through
        // the channel means, alongside the upsample path.
        let (grad_cat, ctx_grad) = if step == 0 {
            let keep = up_channels + arch.skip_channels(j);
            let (rest, grad_ctx) = concat_backward(&grad_cat, keep);
            let (_, dh, dw) = cache.enc_out[levels - 1].chw();
            (rest, Some(mean_broadcast_backward(&grad_ctx, dh, dw)))
        } else {
            (grad_cat, None)
        };
        let (grad_up, grad_skip) = concat_backward(&grad_cat, up_channels);
        if j > 0 {
            skip_grads[j - 1] = Some(grad_skip);
        }
        grad_cur = upsample2_backward(&grad_up);
        if let Some(g) = ctx_grad {
            for (a, b) in grad_cur.data.iter_mut().zip(&g.data) {
                *a += b;
            }
        }
    }

    // After the decoder walk, grad_cur sits on the deepest encoder output —
    // where the output head's context gradient also lands.
    for (a, b) in grad_cur.data.iter_mut().zip(&head_ctx_grad.data) {
        *a += b;
    }

    for i in (0..levels).rev() {
        if let Some(skip) = skip_grads[i].take() {
            for (g, s) in grad_cur.data.iter_mut().zip(&skip.data) {
                *g += s;
            }
        }
        let (kernel, _) = params.layer(i);
        let grad_pre = relu_backward(&cache.enc_pre[i], &grad_cur);
        let below = if i > 0 { &cache.enc_out[i - 1] } else { &cache.input };
        let (grad_in, gw, gb) = conv2d_backward(below, kernel, 2, 1, &grad_pre)?;
        grads[i] = Some((gw, Tensor::new(vec![gb.len()], gb)));
        grad_cur = grad_in;
    }

    let mut out = Vec::with_capacity(2 * (2 * levels + 1));
    for pair in grads.into_iter() {
        let (gw, gb) = pair.expect("every layer visited");
        out.push(gw);
        out.push(gb);
    }
    Ok(out)
}

// --- SCNP params file --------------------------------------------------------

const SCNP_MAGIC: &[u8; 4] = b"SCNP";
const SCNP_VERSION: u8 = 1;

/// Serialize params: magic, version, a text descriptor chunk, then one
/// chunk of little-endian f32 values per tensor in order.
pub fn params_bytes(params: &ModelParams) -> Vec<u8> {
    let mut desc = String::new();
    desc.push_str(&format!("width = {}\n", params.arch.width));
    desc.push_str(&format!("height = {}\n", params.arch.height));
    let enc: Vec<String> = params.arch.enc.iter().map(|c| c.to_string()).collect();
    desc.push_str(&format!("enc = {}\n", enc.join(",")));
    for (name, t) in &params.tensors {
        let shape: Vec<String> = t.shape.iter().map(|s| s.to_string()).collect();
        desc.push_str(&format!("tensor = {} {}\n", name, shape.join("x")));
    }

    let mut w = ByteWriter::new();
    w.raw(SCNP_MAGIC);
    w.u8(SCNP_VERSION);
    w.chunk(desc.as_bytes());
    for (_, t) in &params.tensors {
        let mut body = ByteWriter::new();
        for v in &t.data {
            body.f32(*v as f32);
        }
        w.chunk(&body.buf);
    }
    w.buf
}

/// Parse a params file written by [`params_bytes`].
pub fn params_parse(bytes: &[u8]) -> Result<ModelParams, MaskPredError> {
    let bad = |m: &str| MaskPredError::BadFile(m.into());
    let mut r = ByteReader::new(bytes);
    if r.take(4).map_err(|_| bad("truncated"))? != SCNP_MAGIC {
        return Err(bad("wrong magic"));
    }
    if r.u8().map_err(|_| bad("truncated"))? != SCNP_VERSION {
        return Err(bad("unsupported version"));
    }
    let desc = std::str::from_utf8(r.chunk().map_err(|_| bad("truncated"))?)
        .map_err(|_| bad("descriptor is not UTF-8"))?;

    let mut width = None;
    let mut height = None;
    let mut enc = None;
    let mut listed: Vec<(String, Vec<usize>)> = Vec::new();
    for line in desc.lines() {
        let Some((key, value)) = line.split_once(" = ") else {
            return Err(bad("malformed descriptor line"));
        };
        match key {
            "width" => width = Some(value.parse().map_err(|_| bad("bad width"))?),
            "height" => height = Some(value.parse().map_err(|_| bad("bad height"))?),
            "enc" => {
                let channels: Result<Vec<usize>, _> =
                    value.split(',').map(|c| c.trim().parse()).collect();
                enc = Some(channels.map_err(|_| bad("bad enc list"))?);
            }
            "tensor" => {
                let Some((name, shape_text)) = value.split_once(' ') else {
                    return Err(bad("malformed tensor line"));
                };
                let shape: Result<Vec<usize>, _> =
                    shape_text.split('x').map(|s| s.parse()).collect();
                listed.push((name.to_string(), shape.map_err(|_| bad("bad tensor shape"))?));
            }
            _ => return Err(MaskPredError::BadFile(format!("unknown descriptor key {key:?}"))),
        }
    }
    let arch = Arch {
        width: width.ok_or_else(|| bad("missing width"))?,
        height: height.ok_or_else(|| bad("missing height"))?,
        enc: enc.ok_or_else(|| bad("missing enc"))?,
    };
    arch.validate()?;

    let mut tensors = Vec::with_capacity(listed.len());
    for (name, shape) in listed {
        let n: usize = shape.iter().product();
        let body = r.chunk().map_err(|_| bad("truncated tensor data"))?;
        if body.len() != 4 * n {
            return Err(MaskPredError::BadFile(format!(
                "tensor {name}: descriptor says {n} values, chunk holds {}",
                body.len() / 4
            )));
        }
        let data: Vec<f64> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite tensor value"));
        }
        tensors.push((name, Tensor::new(shape, data)));
    }
    if !r.done() {
        return Err(bad("trailing bytes"));
    }
    let params = ModelParams { arch, tensors };
    params.validate()?;
    Ok(params)
}

pub fn save_params(params: &ModelParams, path: &std::path::Path) -> Result<(), MaskPredError> {
    std::fs::write(path, params_bytes(params))?;
    Ok(())
}

pub fn load_params(path: &std::path::Path) -> Result<ModelParams, MaskPredError> {
    params_parse(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::Observation;

    fn test_obs(width: usize, height: usize, fill: u8) -> Observation {
        Observation {
            width,
            height,
            rgb: (0..3 * width * height).map(|i| fill.wrapping_add(i as u8)).collect(),
            ids: vec![0; width * height],
        }
    }

    #[test]
    fn default_arch_shape_and_param_count() {
        let arch = Arch::small(64, 64);
        assert_eq!(arch.param_count(), 207_946);
        let params = init_params(&arch, 0).unwrap();
        params.validate().unwrap();
        assert_eq!(params.param_count(), arch.param_count());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = Arch { width: 16, height: 16, enc: vec![4, 8] };
        let a = init_params(&arch, 7).unwrap();
        let b = init_params(&arch, 7).unwrap();
        let c = init_params(&arch, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // enc0 kernel fan_in = 6*9.
        let bound = (1.0 / 54.0f64).sqrt();
        assert!(a.tensors[0].1.data.iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn bad_arch_rejected() {
        assert!(Arch { width: 18, height: 18, enc: vec![4, 8] }.validate().is_err());
        assert!(Arch { width: 16, height: 16, enc: vec![] }.validate().is_err());
        assert!(Arch { width: 8, height: 8, enc: vec![4, 8, 16, 32] }.validate().is_err());
    }

    #[test]
    fn forward_shape_range_determinism() {
        let arch = Arch { width: 16, height: 16, enc: vec![4, 8] };
        let params = init_params(&arch, 3).unwrap();
        let obs1 = test_obs(16, 16, 10);
        let obs2 = test_obs(16, 16, 200);
        let (m1, m2) = forward(&params, &obs1, &obs2).unwrap();
        assert_eq!(m1.shape, vec![16, 16]);
        assert_eq!(m2.shape, vec![16, 16]);
        assert!(m1.data.iter().chain(&m2.data).all(|p| *p > 0.0 && *p < 1.0));
        let (n1, n2) = forward(&params, &obs1, &obs2).unwrap();
        assert_eq!(m1, n1);
        assert_eq!(m2, n2);
        // Swapping the observations changes the input; only shape is
        // guaranteed for the outputs.
        let (s1, s2) = forward(&params, &obs2, &obs1).unwrap();
        assert_eq!(s1.shape, m1.shape);
        assert_eq!(s2.shape, m2.shape);
    }

    #[test]
    fn forward_rejects_wrong_size() {
        let arch = Arch { width: 16, height: 16, enc: vec![4, 8] };
        let params = init_params(&arch, 3).unwrap();
        let obs = test_obs(32, 32, 0);
        assert!(forward(&params, &obs, &obs).is_err());
    }

    #[test]
    fn params_roundtrip() {
        let arch = Arch { width: 16, height: 16, enc: vec![4, 8] };
        let params = init_params(&arch, 11).unwrap();
        let bytes = params_bytes(&params);
        let loaded = params_parse(&bytes).unwrap();
        assert_eq!(loaded.arch, params.arch);
        // Values pass through f32; a second round-trip is bit-exact.
        assert_eq!(params_bytes(&loaded), bytes);
        assert_eq!(params_parse(&params_bytes(&loaded)).unwrap(), loaded);
    }

    #[test]
    fn params_file_rejects_corruption() {
        let arch = Arch { width: 16, height: 16, enc: vec![4, 8] };
        let params = init_params(&arch, 11).unwrap();
        let bytes = params_bytes(&params);

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(params_parse(&wrong_magic).is_err());

        // Tamper with the descriptor: claim a different kernel shape.
        let text = String::from_utf8_lossy(&bytes).into_owned();
        assert!(text.contains("tensor = enc0.w 4x6x3x3"));
        let conflicted = params_bytes(&ModelParams {
            arch: params.arch.clone(),
            tensors: params
                .tensors
                .iter()
                .map(|(n, t)| {
                    let mut t = t.clone();
                    if n == "enc0.b" {
                        t.shape = vec![2, 2];
                    }
                    (n.clone(), t)
                })
                .collect(),
        });
        assert!(matches!(params_parse(&conflicted), Err(MaskPredError::BadArch(_))));

        assert!(params_parse(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn save_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.scnp");
        let arch = Arch { width: 16, height: 16, enc: vec![4, 8] };
        let params = init_params(&arch, 1).unwrap();
        save_params(&params, &path).unwrap();
        let loaded = load_params(&path).unwrap();
        assert_eq!(params_bytes(&loaded), params_bytes(&params));
        assert!(load_params(&dir.path().join("missing.scnp")).is_err());
    }
}
