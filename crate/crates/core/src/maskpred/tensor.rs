//! Dense f64 tensors and the layer primitives of the mask predictor:
//! strided cross-correlation, ReLU, nearest-neighbor upsampling, channel
//! concatenation and sigmoid, each with its reverse-mode companion.
//!
//! Convolutions run in patch-matrix (im2col) form: edge handling happens
//! once while gathering receptive-field patches into a dense matrix, and
//! the arithmetic itself becomes branch-free multiply-accumulate loops over
//! whole output planes, which the compiler vectorizes. Every loop runs in a
//! fixed order, so results are bit-reproducible run to run.

/// Row-major dense tensor. Images use CxHxW order throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ShapeError {
    #[error("shape mismatch: {0}")]
    Mismatch(String),
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape"
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// (channels, height, width) of a rank-3 image tensor.
    pub fn chw(&self) -> (usize, usize, usize) {
        assert_eq!(self.shape.len(), 3, "expected a CxHxW tensor");
        (self.shape[0], self.shape[1], self.shape[2])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn expect(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ShapeError> {
    if cond {
        Ok(())
    } else {
        Err(ShapeError::Mismatch(msg()))
    }
}

/// Output spatial size of a convolution along one axis.
fn conv_out(len: usize, k: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - k) / stride + 1
}

/// Output-index range `[lo, hi)` whose tap `idx * stride + k - pad` lands
/// inside `[0, len)`: the positions where a kernel tap reads real pixels
/// rather than zero padding.
fn tap_range(len: usize, out_len: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    let shift = k as isize - pad as isize;
    let lo = if shift >= 0 { 0 } else { ((-shift) as usize).div_ceil(stride) };
    let max_in = len as isize - 1 - shift;
    if max_in < 0 {
        return (0, 0);
    }
    let hi = (max_in as usize / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// Gather receptive-field patches into a (c_in*kh*kw) x (oh*ow) matrix:
/// row `(ci*kh + ky)*kw + kx`, column `oy*ow + ox` holds the input pixel
/// that tap reads for that output position, zero where the tap falls
/// outside the image. One output plane of the convolution is then a plain
/// weighted sum of these rows.
fn im2col(
    input: &Tensor,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let (c_in, h, w) = input.chw();
    let m = oh * ow;
    let mut cols = vec![0.0; c_in * kh * kw * m];
    for ci in 0..c_in {
        let plane = &input.data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            let (oy_lo, oy_hi) = tap_range(h, oh, stride, ky, pad);
            for kx in 0..kw {
                let (ox_lo, ox_hi) = tap_range(w, ow, stride, kx, pad);
                if ox_lo >= ox_hi {
                    continue;
                }
                let n = ox_hi - ox_lo;
                let row_base = ((ci * kh + ky) * kw + kx) * m;
                for oy in oy_lo..oy_hi {
                    let iy = oy * stride + ky - pad;
                    let dst = &mut cols[row_base + oy * ow + ox_lo..row_base + oy * ow + ox_hi];
                    if stride == 1 {
                        let ix0 = ox_lo + kx - pad;
                        dst.copy_from_slice(&plane[iy * w + ix0..iy * w + ix0 + n]);
                    } else {
                        let mut ix = ox_lo * stride + kx - pad;
                        for d in dst {
                            *d = plane[iy * w + ix];
                            ix += stride;
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add the inverse of [`im2col`]: fold a patch-matrix gradient back
/// onto the input image, summing where patches overlap.
fn col2im_add(
    cols: &[f64],
    grad_in: &mut Tensor,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    let (c_in, h, w) = grad_in.chw();
    let m = oh * ow;
    for ci in 0..c_in {
        let plane = &mut grad_in.data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            let (oy_lo, oy_hi) = tap_range(h, oh, stride, ky, pad);
            for kx in 0..kw {
                let (ox_lo, ox_hi) = tap_range(w, ow, stride, kx, pad);
                if ox_lo >= ox_hi {
                    continue;
                }
                let n = ox_hi - ox_lo;
                let row_base = ((ci * kh + ky) * kw + kx) * m;
                for oy in oy_lo..oy_hi {
                    let iy = oy * stride + ky - pad;
                    let src = &cols[row_base + oy * ow + ox_lo..row_base + oy * ow + ox_hi];
                    if stride == 1 {
                        let ix0 = ox_lo + kx - pad;
                        let dst = &mut plane[iy * w + ix0..iy * w + ix0 + n];
                        for i in 0..n {
                            dst[i] += src[i];
                        }
                    } else {
                        let mut ix = ox_lo * stride + kx - pad;
                        for s in src {
                            plane[iy * w + ix] += *s;
                            ix += stride;
                        }
                    }
                }
            }
        }
    }
}

/// Dot product with four independent accumulators (fixed combine order):
/// the unrolling breaks the serial dependence so the loop can run wide.
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4 * 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < chunks {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for j in chunks..n {
        s += a[j] * b[j];
    }
    s
}

/// `dst += coeff * src`, elementwise over equal-length slices.
fn axpy(dst: &mut [f64], coeff: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += coeff * *s;
    }
}

/// Strided 2D cross-correlation with zero padding.
///
/// `input` CxHxW, `kernel` OxCxKxK, `bias` length O; output OxH'xW'.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Result<Tensor, ShapeError> {
    let (c_in, h, w) = input.chw();
    expect(kernel.shape.len() == 4, || format!("kernel rank {} != 4", kernel.shape.len()))?;
    let (o, kc, kh, kw) =
        (kernel.shape[0], kernel.shape[1], kernel.shape[2], kernel.shape[3]);
    expect(kc == c_in, || format!("kernel expects {kc} input channels, got {c_in}"))?;
    expect(kh == kw, || "only square kernels supported".into())?;
    expect(bias.len() == o, || format!("bias length {} != {o}", bias.len()))?;
    expect(stride >= 1 && h + 2 * pad >= kh && w + 2 * pad >= kw, || {
        format!("kernel {kh}x{kw} larger than padded {h}x{w} input")
    })?;
    let oh = conv_out(h, kh, stride, pad);
    let ow = conv_out(w, kw, stride, pad);
    let m = oh * ow;
    let p = c_in * kh * kw;

    // out[co] = bias[co] + sum_r kernel[co][r] * patch_row[r]; the kernel's
    // OxCxKxK layout makes row co of the reshaped OxP matrix contiguous.
    // Work proceeds in column blocks so each patch row streams through once
    // while the output block stays cache-hot; per output value the taps
    // still accumulate in ascending r, so the block size never shows up in
    // the arithmetic.
    let cols = im2col(input, kh, kw, stride, pad, oh, ow);
    let mut out = Tensor::zeros(vec![o, oh, ow]);
    for co in 0..o {
        out.data[co * m..(co + 1) * m].fill(bias[co]);
    }
    let mut j = 0;
    while j < m {
        let je = (j + GEMM_BLOCK).min(m);
        for r in 0..p {
            let b = &cols[r * m + j..r * m + je];
            for co in 0..o {
                axpy(&mut out.data[co * m + j..co * m + je], kernel.data[co * p + r], b);
            }
        }
        j = je;
    }
    Ok(out)
}

/// Column-block width for the convolution inner loops: a few KB per row so
/// the active output panel and patch row sit in L1 together.
const GEMM_BLOCK: usize = 512;

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    pad: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>), ShapeError> {
    let (c_in, h, w) = input.chw();
    let (o, _, kh, kw) =
        (kernel.shape[0], kernel.shape[1], kernel.shape[2], kernel.shape[3]);
    let (go, oh, ow) = grad_out.chw();
    expect(go == o, || format!("grad has {go} channels, kernel produces {o}"))?;
    expect(oh == conv_out(h, kh, stride, pad) && ow == conv_out(w, kw, stride, pad), || {
        "grad spatial size disagrees with convolution output".into()
    })?;

    let m = oh * ow;
    let p = c_in * kh * kw;
    let cols = im2col(input, kh, kw, stride, pad, oh, ow);

    let mut grad_in = Tensor::zeros(input.shape.clone());
    let mut grad_kernel = Tensor::zeros(kernel.shape.clone());
    let mut grad_bias = vec![0.0; o];
    // Patch-space input gradient, folded back onto the image at the end.
    let mut grad_cols = vec![0.0; p * m];

    for co in 0..o {
        grad_bias[co] = grad_out.data[co * m..(co + 1) * m].iter().sum();
    }
    // Same column-blocked sweep as the forward pass: per block, each patch
    // row pairs with every output-gradient row once, contributing a partial
    // dot to that kernel weight and a weighted copy to the patch-space
    // input gradient.
    let mut j = 0;
    while j < m {
        let je = (j + GEMM_BLOCK).min(m);
        for r in 0..p {
            let b = &cols[r * m + j..r * m + je];
            let gc = &mut grad_cols[r * m + j..r * m + je];
            for co in 0..o {
                let g = &grad_out.data[co * m + j..co * m + je];
                grad_kernel.data[co * p + r] += dot4(g, b);
                axpy(gc, kernel.data[co * p + r], g);
            }
        }
        j = je;
    }
    col2im_add(&grad_cols, &mut grad_in, kh, kw, stride, pad, oh, ow);
    Ok((grad_in, grad_kernel, grad_bias))
}

/// Elementwise max(x, 0).
pub fn relu(input: &Tensor) -> Tensor {
    Tensor {
        shape: input.shape.clone(),
        data: input.data.iter().map(|v| v.max(0.0)).collect(),
    }
}

/// Gradient gate of [`relu`]: passes where the forward input was positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    assert_eq!(input.shape, grad_out.shape);
    Tensor {
        shape: input.shape.clone(),
        data: input
            .data
            .iter()
            .zip(&grad_out.data)
            .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
            .collect(),
    }
}

/// Nearest-neighbor 2x spatial upsampling.
pub fn upsample2(input: &Tensor) -> Tensor {
    let (c, h, w) = input.chw();
    let mut out = Tensor::zeros(vec![c, 2 * h, 2 * w]);
    for ci in 0..c {
        for y in 0..2 * h {
            let in_row = &input.data[(ci * h + y / 2) * w..(ci * h + y / 2 + 1) * w];
            let out_row = &mut out.data[(ci * 2 * h + y) * 2 * w..(ci * 2 * h + y + 1) * 2 * w];
            for x in 0..2 * w {
                out_row[x] = in_row[x / 2];
            }
        }
    }
    out
}

/// Gradient of [`upsample2`]: each source pixel collects its 2x2 block.
pub fn upsample2_backward(grad_out: &Tensor) -> Tensor {
    let (c, h2, w2) = grad_out.chw();
    assert!(h2 % 2 == 0 && w2 % 2 == 0, "upsampled size must be even");
    let (h, w) = (h2 / 2, w2 / 2);
    let mut grad_in = Tensor::zeros(vec![c, h, w]);
    for ci in 0..c {
        for y in 0..h2 {
            let g_row = &grad_out.data[(ci * h2 + y) * w2..(ci * h2 + y + 1) * w2];
            let gi_row = &mut grad_in.data[(ci * h + y / 2) * w..(ci * h + y / 2 + 1) * w];
            for x in 0..w2 {
                gi_row[x / 2] += g_row[x];
            }
        }
    }
    grad_in
}

/// Channel-wise spatial mean of `src`, broadcast to an `h`-by-`w` map: every
/// pixel of output channel `c` holds the average of source channel `c`.
pub fn mean_broadcast(src: &Tensor, h: usize, w: usize) -> Tensor {
    let (c, sh, sw) = src.chw();
    let splane = sh * sw;
    let mut out = Tensor::zeros(vec![c, h, w]);
    for ci in 0..c {
        let mean =
            src.data[ci * splane..(ci + 1) * splane].iter().sum::<f64>() / splane as f64;
        out.data[ci * h * w..(ci + 1) * h * w].fill(mean);
    }
    out
}

/// Gradient of [`mean_broadcast`] toward a source of size `sh`-by-`sw`:
/// every source pixel of channel `c` touched every output pixel of that
/// channel with weight 1/(sh*sw), so it collects the channel's summed
/// output gradient at that same weight.
pub fn mean_broadcast_backward(grad_out: &Tensor, sh: usize, sw: usize) -> Tensor {
    let (c, h, w) = grad_out.chw();
    let splane = sh * sw;
    let mut grad_in = Tensor::zeros(vec![c, sh, sw]);
    for ci in 0..c {
        let g = grad_out.data[ci * h * w..(ci + 1) * h * w].iter().sum::<f64>()
            / splane as f64;
        grad_in.data[ci * splane..(ci + 1) * splane].fill(g);
    }
    grad_in
}

/// Concatenate two image tensors along the channel axis.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor, ShapeError> {
    let (ca, ha, wa) = a.chw();
    let (cb, hb, wb) = b.chw();
    expect((ha, wa) == (hb, wb), || {
        format!("concat spatial mismatch: {ha}x{wa} vs {hb}x{wb}")
    })?;
    let mut data = Vec::with_capacity((ca + cb) * ha * wa);
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Ok(Tensor { shape: vec![ca + cb, ha, wa], data })
}

/// Split a concat gradient back into the two operands' gradients.
pub fn concat_backward(grad_out: &Tensor, ca: usize) -> (Tensor, Tensor) {
    let (c, h, w) = grad_out.chw();
    assert!(ca <= c);
    let split = ca * h * w;
    (
        Tensor::new(vec![ca, h, w], grad_out.data[..split].to_vec()),
        Tensor::new(vec![c - ca, h, w], grad_out.data[split..].to_vec()),
    )
}

/// Elementwise logistic sigmoid.
pub fn sigmoid(input: &Tensor) -> Tensor {
    Tensor {
        shape: input.shape.clone(),
        data: input.data.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Reference convolution: the definition, one multiply at a time.
    fn conv2d_oracle(
        input: &Tensor,
        kernel: &Tensor,
        bias: &[f64],
        stride: usize,
        pad: usize,
    ) -> Tensor {
        let (c_in, h, w) = input.chw();
        let (o, _, kh, kw) =
            (kernel.shape[0], kernel.shape[1], kernel.shape[2], kernel.shape[3]);
        let oh = conv_out(h, kh, stride, pad);
        let ow = conv_out(w, kw, stride, pad);
        let mut out = Tensor::zeros(vec![o, oh, ow]);
        for co in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[co];
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += kernel.data[((co * c_in + ci) * kh + ky) * kw + kx]
                                    * input.data[(ci * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out.data[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_tensor(vec![3, 5, 7], &mut rng);
        // 1x1 kernel selecting each channel in turn.
        let mut kernel = Tensor::zeros(vec![3, 3, 1, 1]);
        for c in 0..3 {
            kernel.data[c * 3 + c] = 1.0;
        }
        let out = conv2d(&input, &kernel, &[0.0; 3], 1, 0).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn all_ones_kernel_sums_neighborhood() {
        let input = Tensor::new(vec![1, 5, 5], vec![2.0; 25]);
        let kernel = Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]);
        let out = conv2d(&input, &kernel, &[0.0], 1, 1).unwrap();
        // Interior pixel: 9 neighbors of value 2.
        assert_eq!(out.data[(1 * 5 + 2) * 1 + 0], 18.0);
        assert_eq!(out.data[2 * 5 + 2], 18.0);
        // Corner pixel: only 4 neighbors inside.
        assert_eq!(out.data[0], 8.0);
    }

    #[test]
    fn conv2d_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
            let input = random_tensor(vec![2, 8, 8], &mut rng);
            let kernel = random_tensor(vec![4, 2, 3, 3], &mut rng);
            let bias: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = conv2d(&input, &kernel, &bias, stride, pad).unwrap();
            let slow = conv2d_oracle(&input, &kernel, &bias, stride, pad);
            assert_eq!(fast.shape, slow.shape);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!(
                    (a - b).abs() <= 1e-6 * (a.abs() + b.abs() + 1.0),
                    "stride {stride} pad {pad}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn conv2d_rejects_bad_shapes() {
        let input = Tensor::zeros(vec![2, 8, 8]);
        let kernel = Tensor::zeros(vec![4, 3, 3, 3]);
        assert!(conv2d(&input, &kernel, &[0.0; 4], 1, 1).is_err());
        let kernel = Tensor::zeros(vec![4, 2, 3, 3]);
        assert!(conv2d(&input, &kernel, &[0.0; 2], 1, 1).is_err());
    }

    /// Central finite differences of a scalar function of one tensor entry.
    fn fd_grad(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, i: usize, h: f64) -> f64 {
        let mut xp = x.clone();
        xp.data[i] += h;
        let mut xm = x.clone();
        xm.data[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    }

    fn close(analytic: f64, fd: f64) -> bool {
        (analytic - fd).abs() <= 1e-4 * analytic.abs().max(fd.abs()) + 1e-7
    }

    #[test]
    fn conv2d_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (stride, pad) in [(1, 1), (2, 1)] {
            let input = random_tensor(vec![2, 6, 6], &mut rng);
            let kernel = random_tensor(vec![3, 2, 3, 3], &mut rng);
            let bias: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            // Scalar objective: weighted sum of outputs with fixed weights.
            let out = conv2d(&input, &kernel, &bias, stride, pad).unwrap();
            let weights = random_tensor(out.shape.clone(), &mut rng);
            let grad_out = weights.clone();
            let (gi, gk, gb) =
                conv2d_backward(&input, &kernel, stride, pad, &grad_out).unwrap();

            let objective = |inp: &Tensor, ker: &Tensor, b: &[f64]| {
                let o = conv2d(inp, ker, b, stride, pad).unwrap();
                o.data.iter().zip(&weights.data).map(|(v, w)| v * w).sum::<f64>()
            };
            for i in (0..input.numel()).step_by(7) {
                let fd = fd_grad(|t| objective(t, &kernel, &bias), &input, i, 1e-5);
                assert!(close(gi.data[i], fd), "din[{i}]: {} vs {fd}", gi.data[i]);
            }
            for i in 0..kernel.numel() {
                let fd = fd_grad(|t| objective(&input, t, &bias), &kernel, i, 1e-5);
                assert!(close(gk.data[i], fd), "dk[{i}]: {} vs {fd}", gk.data[i]);
            }
            for (i, g) in gb.iter().enumerate() {
                let mut bp = bias.clone();
                bp[i] += 1e-5;
                let mut bm = bias.clone();
                bm[i] -= 1e-5;
                let fd =
                    (objective(&input, &kernel, &bp) - objective(&input, &kernel, &bm)) / 2e-5;
                assert!(close(*g, fd), "db[{i}]: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn relu_and_backward() {
        let x = Tensor::new(vec![1, 1, 4], vec![-1.0, 0.0, 0.5, 2.0]);
        assert_eq!(relu(&x).data, vec![0.0, 0.0, 0.5, 2.0]);
        let g = Tensor::new(vec![1, 1, 4], vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(relu_backward(&x, &g).data, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn upsample_roundtrip_shapes_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(vec![3, 4, 5], &mut rng);
        let up = upsample2(&x);
        assert_eq!(up.shape, vec![3, 8, 10]);
        for c in 0..3 {
            for y in 0..8 {
                for xx in 0..10 {
                    assert_eq!(
                        up.data[(c * 8 + y) * 10 + xx],
                        x.data[(c * 4 + y / 2) * 5 + xx / 2]
                    );
                }
            }
        }
        // Adjoint identity: <up(x), g> == <x, up_backward(g)>.
        let g = random_tensor(vec![3, 8, 10], &mut rng);
        let lhs: f64 = up.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let back = upsample2_backward(&g);
        let rhs: f64 = x.data.iter().zip(&back.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn mean_broadcast_values_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_tensor(vec![3, 2, 4], &mut rng);
        let out = mean_broadcast(&x, 5, 6);
        assert_eq!(out.shape, vec![3, 5, 6]);
        for c in 0..3 {
            let mean = x.data[c * 8..(c + 1) * 8].iter().sum::<f64>() / 8.0;
            for v in &out.data[c * 30..(c + 1) * 30] {
                assert!((v - mean).abs() < 1e-12);
            }
        }
        // Adjoint identity: <mean_broadcast(x), g> == <x, backward(g)>.
        let g = random_tensor(vec![3, 5, 6], &mut rng);
        let lhs: f64 = out.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let back = mean_broadcast_backward(&g, 2, 4);
        assert_eq!(back.shape, x.shape);
        let rhs: f64 = x.data.iter().zip(&back.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn concat_and_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(vec![2, 3, 3], &mut rng);
        let b = random_tensor(vec![4, 3, 3], &mut rng);
        let joined = concat(&a, &b).unwrap();
        assert_eq!(joined.shape, vec![6, 3, 3]);
        let (ga, gb) = concat_backward(&joined, 2);
        assert_eq!(ga, a);
        assert_eq!(gb, b);
        let mismatched = Tensor::zeros(vec![1, 4, 3]);
        assert!(concat(&a, &mismatched).is_err());
    }

    #[test]
    fn sigmoid_range_and_symmetry() {
        let x = Tensor::new(vec![1, 1, 5], vec![-30.0, -1.0, 0.0, 1.0, 30.0]);
        let s = sigmoid(&x);
        assert!(s.data.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!((s.data[2] - 0.5).abs() < 1e-15);
        assert!((s.data[1] + s.data[3] - 1.0).abs() < 1e-12);
    }
}
