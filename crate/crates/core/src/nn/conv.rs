//! Stride-1, unpadded ("valid") 2-D convolution and its transpose, both
//! lowered to a single GEMM over the whole batch through im2col.

use rand::Rng;

use super::gemm::gemm;
use super::param::Param;

/// Unfolds `x` (`n x c x h x w`) into a `(c*k*k) x (n*ho*wo)` matrix with
/// `ho = h - k + 1`, `wo = w - k + 1`.
pub fn im2col(x: &[f64], n: usize, c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let (ho, wo) = (h + 1 - k, w + 1 - k);
    let p = ho * wo;
    let cols_w = n * p;
    let mut cols = vec![0.0; c * k * k * cols_w];
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let dst = &mut cols[row * cols_w..(row + 1) * cols_w];
                for s in 0..n {
                    let img = &x[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                    for i in 0..ho {
                        let src = &img[(i + ki) * w + kj..(i + ki) * w + kj + wo];
                        dst[s * p + i * wo..s * p + i * wo + wo].copy_from_slice(src);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-adds the columns back into an
/// `n x c x h x w` image.
pub fn col2im(cols: &[f64], n: usize, c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let (ho, wo) = (h + 1 - k, w + 1 - k);
    let p = ho * wo;
    let cols_w = n * p;
    let mut x = vec![0.0; n * c * h * w];
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let src = &cols[row * cols_w..(row + 1) * cols_w];
                for s in 0..n {
                    let img = &mut x[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                    for i in 0..ho {
                        let dst = &mut img[(i + ki) * w + kj..(i + ki) * w + kj + wo];
                        for (d, v) in dst.iter_mut().zip(&src[s * p + i * wo..s * p + i * wo + wo]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    x
}

/// `[n][c][p]` <-> `[c][n][p]`.
fn swap_outer(x: &[f64], a: usize, b: usize, p: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for i in 0..a {
        for j in 0..b {
            y[(j * a + i) * p..(j * a + i + 1) * p].copy_from_slice(&x[(i * b + j) * p..(i * b + j + 1) * p]);
        }
    }
    y
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    /// `out x (in*k*k)`
    pub weight: Param,
    pub bias: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

/// Saved activations for [`Conv2d::backward`].
#[derive(Clone, Debug)]
pub struct ConvTape {
    cols: Vec<f64>,
    n: usize,
    h: usize,
    w: usize,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(name: &str, in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            weight: Param::uniform(format!("{name}.weight"), &[out_channels, fan_in], bound, rng),
            bias: Param::uniform(format!("{name}.bias"), &[out_channels], bound, rng),
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 1 - self.kernel, w + 1 - self.kernel)
    }

    pub fn forward(&self, x: &[f64], n: usize, h: usize, w: usize) -> (Vec<f64>, ConvTape) {
        let k = self.kernel;
        let (ho, wo) = self.output_hw(h, w);
        let p = ho * wo;
        let cols = im2col(x, n, self.in_channels, h, w, k);
        let mut y_cn = vec![0.0; self.out_channels * n * p];
        for (o, chunk) in y_cn.chunks_mut(n * p).enumerate() {
            chunk.fill(self.bias.value[o]);
        }
        gemm(
            self.out_channels,
            self.in_channels * k * k,
            n * p,
            1.0,
            &self.weight.value,
            false,
            &cols,
            false,
            1.0,
            &mut y_cn,
        );
        let y = swap_outer(&y_cn, self.out_channels, n, p);
        (y, ConvTape { cols, n, h, w })
    }

    pub fn backward(&mut self, tape: &ConvTape, dy: &[f64], need_dx: bool) -> Option<Vec<f64>> {
        let k = self.kernel;
        let (ho, wo) = self.output_hw(tape.h, tape.w);
        let p = ho * wo;
        let n = tape.n;
        let ckk = self.in_channels * k * k;
        let dy_cn = swap_outer(dy, n, self.out_channels, p);
        gemm(self.out_channels, n * p, ckk, 1.0, &dy_cn, false, &tape.cols, true, 1.0, &mut self.weight.grad);
        for (o, chunk) in dy_cn.chunks(n * p).enumerate() {
            self.bias.grad[o] += chunk.iter().sum::<f64>();
        }
        need_dx.then(|| {
            let mut dcols = vec![0.0; ckk * n * p];
            gemm(ckk, self.out_channels, n * p, 1.0, &self.weight.value, true, &dy_cn, false, 0.0, &mut dcols);
            col2im(&dcols, n, self.in_channels, tape.h, tape.w, k)
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Transposed convolution: maps `h x w` to `(h+k-1) x (w+k-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose2d {
    /// `in x (out*k*k)`
    pub weight: Param,
    pub bias: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

#[derive(Clone, Debug)]
pub struct ConvTransposeTape {
    x_cn: Vec<f64>,
    n: usize,
    h: usize,
    w: usize,
}

impl ConvTranspose2d {
    pub fn new<R: Rng + ?Sized>(name: &str, in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            weight: Param::uniform(
                format!("{name}.weight"),
                &[in_channels, out_channels * kernel * kernel],
                bound,
                rng,
            ),
            bias: Param::uniform(format!("{name}.bias"), &[out_channels], bound, rng),
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h + self.kernel - 1, w + self.kernel - 1)
    }

    pub fn forward(&self, x: &[f64], n: usize, h: usize, w: usize) -> (Vec<f64>, ConvTransposeTape) {
        let k = self.kernel;
        let (ho, wo) = self.output_hw(h, w);
        let p = h * w;
        let x_cn = swap_outer(x, n, self.in_channels, p);
        let okk = self.out_channels * k * k;
        let mut cols = vec![0.0; okk * n * p];
        gemm(okk, self.in_channels, n * p, 1.0, &self.weight.value, true, &x_cn, false, 0.0, &mut cols);
        let mut y = col2im(&cols, n, self.out_channels, ho, wo, k);
        let plane = ho * wo;
        for s in 0..n {
            for o in 0..self.out_channels {
                let b = self.bias.value[o];
                for v in &mut y[(s * self.out_channels + o) * plane..(s * self.out_channels + o + 1) * plane] {
                    *v += b;
                }
            }
        }
        (y, ConvTransposeTape { x_cn, n, h, w })
    }

    pub fn backward(&mut self, tape: &ConvTransposeTape, dy: &[f64], need_dx: bool) -> Option<Vec<f64>> {
        let k = self.kernel;
        let (n, h, w) = (tape.n, tape.h, tape.w);
        let (ho, wo) = self.output_hw(h, w);
        let p = h * w;
        let okk = self.out_channels * k * k;
        let dcols = im2col(dy, n, self.out_channels, ho, wo, k);
        gemm(self.in_channels, n * p, okk, 1.0, &tape.x_cn, false, &dcols, true, 1.0, &mut self.weight.grad);
        let plane = ho * wo;
        for s in 0..n {
            for o in 0..self.out_channels {
                self.bias.grad[o] += dy[(s * self.out_channels + o) * plane..(s * self.out_channels + o + 1) * plane]
                    .iter()
                    .sum::<f64>();
            }
        }
        need_dx.then(|| {
            let mut dx_cn = vec![0.0; self.in_channels * n * p];
            gemm(self.in_channels, okk, n * p, 1.0, &self.weight.value, false, &dcols, false, 0.0, &mut dx_cn);
            swap_outer(&dx_cn, self.in_channels, n, p)
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Direct nested-loop convolution, independent of im2col.
    fn direct_conv(conv: &Conv2d, x: &[f64], n: usize, h: usize, w: usize) -> Vec<f64> {
        let k = conv.kernel;
        let (ho, wo) = conv.output_hw(h, w);
        let c = conv.in_channels;
        let mut y = vec![0.0; n * conv.out_channels * ho * wo];
        for s in 0..n {
            for o in 0..conv.out_channels {
                for i in 0..ho {
                    for j in 0..wo {
                        let mut acc = conv.bias.value[o];
                        for ch in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    acc += conv.weight.value[o * c * k * k + (ch * k + ki) * k + kj]
                                        * x[((s * c + ch) * h + i + ki) * w + j + kj];
                                }
                            }
                        }
                        y[((s * conv.out_channels + o) * ho + i) * wo + j] = acc;
                    }
                }
            }
        }
        y
    }

    /// Direct scatter form of the transposed convolution.
    fn direct_conv_t(ct: &ConvTranspose2d, x: &[f64], n: usize, h: usize, w: usize) -> Vec<f64> {
        let k = ct.kernel;
        let (ho, wo) = ct.output_hw(h, w);
        let oc = ct.out_channels;
        let mut y = vec![0.0; n * oc * ho * wo];
        for s in 0..n {
            for o in 0..oc {
                for v in &mut y[(s * oc + o) * ho * wo..(s * oc + o + 1) * ho * wo] {
                    *v = ct.bias.value[o];
                }
            }
            for ci in 0..ct.in_channels {
                for i in 0..h {
                    for j in 0..w {
                        let xv = x[((s * ct.in_channels + ci) * h + i) * w + j];
                        for o in 0..oc {
                            for ki in 0..k {
                                for kj in 0..k {
                                    y[((s * oc + o) * ho + i + ki) * wo + j + kj] +=
                                        xv * ct.weight.value[ci * oc * k * k + (o * k + ki) * k + kj];
                                }
                            }
                        }
                    }
                }
            }
        }
        y
    }

    fn probe(len: usize) -> Vec<f64> {
        (0..len).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect()
    }

    #[test]
    fn conv_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv2d::new("c", 2, 3, 3, &mut rng);
        let x = probe(2 * 2 * 5 * 6);
        let (y, _) = conv.forward(&x, 2, 5, 6);
        let want = direct_conv(&conv, &x, 2, 5, 6);
        assert_eq!(y.len(), want.len());
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_transpose_matches_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ct = ConvTranspose2d::new("t", 3, 2, 3, &mut rng);
        let x = probe(2 * 3 * 2 * 4);
        let (y, _) = ct.forward(&x, 2, 2, 4);
        let want = direct_conv_t(&ct, &x, 2, 2, 4);
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut conv = Conv2d::new("c", 2, 3, 3, &mut rng);
        let (n, h, w) = (2, 4, 5);
        let x = probe(n * 2 * h * w);
        let (y, tape) = conv.forward(&x, n, h, w);
        let c = probe(y.len());
        let loss = |cv: &Conv2d, x: &[f64]| -> f64 { cv.forward(x, n, h, w).0.iter().zip(&c).map(|(a, b)| a * b).sum() };
        let dx = conv.backward(&tape, &c, true).unwrap();
        let eps = 1e-6;
        for idx in 0..conv.weight.len() {
            let mut p = conv.clone();
            p.weight.value[idx] += eps;
            let up = loss(&p, &x);
            p.weight.value[idx] -= 2.0 * eps;
            let fd = (up - loss(&p, &x)) / (2.0 * eps);
            assert!((fd - conv.weight.grad[idx]).abs() < 1e-6, "w{idx}");
        }
        for idx in 0..3 {
            let mut p = conv.clone();
            p.bias.value[idx] += eps;
            let up = loss(&p, &x);
            p.bias.value[idx] -= 2.0 * eps;
            let fd = (up - loss(&p, &x)) / (2.0 * eps);
            assert!((fd - conv.bias.grad[idx]).abs() < 1e-6);
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp[idx] += eps;
            let up = loss(&conv, &xp);
            xp[idx] -= 2.0 * eps;
            let fd = (up - loss(&conv, &xp)) / (2.0 * eps);
            assert!((fd - dx[idx]).abs() < 1e-6, "x{idx}");
        }
    }

    #[test]
    fn conv_transpose_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut ct = ConvTranspose2d::new("t", 2, 3, 3, &mut rng);
        let (n, h, w) = (2, 2, 3);
        let x = probe(n * 2 * h * w);
        let (y, tape) = ct.forward(&x, n, h, w);
        let c = probe(y.len());
        let loss =
            |m: &ConvTranspose2d, x: &[f64]| -> f64 { m.forward(x, n, h, w).0.iter().zip(&c).map(|(a, b)| a * b).sum() };
        let dx = ct.backward(&tape, &c, true).unwrap();
        let eps = 1e-6;
        for idx in 0..ct.weight.len() {
            let mut p = ct.clone();
            p.weight.value[idx] += eps;
            let up = loss(&p, &x);
            p.weight.value[idx] -= 2.0 * eps;
            let fd = (up - loss(&p, &x)) / (2.0 * eps);
            assert!((fd - ct.weight.grad[idx]).abs() < 1e-6, "w{idx}");
        }
        for idx in 0..ct.bias.len() {
            let mut p = ct.clone();
            p.bias.value[idx] += eps;
            let up = loss(&p, &x);
            p.bias.value[idx] -= 2.0 * eps;
            let fd = (up - loss(&p, &x)) / (2.0 * eps);
            assert!((fd - ct.bias.grad[idx]).abs() < 1e-6);
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp[idx] += eps;
            let up = loss(&ct, &xp);
            xp[idx] -= 2.0 * eps;
            let fd = (up - loss(&ct, &xp)) / (2.0 * eps);
            assert!((fd - dx[idx]).abs() < 1e-6, "x{idx}");
        }
    }
}
