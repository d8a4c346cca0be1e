use rand::Rng;

use super::gemm::gemm;
use super::param::Param;

/// Fully connected layer, `y = x W^T + b` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            weight: Param::uniform(format!("{name}.weight"), &[output, input], bound, rng),
            bias: Param::uniform(format!("{name}.bias"), &[output], bound, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let (i, o) = (self.input_dim(), self.output_dim());
        let mut y = Vec::with_capacity(rows * o);
        for _ in 0..rows {
            y.extend_from_slice(&self.bias.value);
        }
        gemm(rows, i, o, 1.0, x, false, &self.weight.value, true, 1.0, &mut y);
        y
    }

    /// Accumulates parameter gradients; returns `dL/dx` when asked.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], rows: usize, need_dx: bool) -> Option<Vec<f64>> {
        let (i, o) = (self.input_dim(), self.output_dim());
        gemm(o, rows, i, 1.0, dy, true, x, false, 1.0, &mut self.weight.grad);
        for r in 0..rows {
            for (g, d) in self.bias.grad.iter_mut().zip(&dy[r * o..(r + 1) * o]) {
                *g += d;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![0.0; rows * i];
            gemm(rows, o, i, 1.0, dy, false, &self.weight.value, false, 0.0, &mut dx);
            dx
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

    fn loss(l: &Linear, x: &[f64], rows: usize) -> f64 {
        l.forward(x, rows).iter().enumerate().map(|(i, y)| (i as f64 + 1.0).sqrt() * y).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l = Linear::new("fc", 3, 2, &mut rng);
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).cos()).collect();
        let dy: Vec<f64> = (0..8).map(|i| (i as f64 + 1.0).sqrt()).collect();
        let dx = l.backward(&x, &dy, 4, true).unwrap();
        let h = 1e-6;
        for k in 0..l.weight.len() {
            let mut p = l.clone();
            p.weight.value[k] += h;
            let up = loss(&p, &x, 4);
            p.weight.value[k] -= 2.0 * h;
            let fd = (up - loss(&p, &x, 4)) / (2.0 * h);
            assert!((fd - l.weight.grad[k]).abs() < 1e-7);
        }
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let up = loss(&l, &xp, 4);
            xp[k] -= 2.0 * h;
            let fd = (up - loss(&l, &xp, 4)) / (2.0 * h);
            assert!((fd - dx[k]).abs() < 1e-7);
        }
        let db: f64 = (0..4).map(|r| dy[r * 2]).sum();
        assert!((l.bias.grad[0] - db).abs() < 1e-12);
    }
}
