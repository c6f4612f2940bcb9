//! Monte Carlo plumbing: counter-based substreams, order-stable reductions
//! and the complex estimate type.
//!
//! Samples are grouped in fixed-size blocks. Each block draws from its own
//! substream and the block statistics are merged in index order, so the
//! result does not depend on how rayon schedules the blocks.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per substream block.
pub const BLOCK: u64 = 1024;

/// Random generator for substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Pairwise summation; the association order depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Complex Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: Complex64,
    /// Real and imaginary standard errors combined in quadrature.
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub epsilon: Option<f64>,
}

impl McEstimate {
    /// |value - target| in units of the standard error.
    pub fn z_score(&self, target: Complex64) -> f64 {
        let d = (self.value - target).norm();
        if self.stderr == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.stderr
        }
    }

    pub fn within(&self, target: Complex64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    /// Multiply by a deterministic constant.
    pub fn scale(mut self, c: Complex64) -> Self {
        self.value *= c;
        self.stderr *= c.norm();
        self
    }
}

/// Running mean and squared deviations of one real component.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. merge of two partial results.
    pub fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n > 0.0 {
            (self.variance() / self.n).sqrt()
        } else {
            0.0
        }
    }
}

fn merge_tree<T: Copy>(v: &[T], merge: &impl Fn(T, T) -> T) -> T {
    if v.len() == 1 {
        return v[0];
    }
    let mid = v.len() / 2;
    merge(merge_tree(&v[..mid], merge), merge_tree(&v[mid..], merge))
}

/// Mean of `n_samples` draws of `draw(rng, sample_index)`.
///
/// Deterministic for a fixed seed under any thread count.
pub fn estimate<F>(n_samples: u64, seed: u64, draw: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng, u64) -> Complex64 + Sync,
{
    let blocks = n_samples.div_ceil(BLOCK).max(1);
    let parts: Vec<(Moments, Moments)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let (mut re, mut im) = (Moments::default(), Moments::default());
            let end = ((b + 1) * BLOCK).min(n_samples);
            for i in b * BLOCK..end {
                let z = draw(&mut rng, i);
                re.push(z.re);
                im.push(z.im);
            }
            (re, im)
        })
        .collect();
    let (re, im) = merge_tree(&parts, &|x: (Moments, Moments), y: (Moments, Moments)| {
        (x.0.merge(y.0), x.1.merge(y.1))
    });
    McEstimate {
        value: Complex64::new(re.mean, im.mean),
        stderr: re.stderr().hypot(im.stderr()),
        n_samples,
        seed,
        epsilon: None,
    }
}

/// Block-parallel fold producing per-sample vectors of real statistics.
///
/// `draw` returns `dim` values per sample; the result holds their moments.
pub fn estimate_many<F>(n_samples: u64, seed: u64, dim: usize, draw: F) -> Vec<Moments>
where
    F: Fn(&mut ChaCha8Rng, u64, &mut [f64]) + Sync,
{
    let blocks = n_samples.div_ceil(BLOCK).max(1);
    let parts: Vec<Vec<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let mut acc = vec![Moments::default(); dim];
            let mut buf = vec![0.0; dim];
            let end = ((b + 1) * BLOCK).min(n_samples);
            for i in b * BLOCK..end {
                draw(&mut rng, i, &mut buf);
                for (a, x) in acc.iter_mut().zip(&buf) {
                    a.push(*x);
                }
            }
            acc
        })
        .collect();
    (0..dim)
        .map(|k| {
            let col: Vec<Moments> = parts.iter().map(|p| p[k]).collect();
            merge_tree(&col, &|x: Moments, y: Moments| x.merge(y))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn uniform_mean() {
        let e = estimate(100_000, 7, |r, _| Complex64::new(r.random::<f64>(), 0.0));
        assert!(e.within(Complex64::new(0.5, 0.0), 4.0));
        assert!((e.stderr - (1.0f64 / 12.0 / 1e5).sqrt()).abs() < 2e-5);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let f = |r: &mut ChaCha8Rng, i: u64| Complex64::new(r.random::<f64>() * i as f64, r.random());
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| estimate(10_000, 3, f));
        let b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| estimate(10_000, 3, f));
        assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..37].iter().for_each(|x| a.push(*x));
        xs[37..].iter().for_each(|x| b.push(*x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-14);
        assert!((m.m2 - all.m2).abs() < 1e-12);
    }
}
