#![allow(dead_code)]

use nmss_core::tensors::ComplexMatrix;
use nmss_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// `g − g†` for a random `g`: a random anti-Hermitian generator.
pub fn random_generator(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, n);
    g.sub(&g.adjoint()).unwrap()
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    nmss_core::tensors::expm_antihermitian(&random_generator(rng, n)).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn to_nalgebra(m: &ComplexMatrix) -> nalgebra::DMatrix<C64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Brute-force state vector, first site most significant.
pub struct Dense {
    pub dims: Vec<usize>,
    pub psi: Vec<C64>,
}

impl Dense {
    pub fn product(locals: &[Vec<C64>]) -> Self {
        let mut psi = vec![C64::new(1.0, 0.0)];
        for v in locals {
            psi = psi.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        Self { dims: locals.iter().map(Vec::len).collect(), psi }
    }

    fn split(&self, i: usize) -> (usize, usize, usize) {
        let outer: usize = self.dims[..i].iter().product();
        let pair = self.dims[i] * self.dims[i + 1];
        let inner: usize = self.dims[i + 2..].iter().product();
        (outer, pair, inner)
    }

    pub fn gate(&mut self, i: usize, u: &ComplexMatrix) {
        let (outer, pair, inner) = self.split(i);
        let mut out = vec![C64::new(0.0, 0.0); self.psi.len()];
        for a in 0..outer {
            for r in 0..pair {
                for c in 0..pair {
                    let g = u[(r, c)];
                    for b in 0..inner {
                        out[(a * pair + r) * inner + b] += g * self.psi[(a * pair + c) * inner + b];
                    }
                }
            }
        }
        self.psi = out;
    }

    pub fn swap(&mut self, i: usize) {
        let (outer, _, inner) = self.split(i);
        let (p, q) = (self.dims[i], self.dims[i + 1]);
        let mut out = vec![C64::new(0.0, 0.0); self.psi.len()];
        for a in 0..outer {
            for x in 0..p {
                for y in 0..q {
                    for b in 0..inner {
                        out[((a * q + y) * p + x) * inner + b] = self.psi[((a * p + x) * q + y) * inner + b];
                    }
                }
            }
        }
        self.psi = out;
        self.dims.swap(i, i + 1);
    }

    pub fn rdm(&self, site: usize) -> ComplexMatrix {
        let outer: usize = self.dims[..site].iter().product();
        let d = self.dims[site];
        let inner: usize = self.dims[site + 1..].iter().product();
        ComplexMatrix::from_fn(d, d, |r, c| {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..outer {
                for b in 0..inner {
                    s += self.psi[(a * d + r) * inner + b] * self.psi[(a * d + c) * inner + b].conj();
                }
            }
            s
        })
    }
}
