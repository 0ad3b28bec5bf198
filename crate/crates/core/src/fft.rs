//! Complex discrete Fourier transforms.
//!
//! Radix-2 Cooley-Tukey for power-of-two lengths, Bluestein's chirp-z
//! reduction for everything else. Transforms are unnormalized:
//! `forward` computes `X_k = Σ_j x_j e^{-2πi jk/n}` and `inverse` uses the
//! opposite sign, so `inverse(forward(x)) = n·x`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<Complex64>,
        kernel_hat: Vec<Complex64>,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform length must be positive");
        if n.is_power_of_two() {
            return Self {
                n,
                kind: Kind::Radix2(Radix2::new(n)),
            };
        }
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // chirp_j = e^{-iπ j²/n}; j² is reduced mod 2n to keep the angle small.
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                let jj = ((j as u128 * j as u128) % (2 * n as u128)) as f64;
                let a = -PI * jj / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..n {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.run(&mut kernel, false);
        Self {
            n,
            kind: Kind::Bluestein {
                inner,
                chirp,
                kernel_hat: kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "buffer length does not match the plan");
        match &self.kind {
            Kind::Radix2(r) => r.run(data, inverse),
            Kind::Bluestein {
                inner,
                chirp,
                kernel_hat,
            } => {
                // The inverse transform is conj(forward(conj(x))).
                let m = inner.n;
                let mut buf = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..self.n {
                    let x = if inverse { data[j].conj() } else { data[j] };
                    buf[j] = x * chirp[j];
                }
                inner.run(&mut buf, false);
                for (b, k) in buf.iter_mut().zip(kernel_hat) {
                    *b *= k;
                }
                inner.run(&mut buf, true);
                let scale = 1.0 / m as f64;
                for k in 0..self.n {
                    let y = buf[k] * chirp[k] * scale;
                    data[k] = if inverse { y.conj() } else { y };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                    let a = sign * 2.0 * PI * (j * k) as f64 / n as f64;
                    acc + v * Complex64::new(libm::cos(a), libm::sin(a))
                })
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new(libm::sin(j as f64 * 0.7) + 0.1 * j as f64, libm::cos(j as f64 * 1.3)))
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 16, 17, 31, 64, 100] {
            let x = signal(n);
            let plan = Fft::new(n);
            let mut f = x.clone();
            plan.forward(&mut f);
            let expect = naive(&x, -1.0);
            for (a, b) in f.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-9 * n as f64, "n={n}");
            }
            let mut g = x.clone();
            plan.inverse(&mut g);
            let expect = naive(&x, 1.0);
            for (a, b) in g.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-9 * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn round_trip_scales_by_length() {
        let x = signal(48);
        let plan = Fft::new(48);
        let mut y = x.clone();
        plan.forward(&mut y);
        plan.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a * 48.0 - b).norm() < 1e-10);
        }
    }
}
