//! Mixed-radix decimation-in-time FFT.
//!
//! Lengths factor into small primes handled by a generic radix-p butterfly;
//! any prime factor above [`MAX_DIRECT_RADIX`] sends the whole transform
//! through Bluestein's chirp-z with a power-of-two inner FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

const MAX_DIRECT_RADIX: usize = 31;

/// `exp(-2 pi i j / n)` for every `j < n`, each evaluated directly so the
/// table carries no accumulated rotation error.
fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let (s, c) = (-2.0 * PI * j as f64 / n as f64).sin_cos();
            Complex64::new(c, s)
        })
        .collect()
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut f = Vec::new();
    while n % 4 == 0 {
        f.push(4);
        n /= 4;
    }
    let mut p = 2;
    while n > 1 {
        while n % p == 0 {
            f.push(p);
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
        if p * p > n && n > 1 {
            f.push(n);
            break;
        }
    }
    f
}

struct Plan {
    n: usize,
    factors: Vec<usize>,
    tw: Vec<Complex64>,
}

impl Plan {
    fn new(n: usize) -> Self {
        Plan { n, factors: factorize(n), tw: twiddles(n) }
    }

    /// Unnormalized forward DFT of `input[offset + stride * j]`, j < len.
    fn run(&self, input: &[Complex64], offset: usize, stride: usize, level: usize, out: &mut [Complex64]) {
        let len = out.len();
        if len == 1 {
            out[0] = input[offset];
            return;
        }
        let p = self.factors[level];
        let m = len / p;
        for r in 0..p {
            self.run(input, offset + r * stride, stride * p, level + 1, &mut out[r * m..(r + 1) * m]);
        }
        // Twiddle step: W_len^(r k) = tw[(r k n / len) mod n].
        let step = self.n / len;
        let mut scratch = vec![Complex64::new(0.0, 0.0); p];
        for k in 0..m {
            for (r, s) in scratch.iter_mut().enumerate() {
                *s = out[r * m + k] * self.tw[(r * k * step) % self.n];
            }
            for q in 0..p {
                let mut acc = Complex64::new(0.0, 0.0);
                for (r, s) in scratch.iter().enumerate() {
                    acc += s * self.tw[((r * q) % p) * (self.n / p)];
                }
                out[q * m + k] = acc;
            }
        }
    }
}

/// Unnormalized forward DFT, `X_k = sum_j x_j exp(-2 pi i j k / n)`.
pub fn fft_complex(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    let factors = factorize(n);
    if factors.iter().any(|&p| p > MAX_DIRECT_RADIX) {
        return bluestein(x);
    }
    let plan = Plan::new(n);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    plan.run(x, 0, 1, 0, &mut out);
    out
}

fn bluestein(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp_j = exp(-i pi j^2 / n); j^2 taken mod 2n keeps the angle small.
    let chirp: Vec<Complex64> = (0..n)
        .map(|j| {
            let jj = ((j as u128 * j as u128) % (2 * n as u128)) as f64;
            let (s, c) = (-PI * jj / n as f64).sin_cos();
            Complex64::new(c, s)
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..n {
        a[j] = x[j] * chirp[j];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for j in 1..n {
        b[j] = chirp[j].conj();
        b[m - j] = chirp[j].conj();
    }
    let fa = fft_complex(&a);
    let fb = fft_complex(&b);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(p, q)| (p * q).conj()).collect();
    // Inverse via conjugation.
    let conv = fft_complex(&prod);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| conv[k].conj() * scale * chirp[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let (s, c) = (-2.0 * PI * ((j * k) % n) as f64 / n as f64).sin_cos();
                        v * Complex64::new(c, s)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn factorization() {
        assert_eq!(factorize(1280), vec![4, 4, 4, 4, 5]);
        assert_eq!(factorize(2 * 3 * 3 * 37), vec![2, 3, 3, 37]);
        assert_eq!(factorize(97), vec![97]);
    }

    #[test]
    fn matches_dft_on_awkward_lengths() {
        for n in [2usize, 3, 6, 12, 30, 97, 100, 222, 1000] {
            let x: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos()))
                .collect();
            let a = fft_complex(&x);
            let b = dft(&x);
            let scale: f64 = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).norm() < 1e-11 * scale, "n = {n}");
            }
        }
    }
}
