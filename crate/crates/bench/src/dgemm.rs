//! `C += A * B` for square row-major matrices of 64-bit floats.

use latchmp::omp::{for_static, parallel_region};
use latchmp::Runtime;

use crate::error::BenchError;
use crate::raw::RawSlice;
use crate::rng::Lcg;

pub const TOLERANCE: f64 = 1e-10;

/// Reference triple loop, dot-product order.
pub fn serial(n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = c[i * n + j];
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            c[i * n + j] = s;
        }
    }
}

/// Parallel kernel: rows of C are distributed by a static worksharing loop.
pub fn parallel(
    rt: &Runtime,
    threads: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
) -> Result<(), BenchError> {
    assert!(a.len() == n * n && b.len() == n * n && c.len() == n * n);
    let out = RawSlice::new(c);
    rt.run(|| {
        parallel_region(threads, |_| {
            for_static(0..n, None, |i| {
                // SAFETY: row i belongs to exactly one member
                let row = unsafe { out.sub(i * n..(i + 1) * n).as_mut() };
                for k in 0..n {
                    let aik = a[i * n + k];
                    let bk = &b[k * n..(k + 1) * n];
                    for (cij, bkj) in row.iter_mut().zip(bk) {
                        *cij += aik * bkj;
                    }
                }
            })
            .expect("unchunked static schedule");
        })
    })?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Inputs {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Inputs {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = Lcg::new(seed);
        let mut fill = || (0..n * n).map(|_| rng.next_f64() - 0.5).collect::<Vec<_>>();
        let (a, b, c) = (fill(), fill(), fill());
        Inputs { n, a, b, c }
    }

    pub fn expected(&self) -> Vec<f64> {
        let mut c = self.c.clone();
        serial(self.n, &self.a, &self.b, &mut c);
        c
    }
}

/// Element-wise relative comparison: |got - want| <= tol * max(1, |want|).
pub fn verify(got: &[f64], want: &[f64], tol: f64) -> Result<(), BenchError> {
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if (g - w).abs() > tol * w.abs().max(1.0) || g.is_nan() {
            return Err(BenchError::Verification {
                benchmark: "dgemm".into(),
                detail: format!("C[{i}] = {g} but serial loop gives {w}"),
            });
        }
    }
    if got.len() != want.len() {
        return Err(BenchError::Verification {
            benchmark: "dgemm".into(),
            detail: format!("length {} != {}", got.len(), want.len()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_hand_case() {
        let rt = Runtime::new(1).unwrap();
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        parallel(&rt, 2, 2, &a, &b, &mut c).unwrap();
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        let mut s = [0.0; 4];
        serial(2, &a, &b, &mut s);
        assert_eq!(s, c);
    }

    #[test]
    fn identity_adds_b_exactly() {
        let rt = Runtime::new(2).unwrap();
        let n = 17;
        let inp = Inputs::random(n, 9);
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        let mut c = inp.c.clone();
        parallel(&rt, 3, n, &id, &inp.b, &mut c).unwrap();
        for ((got, c0), b) in c.iter().zip(&inp.c).zip(&inp.b) {
            assert_eq!(*got, c0 + b);
        }
    }

    #[test]
    fn parallel_matches_serial_within_tolerance() {
        let rt = Runtime::new(2).unwrap();
        let inp = Inputs::random(64, 4);
        let want = inp.expected();
        for threads in [1, 3, 4] {
            let mut c = inp.c.clone();
            parallel(&rt, threads, 64, &inp.a, &inp.b, &mut c).unwrap();
            verify(&c, &want, TOLERANCE).unwrap();
        }
    }

    #[test]
    fn verify_flags_large_error() {
        assert!(verify(&[1.0], &[1.0 + 1e-6], TOLERANCE).is_err());
        assert!(verify(&[1e6], &[1e6 * (1.0 + 1e-12)], TOLERANCE).is_ok());
    }
}
