//! `b = c * a + b` over 32-bit floats.

use latchmp::omp::{for_static, parallel_region};
use latchmp::Runtime;

use crate::error::BenchError;
use crate::raw::RawSlice;
use crate::rng::Lcg;

/// Floating-point operations per element: one multiply, one add.
pub const FLOPS_PER_ELEMENT: f64 = 2.0;

pub fn mflops(n: usize, seconds: f64) -> f64 {
    FLOPS_PER_ELEMENT * n as f64 / seconds / 1e6
}

pub fn serial(c: f32, a: &[f32], b: &mut [f32]) {
    for (bi, ai) in b.iter_mut().zip(a) {
        *bi += c * *ai;
    }
}

/// Parallel kernel: a worksharing loop inside a team of `threads`.
pub fn parallel(
    rt: &Runtime,
    threads: usize,
    c: f32,
    a: &[f32],
    b: &mut [f32],
) -> Result<(), BenchError> {
    assert_eq!(a.len(), b.len(), "daxpy operands differ in length");
    let n = a.len();
    let out = RawSlice::new(b);
    rt.run(|| {
        parallel_region(threads, |_| {
            for_static(0..n, None, |i| {
                // SAFETY: the static schedule hands each index to one member
                let bi = unsafe { out.at(i) };
                *bi += c * a[i];
            })
            .expect("unchunked static schedule");
        })
    })?;
    Ok(())
}

/// Scalar and operands for one run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub c: f32,
    pub a: Vec<f32>,
    pub b: Vec<f32>,
}

impl Inputs {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = Lcg::new(seed);
        let a = (0..n).map(|_| rng.next_f32()).collect();
        let b = (0..n).map(|_| rng.next_f32()).collect();
        Inputs { c: 2.0, a, b }
    }

    pub fn expected(&self) -> Vec<f32> {
        let mut b = self.b.clone();
        serial(self.c, &self.a, &mut b);
        b
    }
}

/// Bitwise comparison; reports the first differing index.
pub fn verify(got: &[f32], want: &[f32]) -> Result<(), BenchError> {
    if got.len() != want.len() {
        return Err(BenchError::Verification {
            benchmark: "daxpy".into(),
            detail: format!("length {} != {}", got.len(), want.len()),
        });
    }
    match got
        .iter()
        .zip(want)
        .position(|(g, w)| g.to_bits() != w.to_bits())
    {
        None => Ok(()),
        Some(i) => Err(BenchError::Verification {
            benchmark: "daxpy".into(),
            detail: format!("b[{i}] = {} but serial pass gives {}", got[i], want[i]),
        }),
    }
}
