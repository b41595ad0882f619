use num_complex::Complex64;

use crate::mimo::{CodingPair, CodingVector, ComplexChannel};

fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Rotates `v` so its largest-magnitude entry is real and positive, then
/// quantizes each component to its sign (`sgn(0) = +1`).
fn align_and_quantize(mut v: Vec<Complex64>) -> CodingVector {
    let (pivot, _) = v.iter().enumerate().fold((0, -1.0), |(bi, bm), (i, z)| {
        let m = z.norm();
        if m > bm {
            (i, m)
        } else {
            (bi, bm)
        }
    });
    let mag = v[pivot].norm();
    if mag > 0.0 {
        let phase = v[pivot].conj() / mag;
        for z in v.iter_mut() {
            *z *= phase;
        }
        v[pivot] = Complex64::new(mag, 0.0);
    }
    CodingVector::new(v.iter().map(|z| Complex64::new(sgn(z.re), sgn(z.im))).collect())
        .expect("sign quantization stays on the alphabet")
}

/// Quantized dominant singular pair of the channel: with `H ≈ σ₁ u vᴴ`,
/// `f = Q(v)` and `g = Q(u)`.
pub fn rq_baseline(channel: &ComplexChannel) -> CodingPair {
    let svd = channel.entries().clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bs), (i, &s)| if s > bs { (i, s) } else { (bi, bs) },
        )
        .0;
    let left: Vec<Complex64> = u.column(k).iter().copied().collect();
    // Row k of Vᴴ is v_kᴴ.
    let right: Vec<Complex64> = v_t.row(k).iter().map(|z| z.conj()).collect();
    CodingPair::new(align_and_quantize(right), align_and_quantize(left))
}
