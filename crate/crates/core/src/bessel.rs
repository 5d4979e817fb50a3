//! Exponentially scaled modified Bessel functions of the first kind.

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

/// `e^{-x} I_k(x)` for `k = 0..=kmax`, `x >= 0`.
///
/// Miller's backward recurrence `I_{k-1} = I_{k+1} + (2k/x) I_k`, started
/// well above both `kmax` and `x`, normalised with
/// `e^x = I_0(x) + 2 sum_{k>=1} I_k(x)`. The scaled values never overflow,
/// so large effective times are safe.
pub fn scaled_bessel_i(kmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "argument must be finite and nonnegative");
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = kmax.max(x.ceil() as usize);
    let start = 2 * (top + (40.0 * top as f64).sqrt() as usize) + 20;

    let mut above = 0.0; // I_{k+1}
    let mut current = 1e-30; // I_k
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        let below = above + (2.0 * k as f64 / x) * current;
        if k <= kmax {
            out[k] = current;
        }
        sum += 2.0 * current;
        above = current;
        current = below;
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            sum *= RESCALE_BY;
            out.iter_mut().for_each(|v| *v *= RESCALE_BY);
        }
    }
    out[0] = current;
    sum += current;
    out.iter_mut().for_each(|v| *v /= sum);
    out
}
