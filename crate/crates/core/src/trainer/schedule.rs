/// Gaussian ramp-up `exp[−5(1 − t/length)²]`, exactly 1 from `t = length` on.
pub fn rampup_weight(epoch: usize, length: usize) -> f64 {
    if epoch >= length {
        return 1.0;
    }
    let phase = 1.0 - epoch as f64 / length as f64;
    (-5.0 * phase * phase).exp()
}

/// Learning-rate ramp-down `exp[−12.5(1 − (T − t)/length)²]` over the final `length`
/// epochs of a `total`-epoch run, 1 before that.
pub fn rampdown_factor(epoch: usize, total: usize, length: usize) -> f64 {
    if length == 0 || epoch + length <= total {
        return 1.0;
    }
    let remaining = total.saturating_sub(epoch) as f64;
    let phase = 1.0 - remaining / length as f64;
    (-12.5 * phase * phase).exp()
}
