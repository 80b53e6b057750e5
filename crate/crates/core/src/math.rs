//! Scalar numerics shared by the transforms, the sampler and the reports:
//! standard normal CDF/quantile, interval probabilities, a truncated-normal
//! sampler, the Gauss–Hermite rule used for categorical probabilities, and a
//! handful of small helpers.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

/// Probabilities are floored here before taking logs inside the sampler.
pub const PROB_FLOOR: f64 = 1e-300;

/// Truncation points beyond this many standard deviations switch the
/// truncated-normal sampler from inverse-CDF to rejection.
pub const TAIL_SWITCH: f64 = 5.0;

/// Number of Gauss–Hermite nodes for categorical (multinomial probit) probabilities.
pub const HERMITE_NODES: usize = 61;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// log N(x; mean, sd²)
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_ln_pdf((x - mean) / sd) - sd.ln()
}

/// Φ(x), accurate in the lower tail.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// 1 − Φ(x), accurate in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// Φ⁻¹(p) for p in (0, 1); returns ±∞ at the endpoints.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// P(a < X ≤ b) for X ~ N(0, 1), evaluated on whichever tail avoids cancellation.
pub fn std_normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let p = if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    };
    p.max(0.0)
}

/// Numerically stable log(1 + eˣ).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// log(eˣ − 1) for x > 0, the inverse of softplus.
pub fn softplus_inv(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// H_n = Σ_{i=1..n} 1/i
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// log Poisson(j; rate), with rate = 0 giving a point mass at 0.
pub fn poisson_ln_pmf(j: u64, rate: f64) -> f64 {
    if rate <= 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    j as f64 * rate.ln() - rate - ln_factorial(j)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Draw an index with probability proportional to exp(log_weights[i]).
pub fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let norm = log_sum_exp(log_weights);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lw) in log_weights.iter().enumerate() {
        acc += (lw - norm).exp();
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the cumulative sum
    log_weights
        .iter()
        .rposition(|w| *w > f64::NEG_INFINITY)
        .unwrap_or(0)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Draw from N(mean, sd²) truncated to (lower, upper). Either bound may be
/// infinite. Uses inverse-CDF sampling in the body of the distribution and
/// rejection sampling once the interval lies entirely beyond five standard
/// deviations.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
) -> f64 {
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    mean + sd * sample_std_truncated(rng, a, b)
}

/// Standard normal truncated to (a, b).
pub fn sample_std_truncated<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b, "empty truncation interval ({a}, {b})");
    if a >= b {
        return a;
    }
    if a > TAIL_SWITCH {
        return sample_upper_tail(rng, a, b);
    }
    if b < -TAIL_SWITCH {
        return -sample_upper_tail(rng, -b, -a);
    }
    if a >= 0.0 {
        // work in the lower tail where Φ keeps its relative precision
        return -inverse_cdf_body(rng, -b, -a);
    }
    inverse_cdf_body(rng, a, b)
}

fn inverse_cdf_body<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let pa = std_normal_cdf(a);
    let pb = std_normal_cdf(b);
    let u: f64 = rng.gen();
    let x = std_normal_quantile(pa + u * (pb - pa));
    if x.is_finite() {
        x.clamp(a, b)
    } else if a.is_finite() {
        a
    } else {
        b
    }
}

/// Standard normal restricted to (a, b) with a > 0 far in the tail.
fn sample_upper_tail<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if (b - a) * a < 2.0 {
        // narrow slab: uniform proposal, density ratio bounded by its value at a
        loop {
            let x = a + (b - a) * rng.gen::<f64>();
            let u: f64 = rng.gen();
            if u.ln() <= -0.5 * (x * x - a * a) {
                return x;
            }
        }
    }
    // translated-exponential proposal with the optimal rate
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let x = a + exp.sample(rng);
        if x > b {
            continue;
        }
        let u: f64 = rng.gen();
        if u.ln() <= -0.5 * (x - rate) * (x - rate) {
            return x;
        }
    }
}

pub fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gauss–Hermite nodes and weights for ∫ e^{−x²} g(x) dx.
pub fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite_rule(HERMITE_NODES))
}

/// Newton iteration on the orthonormal Hermite recurrence.
fn gauss_hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermite_rule_integrates_polynomials_and_gaussian_moments() {
        let (x, w) = gauss_hermite();
        assert_eq!(x.len(), HERMITE_NODES);
        let total: f64 = w.iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-12);
        // E[t²] = 1 for t = √2·x under the standard normal
        let second: f64 = x.iter().zip(w).map(|(x, w)| w * 2.0 * x * x).sum::<f64>() / PI.sqrt();
        assert!((second - 1.0).abs() < 1e-12);
        let fourth: f64 =
            x.iter().zip(w).map(|(x, w)| w * 4.0 * x.powi(4)).sum::<f64>() / PI.sqrt();
        assert!((fourth - 3.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_and_quantile_agree() {
        for &p in &[1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() / p < 1e-10, "p = {p}");
        }
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn interval_probability_uses_stable_tail() {
        let p = std_normal_interval(8.0, 9.0);
        assert!(p > 0.0 && p < 1e-14);
        assert!((std_normal_interval(f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-15);
        assert_eq!(std_normal_interval(1.0, 1.0), 0.0);
    }

    #[test]
    fn softplus_round_trip() {
        for &x in &[1e-6, 0.01, 0.5, 1.0, 3.0, 40.0, 700.0] {
            let y = softplus_inv(x);
            assert!((softplus(y) - x).abs() / x < 1e-12, "x = {x}");
        }
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn truncated_normal_respects_bounds_in_every_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cases = [
            (f64::NEG_INFINITY, 0.0),
            (0.0, f64::INFINITY),
            (-0.2, 0.1),
            (2.0, 2.5),
            (5.5, f64::INFINITY),
            (7.0, 7.01),
            (f64::NEG_INFINITY, -9.0),
            (20.0, 30.0),
        ];
        for (a, b) in cases {
            for _ in 0..2000 {
                let x = sample_std_truncated(&mut rng, a, b);
                assert!(x.is_finite() && x >= a && x <= b, "{x} outside ({a}, {b})");
            }
        }
    }

    #[test]
    fn sample_log_weights_handles_degenerate_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        for _ in 0..100 {
            assert_eq!(sample_log_weights(&w, &mut rng), 1);
        }
    }

    #[test]
    fn harmonic_and_poisson() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(poisson_ln_pmf(0, 0.0), 0.0);
        assert_eq!(poisson_ln_pmf(2, 0.0), f64::NEG_INFINITY);
        assert!((poisson_ln_pmf(2, 1.5) - (1.5f64.powi(2) * (-1.5f64).exp() / 2.0).ln()).abs() < 1e-14);
    }
}
