//! Exact bootstrap occurrence probabilities and their integer-scaled logs.
//!
//! Drawing N times with replacement from N examples, the number of times a
//! fixed example is drawn is Binomial(N, 1/N). The table carries the exact
//! rational pmf values for 0..=b_max occurrences, the residual tail mass,
//! and log-probabilities scaled to integers for the solver objective.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Integer scale applied to log-probabilities before rounding.
pub const LOG_SCALE: i64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    pub n: usize,
    pub b_max: usize,
    /// Exact pmf values p_b for b in 0..=b_max.
    pub probabilities: Vec<BigRational>,
    /// round(LOG_SCALE * ln p_b), half-to-even; a large negative sentinel
    /// stands in for p_b = 0, which no consistent solution can select.
    pub scaled_log_coeffs: Vec<i64>,
    pub scale: i64,
    /// P(count > b_max), exact.
    pub tail_exact: BigRational,
    pub tail: f64,
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Natural log of a positive big rational, via mantissa/exponent splitting
/// so magnitudes far outside f64 range stay accurate.
fn ln_rational(x: &BigRational) -> f64 {
    fn ln_bigint(v: &BigInt) -> f64 {
        let bits = v.bits();
        if bits <= 52 {
            return v.to_f64().unwrap().ln();
        }
        let shift = bits - 52;
        let mantissa = (v >> shift).to_f64().unwrap();
        mantissa.ln() + shift as f64 * std::f64::consts::LN_2
    }
    debug_assert!(x.is_positive());
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// Exact pmf of Binomial(n, 1/n): p_b = C(n, b) (n-1)^(n-b) / n^n.
fn occurrence_probability(n: usize, b: usize) -> BigRational {
    if b > n {
        return BigRational::zero();
    }
    let numer = binomial(n, b) * BigInt::from(n - 1).pow((n - b) as u32);
    BigRational::new(numer, BigInt::from(n).pow(n as u32))
}

pub fn likelihood_table(n: usize, b_max: usize) -> LikelihoodTable {
    assert!(n >= 1 && b_max >= 1);
    let probabilities: Vec<BigRational> =
        (0..=b_max).map(|b| occurrence_probability(n, b)).collect();
    let mut tail_exact = BigRational::one();
    for p in &probabilities {
        tail_exact -= p;
    }
    let positive_logs: Vec<Option<f64>> = probabilities
        .iter()
        .map(|p| if p.is_positive() { Some(ln_rational(p)) } else { None })
        .collect();
    let floor = positive_logs
        .iter()
        .flatten()
        .fold(f64::INFINITY, |acc, &l| acc.min(l));
    let scaled_log_coeffs: Vec<i64> = positive_logs
        .iter()
        .map(|l| match l {
            Some(l) => (LOG_SCALE as f64 * l).round_ties_even() as i64,
            // Impossible occurrence counts get a coefficient strictly below
            // every real one; they are never selectable in a consistent
            // model, but the objective must stay total.
            None => (LOG_SCALE as f64 * (floor - 100.0)).round_ties_even() as i64,
        })
        .collect();
    LikelihoodTable {
        n,
        b_max,
        probabilities,
        scaled_log_coeffs,
        scale: LOG_SCALE,
        tail: tail_exact.to_f64().unwrap_or(0.0),
        tail_exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_example_is_always_drawn() {
        let table = likelihood_table(1, 1);
        assert!(table.probabilities[0].is_zero());
        assert!(table.probabilities[1].is_one());
        assert_eq!(table.scaled_log_coeffs[1], 0);
        assert!(table.tail_exact.is_zero());
    }

    #[test]
    fn pmf_matches_exact_rationals_for_n_100() {
        let table = likelihood_table(100, 7);
        // p_0 = (99/100)^100, exactly.
        let p0_exact = BigRational::new(
            BigInt::from(99).pow(100),
            BigInt::from(100).pow(100),
        );
        assert_eq!(table.probabilities[0], p0_exact);
        let p0 = table.probabilities[0].to_f64().unwrap();
        let p1 = table.probabilities[1].to_f64().unwrap();
        assert!((p0 - 0.3660).abs() < 5e-4, "p0 = {p0}");
        assert!((p1 - 0.3697).abs() < 5e-4, "p1 = {p1}");
    }

    #[test]
    fn tail_beyond_seven_of_a_hundred_is_about_1e_minus_5() {
        let table = likelihood_table(100, 7);
        assert!(
            table.tail > 1e-6 && table.tail < 1e-4,
            "tail = {}",
            table.tail
        );
    }

    #[test]
    fn probabilities_sum_to_at_most_one() {
        for n in [2usize, 5, 25, 100] {
            let table = likelihood_table(n, 7.min(n));
            let total: BigRational =
                table.probabilities.iter().fold(BigRational::zero(), |a, p| a + p);
            assert!(total <= BigRational::one());
            assert_eq!(BigRational::one() - total, table.tail_exact);
        }
    }

    #[test]
    fn scaled_logs_order_like_the_probabilities() {
        let table = likelihood_table(25, 7);
        for a in 0..=7usize {
            for b in 0..=7usize {
                if table.probabilities[a] < table.probabilities[b] {
                    assert!(table.scaled_log_coeffs[a] < table.scaled_log_coeffs[b]);
                }
            }
        }
    }

    #[test]
    fn scaled_log_accuracy_against_direct_f64() {
        let table = likelihood_table(100, 7);
        for b in 0..=7usize {
            let direct = table.probabilities[b].to_f64().unwrap().ln();
            let scaled = table.scaled_log_coeffs[b] as f64 / LOG_SCALE as f64;
            assert!((direct - scaled).abs() < 1e-5, "b={b}: {direct} vs {scaled}");
        }
    }
}
