use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Below this many trials the binomial is drawn by cdf inversion.
pub const INVERSION_LIMIT: u64 = 64;

/// One `Binomial(n, p)` draw.
pub fn binomial<G: Rng + ?Sized>(n: u64, p: f64, rng: &mut G) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n < INVERSION_LIMIT {
        return inversion(n, p, rng);
    }
    Binomial::new(n, p).expect("p in (0,1)").sample(rng)
}

fn inversion<G: Rng + ?Sized>(n: u64, p: f64, rng: &mut G) -> u64 {
    // walk the shorter tail
    let flip = p > 0.5;
    let p = if flip { 1.0 - p } else { p };
    let q = 1.0 - p;
    let ratio = p / q;
    let mut pmf = q.powi(n as i32);
    let mut cdf = pmf;
    let u: f64 = rng.random();
    let mut k = 0;
    while u > cdf && k < n {
        pmf *= ratio * (n - k) as f64 / (k + 1) as f64;
        k += 1;
        cdf += pmf;
    }
    if flip {
        n - k
    } else {
        k
    }
}

/// `Multinomial(n, row)` via sequential conditional binomials. The last
/// state with positive probability takes the remainder, so point-mass rows
/// are exact.
pub fn multinomial<G: Rng + ?Sized>(n: u64, row: &[f64], rng: &mut G) -> Vec<u64> {
    let mut out = vec![0; row.len()];
    let Some(last) = row.iter().rposition(|p| *p > 0.0) else {
        return out;
    };
    let mut remaining = n;
    let mut mass: f64 = row[..=last].iter().filter(|p| **p > 0.0).sum();
    for (k, &p) in row.iter().enumerate().take(last) {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let draw = binomial(remaining, (p / mass).min(1.0), rng);
        out[k] = draw;
        remaining -= draw;
        mass -= p;
        if mass <= 0.0 {
            break;
        }
    }
    out[last] += remaining;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(multinomial(0, &[0.2, 0.8], &mut rng), vec![0, 0]);
        assert_eq!(multinomial(7, &[0.0, 1.0, 0.0], &mut rng), vec![0, 7, 0]);
        assert_eq!(binomial(10, 0.0, &mut rng), 0);
        assert_eq!(binomial(10, 1.0, &mut rng), 10);
    }

    fn check_binomial_moments(n: u64, p: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(n ^ p.to_bits());
        let draws = 20_000;
        let xs: Vec<f64> = (0..draws).map(|_| binomial(n, p, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let sd_mean = (n as f64 * p * (1.0 - p) / draws as f64).sqrt();
        assert!((mean - n as f64 * p).abs() < 4.0 * sd_mean + 1e-12, "n={n} p={p} mean={mean}");
        let target = n as f64 * p * (1.0 - p);
        assert!((var - target).abs() < 0.1 * target + 1e-9, "n={n} p={p} var={var}");
    }

    #[test]
    fn binomial_moments_both_regimes() {
        for &(n, p) in &[(5, 0.3), (63, 0.9), (40, 0.5), (64, 0.1), (800, 0.9), (10_000, 0.37)] {
            check_binomial_moments(n, p);
        }
    }

    #[test]
    fn inversion_matches_pmf() {
        // chi-square against the exact pmf of Binomial(10, 0.3)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 50_000;
        let mut hist = [0u64; 11];
        for _ in 0..draws {
            hist[binomial(10, 0.3, &mut rng) as usize] += 1;
        }
        let mut pmf = [0.0; 11];
        let mut c = 1.0;
        for k in 0..=10 {
            pmf[k] = c * 0.3f64.powi(k as i32) * 0.7f64.powi(10 - k as i32);
            c = c * (10 - k) as f64 / (k + 1) as f64;
        }
        let chi: f64 = (0..=10)
            .filter(|&k| pmf[k] * draws as f64 > 5.0)
            .map(|k| {
                let e = pmf[k] * draws as f64;
                (hist[k] as f64 - e).powi(2) / e
            })
            .sum();
        // 99.9% quantile of chi-square with 10 dof is 29.6
        assert!(chi < 29.6, "chi = {chi}");
    }

    #[test]
    fn concentrated_row_absolute_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 10_000;
        let row = [0.9, 0.1];
        let xs: Vec<f64> = (0..draws).map(|_| multinomial(800, &row, &mut rng)[0] as f64).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let sigma = (800.0f64 * 0.9 * 0.1 / draws as f64).sqrt();
        assert!((mean - 720.0).abs() < 3.0 * sigma);
        let mad = xs.iter().map(|x| (x - 720.0).abs()).sum::<f64>() / draws as f64;
        assert!(mad <= (800.0f64 / 4.0).sqrt());
    }

    #[test]
    fn multinomial_conserves_and_has_right_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let row = [0.25, 0.0, 0.5, 0.25];
        let mut sums = [0u64; 4];
        for _ in 0..4000 {
            let d = multinomial(100, &row, &mut rng);
            assert_eq!(d.iter().sum::<u64>(), 100);
            assert_eq!(d[1], 0);
            for k in 0..4 {
                sums[k] += d[k];
            }
        }
        for k in 0..4 {
            let mean = sums[k] as f64 / 4000.0;
            assert!((mean - 100.0 * row[k]).abs() < 0.5, "{k}: {mean}");
        }
    }
}
