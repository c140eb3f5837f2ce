use crate::error::Result;
use crate::glm::design::GlmDesign;
use crate::glm::irls::{fit_ppml, predict_glm, GlmFamily, GlmFit, IrlsOptions};

/// Negative-binomial fit: PPML mean model, method-of-moments dispersion on
/// Pearson residuals, then one reweighted refit under `Var = mu + a mu^2`.
///
/// A negative moment estimate is clamped to 0 (plain Poisson) and flagged.
pub fn fit_negbin(design: &GlmDesign, y: &[f64], options: &IrlsOptions) -> Result<GlmFit> {
    let base = fit_ppml(design, y, options)?;
    let mu = predict_glm(&base, design)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (yi, mi) in y.iter().zip(&mu) {
        num += (yi - mi) * (yi - mi) - mi;
        den += mi * mi;
    }
    let raw = if den > 0.0 { num / den } else { 0.0 };
    let clamped = raw < 0.0;
    let dispersion = raw.max(0.0);
    if dispersion == 0.0 {
        let mut fit = base;
        fit.family = GlmFamily::NegBin {
            dispersion: 0.0,
            clamped,
        };
        return Ok(fit);
    }
    let mut fit = fit_ppml(
        design,
        y,
        &IrlsOptions {
            variance_shape: dispersion,
            ..*options
        },
    )?;
    fit.family = GlmFamily::NegBin {
        dispersion,
        clamped,
    };
    Ok(fit)
}

/// Zero-inflated Poisson via EM with an intercept-only inflation mass.
///
/// E-step: zero rows get responsibility `p / (p + (1-p) exp(-mu))` of coming
/// from the inflation component. M-step: `p` is the mean responsibility and
/// the Poisson is refit with weights `1 - responsibility`. Predictions scale
/// by `1 - p`.
pub fn fit_zip(
    design: &GlmDesign,
    y: &[f64],
    em_iters: usize,
    options: &IrlsOptions,
) -> Result<GlmFit> {
    let n = y.len();
    let zero_frac = y.iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
    let mut p = (0.5 * zero_frac).clamp(1e-6, 1.0 - 1e-6);
    let mut fit = fit_ppml(design, y, options)?;
    for _ in 0..em_iters.max(1) {
        let mu = predict_glm(&fit, design)?;
        let mut resp = vec![0.0; n];
        let mut p_sum = 0.0;
        for i in 0..n {
            if y[i] == 0.0 {
                let pois_zero = (1.0 - p) * (-mu[i]).exp();
                resp[i] = p / (p + pois_zero).max(f64::MIN_POSITIVE);
                p_sum += resp[i];
            }
        }
        let p_new = (p_sum / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let weights: Vec<f64> = resp.iter().map(|r| 1.0 - r).collect();
        let weighted = design.clone().with_row_weights(weights)?;
        fit = fit_ppml(&weighted, y, options)?;
        let done = (p_new - p).abs() < 1e-8;
        p = p_new;
        if done {
            break;
        }
    }
    let clamped = p <= 1e-6 || p >= 1.0 - 1e-6;
    fit.family = GlmFamily::Zip {
        inflation: p,
        clamped,
    };
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    fn poisson_data(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|i| ((i * 13) % 10) as f64 * 0.2).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let rate = (0.4 + 0.9 * xi).exp();
                rand_distr::Poisson::new(rate).unwrap().sample(&mut rng)
            })
            .collect();
        (x, y)
    }

    #[test]
    fn equidispersed_data_gives_near_zero_dispersion() {
        let (x, y) = poisson_data(20_000, 5);
        let d = GlmDesign::dense(&[("x", &x)], x.len()).unwrap();
        let fit = fit_negbin(&d, &y, &IrlsOptions::default()).unwrap();
        match fit.family {
            GlmFamily::NegBin { dispersion, .. } => {
                assert!(dispersion < 0.05, "dispersion {dispersion}")
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn nb_recovers_simulated_dispersion() {
        // NB2 with a = 0.5 via gamma-poisson mixture
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let a = 0.5;
        let n = 50_000;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7) % 12) as f64 * 0.15).collect();
        let gamma = rand_distr::Gamma::new(1.0 / a, a).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let rate = (0.6 + 0.5 * xi).exp() * gamma.sample(&mut rng);
                if rate > 0.0 {
                    rand_distr::Poisson::new(rate).unwrap().sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        let d = GlmDesign::dense(&[("x", &x)], n).unwrap();
        let fit = fit_negbin(&d, &y, &IrlsOptions::default()).unwrap();
        match fit.family {
            GlmFamily::NegBin { dispersion, .. } => {
                assert!(
                    (0.3..=0.7).contains(&dispersion),
                    "dispersion {dispersion}"
                );
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn nb_mean_model_tracks_ppml() {
        let (x, y) = poisson_data(5_000, 6);
        let d = GlmDesign::dense(&[("x", &x)], x.len()).unwrap();
        let pois = fit_ppml(&d, &y, &IrlsOptions::default()).unwrap();
        let nb = fit_negbin(&d, &y, &IrlsOptions::default()).unwrap();
        for (a, b) in pois.coefficients.iter().zip(&nb.coefficients) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn zip_detects_injected_structural_zeros() {
        // 50% structural zeros over a Poisson(5) base
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let pois = rand_distr::Poisson::new(5.0f64).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                if (i * 2654435761usize) % 100 < 50 {
                    0.0
                } else {
                    pois.sample(&mut rng)
                }
            })
            .collect();
        let d = GlmDesign::dense(&[], n).unwrap();
        let fit = fit_zip(&d, &y, 50, &IrlsOptions::default()).unwrap();
        match fit.family {
            GlmFamily::Zip { inflation, .. } => {
                assert!((0.4..=0.6).contains(&inflation), "p {inflation}");
                // prediction = (1 - p) * mu
                let mu = predict_glm(&fit, &d).unwrap();
                let expect = (1.0 - inflation) * fit.coefficients[0].exp();
                assert!((mu[0] - expect).abs() < 1e-10);
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn zip_without_excess_zeros_degenerates_to_ppml() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let pois = rand_distr::Poisson::new(6.0f64).unwrap();
        let y: Vec<f64> = (0..n).map(|_| pois.sample(&mut rng)).collect();
        let d = GlmDesign::dense(&[], n).unwrap();
        let plain = fit_ppml(&d, &y, &IrlsOptions::default()).unwrap();
        let fit = fit_zip(&d, &y, 50, &IrlsOptions::default()).unwrap();
        match fit.family {
            GlmFamily::Zip { inflation, .. } => {
                assert!(inflation < 0.01, "p {inflation}");
                // (1 - p) * exp(b0) must track the plain Poisson mean
                let zip_mean = (1.0 - inflation) * fit.coefficients[0].exp();
                let pois_mean = plain.coefficients[0].exp();
                assert!((zip_mean - pois_mean).abs() / pois_mean < 0.01);
            }
            _ => panic!("wrong family"),
        }
    }
}
