use crate::error::{invalid, Error, Result};

/// Offset of the cosine schedule.
pub const COSINE_S0: f64 = 0.008;
/// Upper clip on β_t so the final step keeps a non-zero ᾱ.
pub const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    /// `alpha_bar[t]` for `t ∈ 0..=T`, with `alpha_bar[0] = 1`.
    pub alpha_bar: Vec<f64>,
    /// `beta[t]` for `t ∈ 0..=T`; `beta[0] = 0` is a placeholder.
    pub beta: Vec<f64>,
}

/// Cosine schedule: `β_t = min(1 − f(t)/f(t−1), MAX_BETA)` with
/// `f(t) = cos²(((t/T + s₀)/(1 + s₀))·π/2)`, and `ᾱ_t = Π_{k≤t}(1 − β_k)`.
pub fn cosine_schedule(steps: usize) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(invalid("schedule needs at least one step"));
    }
    let f = |t: usize| {
        let u = (t as f64 / steps as f64 + COSINE_S0) / (1.0 + COSINE_S0);
        (u * std::f64::consts::FRAC_PI_2).cos().powi(2)
    };
    let mut beta = vec![0.0; steps + 1];
    let mut alpha_bar = vec![1.0; steps + 1];
    for t in 1..=steps {
        beta[t] = (1.0 - f(t) / f(t - 1)).min(MAX_BETA);
        alpha_bar[t] = alpha_bar[t - 1] * (1.0 - beta[t]);
    }
    Ok(NoiseSchedule { alpha_bar, beta })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    /// `√ᾱ_t · x_0 + √(1 − ᾱ_t) · ε`.
    pub fn q_sample(&self, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
        if x0.len() != eps.len() {
            return Err(Error::Dimension(format!("x0 has {} values, noise {}", x0.len(), eps.len())));
        }
        let ab = *self.alpha_bar.get(t).ok_or_else(|| invalid(format!("timestep {t} beyond {}", self.steps())))?;
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
    }

    /// Descending timesteps visited by a sampler with `count` steps, from
    /// `T` down to 1, evenly spaced.
    pub fn respaced(&self, count: usize) -> Vec<usize> {
        let t_max = self.steps();
        let count = count.clamp(1, t_max);
        let mut ts: Vec<usize> = (0..count)
            .map(|i| {
                let frac = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                (t_max as f64 - frac * (t_max - 1) as f64).round() as usize
            })
            .collect();
        ts.dedup();
        ts
    }

    /// Posterior `q(x_s | x_t, x_0)` for `s < t`: coefficients on `x_0` and
    /// `x_t`, and the variance.
    pub fn posterior(&self, t: usize, s: usize) -> (f64, f64, f64) {
        let (at, as_) = (self.alpha_bar[t], self.alpha_bar[s]);
        let beta = 1.0 - at / as_;
        let c0 = as_.sqrt() * beta / (1.0 - at);
        let ct = (at / as_).sqrt() * (1.0 - as_) / (1.0 - at);
        let var = beta * (1.0 - as_) / (1.0 - at);
        (c0, ct, var)
    }
}
