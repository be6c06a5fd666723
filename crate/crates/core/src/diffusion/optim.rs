use serde::{Deserialize, Serialize};

/// Linear warm-up to `base`, then cosine decay restarted every `cycle`
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: usize,
    pub cycle: usize,
}

impl LrSchedule {
    /// Learning rate of 1-based iteration `it`.
    pub fn lr(&self, it: usize) -> f64 {
        if it < self.warmup {
            return self.base * it as f64 / self.warmup as f64;
        }
        if self.cycle == 0 {
            return self.base;
        }
        let u = ((it - self.warmup) % self.cycle) as f64 / self.cycle as f64;
        self.base * 0.5 * (1.0 + (std::f64::consts::PI * u).cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub betas: [f64; 2],
    pub eps: f64,
    pub weight_decay: f64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u64,
}

impl AdamW {
    pub fn new(n: usize, betas: [f64; 2], weight_decay: f64) -> Self {
        Self { betas, eps: 1e-8, weight_decay, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32], lr: f64) {
        self.t += 1;
        let [b1, b2] = self.betas;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = f64::from(grad[i]);
            let m = b1 * f64::from(self.m[i]) + (1.0 - b1) * g;
            let v = b2 * f64::from(self.v[i]) + (1.0 - b2) * g * g;
            self.m[i] = m as f32;
            self.v[i] = v as f32;
            let p = f64::from(params[i]);
            let upd = (m / c1) / ((v / c2).sqrt() + self.eps) + self.weight_decay * p;
            params[i] = (p - lr * upd) as f32;
        }
    }
}

/// `ema ← decay · ema + (1 − decay) · params`.
/// The average is kept in `f64`: in `f32` it stalls once the update falls
/// below half an ulp.
pub fn ema_update(ema: &mut [f64], params: &[f32], decay: f64) {
    for (e, &p) in ema.iter_mut().zip(params) {
        *e = decay * *e + (1.0 - decay) * f64::from(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_and_cycles() {
        let s = LrSchedule { base: 1e-4, warmup: 1000, cycle: 50_000 };
        assert!((s.lr(500) - 0.5e-4).abs() < 1e-18);
        assert_eq!(s.lr(1000), 1e-4);
        assert!((s.lr(26_000) - 0.5e-4).abs() < 1e-12);
        assert_eq!(s.lr(51_000), 1e-4);
    }

    #[test]
    fn ema_limits() {
        let mut e = vec![1.0f64, 2.0];
        ema_update(&mut e, &[3.0, 4.0], 0.0);
        assert_eq!(e, vec![3.0, 4.0]);
        for _ in 0..5000 {
            ema_update(&mut e, &[7.0, -1.0], 0.995);
        }
        assert!((e[0] - 7.0).abs() < 1e-9 && (e[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut o = AdamW::new(2, [0.9, 0.999], 0.0);
        let mut p = vec![1.0f32, 1.0];
        o.step(&mut p, &[0.5, -3.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] - 1.1).abs() < 1e-6);
    }
}
