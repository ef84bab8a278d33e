//! Squared-cosine noise schedule, forward noising and the x0-parameterized
//! reverse posterior.

/// Offset of the squared-cosine schedule.
const COSINE_OFFSET: f64 = 0.008;
const MAX_BETA: f64 = 0.999;

/// Cumulative signal levels `alpha_bar[t]` for `t = 0..=T`, with
/// `alpha_bar[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    alpha_bar: Vec<f64>,
}

/// Mean coefficients and standard deviation of one reverse step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub coef_x0: f64,
    pub coef_xt: f64,
    pub sigma: f64,
}

impl Posterior {
    pub fn mean(&self, x0: &[f64; 9], xt: &[f64; 9]) -> [f64; 9] {
        std::array::from_fn(|i| self.coef_x0 * x0[i] + self.coef_xt * xt[i])
    }
}

/// Squared-cosine schedule with `t_train` steps.
pub fn make_schedule(t_train: usize) -> Schedule {
    assert!(t_train >= 2, "schedule needs at least two steps");
    let f = |t: f64| {
        let x = (t / t_train as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * std::f64::consts::FRAC_PI_2;
        x.cos().powi(2)
    };
    let mut alpha_bar = Vec::with_capacity(t_train + 1);
    alpha_bar.push(1.0);
    let mut prod = 1.0;
    for t in 1..=t_train {
        let beta = (1.0 - f(t as f64) / f((t - 1) as f64)).min(MAX_BETA);
        prod *= 1.0 - beta;
        alpha_bar.push(prod);
    }
    Schedule { alpha_bar }
}

impl Schedule {
    pub fn t_train(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// `sqrt(abar_t) x0 + sqrt(1 - abar_t) noise`, componentwise.
    pub fn q_sample(&self, x0: &[f64; 9], t: usize, noise: &[f64; 9]) -> [f64; 9] {
        let a = self.alpha_bar[t];
        let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
        std::array::from_fn(|i| sa * x0[i] + sn * noise[i])
    }

    /// Reverse step from `t` to `t_prev < t` given an x0 prediction.
    pub fn posterior(&self, t: usize, t_prev: usize) -> Posterior {
        let (at, ap) = (self.alpha_bar[t], self.alpha_bar[t_prev]);
        let alpha = at / ap;
        let beta = 1.0 - alpha;
        Posterior {
            coef_x0: ap.sqrt() * beta / (1.0 - at),
            coef_xt: alpha.sqrt() * (1.0 - ap) / (1.0 - at),
            sigma: (beta * (1.0 - ap) / (1.0 - at)).max(0.0).sqrt(),
        }
    }

    /// `(t, t_prev)` pairs of a stride-subsampled reverse chain with
    /// `t_infer` steps, ending at `t_prev = 0`.
    pub fn inference_steps(&self, t_infer: usize) -> Vec<(usize, usize)> {
        let t_train = self.t_train();
        assert!(t_infer >= 1 && t_infer <= t_train, "inference steps must be in 1..=T");
        let stride = t_train / t_infer;
        (0..t_infer)
            .map(|i| {
                let t = t_train - i * stride;
                let prev = if i + 1 == t_infer { 0 } else { t - stride };
                (t, prev)
            })
            .collect()
    }
}
