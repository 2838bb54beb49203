use super::fixed::Fx;

/// First-order discrete high-pass, `y[n] = alpha (y[n-1] + x[n] - x[n-1])`
/// with `alpha = 1 / (1 + w_c Ts)`, in Q16 with a Q24 coefficient.
///
/// The first input only seeds `x[n-1]`, so a filter fed a constant from
/// reset outputs zero instead of a decaying step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HighPass {
    alpha_q24: i64,
    x_prev: i32,
    y_prev: i32,
    primed: bool,
}

impl HighPass {
    const COEF_BITS: u32 = 24;

    pub fn new(cutoff_rad_s: f64, tick_s: f64) -> Self {
        let alpha = 1.0 / (1.0 + cutoff_rad_s * tick_s);
        Self {
            alpha_q24: libm::round(alpha * f64::from(1u32 << Self::COEF_BITS)) as i64,
            x_prev: 0,
            y_prev: 0,
            primed: false,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_q24 as f64 / f64::from(1u32 << Self::COEF_BITS)
    }

    /// Filters one sample. Returns the output and whether it saturated.
    pub fn step(&mut self, x: Fx) -> (Fx, bool) {
        let x = x.raw();
        if !self.primed {
            self.primed = true;
            self.x_prev = x;
        }
        let s = i64::from(self.y_prev) + i64::from(x) - i64::from(self.x_prev);
        // truncation toward zero, so a constant input decays all the way to 0
        let y = self.alpha_q24 * s / (1i64 << Self::COEF_BITS);
        let (y, sat) = Fx::saturate(y);
        self.x_prev = x;
        self.y_prev = y.raw();
        (y, sat)
    }

    pub fn output(&self) -> Fx {
        Fx::from_raw(self.y_prev)
    }

    pub fn reset(&mut self) {
        self.x_prev = 0;
        self.y_prev = 0;
        self.primed = false;
    }
}
