//! Lateral (x or y) trigonometric factors on a periodic lattice and their
//! closed-form cell integrals.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wave {
    Cos,
    Sin,
}

/// `coef * wave(index * step * t)`; `index` is the integer lattice index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trig {
    pub wave: Wave,
    pub index: u32,
    pub freq: f64,
    pub coef: f64,
}

impl Trig {
    pub fn one() -> Self {
        Trig { wave: Wave::Cos, index: 0, freq: 0.0, coef: 1.0 }
    }

    pub fn new(wave: Wave, index: u32, step: f64, coef: f64) -> Self {
        Trig { wave, index, freq: index as f64 * step, coef }
    }

    pub fn is_zero(&self) -> bool {
        self.coef == 0.0 || (self.wave == Wave::Sin && self.index == 0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.wave {
            Wave::Cos => self.coef * (self.freq * t).cos(),
            Wave::Sin => self.coef * (self.freq * t).sin(),
        }
    }

    pub fn derivative(&self) -> Trig {
        match self.wave {
            Wave::Cos => Trig { wave: Wave::Sin, coef: -self.coef * self.freq, ..*self },
            Wave::Sin => Trig { wave: Wave::Cos, coef: self.coef * self.freq, ..*self },
        }
    }
}

/// Exact integral over one lattice period `[-h, h]` of a product of factors.
///
/// Each factor is expanded into exponentials; only sign patterns whose
/// integer indices cancel survive, so selection rules hold exactly.
pub fn period_integral(factors: &[Trig], half_length: f64) -> f64 {
    let mut prefactor = 1.0;
    let mut n_sin = 0usize;
    for f in factors {
        if f.is_zero() {
            return 0.0;
        }
        prefactor *= f.coef;
        if f.wave == Wave::Sin {
            n_sin += 1;
        }
    }
    if n_sin % 2 == 1 {
        return 0.0;
    }
    let j = factors.len();
    let mut total: i64 = 0;
    for pattern in 0u32..(1u32 << j) {
        let mut phase: i64 = 0;
        let mut sign: i64 = 1;
        for (bit, f) in factors.iter().enumerate() {
            let s: i64 = if pattern & (1 << bit) == 0 { 1 } else { -1 };
            phase += s * f.index as i64;
            if f.wave == Wave::Sin {
                sign *= s;
            }
        }
        if phase == 0 {
            total += sign;
        }
    }
    if total == 0 {
        return 0.0;
    }
    let parity = if (n_sin / 2) % 2 == 0 { 1.0 } else { -1.0 };
    2.0 * half_length * parity * total as f64 * prefactor / (1u64 << j) as f64
}
