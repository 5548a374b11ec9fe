//! Wall-normal profiles built from sin/cos(mu z) and scaled sinh/cosh(nu z).

use serde::{Deserialize, Serialize};

/// `a_sin sin(mu z) + a_cos cos(mu z) + b_sinh S(z) + b_cosh C(z)` with
/// `S = sinh(nu z)/cosh(nu)` and `C = cosh(nu z)/cosh(nu)`.
///
/// The scaled hyperbolic pair stays bounded by 1 on [-1, 1] for any nu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZProfile {
    pub mu: f64,
    pub nu: f64,
    pub a_sin: f64,
    pub a_cos: f64,
    pub b_sinh: f64,
    pub b_cosh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
            Parity::Mixed => Parity::Mixed,
        }
    }

    /// Parity of a product; `None` when undetermined.
    pub fn product(parts: &[Parity]) -> Option<Parity> {
        let mut odd = false;
        for p in parts {
            match p {
                Parity::Mixed => return None,
                Parity::Odd => odd = !odd,
                Parity::Even => {}
            }
        }
        Some(if odd { Parity::Odd } else { Parity::Even })
    }
}

/// (sinh(nu z), cosh(nu z)) / cosh(nu) without overflow.
#[inline]
pub fn scaled_hyperbolic(nu: f64, z: f64) -> (f64, f64) {
    let a = (nu * (z - 1.0)).exp();
    let b = (-nu * (z + 1.0)).exp();
    let d = 1.0 + (-2.0 * nu).exp();
    ((a - b) / d, (a + b) / d)
}

impl ZProfile {
    pub fn zero(mu: f64, nu: f64) -> Self {
        ZProfile { mu, nu, a_sin: 0.0, a_cos: 0.0, b_sinh: 0.0, b_cosh: 0.0 }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let (s, c) = if self.b_sinh != 0.0 || self.b_cosh != 0.0 {
            scaled_hyperbolic(self.nu, z)
        } else {
            (0.0, 0.0)
        };
        let mz = self.mu * z;
        self.a_sin * mz.sin() + self.a_cos * mz.cos() + self.b_sinh * s + self.b_cosh * c
    }

    pub fn derivative(&self) -> ZProfile {
        ZProfile {
            mu: self.mu,
            nu: self.nu,
            a_sin: -self.mu * self.a_cos,
            a_cos: self.mu * self.a_sin,
            b_sinh: self.nu * self.b_cosh,
            b_cosh: self.nu * self.b_sinh,
        }
    }

    pub fn scaled(&self, s: f64) -> ZProfile {
        ZProfile {
            a_sin: self.a_sin * s,
            a_cos: self.a_cos * s,
            b_sinh: self.b_sinh * s,
            b_cosh: self.b_cosh * s,
            ..*self
        }
    }

    pub fn parity(&self) -> Parity {
        let odd = self.a_sin != 0.0 || self.b_sinh != 0.0;
        let even = self.a_cos != 0.0 || self.b_cosh != 0.0;
        match (odd, even) {
            (true, false) => Parity::Odd,
            (false, _) => Parity::Even,
            (true, true) => Parity::Mixed,
        }
    }

    /// Largest frequency-like scale, used to size quadratures.
    pub fn bandwidth(&self) -> f64 {
        self.mu.max(self.nu)
    }
}
