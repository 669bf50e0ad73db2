//! Transmitter impairments: IQ imbalance and a memoryless odd-order
//! polynomial PA.

use crate::ofdm::{mirror_index, FreqSymbol, TimeSignal};
use crate::{Error, Result, C64};

/// Mirror-image leakage `x + b x*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IqImbalance {
    pub b: C64,
}

impl IqImbalance {
    pub fn new(b: C64) -> Result<Self> {
        if b.norm() >= 1.0 {
            return Err(Error::Config(format!("|b_iq| must be below 1, got {}", b.norm())));
        }
        Ok(IqImbalance { b })
    }

    pub fn none() -> Self {
        IqImbalance { b: C64::new(0.0, 0.0) }
    }

    /// Image rejection ratio `1/|b|^2` in dB.
    pub fn irr_db(&self) -> f64 {
        -10.0 * self.b.norm_sqr().log10()
    }
}

/// IQ imbalance with the given image rejection ratio and phase.
pub fn irr_to_b(irr_db: f64, phase: f64) -> Result<IqImbalance> {
    if !(irr_db > 0.0) {
        return Err(Error::Config(format!("IRR must be positive, got {irr_db} dB")));
    }
    IqImbalance::new(C64::from_polar(10f64.powf(-irr_db / 20.0), phase))
}

pub fn apply_iq_time(x: &TimeSignal, imb: &IqImbalance) -> TimeSignal {
    TimeSignal {
        samples: x.samples.iter().map(|v| v + imb.b * v.conj()).collect(),
        has_cp: x.has_cp,
    }
}

/// `X[p] + b conj(X[-p])`.
pub fn apply_iq_freq(x: &FreqSymbol, imb: &IqImbalance) -> FreqSymbol {
    FreqSymbol::new(iq_freq(&x.values, imb.b), x.index)
}

pub fn iq_freq(x: &[C64], b: C64) -> Vec<C64> {
    let n = x.len();
    (0..n).map(|p| x[p] + b * x[mirror_index(p, n)].conj()).collect()
}

/// `f(x) = sum_k a_{2k+1} |x|^{2k} x`. `coeffs[k]` holds `a_{2k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PaPolynomial {
    coeffs: Vec<C64>,
}

impl PaPolynomial {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.first().is_none_or(|a| a.norm() == 0.0) {
            return Err(Error::Config("PA linear gain a_1 must be nonzero".into()));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().is_some_and(|a| a.norm() == 0.0) {
            coeffs.pop();
        }
        Ok(PaPolynomial { coeffs })
    }

    /// From `(order, coefficient)` pairs; orders must be odd.
    pub fn from_orders(pairs: &[(usize, C64)]) -> Result<Self> {
        let mut coeffs = Vec::new();
        for &(order, a) in pairs {
            if order % 2 == 0 {
                return Err(Error::Config(format!("PA order {order} is not odd")));
            }
            let k = order / 2;
            if coeffs.len() <= k {
                coeffs.resize(k + 1, C64::new(0.0, 0.0));
            }
            coeffs[k] += a;
        }
        Self::new(coeffs)
    }

    pub fn linear(a1: f64) -> Self {
        PaPolynomial { coeffs: vec![C64::new(a1, 0.0)] }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `a_{2k+1}`, zero beyond `k_max`.
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: C64) -> C64 {
        let r = x.norm_sqr();
        let mut acc = C64::new(0.0, 0.0);
        let mut pow = 1.0;
        for a in &self.coeffs {
            acc += a * pow;
            pow *= r;
        }
        acc * x
    }
}

/// Measured three-term PA: `35.89 x - 2.24 |x|^2 x + 0.0015 |x|^4 x`.
pub fn default_measured_pa() -> PaPolynomial {
    PaPolynomial {
        coeffs: vec![C64::new(35.89, 0.0), C64::new(-2.24, 0.0), C64::new(0.0015, 0.0)],
    }
}

pub fn apply_pa(x: &TimeSignal, pa: &PaPolynomial) -> TimeSignal {
    TimeSignal { samples: x.samples.iter().map(|&v| pa.eval(v)).collect(), has_cp: x.has_cp }
}
