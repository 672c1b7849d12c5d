use super::DiagError;

/// Scalar-curvature transfer matrix acting on `(delta w_ag, delta w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };
    pub const ZERO: Self = Self {
        a11: 0.0,
        a12: 0.0,
        a21: 0.0,
        a22: 0.0,
    };

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a11: self.a11 * o.a11 + self.a12 * o.a21,
            a12: self.a11 * o.a12 + self.a12 * o.a22,
            a21: self.a21 * o.a11 + self.a22 * o.a21,
            a22: self.a21 * o.a12 + self.a22 * o.a22,
        }
    }

    /// Largest singular value, from the closed-form top eigenvalue of `A^T A`.
    pub fn spectral_norm(&self) -> f64 {
        let Self {
            a11: a,
            a12: b,
            a21: c,
            a22: d,
        } = *self;
        let p = a * a + c * c;
        let q = a * b + c * d;
        let r = b * b + d * d;
        let half = 0.5 * (p - r);
        let top = 0.5 * (p + r) + half.hypot(q);
        top.max(0.0).sqrt()
    }
}

fn check_common(mu: f64, gamma: f64, eta: f64, h: f64) -> Result<(), DiagError> {
    for (name, v) in [("mu", mu), ("gamma", gamma), ("eta", eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(DiagError::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    // Admissible curvatures are [mu, L] with eta <= 1/L.
    let hi = 1.0 / eta;
    if !(h >= mu && h * eta <= 1.0 + 1e-12) {
        return Err(DiagError::CurvatureOutOfRange { h, lo: mu, hi });
    }
    Ok(())
}

/// FedAc-I: `1/(1 + gamma mu) [[1 - eta H, gamma mu (1 - eta H)], [-gamma (H - mu), 1 - gamma^2 mu H]]`.
pub fn transfer_matrix_fedac1(
    mu: f64,
    gamma: f64,
    eta: f64,
    h: f64,
) -> Result<TransferMatrix, DiagError> {
    check_common(mu, gamma, eta, h)?;
    let gm = gamma * mu;
    let s = 1.0 / (1.0 + gm);
    let top = 1.0 - eta * h;
    Ok(TransferMatrix {
        a11: s * top,
        a12: s * gm * top,
        a21: -s * gamma * (h - mu),
        a22: s * (1.0 - gamma * gamma * mu * h),
    })
}

/// FedAc-II, prefactor `1 / (9 - gamma mu (6 + gamma mu))`.
pub fn transfer_matrix_fedac2(
    mu: f64,
    gamma: f64,
    eta: f64,
    h: f64,
) -> Result<TransferMatrix, DiagError> {
    check_common(mu, gamma, eta, h)?;
    let gm = gamma * mu;
    let s = 1.0 / (9.0 - gm * (6.0 + gm));
    let top = 1.0 - eta * h;
    Ok(TransferMatrix {
        a11: s * (3.0 - gm) * (3.0 - 2.0 * gm) * top,
        a12: s * 3.0 * gm * (1.0 - gm) * top,
        a21: s * (3.0 - 2.0 * gm) * (2.0 * gm - (3.0 - gm) * gamma * h),
        a22: s * 3.0 * (1.0 - gm) * ((3.0 - gm) - gamma * gamma * mu * h),
    })
}

/// One noiseless local step of the generalized accelerated method on curvature
/// `H`, written as a map on `(delta w_ag, delta w)`.
pub fn transfer_matrix_general(
    alpha: f64,
    beta: f64,
    gamma: f64,
    eta: f64,
    h: f64,
) -> TransferMatrix {
    let ib = 1.0 / beta;
    let ia = 1.0 / alpha;
    let top = 1.0 - eta * h;
    let low = ia - gamma * h;
    TransferMatrix {
        a11: (1.0 - ib) * top,
        a12: ib * top,
        a21: (1.0 - ib) * low,
        a22: ib * low + (1.0 - ia),
    }
}

/// `||X^-1 A X||_2` with `X = [[eta/gamma, 0], [1, 1]]`.
pub fn transformed_norm(a: &TransferMatrix, gamma: f64, eta: f64) -> f64 {
    let r = eta / gamma;
    let ir = gamma / eta;
    // A X
    let m11 = a.a11 * r + a.a12;
    let m12 = a.a12;
    let m21 = a.a21 * r + a.a22;
    let m22 = a.a22;
    // X^-1 (A X), X^-1 = [[gamma/eta, 0], [-gamma/eta, 1]]
    TransferMatrix {
        a11: ir * m11,
        a12: ir * m12,
        a21: m21 - ir * m11,
        a22: m22 - ir * m12,
    }
    .spectral_norm()
}

/// `1 + 2 gamma^2 mu / eta`, or exactly 1 when `gamma == eta`.
pub fn fedac1_norm_bound(mu: f64, gamma: f64, eta: f64) -> f64 {
    if gamma == eta {
        1.0
    } else {
        1.0 + 2.0 * gamma * gamma * mu / eta
    }
}

/// `1 + gamma^2 mu / eta`.
pub fn fedac2_norm_bound(mu: f64, gamma: f64, eta: f64) -> f64 {
    1.0 + gamma * gamma * mu / eta
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBoundRow {
    pub gamma: f64,
    pub eta: f64,
    pub fedac1_max: f64,
    pub fedac1_bound: f64,
    pub fedac2_max: f64,
    pub fedac2_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormBoundReport {
    pub mu: f64,
    pub l: f64,
    pub h_samples: usize,
    pub rows: Vec<NormBoundRow>,
    /// Sampled `(gamma, eta, H)` points where a norm beat its bound by more
    /// than `1e-9`, counting both schedules.
    pub violations: usize,
}

pub const NORM_BOUND_SLACK: f64 = 1e-9;

/// For every `(gamma, eta)` in `grid`, the largest transformed norm over
/// `h_samples` evenly spaced curvatures in `[mu, L]` (endpoints included),
/// next to the published bound.
///
/// Requires `eta <= 1/L` and `eta <= gamma <= sqrt(eta/mu)`.
pub fn norm_bound_sweep(
    mu: f64,
    l: f64,
    grid: &[(f64, f64)],
    h_samples: usize,
) -> Result<NormBoundReport, DiagError> {
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(DiagError::InvalidParameter(format!(
            "need 0 < mu <= L, got mu={mu}, L={l}"
        )));
    }
    if h_samples < 2 {
        return Err(DiagError::InvalidParameter(
            "need at least 2 curvature samples".into(),
        ));
    }
    let hs: Vec<f64> = (0..h_samples)
        .map(|i| {
            if i + 1 == h_samples {
                l
            } else {
                mu + (l - mu) * i as f64 / (h_samples - 1) as f64
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    let mut violations = 0;
    for &(gamma, eta) in grid {
        let gamma_max = (eta / mu).sqrt();
        if !(eta > 0.0 && eta * l <= 1.0 + 1e-12) {
            return Err(DiagError::InvalidParameter(format!(
                "need 0 < eta <= 1/L, got eta={eta}, L={l}"
            )));
        }
        if !(gamma >= eta && gamma <= gamma_max * (1.0 + 1e-12)) {
            return Err(DiagError::InvalidParameter(format!(
                "need eta <= gamma <= sqrt(eta/mu), got gamma={gamma}, eta={eta}, mu={mu}"
            )));
        }
        let b1 = fedac1_norm_bound(mu, gamma, eta);
        let b2 = fedac2_norm_bound(mu, gamma, eta);
        let (mut n1, mut n2) = (0.0f64, 0.0f64);
        for &h in &hs {
            let x1 = transformed_norm(&transfer_matrix_fedac1(mu, gamma, eta, h)?, gamma, eta);
            let x2 = transformed_norm(&transfer_matrix_fedac2(mu, gamma, eta, h)?, gamma, eta);
            violations +=
                usize::from(x1 > b1 + NORM_BOUND_SLACK) + usize::from(x2 > b2 + NORM_BOUND_SLACK);
            n1 = n1.max(x1);
            n2 = n2.max(x2);
        }
        rows.push(NormBoundRow {
            gamma,
            eta,
            fedac1_max: n1,
            fedac1_bound: b1,
            fedac2_max: n2,
            fedac2_bound: b2,
        });
    }
    Ok(NormBoundReport {
        mu,
        l,
        h_samples,
        rows,
        violations,
    })
}
