use super::AlgoError;
use crate::objectives::DeterministicGradient;

/// Nesterov's accelerated gradient descent for `mu`-strongly convex,
/// `L`-smooth objectives, with `kappa = L / mu`:
///
/// ```text
/// w_md  = w / (sqrt(kappa) + 1) + sqrt(kappa) w_ag / (sqrt(kappa) + 1)
/// w_ag' = w_md - grad(w_md) / L
/// w'    = (1 - 1/sqrt(kappa)) w + w_md / sqrt(kappa) - grad(w_md) / sqrt(L mu)
/// ```
#[derive(Clone, Debug)]
pub struct AgdStepper {
    pub w: Vec<f64>,
    pub w_ag: Vec<f64>,
    md: Vec<f64>,
    g: Vec<f64>,
    c_w: f64,
    c_ag: f64,
    inv_l: f64,
    inv_sqrt_kappa: f64,
    step_w: f64,
}

impl AgdStepper {
    pub fn new(l: f64, mu: f64, w0_ag: Vec<f64>, w0: Vec<f64>) -> Result<Self, AlgoError> {
        if !(mu > 0.0 && l >= mu && l.is_finite()) {
            return Err(AlgoError::InvalidHyper(format!(
                "need 0 < mu <= L, got mu={mu}, L={l}"
            )));
        }
        if w0.len() != w0_ag.len() {
            return Err(AlgoError::InvalidConfig(format!(
                "w0 has length {}, w0_ag has length {}",
                w0.len(),
                w0_ag.len()
            )));
        }
        let sk = (l / mu).sqrt();
        let d = w0.len();
        Ok(Self {
            w: w0,
            w_ag: w0_ag,
            md: vec![0.0; d],
            g: vec![0.0; d],
            c_w: 1.0 / (sk + 1.0),
            c_ag: sk / (sk + 1.0),
            inv_l: 1.0 / l,
            inv_sqrt_kappa: 1.0 / sk,
            step_w: 1.0 / (l * mu).sqrt(),
        })
    }

    /// Point where the next gradient will be taken.
    pub fn next_md(&self) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.w_ag)
            .map(|(w, a)| self.c_w * w + self.c_ag * a)
            .collect()
    }

    /// `w_md` and the gradient used by the most recent step.
    pub fn last_md(&self) -> &[f64] {
        &self.md
    }

    pub fn last_grad(&self) -> &[f64] {
        &self.g
    }

    pub fn step<G: DeterministicGradient + ?Sized>(&mut self, f: &G) {
        for ((md, w), a) in self.md.iter_mut().zip(&self.w).zip(&self.w_ag) {
            *md = self.c_w * w + self.c_ag * a;
        }
        f.gradient_into(&self.md, &mut self.g);
        for (((w, a), md), g) in self
            .w
            .iter_mut()
            .zip(self.w_ag.iter_mut())
            .zip(&self.md)
            .zip(&self.g)
        {
            *a = md - self.inv_l * g;
            *w = (1.0 - self.inv_sqrt_kappa) * *w + self.inv_sqrt_kappa * md - self.step_w * g;
        }
    }
}

/// Full AGD trajectory: `w_ag` and `w` hold `steps + 1` points (index 0 is the
/// start), `w_md` holds the `steps` query points.
#[derive(Clone, Debug, PartialEq)]
pub struct AgdTrajectory {
    pub w_ag: Vec<Vec<f64>>,
    pub w_md: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

pub fn agd_run<G: DeterministicGradient + ?Sized>(
    f: &G,
    w0_ag: Vec<f64>,
    w0: Vec<f64>,
    l: f64,
    mu: f64,
    steps: usize,
) -> Result<AgdTrajectory, AlgoError> {
    if w0.len() != f.dim() {
        return Err(AlgoError::InvalidConfig(format!(
            "start has length {}, objective dim {}",
            w0.len(),
            f.dim()
        )));
    }
    let mut s = AgdStepper::new(l, mu, w0_ag, w0)?;
    let mut tr = AgdTrajectory {
        w_ag: vec![s.w_ag.clone()],
        w_md: Vec::with_capacity(steps),
        w: vec![s.w.clone()],
    };
    for _ in 0..steps {
        s.step(f);
        tr.w_md.push(s.last_md().to_vec());
        tr.w_ag.push(s.w_ag.clone());
        tr.w.push(s.w.clone());
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Objective;

    #[test]
    fn unit_condition_number_solves_in_one_step() {
        let f = Objective::quadratic(vec![1.0], vec![0.0], 0.0).unwrap();
        let tr = agd_run(&f, vec![3.0], vec![-2.0], 1.0, 1.0, 1).unwrap();
        assert_eq!(tr.w_ag[1], vec![0.0]);
        assert_eq!(tr.w[1], vec![0.0]);
        assert_eq!(tr.w_md.len(), 1);
    }

    #[test]
    fn optimum_is_stationary() {
        let f = Objective::quadratic(vec![1.0, 9.0], vec![2.0, -1.0], 0.0).unwrap();
        let tr = agd_run(&f, vec![2.0, -1.0], vec![2.0, -1.0], 9.0, 1.0, 25).unwrap();
        assert!(tr
            .w
            .iter()
            .chain(&tr.w_ag)
            .chain(&tr.w_md)
            .all(|p| p == &vec![2.0, -1.0]));
    }

    #[test]
    fn stiff_quadratic_monotone_ag() {
        let f = Objective::quadratic(vec![50.0], vec![0.0], 0.0).unwrap();
        let tr = agd_run(&f, vec![1.0], vec![-3.0], 50.0, 2.0, 200).unwrap();
        for p in tr.w_ag.windows(2).skip(1) {
            assert!(p[1][0].abs() <= p[0][0].abs());
        }
    }

    #[test]
    fn rejects_bad_constants() {
        let f = Objective::quadratic(vec![1.0], vec![0.0], 0.0).unwrap();
        assert!(agd_run(&f, vec![0.0], vec![0.0], 1.0, 0.0, 1).is_err());
        assert!(agd_run(&f, vec![0.0], vec![0.0], 0.5, 1.0, 1).is_err());
        assert!(agd_run(&f, vec![0.0], vec![0.0, 1.0], 1.0, 1.0, 1).is_err());
    }
}
