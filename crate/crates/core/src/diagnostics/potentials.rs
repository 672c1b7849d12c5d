use super::DiagError;
use crate::algorithms::WorkerState;
use crate::objectives::{Objective, ObjectiveError};
use crate::vector::{dist_sq, pairwise_mean};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialReport {
    /// `(1/M) sum_m F(w_ag^m) - F* + (mu/2) ||avg(w) - w*||^2`
    pub psi: f64,
    /// `F(avg(w_ag)) - F* + (mu/6) ||avg(w) - w*||^2`
    pub phi: f64,
    /// `max_m ||avg(w) - w^m||`
    pub discrepancy_max: f64,
    /// `(1/M) sum_m ||avg(w) - w^m||^2`
    pub discrepancy_mean_sq: f64,
}

fn check(workers: &[WorkerState], obj: &Objective, w_star: &[f64]) -> Result<(), DiagError> {
    if workers.is_empty() {
        return Err(DiagError::InvalidParameter(
            "need at least one worker".into(),
        ));
    }
    let d = obj.dim();
    for v in workers
        .iter()
        .flat_map(|s| [&s.w, &s.w_ag])
        .map(|v| v.as_slice())
        .chain([w_star])
    {
        if v.len() != d {
            return Err(ObjectiveError::DimensionMismatch {
                expected: d,
                got: v.len(),
            }
            .into());
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(ObjectiveError::NonFinite.into());
        }
    }
    Ok(())
}

fn mean_of(workers: &[WorkerState], pick: impl Fn(&WorkerState) -> &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pick(&workers[0]).len()];
    pairwise_mean(workers.len(), &|i| pick(&workers[i]), &mut out);
    out
}

fn mean_scalar(xs: &[f64]) -> f64 {
    let mut out = [0.0];
    pairwise_mean(xs.len(), &|i| std::slice::from_ref(&xs[i]), &mut out);
    out[0]
}

/// Decentralized potential.
pub fn potential_psi(
    workers: &[WorkerState],
    obj: &Objective,
    mu: f64,
    w_star: &[f64],
    f_star: f64,
) -> Result<f64, DiagError> {
    check(workers, obj, w_star)?;
    let vals: Vec<f64> = workers
        .iter()
        .map(|s| obj.eval_unchecked(&s.w_ag))
        .collect();
    let w_bar = mean_of(workers, |s| &s.w);
    Ok(mean_scalar(&vals) - f_star + 0.5 * mu * dist_sq(&w_bar, w_star))
}

/// Centralized potential.
pub fn potential_phi(
    workers: &[WorkerState],
    obj: &Objective,
    mu: f64,
    w_star: &[f64],
    f_star: f64,
) -> Result<f64, DiagError> {
    check(workers, obj, w_star)?;
    let ag_bar = mean_of(workers, |s| &s.w_ag);
    let w_bar = mean_of(workers, |s| &s.w);
    Ok(obj.eval_unchecked(&ag_bar) - f_star + mu / 6.0 * dist_sq(&w_bar, w_star))
}

/// `(max_m ||avg(w) - w^m||, (1/M) sum_m ||avg(w) - w^m||^2)`.
pub fn discrepancy(workers: &[WorkerState]) -> (f64, f64) {
    if workers.is_empty() {
        return (0.0, 0.0);
    }
    let w_bar = mean_of(workers, |s| &s.w);
    let sq: Vec<f64> = workers.iter().map(|s| dist_sq(&s.w, &w_bar)).collect();
    let max = sq.iter().cloned().fold(0.0, f64::max).sqrt();
    (max, mean_scalar(&sq))
}

pub fn potential_report(
    workers: &[WorkerState],
    obj: &Objective,
    mu: f64,
    w_star: &[f64],
    f_star: f64,
) -> Result<PotentialReport, DiagError> {
    let (discrepancy_max, discrepancy_mean_sq) = discrepancy(workers);
    Ok(PotentialReport {
        psi: potential_psi(workers, obj, mu, w_star, f_star)?,
        phi: potential_phi(workers, obj, mu, w_star, f_star)?,
        discrepancy_max,
        discrepancy_mean_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn half_square() -> Objective {
        Objective::quadratic(vec![1.0], vec![0.0], 0.0).unwrap()
    }

    fn ws(w: f64, w_ag: f64) -> WorkerState {
        WorkerState {
            w: vec![w],
            w_ag: vec![w_ag],
        }
    }

    #[test]
    fn hand_values() {
        let f = half_square();
        let one = [ws(1.0, 2.0)];
        assert_eq!(potential_psi(&one, &f, 1.0, &[0.0], 0.0).unwrap(), 2.5);
        assert_relative_eq!(
            potential_phi(&one, &f, 1.0, &[0.0], 0.0).unwrap(),
            2.0 + 1.0 / 6.0,
            max_relative = 1e-15
        );

        let two = [ws(1.0, 1.0), ws(-1.0, -1.0)];
        assert_eq!(potential_psi(&two, &f, 1.0, &[0.0], 0.0).unwrap(), 0.5);
        let r = potential_report(&two, &f, 1.0, &[0.0], 0.0).unwrap();
        assert_eq!(r.phi, 0.0);
        assert_eq!((r.discrepancy_max, r.discrepancy_mean_sq), (1.0, 1.0));
    }

    #[test]
    fn zero_at_optimum() {
        let f = Objective::quadratic(vec![1.0, 3.0], vec![2.0, -1.0], 0.0).unwrap();
        let at = WorkerState::at(&[2.0, -1.0]);
        let r = potential_report(&[at.clone(), at], &f, 1.0, &[2.0, -1.0], 0.0).unwrap();
        assert_eq!(
            r,
            PotentialReport {
                psi: 0.0,
                phi: 0.0,
                discrepancy_max: 0.0,
                discrepancy_mean_sq: 0.0
            }
        );
    }

    #[test]
    fn shape_errors() {
        let f = half_square();
        assert!(potential_psi(&[], &f, 1.0, &[0.0], 0.0).is_err());
        assert!(potential_phi(&[ws(1.0, 1.0)], &f, 1.0, &[0.0, 1.0], 0.0).is_err());
        assert!(potential_phi(&[ws(f64::NAN, 1.0)], &f, 1.0, &[0.0], 0.0).is_err());
    }
}
