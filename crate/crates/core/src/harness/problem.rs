use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ObjectiveSpec};
use super::{io_err, HarnessError};
use crate::algorithms::AgdStepper;
use crate::dataio::load_libsvm;
use crate::objectives::{Objective, ObjectiveError};
use crate::rng::RngStream;
use crate::vector::norm_sq;

pub const OPTIMUM_CACHE_FILE: &str = "optimum_cache.json";
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub w_star: Vec<f64>,
    pub f_star: f64,
    /// AGD steps taken; 0 when the start already met the tolerance.
    pub iterations: usize,
    pub grad_norm: f64,
}

/// An objective together with its precomputed optimum.
#[derive(Clone, Debug)]
pub struct Problem {
    pub objective: Objective,
    pub optimum: Optimum,
    /// Starting point shared by every run; the origin when `None`.
    pub init: Option<Vec<f64>>,
}

/// `scale * N(0, I)` drawn from a stream no worker uses, or `None` for
/// `scale == 0`.
pub fn initial_point(dim: usize, scale: f64, seed: u64) -> Option<Vec<f64>> {
    (scale != 0.0).then(|| {
        let mut s = RngStream::new(seed, u64::MAX);
        s.draw_gaussian(dim)
            .into_iter()
            .map(|x| scale * x)
            .collect()
    })
}

pub fn build_objective(spec: &ObjectiveSpec) -> Result<Objective, HarnessError> {
    match spec {
        ObjectiveSpec::Logistic { data, dim, lambda } => {
            let ds = load_libsvm(data, *dim)?;
            Ok(Objective::logistic(Arc::new(ds), *lambda)?)
        }
        &ObjectiveSpec::Quadratic {
            dim,
            mu,
            l,
            sigma,
            shift,
        } => {
            let spectrum = (0..dim)
                .map(|j| {
                    if dim == 1 {
                        mu
                    } else {
                        mu + (l - mu) * j as f64 / (dim - 1) as f64
                    }
                })
                .collect();
            Ok(Objective::quadratic_with_bounds(
                spectrum,
                vec![shift; dim],
                sigma,
                mu,
                l,
            )?)
        }
    }
}

/// Minimizes a strongly convex objective with deterministic AGD from the
/// origin, stopping at the first query point with
/// `||grad F|| <= tol * (1 + |F|)`.
pub fn compute_optimum(obj: &Objective, tol: f64) -> Result<Optimum, HarnessError> {
    let (mu, l) = (obj.mu_est(), obj.l_est());
    if !(mu > 0.0) {
        return Err(ObjectiveError::InvalidParameter(format!(
            "optimum needs a strongly convex objective, mu = {mu}"
        ))
        .into());
    }
    let w0 = vec![0.0; obj.dim()];
    let g0 = obj.grad(&w0)?;
    let f0 = obj.eval(&w0)?;
    let gn = norm_sq(&g0).sqrt();
    if gn <= tol * (1.0 + f0.abs()) {
        return Ok(Optimum {
            w_star: w0,
            f_star: f0,
            iterations: 0,
            grad_norm: gn,
        });
    }
    let mut s = AgdStepper::new(l, mu, w0.clone(), w0).map_err(HarnessError::from)?;
    let mut last = gn;
    for it in 1..=MAX_ITERATIONS {
        s.step(obj);
        let gn = norm_sq(s.last_grad()).sqrt();
        if !gn.is_finite() {
            break;
        }
        last = gn;
        let f = obj.eval_unchecked(s.last_md());
        if gn <= tol * (1.0 + f.abs()) {
            return Ok(Optimum {
                w_star: s.last_md().to_vec(),
                f_star: f,
                iterations: it,
                grad_norm: gn,
            });
        }
    }
    Err(HarnessError::OptimumNotReached {
        iterations: MAX_ITERATIONS,
        grad_norm: last,
    })
}

fn cache_key(obj: &Objective, spec: &ObjectiveSpec, tol: f64) -> String {
    match (spec, obj.dataset()) {
        (ObjectiveSpec::Logistic { lambda, .. }, Some(ds)) => {
            format!(
                "logistic:{}:lambda={lambda:e}:tol={tol:e}",
                ds.fingerprint()
            )
        }
        (
            ObjectiveSpec::Quadratic {
                dim, mu, l, shift, ..
            },
            _,
        ) => {
            format!("quadratic:dim={dim}:mu={mu:e}:l={l:e}:shift={shift:e}:tol={tol:e}")
        }
        _ => unreachable!("logistic objectives always carry a dataset"),
    }
}

/// Builds the configured objective and its optimum, reusing
/// `<cache_dir>/optimum_cache.json` when given.
pub fn prepare_problem(
    cfg: &ExperimentConfig,
    cache_dir: Option<&Path>,
) -> Result<Problem, HarnessError> {
    let objective = build_objective(&cfg.objective)?;
    let key = cache_key(&objective, &cfg.objective, cfg.tol);
    let path = cache_dir.map(|d| d.join(OPTIMUM_CACHE_FILE));
    let mut cache: BTreeMap<String, Optimum> = match &path {
        Some(p) if p.exists() => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Format {
                path: p.clone(),
                message: e.to_string(),
            })?
        }
        _ => BTreeMap::new(),
    };
    if let Some(o) = cache.get(&key) {
        if o.w_star.len() == objective.dim() {
            return Ok(Problem {
                init: initial_point(objective.dim(), cfg.init_scale, cfg.init_seed),
                objective,
                optimum: o.clone(),
            });
        }
    }
    let optimum = compute_optimum(&objective, cfg.tol)?;
    if let (Some(p), Some(dir)) = (&path, cache_dir) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        cache.insert(key, optimum.clone());
        let text = serde_json::to_string_pretty(&cache).expect("optimum cache serializes");
        std::fs::write(p, text).map_err(io_err(p))?;
    }
    Ok(Problem {
        init: initial_point(objective.dim(), cfg.init_scale, cfg.init_seed),
        objective,
        optimum,
    })
}
