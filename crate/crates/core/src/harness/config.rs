use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};

pub const DEFAULT_ETA_GRID: [f64; 13] = [
    0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0,
];
pub const DEFAULT_OUT_DIR: &str = "fedac-out";
pub const OUT_DIR_ENV: &str = "FEDAC_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fedac1,
    Fedac2,
    FedacVanilla,
    Fedavg,
    MbSgd,
    MbAcsgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Fedac1,
        Algorithm::Fedac2,
        Algorithm::FedacVanilla,
        Algorithm::Fedavg,
        Algorithm::MbSgd,
        Algorithm::MbAcsgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Fedac1 => "fedac1",
            Algorithm::Fedac2 => "fedac2",
            Algorithm::FedacVanilla => "fedac_vanilla",
            Algorithm::Fedavg => "fedavg",
            Algorithm::MbSgd => "mb_sgd",
            Algorithm::MbAcsgd => "mb_acsgd",
        }
    }

    pub fn is_minibatch(self) -> bool {
        matches!(self, Algorithm::MbSgd | Algorithm::MbAcsgd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == t)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected one of fedac1, fedac2, fedac_vanilla, fedavg, mb_sgd, mb_acsgd)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveSpec {
    Logistic {
        data: PathBuf,
        dim: Option<usize>,
        lambda: f64,
    },
    /// Spectrum evenly spaced on `[mu, l]`, optimum at `shift * (1, ..., 1)`.
    Quadratic {
        dim: usize,
        mu: f64,
        l: f64,
        sigma: f64,
        shift: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub algorithms: Vec<Algorithm>,
    pub t: usize,
    pub ks: Vec<usize>,
    pub ms: Vec<usize>,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval_every: usize,
    /// Relative gradient tolerance for the optimum: stop at
    /// `||grad F|| <= tol * (1 + |F|)`.
    pub tol: f64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    /// Standard deviation of the shared Gaussian starting point; 0 starts
    /// every run at the origin.
    pub init_scale: f64,
    pub init_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.t == 0 {
            return bad("T must be >= 1".into());
        }
        if self.algorithms.is_empty()
            || self.ks.is_empty()
            || self.ms.is_empty()
            || self.seeds.is_empty()
        {
            return bad("algorithms, K, M and seeds must be nonempty".into());
        }
        if let Some(k) = self.ks.iter().find(|&&k| k == 0 || self.t % k != 0) {
            return bad(format!("every K must divide T={}, got K={k}", self.t));
        }
        if self.ms.contains(&0) {
            return bad("M must be >= 1".into());
        }
        if self.etas.is_empty() || !self.etas.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return bad("eta grid must be nonempty and positive".into());
        }
        if self.eval_every == 0 || self.t % self.eval_every != 0 {
            return bad(format!(
                "eval_every={} must divide T={}",
                self.eval_every, self.t
            ));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol must be positive".into());
        }
        if self.threads == 0 {
            return bad("threads must be >= 1".into());
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be finite and nonnegative".into());
        }
        match &self.objective {
            ObjectiveSpec::Logistic { lambda, .. } if !(*lambda > 0.0 && lambda.is_finite()) => {
                bad("lambda must be positive".into())
            }
            ObjectiveSpec::Quadratic {
                dim,
                mu,
                l,
                sigma,
                shift,
            } => {
                if *dim == 0
                    || !(*mu > 0.0 && l >= mu && l.is_finite())
                    || !(*sigma >= 0.0)
                    || !shift.is_finite()
                {
                    bad(
                        "quadratic needs quad_dim >= 1, 0 < quad_mu <= quad_l, quad_sigma >= 0"
                            .into(),
                    )
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

const KEYS: [&str; 21] = [
    "objective",
    "data",
    "dim",
    "lambda",
    "quad_dim",
    "quad_mu",
    "quad_l",
    "quad_sigma",
    "quad_shift",
    "algorithms",
    "t",
    "k",
    "m",
    "eta",
    "seeds",
    "eval_every",
    "tol",
    "threads",
    "out",
    "init_scale",
    "init_seed",
];

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, HarnessError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

/// Parses flat `key = value` lines. Keys are case-insensitive, lists are
/// comma-separated, `#` starts a comment. Relative `data` paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected `key = value`", i + 1))
        })?;
        let key = k.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(HarnessError::Config(format!(
                "line {}: unknown key `{}`",
                i + 1,
                k.trim()
            )));
        }
        if kv.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(HarnessError::Config(format!(
                "line {}: duplicate key `{key}`",
                i + 1
            )));
        }
    }
    let get = |k: &str| kv.get(k).map(String::as_str);

    let kind = get("objective").map(str::to_ascii_lowercase);
    let objective = match kind.as_deref() {
        Some("quadratic") => ObjectiveSpec::Quadratic {
            dim: get("quad_dim")
                .map(|v| parse_one("quad_dim", v))
                .transpose()?
                .unwrap_or(10),
            mu: get("quad_mu")
                .map(|v| parse_one("quad_mu", v))
                .transpose()?
                .unwrap_or(0.1),
            l: get("quad_l")
                .map(|v| parse_one("quad_l", v))
                .transpose()?
                .unwrap_or(1.0),
            sigma: get("quad_sigma")
                .map(|v| parse_one("quad_sigma", v))
                .transpose()?
                .unwrap_or(1.0),
            shift: get("quad_shift")
                .map(|v| parse_one("quad_shift", v))
                .transpose()?
                .unwrap_or(1.0),
        },
        Some("logistic") | None => {
            let data = get("data")
                .ok_or_else(|| HarnessError::Config("logistic objective needs `data`".into()))?;
            let mut path = PathBuf::from(data);
            if path.is_relative() {
                if let Some(b) = base_dir {
                    path = b.join(path);
                }
            }
            ObjectiveSpec::Logistic {
                data: path,
                dim: get("dim").map(|v| parse_one("dim", v)).transpose()?,
                lambda: get("lambda")
                    .map(|v| parse_one("lambda", v))
                    .transpose()?
                    .unwrap_or(1e-3),
            }
        }
        Some(other) => return Err(HarnessError::Config(format!("unknown objective `{other}`"))),
    };

    let t: usize = parse_one(
        "T",
        get("t").ok_or_else(|| HarnessError::Config("missing required key `T`".into()))?,
    )?;
    let algorithms = match get("algorithms") {
        Some(v) => v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Algorithm>().map_err(HarnessError::Config))
            .collect::<Result<_, _>>()?,
        None => vec![
            Algorithm::Fedac1,
            Algorithm::Fedavg,
            Algorithm::MbSgd,
            Algorithm::MbAcsgd,
        ],
    };
    let cfg = ExperimentConfig {
        objective,
        algorithms,
        t,
        ks: get("k")
            .map(|v| parse_list("K", v))
            .transpose()?
            .unwrap_or_else(|| vec![1]),
        ms: get("m")
            .map(|v| parse_list("M", v))
            .transpose()?
            .unwrap_or_else(|| vec![1]),
        etas: get("eta")
            .map(|v| parse_list("eta", v))
            .transpose()?
            .unwrap_or_else(|| DEFAULT_ETA_GRID.to_vec()),
        seeds: get("seeds")
            .map(|v| parse_list("seeds", v))
            .transpose()?
            .unwrap_or_else(|| vec![0, 1, 2]),
        eval_every: get("eval_every")
            .map(|v| parse_one("eval_every", v))
            .transpose()?
            .unwrap_or(t),
        tol: get("tol")
            .map(|v| parse_one("tol", v))
            .transpose()?
            .unwrap_or(1e-12),
        threads: get("threads")
            .map(|v| parse_one("threads", v))
            .transpose()?
            .unwrap_or(1),
        out: get("out").map(PathBuf::from),
        init_scale: get("init_scale")
            .map(|v| parse_one("init_scale", v))
            .transpose()?
            .unwrap_or(0.0),
        init_seed: get("init_seed")
            .map(|v| parse_one("init_seed", v))
            .transpose()?
            .unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, path.parent())
}

/// Output directory: explicit flag, then `$FEDAC_OUT_DIR`, then the config
/// file, then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(cli: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.and_then(|c| c.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_logistic() {
        let c = parse_config("data = a9a\nT = 8\n", Some(Path::new("/d"))).unwrap();
        assert_eq!(
            c.objective,
            ObjectiveSpec::Logistic {
                data: "/d/a9a".into(),
                dim: None,
                lambda: 1e-3
            }
        );
        assert_eq!(c.etas, DEFAULT_ETA_GRID.to_vec());
        assert_eq!(
            (c.ks.clone(), c.ms.clone(), c.seeds.clone(), c.eval_every),
            (vec![1], vec![1], vec![0, 1, 2], 8)
        );
        assert_eq!(c.algorithms.len(), 4);
    }

    #[test]
    fn full_quadratic_with_comments_and_case() {
        let text = "# sweep\nOBJECTIVE = quadratic\nquad_dim=3\nQuad_Mu = 0.5 # strong convexity\nquad_l=2\n\
                    algorithms = fedac1, FedAvg , mb-sgd\nT=16\nK=1,4,16\nM=2,8\neta=0.1,0.2\nseeds=7\neval_every=4\n";
        let c = parse_config(text, None).unwrap();
        assert_eq!(
            c.objective,
            ObjectiveSpec::Quadratic {
                dim: 3,
                mu: 0.5,
                l: 2.0,
                sigma: 1.0,
                shift: 1.0
            }
        );
        assert_eq!(
            c.algorithms,
            vec![Algorithm::Fedac1, Algorithm::Fedavg, Algorithm::MbSgd]
        );
        assert_eq!(c.ks, vec![1, 4, 16]);
        assert_eq!(c.seeds, vec![7]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "data=x\n",
            "data=x\nT=8\nK=3\n",
            "data=x\nT=8\neval_every=3\n",
            "data=x\nT=8\nbogus=1\n",
            "data=x\nT=8\nT=8\n",
            "data=x\nT=8\neta=\n",
            "data=x\nT=8\neta=-1\n",
            "data=x\nT=8\nalgorithms=sgd\n",
            "objective=svm\nT=8\n",
            "T=8\n",
            "data=x\nT = eight\n",
            "data=x\nT=8\nno equals sign\n",
        ] {
            assert!(
                matches!(parse_config(text, None), Err(HarnessError::Config(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
    }
}
