use super::DiagError;
use crate::objectives::DeterministicGradient;

/// Closed interval `[center - half_width, center + half_width]` of curvature `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo() <= y && y <= self.hi()
    }

    fn gap_to(&self, y: f64) -> f64 {
        (self.lo() - y).max(y - self.hi()).max(0.0)
    }

    /// Antiderivative of `clamp(s, lo, hi)` with `P(lo) = lo^2`.
    fn clamp_integral(&self, s: f64) -> f64 {
        let (lo, hi) = (self.lo(), self.hi());
        if s <= lo {
            lo * s
        } else if s <= hi {
            lo * lo + 0.5 * (s * s - lo * lo)
        } else {
            lo * lo + 0.5 * (hi * hi - lo * lo) + hi * (s - hi)
        }
    }

    /// Signed length of `[x - d, x]` inside the bump.
    fn overlap(&self, x: f64, d: f64) -> f64 {
        let (a, b) = if d >= 0.0 { (x - d, x) } else { (x, x - d) };
        let (lo, hi) = (self.lo(), self.hi());
        if b < lo || a > hi {
            0.0
        } else if a >= lo && b <= hi {
            d
        } else {
            d.signum() * (b.min(hi) - a.max(lo))
        }
    }
}

/// 1-D objective with `F'' = L` on a set of disjoint closed bumps and `mu`
/// elsewhere, normalized so `F(0) = F'(0) = 0`:
///
/// ```text
/// F'(y) = mu y + (L - mu) sum_b [clamp(y, lo_b, hi_b) - clamp(0, lo_b, hi_b)]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseCurvature1D {
    base_mu: f64,
    curvature: f64,
    bumps: Vec<Bump>,
}

impl PiecewiseCurvature1D {
    pub fn new(mu: f64, l: f64) -> Result<Self, DiagError> {
        if !(mu > 0.0 && l >= mu && l.is_finite()) {
            return Err(DiagError::InvalidParameter(format!(
                "need 0 < mu <= L, got mu={mu}, L={l}"
            )));
        }
        Ok(Self {
            base_mu: mu,
            curvature: l,
            bumps: Vec::new(),
        })
    }

    /// Adds a bump; it must have positive width and miss every existing one.
    pub fn with_bump(&self, b: Bump) -> Result<Self, DiagError> {
        if !(b.half_width > 0.0 && b.half_width.is_finite() && b.center.is_finite()) {
            return Err(DiagError::InvalidParameter(format!("bad bump {b:?}")));
        }
        if let Some(o) = self
            .bumps
            .iter()
            .find(|o| !(b.hi() < o.lo() || o.hi() < b.lo()))
        {
            return Err(DiagError::InvalidParameter(format!(
                "bump {b:?} overlaps {o:?}"
            )));
        }
        let mut out = self.clone();
        out.bumps.push(b);
        Ok(out)
    }

    pub fn mu(&self) -> f64 {
        self.base_mu
    }

    pub fn l(&self) -> f64 {
        self.curvature
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn curvature_at(&self, y: f64) -> f64 {
        if self.bumps.iter().any(|b| b.contains(y)) {
            self.curvature
        } else {
            self.base_mu
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        let extra: f64 = self
            .bumps
            .iter()
            .map(|b| {
                let c0 = 0.0f64.clamp(b.lo(), b.hi());
                b.clamp_integral(y) - b.clamp_integral(0.0) - c0 * y
            })
            .sum();
        0.5 * self.base_mu * y * y + (self.curvature - self.base_mu) * extra
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let extra: f64 = self
            .bumps
            .iter()
            .map(|b| y.clamp(b.lo(), b.hi()) - 0.0f64.clamp(b.lo(), b.hi()))
            .sum();
        self.base_mu * y + (self.curvature - self.base_mu) * extra
    }

    /// `F'(x) - F'(x - d)` without forming `x - d` in the result, so tiny `d`
    /// keeps full relative precision.
    pub fn gradient_difference(&self, x: f64, d: f64) -> f64 {
        let extra: f64 = self.bumps.iter().map(|b| b.overlap(x, d)).sum();
        self.base_mu * d + (self.curvature - self.base_mu) * extra
    }

    /// Distance from `y` to the nearest point where the curvature changes.
    pub fn clearance(&self, y: f64) -> f64 {
        match self.bumps.iter().find(|b| b.contains(y)) {
            Some(b) => (y - b.lo()).min(b.hi() - y),
            None => self
                .bumps
                .iter()
                .map(|b| b.gap_to(y))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

impl DeterministicGradient for PiecewiseCurvature1D {
    fn dim(&self) -> usize {
        1
    }

    fn gradient_into(&self, w: &[f64], out: &mut [f64]) {
        out[0] = self.derivative(w[0]);
    }
}

/// Scalar AGD with the same coefficient arithmetic as
/// [`AgdStepper`](crate::algorithms::AgdStepper).
#[derive(Clone, Copy)]
struct Agd1 {
    c_w: f64,
    c_ag: f64,
    inv_l: f64,
    isk: f64,
    step_w: f64,
}

impl Agd1 {
    fn new(l: f64, mu: f64) -> Self {
        let sk = (l / mu).sqrt();
        Self {
            c_w: 1.0 / (sk + 1.0),
            c_ag: sk / (sk + 1.0),
            inv_l: 1.0 / l,
            isk: 1.0 / sk,
            step_w: 1.0 / (l * mu).sqrt(),
        }
    }

    fn md(&self, w: f64, ag: f64) -> f64 {
        self.c_w * w + self.c_ag * ag
    }

    /// Returns the new `(w, w_ag)` given `w`, `md` and `g = F'(md)`.
    fn update(&self, w: f64, md: f64, g: f64) -> (f64, f64) {
        (
            (1.0 - self.isk) * w + self.isk * md - self.step_w * g,
            md - self.inv_l * g,
        )
    }

    fn queries(&self, f: &PiecewiseCurvature1D, w0: f64, ag0: f64, steps: usize) -> Vec<f64> {
        let (mut w, mut ag) = (w0, ag0);
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let md = self.md(w, ag);
            (w, ag) = self.update(w, md, f.derivative(md));
            out.push(md);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstabilityConstruction {
    pub objective: PiecewiseCurvature1D,
    pub w0: f64,
    pub w0_ag: f64,
    /// Half the smallest distance from any AGD query point to a curvature
    /// change; infinite when there are no bumps.
    pub delta: f64,
    /// The `3K` query points `w_md` of AGD on the returned objective.
    pub queries: Vec<f64>,
}

const MAX_SHRINKS: usize = 60;

/// Smallest margin by which the query points respect the pattern "curvature
/// `L` at `t = 3j + 1` for `j < placed`, `mu` everywhere else". `None` if
/// some point sits on a boundary or in the wrong region.
fn pattern_margin(f: &PiecewiseCurvature1D, q: &[f64], placed: usize) -> Option<f64> {
    let mut margin = f64::INFINITY;
    for (t, &y) in q.iter().enumerate() {
        let own = (t % 3 == 1 && t / 3 < placed).then(|| f.bumps[t / 3]);
        let m = match own {
            Some(b) => (y - b.lo()).min(b.hi() - y),
            None => f
                .bumps
                .iter()
                .map(|b| b.gap_to(y))
                .fold(f64::INFINITY, f64::min),
        };
        if !(m > 0.0) {
            return None;
        }
        margin = margin.min(m);
    }
    Some(margin)
}

fn min_spacing(q: &[f64]) -> f64 {
    let mut s = q.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::INFINITY, f64::min)
}

/// Builds a 1-D objective on which AGD from `(w0, w0_ag) = (1, 1)` queries a
/// curvature-`L` region exactly at steps `t = 1, 4, 7, ..., 3K - 2` and
/// curvature `mu` at every other step below `3K`.
///
/// Bumps are placed one block at a time. For block `k`, a provisional bump
/// around the current query point `c0 = w_md[3k+1]` is inserted first; the
/// query points under that provisional objective are recomputed and every
/// bump is re-centered on its own query point. The half-width starts at half the distance
/// from `c0` to the nearest other query point or bump and is multiplied by
/// `eps_shrink` until no query point moves by more than a quarter of the
/// minimum query spacing and the curvature pattern holds for every query.
pub fn construct_instability_objective(
    l: f64,
    mu: f64,
    k: usize,
    eps_shrink: f64,
) -> Result<InstabilityConstruction, DiagError> {
    if !(mu > 0.0 && l.is_finite() && l / mu >= 25.0) {
        return Err(DiagError::InvalidParameter(format!(
            "need L/mu >= 25, got mu={mu}, L={l}"
        )));
    }
    if !(eps_shrink > 0.0 && eps_shrink < 1.0) {
        return Err(DiagError::InvalidParameter(format!(
            "eps_shrink must lie in (0, 1), got {eps_shrink}"
        )));
    }
    let (w0, w0_ag) = (1.0, 1.0);
    let agd = Agd1::new(l, mu);
    let steps = 3 * k;
    let mut f = PiecewiseCurvature1D::new(mu, l)?;
    let mut q = agd.queries(&f, w0, w0_ag, steps);
    if k > 0 && !(min_spacing(&q) > 0.0) {
        return Err(DiagError::ConstructionFailed {
            block: 0,
            attempts: 0,
        });
    }

    for block in 0..k {
        let i = 3 * block + 1;
        let c0 = q[i];
        let room = q
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != i)
            .map(|(_, y)| (y - c0).abs())
            .chain(f.bumps.iter().map(|b| b.gap_to(c0)))
            .fold(f64::INFINITY, f64::min);
        let spacing = min_spacing(&q);
        let mut eps = 0.5 * room;
        let mut accepted = None;
        for _ in 0..=MAX_SHRINKS {
            if let Some(next) = try_bump(&f, &agd, &q, i, c0, eps, spacing, w0, w0_ag, block + 1) {
                accepted = Some(next);
                break;
            }
            eps *= eps_shrink;
        }
        let (nf, nq) = accepted.ok_or(DiagError::ConstructionFailed {
            block,
            attempts: MAX_SHRINKS,
        })?;
        f = nf;
        q = nq;
    }

    let delta = if k == 0 {
        f64::INFINITY
    } else {
        0.5 * pattern_margin(&f, &q, k).expect("accepted construction satisfies the pattern")
    };
    Ok(InstabilityConstruction {
        objective: f,
        w0,
        w0_ag,
        delta,
        queries: q,
    })
}

/// Moves bump `j` onto query point `3j + 1`, for `j = 0, 1, ...` in turn.
///
/// Outside a bump, `F'` depends on the bump only through its width, so once
/// the bumps before `j` are centered, `w_md[3j+1]` no longer depends on any
/// center and the pass ends with every bump point exactly on its center.
fn recenter(
    f: &PiecewiseCurvature1D,
    agd: &Agd1,
    w0: f64,
    w0_ag: f64,
    steps: usize,
) -> Option<(PiecewiseCurvature1D, Vec<f64>)> {
    let mut bumps = f.bumps.clone();
    for j in 0..bumps.len() {
        let g = PiecewiseCurvature1D {
            bumps: bumps.clone(),
            ..f.clone()
        };
        bumps[j].center = agd.queries(&g, w0, w0_ag, 3 * j + 2)[3 * j + 1];
    }
    let mut g = PiecewiseCurvature1D::new(f.base_mu, f.curvature).ok()?;
    for b in bumps {
        g = g.with_bump(b).ok()?;
    }
    let q = agd.queries(&g, w0, w0_ag, steps);
    Some((g, q))
}

#[allow(clippy::too_many_arguments)]
fn try_bump(
    f: &PiecewiseCurvature1D,
    agd: &Agd1,
    q: &[f64],
    i: usize,
    c0: f64,
    eps: f64,
    spacing: f64,
    w0: f64,
    w0_ag: f64,
    placed: usize,
) -> Option<(PiecewiseCurvature1D, Vec<f64>)> {
    let provisional = f
        .with_bump(Bump {
            center: c0,
            half_width: eps,
        })
        .ok()?;
    let (cand, nq) = recenter(&provisional, agd, w0, w0_ag, q.len())?;
    debug_assert_eq!(cand.bumps.len(), i / 3 + 1);
    let moved = q
        .iter()
        .zip(&nq)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ok = moved <= 0.25 * spacing
        && pattern_margin(&cand, &nq, placed).is_some()
        && min_spacing(&nq) > 0.0;
    ok.then_some((cand, nq))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstabilityReport {
    /// `-2 (1 - 1/sqrt(kappa))^3`.
    pub block_factor: f64,
    /// Gap `(w_ag - u_ag, w - u)` at `t = 0, 3, ..., 3K`.
    pub gaps: Vec<[f64; 2]>,
    /// Per block, `||gap_{k+1}|| / ||P gap_k||` with `P` the block projector.
    pub ratios: Vec<f64>,
    /// Per block, relative distance of `gap_{k+1}` from `block_factor * P gap_k`.
    pub projector_rel_err: Vec<f64>,
    pub final_gap_w: f64,
    pub final_gap_ag: f64,
}

/// Block projector `P = [[1/2, 1/(2 sqrt(kappa))], [sqrt(kappa)/2, 1/2]]` on
/// `(delta w_ag, delta w)`.
fn project(sk: f64, g: [f64; 2]) -> [f64; 2] {
    [0.5 * g[0] + 0.5 / sk * g[1], 0.5 * sk * g[0] + 0.5 * g[1]]
}

/// Runs AGD from `(w0, w0_ag)` and from `(w0 - eps, w0_ag - eps)` for `3K`
/// steps and measures how the gap grows per 3-step block.
///
/// The second run is tracked as an offset from the first, so gaps far below
/// the iterates' own rounding error are still resolved exactly. Fails if a
/// step of the second run queries a point whose curvature differs from the
/// first run's.
#[allow(clippy::too_many_arguments)]
pub fn instability_experiment(
    f: &PiecewiseCurvature1D,
    w0: f64,
    w0_ag: f64,
    l: f64,
    mu: f64,
    eps: f64,
    k: usize,
) -> Result<InstabilityReport, DiagError> {
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(DiagError::InvalidParameter(format!(
            "need 0 < mu <= L, got mu={mu}, L={l}"
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(DiagError::InvalidParameter(format!(
            "eps must be finite and >= 0, got {eps}"
        )));
    }
    let agd = Agd1::new(l, mu);
    let sk = (l / mu).sqrt();
    let c = 1.0 - 1.0 / sk;
    let block_factor = -2.0 * c * c * c;

    let (mut w, mut ag) = (w0, w0_ag);
    let (mut dw, mut dag) = (eps, eps);
    let mut gaps = vec![[dag, dw]];
    let mut ratios = Vec::with_capacity(k);
    let mut projector_rel_err = Vec::with_capacity(k);
    for block in 0..k {
        for s in 0..3 {
            let step = 3 * block + s;
            let md = agd.md(w, ag);
            let dmd = agd.md(dw, dag);
            if dmd != 0.0 && !(dmd.abs() < f.clearance(md)) {
                return Err(DiagError::LeftNeighborhood { step });
            }
            let g = f.derivative(md);
            let dg = f.gradient_difference(md, dmd);
            (w, ag) = agd.update(w, md, g);
            (dw, dag) = agd.update(dw, dmd, dg);
        }
        let prev = gaps[block];
        let now = [dag, dw];
        let p = project(sk, prev);
        let pred = [block_factor * p[0], block_factor * p[1]];
        ratios.push(now[0].hypot(now[1]) / p[0].hypot(p[1]));
        projector_rel_err.push((now[0] - pred[0]).hypot(now[1] - pred[1]) / pred[0].hypot(pred[1]));
        gaps.push(now);
    }
    Ok(InstabilityReport {
        block_factor,
        gaps,
        ratios,
        projector_rel_err,
        final_gap_w: dw.abs(),
        final_gap_ag: dag.abs(),
    })
}
