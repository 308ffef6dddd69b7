//! Independent checks for the closed forms elsewhere in the crate.
//!
//! Nothing here calls into [`crate::improvement`] or the bound formulas in
//! [`crate::bounds`]: the Monte Carlo and quadrature engines evaluate the
//! bound gaps straight from their max/min definitions, and the vertex
//! enumeration solves the response-type linear program directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::pns_point_identification;
use crate::causal::{
    check_consistency, BoundInterval, BoundSource, ExperimentalDistribution, ObservationalDistribution,
};
use crate::unit_selection::BenefitSpec;
use crate::{Error, Result, INPUT_TOLERANCE};

/// Samples per independently seeded stream. Fixed so that results do not
/// depend on how many worker threads run.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gap {
    /// `L' - L`, driven by `D = P(y)`.
    Lower,
    /// `U - U'`, driven by `D' = P(x,y) + P(x',y')`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    /// `|mean - target| <= k * std_error`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Support of `D` or `D'` as the experimental data constrain it.
fn support(e: &ExperimentalDistribution, gap: Gap) -> (f64, f64) {
    let (p, q) = (e.p_y_x(), e.p_y_xp());
    match gap {
        Gap::Lower => ((p + q - 1.0).max(0.0), (p + q).min(1.0)),
        Gap::Upper => ((p - q).max(0.0), (p + 1.0 - q).min(1.0)),
    }
}

/// `L' - L` at `D = d`.
fn lower_gap_at(e: &ExperimentalDistribution, d: f64) -> f64 {
    let (p, q) = (e.p_y_x(), e.p_y_xp());
    let l = 0.0f64.max(p - q);
    let l_obs = l.max(d - q).max(p - d);
    l_obs - l
}

/// `U - U'` at `D' = d`.
fn upper_gap_at(e: &ExperimentalDistribution, d: f64) -> f64 {
    let (p, q) = (e.p_y_x(), e.p_y_xp());
    let u = p.min(1.0 - q);
    let u_obs = u.min(d).min(p + (1.0 - q) - d);
    u - u_obs
}

fn gap_at(e: &ExperimentalDistribution, gap: Gap, d: f64) -> f64 {
    match gap {
        Gap::Lower => lower_gap_at(e, d),
        Gap::Upper => upper_gap_at(e, d),
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_sizes(n: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks).into_par_iter().map(move |i| (i, CHUNK.min(n - i * CHUNK)))
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    fn estimate(self) -> McEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Runs `sample(rng)` `n` times over fixed-size, independently seeded chunks
/// and merges the moments in chunk order.
fn simulate<F>(n: usize, seed: u64, sample: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let per_chunk: Vec<Moments> = chunk_sizes(n)
        .map(|(i, len)| {
            let mut rng = chunk_rng(seed, i);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(sample(&mut rng));
            }
            m
        })
        .collect();
    per_chunk
        .into_iter()
        .fold(Moments::default(), Moments::merge)
        .estimate()
}

fn check_sample_count(n: usize) -> Result<()> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 1000 samples, got {n}"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `E(L' - L)` or `E(U - U')`, drawing `D` (or `D'`)
/// uniformly on its feasible range and evaluating the bounds directly.
///
/// Deterministic in `(e, gap, n, seed)` regardless of thread count. A
/// one-point support is simulated like any other and yields a zero-variance
/// estimate.
pub fn mc_expected_gain(e: &ExperimentalDistribution, gap: Gap, n: usize, seed: u64) -> Result<McEstimate> {
    check_sample_count(n)?;
    let (lo, hi) = support(e, gap);
    let e = *e;
    Ok(simulate(n, seed, move |rng| {
        let u: f64 = rng.random();
        gap_at(&e, gap, lo + (hi - lo) * u)
    }))
}

/// Empirical CDF of the simulated gap at each of `z_points` (must be sorted
/// ascending). Uses the same draws as [`mc_expected_gain`] for equal seeds.
pub fn mc_gain_cdf(e: &ExperimentalDistribution, gap: Gap, z_points: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    check_sample_count(n)?;
    if z_points.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("z points must be sorted".into()));
    }
    let (lo, hi) = support(e, gap);
    let k = z_points.len();
    let histograms: Vec<Vec<u64>> = chunk_sizes(n)
        .map(|(i, len)| {
            let mut rng = chunk_rng(seed, i);
            // hist[j] counts samples whose first z_j with sample <= z_j is j
            let mut hist = vec![0u64; k + 1];
            for _ in 0..len {
                let u: f64 = rng.random();
                let v = gap_at(e, gap, lo + (hi - lo) * u);
                hist[z_points.partition_point(|&z| z < v)] += 1;
            }
            hist
        })
        .collect();
    let mut totals = vec![0u64; k + 1];
    for h in &histograms {
        for (t, c) in totals.iter_mut().zip(h) {
            *t += c;
        }
    }
    let mut cumulative = 0u64;
    Ok(totals[..k]
        .iter()
        .map(|&c| {
            cumulative += c;
            cumulative as f64 / n as f64
        })
        .collect())
}

/// `E(L' - L)` or `E(U - U')` by composite midpoint integration of the gap
/// over the feasible range of `D` (or `D'`), divided by the range length.
pub fn quadrature_expected_gain(e: &ExperimentalDistribution, gap: Gap, panels: usize) -> Result<f64> {
    if panels < 100 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs at least 100 panels, got {panels}"
        )));
    }
    let (p, q) = (e.p_y_x(), e.p_y_xp());
    let sums = match gap {
        Gap::Lower => [p + q, (1.0 - p) + (1.0 - q)],
        Gap::Upper => [p + (1.0 - q), (1.0 - p) + q],
    };
    if sums.iter().any(|s| s.abs() <= INPUT_TOLERANCE) {
        return Err(Error::PointIdentified {
            value: pns_point_identification(e).unwrap_or(0.0),
        });
    }
    let (lo, hi) = support(e, gap);
    let h = (hi - lo) / panels as f64;
    let total: f64 = (0..panels).map(|k| gap_at(e, gap, lo + (k as f64 + 0.5) * h)).sum();
    Ok(total / panels as f64)
}

/// Monte Carlo estimate of `E(LB' - LB)` (`Gap::Lower`) or `E(UB - UB')`
/// (`Gap::Upper`) for a benefit function, assembling `LB`, `UB` from
/// `W + sigma * bound` with the sign of `sigma` deciding which PNS bound
/// (and hence whether `D` or `D'`) is drawn.
pub fn mc_benefit_gain(
    b: &BenefitSpec,
    e: &ExperimentalDistribution,
    gap: Gap,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_sample_count(n)?;
    let sigma = b.sigma();
    if sigma == 0.0 {
        return Err(Error::GainEquality { value: b.w(e) });
    }
    let w = b.w(e);
    // sigma > 0: LB follows L, UB follows U. sigma < 0: the roles swap.
    let pns_gap = match (gap, sigma > 0.0) {
        (Gap::Lower, true) | (Gap::Upper, false) => Gap::Lower,
        (Gap::Lower, false) | (Gap::Upper, true) => Gap::Upper,
    };
    let (lo, hi) = support(e, pns_gap);
    let (p, q) = (e.p_y_x(), e.p_y_xp());
    let e = *e;
    Ok(simulate(n, seed, move |rng| {
        let u: f64 = rng.random();
        let d = lo + (hi - lo) * u;
        let (before, after) = match pns_gap {
            Gap::Lower => {
                let l = 0.0f64.max(p - q);
                (l, l + lower_gap_at(&e, d))
            }
            Gap::Upper => {
                let u = p.min(1.0 - q);
                (u, u - upper_gap_at(&e, d))
            }
        };
        let (old, new) = (w + sigma * before, w + sigma * after);
        match gap {
            Gap::Lower => new - old,
            Gap::Upper => old - new,
        }
    }))
}

/// Complier, always-taker, never-taker, defier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseType {
    Complier,
    AlwaysTaker,
    NeverTaker,
    Defier,
}

/// A population described by its response-type mix and by how likely each
/// type is to take the treatment when free to choose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseTypeDistribution {
    pub p_complier: f64,
    pub p_always: f64,
    pub p_never: f64,
    pub p_defier: f64,
    /// `P(X = x | type)`, indexed complier, always, never, defier.
    pub treatment_propensity: [f64; 4],
}

impl ResponseTypeDistribution {
    pub fn new(types: [f64; 4], treatment_propensity: [f64; 4]) -> Result<Self> {
        if types
            .iter()
            .chain(&treatment_propensity)
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidArgument(
                "response-type masses and propensities must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = types.iter().sum();
        if (sum - 1.0).abs() > crate::IDENTITY_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "response-type masses sum to {sum}, expected 1"
            )));
        }
        let [p_complier, p_always, p_never, p_defier] = types;
        Ok(Self {
            p_complier,
            p_always,
            p_never,
            p_defier,
            treatment_propensity,
        })
    }

    pub fn propensity(&self, t: ResponseType) -> f64 {
        self.treatment_propensity[t as usize]
    }

    pub fn true_pns(&self) -> f64 {
        self.p_complier
    }

    /// `P(type, X = x)` for each type.
    fn treated_mass(&self) -> [f64; 4] {
        let pi = self.treatment_propensity;
        [
            self.p_complier * pi[0],
            self.p_always * pi[1],
            self.p_never * pi[2],
            self.p_defier * pi[3],
        ]
    }

    fn untreated_mass(&self) -> [f64; 4] {
        let pi = self.treatment_propensity;
        [
            self.p_complier * (1.0 - pi[0]),
            self.p_always * (1.0 - pi[1]),
            self.p_never * (1.0 - pi[2]),
            self.p_defier * (1.0 - pi[3]),
        ]
    }

    pub fn experimental(&self) -> ExperimentalDistribution {
        ExperimentalDistribution::new(
            (self.p_complier + self.p_always).min(1.0),
            (self.p_always + self.p_defier).min(1.0),
        )
        .expect("sums of type masses are probabilities")
    }

    pub fn observational(&self) -> ObservationalDistribution {
        let [tc, ta, tn, td] = self.treated_mass();
        let [uc, ua, un, ud] = self.untreated_mass();
        // Under X = x compliers and always-takers show y; under X = x'
        // always-takers and defiers do.
        ObservationalDistribution::new(
            (tc + ta).min(1.0),
            (ua + ud).min(1.0),
            (tn + td).min(1.0),
            (uc + un).min(1.0),
        )
        .expect("type masses sum to one")
    }

    /// `P(y'_{x'} | x, y)`: compliers among treated units with `y`.
    pub fn true_pn(&self) -> Option<f64> {
        let [tc, ta, _, _] = self.treated_mass();
        (tc + ta > 0.0).then(|| tc / (tc + ta))
    }

    /// `P(y_x | x', y')`: compliers among untreated units with `y'`.
    pub fn true_ps(&self) -> Option<f64> {
        let [uc, _, un, _] = self.untreated_mass();
        (uc + un > 0.0).then(|| uc / (uc + un))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScmSample {
    pub types: ResponseTypeDistribution,
    pub experimental: ExperimentalDistribution,
    pub observational: ObservationalDistribution,
    pub true_pns: f64,
}

impl ScmSample {
    pub fn from_types(types: ResponseTypeDistribution) -> Self {
        Self {
            types,
            experimental: types.experimental(),
            observational: types.observational(),
            true_pns: types.true_pns(),
        }
    }
}

/// Random ground-truth population: flat Dirichlet response-type mix and
/// independent uniform treatment propensities.
pub fn sample_scm(seed: u64) -> ScmSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(Exp1));
    let total: f64 = draws.iter().sum();
    let mut types = draws.map(|d| d / total);
    // push the rounding residue into the largest mass
    let residue = 1.0 - types.iter().sum::<f64>();
    let largest = (0..4).max_by(|&a, &b| types[a].total_cmp(&types[b])).unwrap();
    types[largest] += residue;
    let propensity: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
    let dist = ResponseTypeDistribution::new(types, propensity).expect("normalized Dirichlet draw");
    ScmSample::from_types(dist)
}

/// Exact extrema of PNS, PN and PS over every response-type population that
/// reproduces `(e, o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpBounds {
    pub pns: BoundInterval,
    pub pn: Option<BoundInterval>,
    pub ps: Option<BoundInterval>,
    pub vertices: usize,
}

/// Solves the response-type linear program by enumerating the vertices of
/// its feasible polygon.
///
/// With `P(y_x)`, `P(y_x')` fixed, the type masses are affine in the
/// complier mass `c`, and the treated share of each type is affine in the
/// treated always-taker mass `t`. The feasible set is therefore a polygon in
/// `(c, t)`; every objective (PNS = `c`, PN, PS) is linear on it, so its
/// extrema sit at vertices.
pub fn lp_vertex_enumeration(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> Result<LpBounds> {
    let (p, q) = (e.p_y_x(), e.p_y_xp());
    let a = o.p_xy();
    let b = o.p_xyp();
    // treated always-takers plus treated defiers
    let k = q - o.p_xpy();
    // Rows (coef_c, coef_t, rhs) for coef_c * c + coef_t * t <= rhs.
    let rows: [(f64, f64, f64); 12] = [
        (-1.0, 0.0, 0.0),            // complier >= 0
        (1.0, 0.0, p),               // always-taker = p - c >= 0
        (-1.0, 0.0, q - p),          // defier = q - p + c >= 0
        (1.0, 0.0, 1.0 - q),         // never-taker = 1 - q - c >= 0
        (0.0, -1.0, 0.0),            // treated always-taker t >= 0
        (1.0, 1.0, p),               // t <= always-taker
        (0.0, 1.0, a),               // treated complier a - t >= 0
        (-1.0, -1.0, -a),            // a - t <= complier
        (0.0, 1.0, k),               // treated defier k - t >= 0
        (-1.0, -1.0, q - p - k),     // k - t <= defier
        (0.0, -1.0, b - k),          // treated never-taker b - k + t >= 0
        (1.0, 1.0, 1.0 - q - b + k), // b - k + t <= never-taker
    ];
    let feasible = |x: f64, y: f64| rows.iter().all(|&(u, v, r)| u * x + v * y <= r + INPUT_TOLERANCE);

    let mut vertices = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a1, b1, r1) = rows[i];
            let (a2, b2, r2) = rows[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-15 {
                continue;
            }
            let x = (r1 * b2 - r2 * b1) / det;
            let y = (a1 * r2 - a2 * r1) / det;
            if feasible(x, y) {
                vertices.push((x, y));
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::InconsistentData {
            report: check_consistency(e, o),
        });
    }

    let extent = |f: &dyn Fn(f64, f64) -> f64| {
        let (lo, hi) = vertices
            .iter()
            .map(|&(x, y)| f(x, y))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        BoundInterval {
            lower: lo.clamp(0.0, 1.0),
            upper: hi.clamp(0.0, 1.0),
            source: BoundSource::Combined,
        }
    };
    let pns = extent(&|x, _| x);
    let pn = (a > 0.0).then(|| extent(&|_, y| (a - y) / a));
    let xpyp = o.p_xpyp();
    let ps = (xpyp > 0.0).then(|| extent(&|x, y| (x - a + y) / xpyp));
    Ok(LpBounds {
        pns,
        pn,
        ps,
        vertices: vertices.len(),
    })
}
