//! Discrete complex measures on the torus [0, 1).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite spike train `sum_l a_l delta_{t_l}` on the torus.
///
/// Points are reduced mod 1 and sorted at construction; weights follow
/// their points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpikeTrainRepr", into = "SpikeTrainRepr")]
pub struct SpikeTrain {
    points: Vec<f64>,
    weights: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct SpikeTrainRepr {
    points: Vec<f64>,
    weights: Vec<[f64; 2]>,
}

impl TryFrom<SpikeTrainRepr> for SpikeTrain {
    type Error = Error;

    fn try_from(r: SpikeTrainRepr) -> Result<Self> {
        let weights = r.weights.iter().map(|w| Complex64::new(w[0], w[1])).collect();
        SpikeTrain::new(r.points, weights)
    }
}

impl From<SpikeTrain> for SpikeTrainRepr {
    fn from(m: SpikeTrain) -> Self {
        SpikeTrainRepr {
            points: m.points,
            weights: m.weights.iter().map(|w| [w.re, w.im]).collect(),
        }
    }
}

/// Reduces `t` into [0, 1).
pub fn wrap_unit(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance on the torus: `min_n |a - b + n|`.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

impl SpikeTrain {
    /// Builds a train, reducing points mod 1 and sorting them.
    pub fn new(points: Vec<f64>, weights: Vec<Complex64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidTrain(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidTrain("non-finite point".into()));
        }
        if weights.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidTrain("non-finite weight".into()));
        }
        if weights.iter().any(|a| a.norm() == 0.0) {
            return Err(Error::InvalidTrain("zero weight".into()));
        }
        let mut pairs: Vec<(f64, Complex64)> = points
            .into_iter()
            .map(wrap_unit)
            .zip(weights)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let points: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights = pairs.into_iter().map(|p| p.1).collect();
        let m = SpikeTrain { points, weights };
        if m.len() >= 2 && min_wraparound_distance(&m)? <= 1e-12 {
            return Err(Error::InvalidTrain("duplicate points".into()));
        }
        Ok(m)
    }

    /// The zero measure.
    pub fn empty() -> Self {
        SpikeTrain {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplies every weight by `c` (`c` must be nonzero).
    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        SpikeTrain::new(
            self.points.clone(),
            self.weights.iter().map(|a| a * c).collect(),
        )
    }

    /// Circularly shifts every point by `s`.
    pub fn shifted(&self, s: f64) -> Result<Self> {
        SpikeTrain::new(
            self.points.iter().map(|t| t + s).collect(),
            self.weights.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Total-variation norm `sum_l |a_l|`.
pub fn tv_norm(m: &SpikeTrain) -> f64 {
    m.weights.iter().map(|a| a.norm()).sum()
}

/// Smallest wrap-around distance between two distinct points.
pub fn min_wraparound_distance(m: &SpikeTrain) -> Result<f64> {
    let p = &m.points;
    if p.len() < 2 {
        return Err(Error::Undefined(
            "minimum separation needs at least two points".into(),
        ));
    }
    let mut best = 1.0 + p[0] - p[p.len() - 1];
    for w in p.windows(2) {
        best = best.min(w[1] - w[0]);
    }
    Ok(best.min(0.5))
}

/// Parameters of the randomized instance generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub delta: f64,
    pub amplitude_range: (f64, f64),
    pub rng_seed: u64,
}

impl InstanceSpec {
    pub fn new(delta: f64, rng_seed: u64) -> Self {
        InstanceSpec {
            delta,
            amplitude_range: (0.0, 1000.0),
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidSpec(format!(
                "delta must lie in (0, 1/2), got {}",
                self.delta
            )));
        }
        let (lo, hi) = self.amplitude_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) || (lo == 0.0 && hi == 0.0) {
            return Err(Error::InvalidSpec(format!(
                "bad amplitude range ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Draws `t_l = 2 l delta + r_l`, `r_l ~ U[0, delta]`, `l = 0..=S` with
/// `S = floor(1 / (2 delta))`, and weights with i.i.d. uniform real and
/// imaginary parts.
///
/// The last point can land within `delta` of `t_0 + 1`. In that case its
/// offset is redrawn uniformly from the interval that restores the
/// separation, and the point is dropped when that interval is empty, so the
/// result always has minimum wrap-around distance at least `delta`.
pub fn random_instance(spec: &InstanceSpec) -> Result<SpikeTrain> {
    spec.validate()?;
    let delta = spec.delta;
    let s = (1.0 / (2.0 * delta)).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let r: Vec<f64> = (0..=s).map(|_| rng.random::<f64>() * delta).collect();
    let (lo, hi) = spec.amplitude_range;
    let weights: Vec<Complex64> = (0..=s)
        .map(|_| {
            let re = lo + (hi - lo) * rng.random::<f64>();
            let im = lo + (hi - lo) * rng.random::<f64>();
            Complex64::new(re, im)
        })
        .collect();
    let redraw: f64 = rng.random();

    let mut points: Vec<f64> = (0..=s)
        .map(|l| 2.0 * l as f64 * delta + r[l])
        .collect();
    let mut weights = weights;
    if s >= 1 {
        let last = points[s];
        if 1.0 + points[0] - last < delta {
            let room = 1.0 - 2.0 * s as f64 * delta + r[0] - delta;
            if room >= 0.0 {
                points[s] = 2.0 * s as f64 * delta + redraw * room.min(delta);
            } else {
                points.pop();
                weights.pop();
            }
        }
    }
    let m = SpikeTrain::new(points, weights)?;
    if m.len() >= 2 {
        let sep = min_wraparound_distance(&m)?;
        assert!(
            sep >= delta * (1.0 - 1e-12),
            "generated separation {sep} below {delta}"
        );
    }
    Ok(m)
}

/// Relative l2 support error after optimal cyclic matching.
///
/// Returns `f64::INFINITY` when the cardinalities differ.
pub fn support_error(estimated: &SpikeTrain, truth: &SpikeTrain) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Undefined("support error against an empty truth".into()));
    }
    let norm_truth = truth.points.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm_truth == 0.0 {
        return Err(Error::Undefined("truth support has zero l2 norm".into()));
    }
    if estimated.len() != truth.len() {
        return Ok(f64::INFINITY);
    }
    let n = truth.len();
    let cost: Vec<Vec<f64>> = truth
        .points
        .iter()
        .map(|&t| {
            estimated
                .points
                .iter()
                .map(|&e| wrap_distance(t, e).powi(2))
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    let sq: f64 = (0..n).map(|i| cost[i][assign[i]]).sum();
    Ok(sq.sqrt() / norm_truth)
}

/// Hungarian algorithm on a square cost matrix; returns the column
/// assigned to each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials and matching, column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}
