//! Monotone mean-variance and classical mean-variance preferences of
//! finite-support random variables.
//!
//! `V_theta(X) = min_Q { E^Q[X] + C(Q || P) / (2 theta) }` with the relative
//! Gini concentration index `C(Q || P) = E^P[(dQ/dP)^2] - 1`, evaluated two
//! ways: by the water-filling solution of the density minimization, and by
//! truncating `X` at the level `kappa` and taking the classical utility.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Compensated summation, accurate for the million-atom grids used to
/// discretize continuous laws.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

const PROB_TOL: f64 = 1e-12;

/// A finite-support law with atoms sorted ascending and no duplicate values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRv {
    values: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct AtomRow {
    value: f64,
    prob: f64,
}

impl DiscreteRv {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::Distribution(format!(
                "need matching non-empty value and probability lists, got {} and {}",
                values.len(),
                probs.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Distribution(format!("non-finite value {v}")));
        }
        if let Some(p) = probs.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Distribution(format!("probability {p} outside (0, 1]")));
        }
        let total = neumaier_sum(probs.iter().copied());
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Distribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mut atoms: Vec<(f64, f64)> = values.into_iter().zip(probs).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut probs: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            if values.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                values.push(v);
                probs.push(p);
            }
        }
        Ok(DiscreteRv { values, probs })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![value], vec![1.0])
    }

    /// `n` equally likely midpoint atoms of the uniform law on `[a, b]`.
    pub fn uniform_midpoint(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) || n == 0 {
            return Err(Error::Distribution(format!(
                "uniform({a}, {b}, {n}) needs a < b and n >= 1"
            )));
        }
        let h = (b - a) / n as f64;
        let values = (0..n).map(|i| a + h * (i as f64 + 0.5)).collect();
        Ok(DiscreteRv {
            values,
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Reads a two-column `value,prob` CSV with a header row.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut values = Vec::new();
        let mut probs = Vec::new();
        for row in rdr.deserialize() {
            let row: AtomRow = row?;
            values.push(row.value);
            probs.push(row.prob);
        }
        Self::new(values, probs)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn shift(&self, c: f64) -> Self {
        DiscreteRv {
            values: self.values.iter().map(|v| v + c).collect(),
            probs: self.probs.clone(),
        }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        neumaier_sum(self.values.iter().zip(&self.probs).map(|(&v, &p)| p * f(v)))
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    /// Two-pass central variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|v| (v - m) * (v - m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmvResult {
    /// `V_theta(X)`.
    pub value: f64,
    /// Optimal `dQ/dP` on each atom, in the atom order of the law.
    pub density: Vec<f64>,
    /// Truncation level; `None` means no truncation (`+inf`) or that the
    /// result came from the water-filling route.
    pub kappa: Option<f64>,
}

/// Classical mean-variance utility `E[X] - theta/2 Var[X]`.
pub fn mv_utility(x: &DiscreteRv, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::Domain(format!("theta must be >= 0, got {theta}")));
    }
    if theta == 0.0 {
        return Ok(x.mean());
    }
    Ok(x.mean() - 0.5 * theta * x.variance())
}

fn require_positive(theta: f64) -> Result<()> {
    if theta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta must be > 0, got {theta}")))
    }
}

/// Solves `min sum p_i y_i x_i + (sum p_i y_i^2 - 1) / (2 theta)` over
/// densities `y >= 0` with `sum p_i y_i = 1`. The minimizer is
/// `y_i = max(c - theta x_i, 0)` with `c` fixed by the normalization.
pub fn mmv_waterfill(x: &DiscreteRv, theta: f64) -> Result<MmvResult> {
    require_positive(theta)?;
    let (xs, ps) = (x.values(), x.probs());
    let n = xs.len();
    let mut mass = 0.0;
    let mut weighted = 0.0;
    let mut level = f64::NAN;
    for k in 0..n {
        mass += ps[k];
        weighted += ps[k] * xs[k];
        let c = (1.0 + theta * weighted) / mass;
        if k + 1 == n || c <= theta * xs[k + 1] {
            level = c;
            break;
        }
    }
    let density_for = |c: f64| -> Vec<f64> { xs.iter().map(|&v| (c - theta * v).max(0.0)).collect() };
    let normalization = |y: &[f64]| neumaier_sum(y.iter().zip(ps).map(|(y, p)| y * p));
    let mut density = density_for(level);
    if !level.is_finite() || (normalization(&density) - 1.0).abs() > 1e-10 {
        level = bisect_level(xs, ps, theta)?;
        density = density_for(level);
    }
    let linear = neumaier_sum(density.iter().zip(ps).zip(xs).map(|((y, p), v)| p * y * v));
    let second = neumaier_sum(density.iter().zip(ps).map(|(y, p)| p * y * y));
    Ok(MmvResult {
        value: linear + (second - 1.0) / (2.0 * theta),
        density,
        kappa: None,
    })
}

fn bisect_level(xs: &[f64], ps: &[f64], theta: f64) -> Result<f64> {
    let g = |c: f64| neumaier_sum(xs.iter().zip(ps).map(|(&v, &p)| p * (c - theta * v).max(0.0))) - 1.0;
    let mut lo = theta * xs[0];
    let mut hi = theta * xs[xs.len() - 1] + 1.0;
    if !(g(lo) <= 0.0 && g(hi) >= 0.0) {
        return Err(Error::Simulation("water-filling level not bracketed".into()));
    }
    while hi - lo > 1e-12 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `V_theta(X) = U_theta(X ^ kappa)` with `kappa` the largest `t` such that
/// `t <= E[X ^ t] + 1/theta`.
pub fn mmv_truncation(x: &DiscreteRv, theta: f64) -> Result<MmvResult> {
    require_positive(theta)?;
    let budget = 1.0 / theta;
    let (xs, ps) = (x.values(), x.probs());
    // E[(t - X)+] is piecewise linear and increasing; kappa is where it
    // reaches 1/theta.
    let shortfall_at_max = x.expect(|v| x.max() - v);
    let kappa = if shortfall_at_max <= budget {
        None
    } else {
        let mut mass = 0.0;
        let mut weighted = 0.0;
        let mut root = f64::NAN;
        for k in 0..xs.len() - 1 {
            mass += ps[k];
            weighted += ps[k] * xs[k];
            if xs[k + 1] * mass - weighted >= budget {
                root = (budget + weighted) / mass;
                break;
            }
        }
        Some(root.clamp(xs[0], x.max()))
    };
    let truncated = match kappa {
        None => x.clone(),
        Some(k) => DiscreteRv {
            values: xs.iter().map(|&v| v.min(k)).collect(),
            probs: ps.to_vec(),
        },
    };
    let value = mv_utility(&truncated, theta)?;
    let m = truncated.mean();
    let density = truncated
        .values()
        .iter()
        .map(|&v| (1.0 + theta * (m - v)).max(0.0))
        .collect();
    Ok(MmvResult { value, density, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Euclidean projection onto `{w >= 0, sum w = 1}` by sorting.
    fn project_simplex(v: &[f64]) -> Vec<f64> {
        let mut u = v.to_vec();
        u.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        let mut shift = 0.0;
        for (j, &uj) in u.iter().enumerate() {
            acc += uj;
            let candidate = (acc - 1.0) / (j as f64 + 1.0);
            if uj - candidate > 0.0 {
                shift = candidate;
            }
        }
        v.iter().map(|&x| (x - shift).max(0.0)).collect()
    }

    /// Projected gradient descent over the probability weights `w = p y`.
    fn pgd_oracle(xs: &[f64], ps: &[f64], theta: f64) -> f64 {
        let objective = |w: &[f64]| {
            let lin: f64 = w.iter().zip(xs).map(|(w, x)| w * x).sum();
            let quad: f64 = w.iter().zip(ps).map(|(w, p)| w * w / p).sum();
            lin + (quad - 1.0) / (2.0 * theta)
        };
        let lipschitz = ps.iter().map(|p| 1.0 / (theta * p)).fold(0.0, f64::max);
        let step = 1.0 / lipschitz;
        let mut w = ps.to_vec();
        for _ in 0..200_000 {
            let grad: Vec<f64> = w.iter().zip(xs).zip(ps).map(|((w, x), p)| x + w / (theta * p)).collect();
            let next: Vec<f64> = w.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let next = project_simplex(&next);
            let moved: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
            w = next;
            if moved < 1e-15 {
                break;
            }
        }
        objective(&w)
    }

    /// Grid search over the one-dimensional simplex plus golden-section
    /// refinement.
    fn two_atom_grid_oracle(x: [f64; 2], p: [f64; 2], theta: f64) -> f64 {
        let f = |w: f64| {
            let y0 = w / p[0];
            let y1 = (1.0 - w) / p[1];
            w * x[0] + (1.0 - w) * x[1] + (p[0] * y0 * y0 + p[1] * y1 * y1 - 1.0) / (2.0 * theta)
        };
        let n = 10_000;
        let best = (0..=n).min_by(|&a, &b| f(a as f64 / n as f64).total_cmp(&f(b as f64 / n as f64))).unwrap();
        let (mut lo, mut hi) = (((best as f64) - 1.0) / n as f64, ((best as f64) + 1.0) / n as f64);
        lo = lo.max(0.0);
        hi = hi.min(1.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        f(0.5 * (lo + hi))
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        assert_eq!(neumaier_sum([1.0, 1e100, 1.0, -1e100]), 2.0);
    }

    #[test]
    fn construction_sorts_and_merges() {
        let x = DiscreteRv::new(vec![3.0, 1.0, 3.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(x.values(), &[1.0, 3.0]);
        assert_eq!(x.probs(), &[0.5, 0.5]);
        assert!(DiscreteRv::new(vec![1.0], vec![0.9]).is_err());
        assert!(DiscreteRv::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(DiscreteRv::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(DiscreteRv::new(vec![], vec![]).is_err());
    }

    #[test]
    fn reads_csv() {
        let text = "value,prob\n1.0,0.25\n2.0, 0.75\n";
        let x = DiscreteRv::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(x.mean(), 1.75);
        assert!(DiscreteRv::from_csv_reader("value,prob\n1.0,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn mv_utility_examples() {
        let c = DiscreteRv::constant(10.0).unwrap();
        assert_eq!(mv_utility(&c, 2.0).unwrap(), 10.0);
        let u = DiscreteRv::uniform_midpoint(10.0, 22.0, 100_000).unwrap();
        assert_abs_diff_eq!(mv_utility(&u, 2.0).unwrap(), 4.0, epsilon = 1e-3);
        assert_abs_diff_eq!(mv_utility(&u, 0.0).unwrap(), 16.0, epsilon = 1e-9);
        assert!(mv_utility(&u, -1.0).is_err());
    }

    #[test]
    fn constant_needs_no_distortion() {
        let c = DiscreteRv::constant(10.0).unwrap();
        let w = mmv_waterfill(&c, 2.0).unwrap();
        assert_abs_diff_eq!(w.value, 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.density[0], 1.0, epsilon = 1e-14);
        let t = mmv_truncation(&c, 2.0).unwrap();
        assert_eq!(t.value, 10.0);
        assert_eq!(t.kappa, None);
    }

    #[test]
    fn two_atoms_match_grid_and_pgd() {
        let x = DiscreteRv::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let w = mmv_waterfill(&x, 1.0).unwrap();
        let grid = two_atom_grid_oracle([0.0, 1.0], [0.5, 0.5], 1.0);
        let pgd = pgd_oracle(&[0.0, 1.0], &[0.5, 0.5], 1.0);
        assert_abs_diff_eq!(w.value, grid, epsilon = 1e-8);
        assert_abs_diff_eq!(w.value, pgd, epsilon = 1e-8);
        // Unconstrained optimum y = (1.5, 0.5): 0.25 + (1.25 - 1) / 2.
        assert_abs_diff_eq!(w.value, 0.375, epsilon = 1e-15);
    }

    #[test]
    fn theta_must_be_positive() {
        let x = DiscreteRv::constant(1.0).unwrap();
        assert!(matches!(mmv_waterfill(&x, 0.0), Err(Error::Domain(_))));
        assert!(matches!(mmv_truncation(&x, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn shifted_uniform_example() {
        let x = DiscreteRv::uniform_midpoint(10.0, 22.0, 1_000_000).unwrap();
        let exact = 39.0 / 4.0 + 4.0 * 3f64.sqrt() / 3.0;
        let w = mmv_waterfill(&x, 2.0).unwrap();
        let t = mmv_truncation(&x, 2.0).unwrap();
        assert_abs_diff_eq!(w.value, exact, epsilon = 2e-3);
        assert_abs_diff_eq!(t.value, exact, epsilon = 2e-3);
        assert_abs_diff_eq!(t.kappa.unwrap(), 10.0 + 2.0 * 3f64.sqrt(), epsilon = 2e-3);
        assert_abs_diff_eq!(w.value, t.value, epsilon = 1e-8);
    }

    #[test]
    fn untruncated_when_dominated() {
        // max = 1 <= mean + 1/theta = 0.5 + 1
        let x = DiscreteRv::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let t = mmv_truncation(&x, 1.0).unwrap();
        assert_eq!(t.kappa, None);
        assert_eq!(t.value, mv_utility(&x, 1.0).unwrap());
    }

    #[test]
    fn bisection_fallback_agrees_with_scan() {
        let x = DiscreteRv::new(vec![-1.0, 0.5, 2.0, 7.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = bisect_level(x.values(), x.probs(), 0.7).unwrap();
        let y: Vec<f64> = x.values().iter().map(|v| (c - 0.7 * v).max(0.0)).collect();
        let w = mmv_waterfill(&x, 0.7).unwrap();
        for (a, b) in y.iter().zip(&w.density) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    fn laws() -> impl Strategy<Value = DiscreteRv> {
        prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..50).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let values = atoms.iter().map(|a| a.0).collect();
            let mut probs: Vec<f64> = atoms.iter().map(|a| a.1 / total).collect();
            let rest = 1.0 - neumaier_sum(probs[1..].iter().copied());
            probs[0] = rest;
            DiscreteRv::new(values, probs).unwrap()
        })
    }

    fn thetas() -> impl Strategy<Value = f64> {
        prop::sample::select(vec![0.1, 0.5, 1.0, 2.0, 10.0])
    }

    proptest! {
        #[test]
        fn routes_agree(x in laws(), theta in thetas()) {
            let w = mmv_waterfill(&x, theta).unwrap();
            let t = mmv_truncation(&x, theta).unwrap();
            prop_assert!((w.value - t.value).abs() <= 1e-8, "{} vs {}", w.value, t.value);
            let mass: f64 = w.density.iter().zip(x.probs()).map(|(y, p)| y * p).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-10);
            prop_assert!(w.density.iter().all(|&y| y >= 0.0));
        }

        #[test]
        fn matches_pgd_oracle(x in prop::collection::vec(-2.0f64..2.0, 2..5), theta in thetas()) {
            let n = x.len();
            let rv = DiscreteRv::new(x.clone(), vec![1.0 / n as f64; n]);
            prop_assume!(rv.is_ok() && rv.as_ref().unwrap().len() == n);
            let rv = rv.unwrap();
            let w = mmv_waterfill(&rv, theta).unwrap();
            let oracle = pgd_oracle(rv.values(), rv.probs(), theta);
            prop_assert!((w.value - oracle).abs() <= 1e-8, "{} vs {}", w.value, oracle);
        }

        #[test]
        fn monotone(x in laws(), bumps in prop::collection::vec(0.0f64..2.0, 50), theta in thetas()) {
            let raised: Vec<f64> = x.values().iter().zip(&bumps).map(|(v, b)| v + b).collect();
            let y = DiscreteRv::new(raised, x.probs().to_vec()).unwrap();
            prop_assert!(mmv_waterfill(&x, theta).unwrap().value <= mmv_waterfill(&y, theta).unwrap().value + 1e-12);
        }

        #[test]
        fn dominates_mean_variance(x in laws(), theta in thetas()) {
            // The classical utility is the same minimization over signed
            // densities, so it can only be lower.
            let v = mmv_waterfill(&x, theta).unwrap().value;
            let u = mv_utility(&x, theta).unwrap();
            prop_assert!(v >= u - 1e-10);
            if x.max() <= x.mean() + 1.0 / theta {
                prop_assert!((v - u).abs() <= 1e-10);
            }
        }

        #[test]
        fn concave_along_segments(x in laws(), dir in prop::collection::vec(-3.0f64..3.0, 50), lam in 0.0f64..1.0, theta in thetas()) {
            let at = |s: f64| {
                let vals: Vec<f64> = x.values().iter().zip(&dir).map(|(v, d)| v + s * d).collect();
                // Values may collide and merge; the objective is unchanged.
                mmv_waterfill(&DiscreteRv::new(vals, x.probs().to_vec()).unwrap(), theta).unwrap().value
            };
            prop_assert!(at(lam) >= (1.0 - lam) * at(0.0) + lam * at(1.0) - 1e-10);
        }

        #[test]
        fn translation(x in laws(), c in -10.0f64..10.0, theta in thetas()) {
            let a = mmv_waterfill(&x, theta).unwrap().value;
            let b = mmv_waterfill(&x.shift(c), theta).unwrap().value;
            prop_assert!((b - a - c).abs() <= 1e-10 * (1.0 + a.abs() + c.abs()));
        }
    }
}
