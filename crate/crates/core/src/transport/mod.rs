//! Empirical 2-Wasserstein distances between equally weighted sample sets.
//!
//! All distances here are between empirical measures, so they carry a
//! finite-sample bias; callers should always report `N` next to a value.

mod assignment;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum, RunningMoments};
use crate::rng::{stream, Domain, StreamRng};

pub use assignment::solve as solve_assignment;

/// Largest sample size accepted by [`w2_exact_assignment`].
pub const ASSIGNMENT_CAP: usize = 2048;

/// `N` points in `R^d`, row-major, uniform weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<f64>,
    dim: usize,
}

impl SampleSet {
    pub fn new(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::param(
                "points",
                format!("need a non-empty multiple of d = {dim} values, got {}", points.len()),
            ));
        }
        if let Some(bad) = points.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("points", format!("entries must be finite, found {bad}")));
        }
        Ok(Self { points, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for r in rows {
            check_dim(dim, r.len())?;
        }
        Self::new(rows.concat(), dim)
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { points: self.points.iter().map(|v| c * v).collect(), dim: self.dim }
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim);
        let points = self.points.chunks(self.dim).flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b)).collect();
        Self { points, dim: self.dim }
    }

    /// Rows in the given order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let points = order.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self { points, dim: self.dim }
    }

    /// Uniform subsample of `m` distinct rows, in their original order.
    pub fn subsample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Self {
        let mut picked = index::sample(rng, self.len(), m).into_vec();
        picked.sort_unstable();
        self.permuted(&picked)
    }

    /// Projection onto `direction`, as a 1-D set.
    pub fn project(&self, direction: &[f64]) -> Self {
        let points = self.points.chunks(self.dim).map(|p| p.iter().zip(direction).map(|(a, b)| a * b).sum()).collect();
        Self { points, dim: 1 }
    }
}

fn check_pair(a: &SampleSet, b: &SampleSet) -> Result<()> {
    check_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Err(Error::param(
            "sample sizes",
            format!("exact W2 needs equal sizes, got {} and {}; see `equalize`", a.len(), b.len()),
        ));
    }
    Ok(())
}

/// Subsamples the larger set (seeded) so both have the smaller size.
pub fn equalize(a: &SampleSet, b: &SampleSet, seed: u64) -> (SampleSet, SampleSet) {
    let mut rng = stream(seed, Domain::Resample, 0);
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Greater => (a.subsample(b.len(), &mut rng), b.clone()),
        std::cmp::Ordering::Less => (a.clone(), b.subsample(a.len(), &mut rng)),
        std::cmp::Ordering::Equal => (a.clone(), b.clone()),
    }
}

/// Exact W2 for 1-D sets: the sorted (monotone) coupling is optimal.
pub fn w2_exact_1d(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::param("dim", "the sorted-coupling formula needs d = 1"));
    }
    check_pair(a, b)?;
    let mut xs = a.points().to_vec();
    let mut ys = b.points().to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let total = compensated_sum(xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)));
    Ok((total / xs.len() as f64).sqrt())
}

/// `||x - y||^2` with compensated accumulation over coordinates.
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for (a, b) in x.iter().zip(y) {
        let t = a - b;
        s.add(t * t);
    }
    s.value()
}

/// Squared-distance cost matrix, `n x n` row-major. Rows are filled in
/// parallel; every entry is computed independently, so the result does not
/// depend on the thread count.
pub fn cost_matrix(a: &SampleSet, b: &SampleSet) -> Vec<f64> {
    let n = a.len();
    let mut cost = vec![0.0; n * b.len()];
    cost.par_chunks_mut(b.len()).enumerate().for_each(|(i, row)| {
        let x = a.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = sq_dist(x, b.point(j));
        }
    });
    cost
}

/// Optimal coupling between equal-size sets: `plan[i]` is the point of `b`
/// matched to point `i` of `a`, together with the mean squared cost.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentPlan {
    pub plan: Vec<usize>,
    pub mean_cost: f64,
}

impl AssignmentPlan {
    pub fn w2(&self) -> f64 {
        self.mean_cost.sqrt()
    }
}

pub fn optimal_assignment(a: &SampleSet, b: &SampleSet) -> Result<AssignmentPlan> {
    check_pair(a, b)?;
    let n = a.len();
    if n > ASSIGNMENT_CAP {
        return Err(Error::param(
            "N",
            format!("exact assignment is capped at N = {ASSIGNMENT_CAP}, got {n}; use `w2_sliced` for larger sets"),
        ));
    }
    let cost = cost_matrix(a, b);
    let plan = assignment::solve(&cost, n);
    let total = compensated_sum(plan.iter().enumerate().map(|(i, &j)| cost[i * n + j]));
    Ok(AssignmentPlan { plan, mean_cost: total / n as f64 })
}

/// Exact empirical W2 through an optimal assignment on squared distances.
pub fn w2_exact_assignment(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    Ok(optimal_assignment(a, b)?.w2())
}

/// Mean over `projections` uniformly random unit directions of the 1-D
/// exact W2 of the projected sets. A cheap surrogate that never exceeds the
/// exact value; report it separately from exact W2.
pub fn w2_sliced<R: Rng + ?Sized>(a: &SampleSet, b: &SampleSet, projections: usize, rng: &mut R) -> Result<f64> {
    if projections == 0 {
        return Err(Error::param("projections", "need at least one projection"));
    }
    check_pair(a, b)?;
    if a.dim() == 1 {
        return w2_exact_1d(a, b);
    }
    let d = a.dim();
    let mut dir = vec![0.0; d];
    let mut acc = CompensatedSum::new();
    for _ in 0..projections {
        loop {
            for v in dir.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let r = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1e-12 {
                dir.iter_mut().for_each(|v| *v /= r);
                break;
            }
        }
        acc.add(w2_exact_1d(&a.project(&dir), &b.project(&dir))?);
    }
    Ok(acc.value() / projections as f64)
}

/// Distances from one sample set to `R` fresh reference samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceW2 {
    pub n: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across resamples (0 for a single resample).
    pub spread: f64,
    pub min: f64,
    pub max: f64,
}

/// Exact W2 between `a` and `resamples` independent reference samples of the
/// same size. Resample `r` draws from the stream `(seed, Reference, r)`.
pub fn w2_to_reference<F>(a: &SampleSet, resamples: usize, seed: u64, mut draw: F) -> Result<ReferenceW2>
where
    F: FnMut(&mut StreamRng, &mut [f64]),
{
    if resamples == 0 {
        return Err(Error::param("resamples", "need at least one resample"));
    }
    let (n, d) = (a.len(), a.dim());
    let mut values = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = stream(seed, Domain::Reference, r as u64);
        let mut pts = vec![0.0; n * d];
        for row in pts.chunks_mut(d) {
            draw(&mut rng, row);
        }
        let reference = SampleSet::new(pts, d)?;
        values.push(w2_exact_assignment(a, &reference)?);
    }
    let mut m = RunningMoments::new();
    values.iter().for_each(|v| m.push(*v));
    Ok(ReferenceW2 {
        n,
        mean: m.mean(),
        spread: if resamples > 1 { m.variance().sqrt() } else { 0.0 },
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        values,
    })
}

/// [`w2_to_reference`] against `N(0, variance I_d)`.
pub fn w2_to_gaussian(a: &SampleSet, variance: f64, resamples: usize, seed: u64) -> Result<ReferenceW2> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::param("variance", format!("must be finite and > 0, got {variance}")));
    }
    let sd = variance.sqrt();
    w2_to_reference(a, resamples, seed, |rng, row| {
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = sd * z;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn set1(v: &[f64]) -> SampleSet {
        SampleSet::from_scalars(v).unwrap()
    }

    fn random_set(rng: &mut StreamRng, n: usize, d: usize) -> SampleSet {
        let pts = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        SampleSet::new(pts, d).unwrap()
    }

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new(vec![], 1).is_err());
        assert!(SampleSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(SampleSet::new(vec![1.0, f64::NAN], 1).is_err());
        assert!(SampleSet::new(vec![1.0], 0).is_err());
        let s = SampleSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
        assert_eq!(s.point(1), &[3.0, 4.0]);
        assert!(SampleSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(w2_exact_1d(&set1(&[1.0, 5.0, 2.0]), &set1(&[5.0, 2.0, 1.0])).unwrap(), 0.0);
        assert_eq!(w2_exact_1d(&set1(&[0.0]), &set1(&[3.0])).unwrap(), 3.0);
        assert_eq!(w2_exact_1d(&set1(&[0.0, 2.0]), &set1(&[1.0, 3.0])).unwrap(), 1.0);
        assert!(w2_exact_1d(&set1(&[0.0, 2.0]), &set1(&[1.0])).is_err());
    }

    #[test]
    fn assignment_examples() {
        let a = SampleSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = SampleSet::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(w2_exact_assignment(&a, &b).unwrap(), 1.0);
        let mut rng = stream(3, Domain::Verify, 0);
        let a = random_set(&mut rng, 30, 3);
        let b = a.permuted(&(0..30).rev().collect::<Vec<_>>());
        assert_eq!(w2_exact_assignment(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn assignment_cap_points_to_sliced() {
        let a = SampleSet::new(vec![0.0; ASSIGNMENT_CAP + 1], 1).unwrap();
        let err = w2_exact_assignment(&a, &a).unwrap_err().to_string();
        assert!(err.contains("w2_sliced"), "{err}");
    }

    #[test]
    fn assignment_agrees_with_sorted_coupling_in_one_dimension() {
        let mut rng = stream(4, Domain::Verify, 0);
        for n in [1usize, 2, 7, 50, 200] {
            let a = random_set(&mut rng, n, 1);
            let b = random_set(&mut rng, n, 1);
            let exact = w2_exact_1d(&a, &b).unwrap();
            let assign = w2_exact_assignment(&a, &b).unwrap();
            assert!((assign - exact).abs() <= 1e-12 * exact, "n={n}: {assign} vs {exact}");
        }
    }

    #[test]
    fn sliced_examples() {
        let mut rng = stream(5, Domain::Projection, 0);
        let a = random_set(&mut rng, 40, 3);
        assert_eq!(w2_sliced(&a, &a, 10, &mut rng).unwrap(), 0.0);
        let x = random_set(&mut rng, 40, 1);
        let y = random_set(&mut rng, 40, 1);
        assert_eq!(w2_sliced(&x, &y, 7, &mut rng).unwrap(), w2_exact_1d(&x, &y).unwrap());
        assert!(w2_sliced(&x, &y, 0, &mut rng).is_err());
        let b = random_set(&mut rng, 40, 3);
        let sliced = w2_sliced(&a, &b, 50, &mut rng).unwrap();
        assert!(sliced <= w2_exact_assignment(&a, &b).unwrap());
    }

    #[test]
    fn sliced_translation_scales_like_shift_over_sqrt_dim() {
        // a shift c moves each projection by <c, theta>; E|<c, theta>| ~ ||c|| / sqrt(d)
        let d = 8;
        let mut rng = stream(6, Domain::Verify, 0);
        let a: SampleSet = SampleSet::new((0..256 * d).map(|_| rng.sample(StandardNormal)).collect(), d).unwrap();
        let shift = vec![2.0; d];
        let b = a.translated(&shift);
        let sliced = w2_sliced(&a, &b, 400, &mut rng).unwrap();
        let exact = w2_exact_assignment(&a, &b).unwrap();
        let c = (4.0 * d as f64).sqrt();
        assert!((exact - c).abs() < 1e-9);
        // E|N(0, ||c||^2 / d)|-ish for large d, with the projection sign folded in
        let expected = c / (d as f64).sqrt();
        assert!(sliced > 0.5 * expected && sliced < 1.2 * expected, "{sliced} vs {expected}");
    }

    #[test]
    fn equalize_subsamples_the_larger_set() {
        let a = set1(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let b = set1(&[0.0, 1.0]);
        let (x, y) = equalize(&a, &b, 1);
        assert_eq!((x.len(), y.len()), (2, 2));
        assert_eq!(equalize(&a, &b, 1), (x, y));
        assert!(w2_exact_1d(&equalize(&b, &a, 2).0, &equalize(&b, &a, 2).1).is_ok());
    }

    #[test]
    fn point_mass_to_standard_gaussian() {
        let a = SampleSet::new(vec![0.0; 2000], 1).unwrap();
        let r = w2_to_gaussian(&a, 1.0, 3, 8).unwrap();
        assert_eq!(r.values.len(), 3);
        assert!((r.mean - 1.0).abs() < 0.05, "{}", r.mean);
        let tiny = w2_to_gaussian(&a, 1e-12, 1, 8).unwrap();
        assert!(tiny.mean < 1e-5);
        assert!(w2_to_gaussian(&a, 0.0, 1, 8).is_err());
    }

    #[test]
    fn gaussian_self_distance_shrinks_with_n() {
        let mut means = Vec::new();
        for n in [64usize, 256, 1024] {
            let mut rng = stream(10, Domain::Verify, n as u64);
            let a = SampleSet::new((0..2 * n).map(|_| rng.sample(StandardNormal)).collect(), 2).unwrap();
            means.push(w2_to_gaussian(&a, 1.0, 3, 11).unwrap().mean);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
        assert!(means[2] > 0.0);
    }

    fn pts(n: usize, d: usize) -> impl Strategy<Value = SampleSet> {
        prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| SampleSet::new(v, d).unwrap())
    }

    fn triple() -> impl Strategy<Value = (SampleSet, SampleSet, SampleSet)> {
        (1usize..24, 1usize..4).prop_flat_map(|(n, d)| (pts(n, d), pts(n, d), pts(n, d)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metric_axioms((a, b, c) in triple()) {
            let ab = w2_exact_assignment(&a, &b).unwrap();
            let ba = w2_exact_assignment(&b, &a).unwrap();
            let bc = w2_exact_assignment(&b, &c).unwrap();
            let ac = w2_exact_assignment(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(w2_exact_assignment(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn scaling_and_translation((a, b, _c) in triple(), s in -5.0f64..5.0, shift in -5.0f64..5.0) {
            let base = w2_exact_assignment(&a, &b).unwrap();
            let scaled = w2_exact_assignment(&a.scaled(s), &b.scaled(s)).unwrap();
            prop_assert!((scaled - s.abs() * base).abs() <= 1e-9 * (1.0 + s.abs() * base));
            let v = vec![shift; a.dim()];
            let moved = w2_exact_assignment(&a.translated(&v), &b.translated(&v)).unwrap();
            prop_assert!((moved - base).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
