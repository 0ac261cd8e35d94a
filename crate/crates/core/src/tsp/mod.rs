//! Instances, tours and the closed-tour objective.

mod tsplib;

pub use tsplib::{parse_sidecar, parse_tsplib, write_tour, write_tsplib, TourFile};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Above this many cities no pairwise matrix is materialized.
pub const DEFAULT_MATRIX_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub x: f64,
    pub y: f64,
}

impl City {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &City) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMode {
    /// Real-valued L2 distance.
    #[default]
    EuclideanExact,
    /// L2 distance rounded to the nearest integer per edge (TSPLIB `EUC_2D`).
    EuclideanRounded,
}

impl DistanceMode {
    #[inline]
    pub fn apply(self, d: f64) -> f64 {
        match self {
            DistanceMode::EuclideanExact => d,
            DistanceMode::EuclideanRounded => (d + 0.5).floor(),
        }
    }
}

/// Immutable list of 2-D cities; indices are `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    name: String,
    cities: Vec<City>,
    known_optimum: Option<f64>,
}

impl TspInstance {
    pub fn new(name: impl Into<String>, cities: Vec<City>) -> Result<Self> {
        if cities.len() < 2 {
            return Err(Error::Argument(format!(
                "an instance needs at least 2 cities, got {}",
                cities.len()
            )));
        }
        if let Some(i) = cities
            .iter()
            .position(|c| !c.x.is_finite() || !c.y.is_finite())
        {
            return Err(Error::NonFinite(format!("coordinates of city {i}")));
        }
        Ok(Self {
            name: name.into(),
            cities,
            known_optimum: None,
        })
    }

    pub fn with_known_optimum(mut self, optimum: Option<f64>) -> Self {
        self.known_optimum = optimum;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }

    #[inline]
    pub fn distance(&self, a: usize, b: usize, mode: DistanceMode) -> f64 {
        mode.apply(self.cities[a].dist(&self.cities[b]))
    }
}

/// A closed route given as a permutation of city indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    order: Vec<usize>,
    length_cache: Option<(DistanceMode, f64)>,
}

impl Tour {
    /// Validates that `order` is a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        validate_permutation(&order, order.len())?;
        Ok(Self {
            order,
            length_cache: None,
        })
    }

    /// Builds the tour and caches its length under `mode`.
    pub fn evaluated(instance: &TspInstance, order: Vec<usize>, mode: DistanceMode) -> Result<Self> {
        let mut t = Tour::new(order)?;
        let len = tour_length(instance, &t, mode)?;
        t.length_cache = Some((mode, len));
        Ok(t)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Cached length, if it was computed under `mode`.
    pub fn cached_length(&self, mode: DistanceMode) -> Option<f64> {
        match self.length_cache {
            Some((m, l)) if m == mode => Some(l),
            _ => None,
        }
    }
}

/// Checks that `order` visits every index of `0..n` exactly once.
pub fn validate_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidTour {
            index: order.len().min(n),
            reason: if order.len() < n {
                "missing index (tour too short)"
            } else {
                "tour longer than instance"
            },
        });
    }
    let mut seen = vec![false; n];
    for &c in order {
        if c >= n {
            return Err(Error::InvalidTour {
                index: c,
                reason: "index out of range",
            });
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidTour {
                index: c,
                reason: "duplicate index",
            });
        }
    }
    Ok(())
}

/// Closed-tour length: sum of edge lengths including the edge back to the start.
pub fn tour_length(instance: &TspInstance, tour: &Tour, mode: DistanceMode) -> Result<f64> {
    validate_permutation(tour.order(), instance.len())?;
    Ok(order_length(instance.cities(), tour.order(), mode))
}

/// Unchecked closed-tour length over raw coordinates.
pub fn order_length(cities: &[City], order: &[usize], mode: DistanceMode) -> f64 {
    let n = order.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in order.windows(2) {
        total += mode.apply(cities[w[0]].dist(&cities[w[1]]));
    }
    total + mode.apply(cities[order[n - 1]].dist(&cities[order[0]]))
}

/// Pairwise distances, materialized for small instances and computed on
/// demand otherwise. Results are identical either way.
#[derive(Debug, Clone)]
pub struct DistanceTable<'a> {
    instance: &'a TspInstance,
    mode: DistanceMode,
    matrix: Option<Vec<f64>>,
}

impl<'a> DistanceTable<'a> {
    pub fn new(instance: &'a TspInstance, mode: DistanceMode) -> Self {
        Self::with_threshold(instance, mode, DEFAULT_MATRIX_THRESHOLD)
    }

    pub fn with_threshold(instance: &'a TspInstance, mode: DistanceMode, threshold: usize) -> Self {
        let n = instance.len();
        let matrix = (n <= threshold).then(|| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = instance.distance(i, j, mode);
                    m[i * n + j] = d;
                    m[j * n + i] = d;
                }
            }
            m
        });
        Self {
            instance,
            mode,
            matrix,
        }
    }

    pub fn instance(&self) -> &TspInstance {
        self.instance
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn is_materialized(&self) -> bool {
        self.matrix.is_some()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        match &self.matrix {
            Some(m) => m[a * self.instance.len() + b],
            None => self.instance.distance(a, b, self.mode),
        }
    }

    /// Closed-tour length of an order assumed valid.
    pub fn length(&self, order: &[usize]) -> f64 {
        let n = order.len();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for w in order.windows(2) {
            total += self.get(w[0], w[1]);
        }
        total + self.get(order[n - 1], order[0])
    }
}

/// `n` cities drawn i.i.d. uniform in the unit square.
pub fn generate_uniform_instance(n: usize, rng: &mut RngStream) -> Result<TspInstance> {
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2 cities, got {n}")));
    }
    let cities = (0..n)
        .map(|_| {
            let x = rng.uniform();
            let y = rng.uniform();
            City::new(x, y)
        })
        .collect();
    TspInstance::new(format!("uniform{n}_s{}", rng.seed()), cities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> TspInstance {
        let c = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)];
        TspInstance::new("sq", c.iter().map(|&(x, y)| City::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn unit_square_length() {
        let t = Tour::new(vec![0, 1, 2, 3]).unwrap();
        assert_eq!(tour_length(&square(), &t, DistanceMode::EuclideanExact).unwrap(), 4.0);
    }

    #[test]
    fn two_city_out_and_back() {
        let inst = TspInstance::new("two", vec![City::new(0.0, 0.0), City::new(3.0, 4.0)]).unwrap();
        let t = Tour::new(vec![0, 1]).unwrap();
        assert_eq!(tour_length(&inst, &t, DistanceMode::EuclideanExact).unwrap(), 10.0);
    }

    #[test]
    fn invalid_permutations_name_the_index() {
        match validate_permutation(&[0, 1, 1, 3], 4) {
            Err(Error::InvalidTour { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match validate_permutation(&[0, 1, 7, 3], 4) {
            Err(Error::InvalidTour { index: 7, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(validate_permutation(&[0, 1, 2], 4).is_err());
    }

    #[test]
    fn instance_rejects_degenerate_input() {
        assert!(TspInstance::new("one", vec![City::new(0.0, 0.0)]).is_err());
        assert!(TspInstance::new("nan", vec![City::new(0.0, f64::NAN), City::new(1.0, 1.0)]).is_err());
    }

    #[test]
    fn rounded_mode_rounds_each_edge() {
        let inst = TspInstance::new("r", vec![City::new(0.0, 0.0), City::new(1.4, 0.0), City::new(1.4, 1.6)]).unwrap();
        let t = Tour::new(vec![0, 1, 2]).unwrap();
        let r = tour_length(&inst, &t, DistanceMode::EuclideanRounded).unwrap();
        // edges 1.4 -> 1, 1.6 -> 2, hypot(1.4,1.6)=2.126 -> 2
        assert_eq!(r, 5.0);
    }

    #[test]
    fn distance_table_matches_on_demand() {
        let mut rng = RngStream::new(11);
        let inst = generate_uniform_instance(40, &mut rng).unwrap();
        let dense = DistanceTable::new(&inst, DistanceMode::EuclideanExact);
        let lazy = DistanceTable::with_threshold(&inst, DistanceMode::EuclideanExact, 10);
        assert!(dense.is_materialized() && !lazy.is_materialized());
        let order = rng.permutation(40);
        assert_eq!(dense.length(&order), lazy.length(&order));
        assert_eq!(dense.length(&order), order_length(inst.cities(), &order, DistanceMode::EuclideanExact));
    }

    #[test]
    fn generator_range_and_determinism() {
        let a = generate_uniform_instance(2, &mut RngStream::new(5)).unwrap();
        assert!(a.cities().iter().all(|c| (0.0..=1.0).contains(&c.x) && (0.0..=1.0).contains(&c.y)));
        let x = generate_uniform_instance(20, &mut RngStream::new(7)).unwrap();
        let y = generate_uniform_instance(20, &mut RngStream::new(7)).unwrap();
        assert_eq!(x, y);
        assert!(generate_uniform_instance(1, &mut RngStream::new(7)).is_err());
    }

    #[test]
    fn generator_is_uniform_on_average() {
        let mut rng = RngStream::new(2024);
        let (mut sum, mut count) = (0.0, 0usize);
        for _ in 0..10_000 {
            let inst = generate_uniform_instance(20, &mut rng).unwrap();
            for c in inst.cities() {
                sum += c.x + c.y;
                count += 2;
            }
        }
        let mean = sum / count as f64;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    }

    proptest! {
        #[test]
        fn length_is_rotation_and_reversal_invariant(seed in any::<u64>(), n in 3usize..40, shift in 0usize..40) {
            let mut rng = RngStream::new(seed);
            let inst = generate_uniform_instance(n, &mut rng).unwrap();
            let scaled = TspInstance::new("s", inst.cities().iter().map(|c| City::new(c.x * 100.0, c.y * 100.0)).collect()).unwrap();
            let order = rng.permutation(n);
            let mut rotated = order.clone();
            rotated.rotate_left(shift % n);
            let mut reversed = order.clone();
            reversed.reverse();
            for mode in [DistanceMode::EuclideanExact, DistanceMode::EuclideanRounded] {
                let base = order_length(scaled.cities(), &order, mode);
                prop_assert!((base - order_length(scaled.cities(), &rotated, mode)).abs() < 1e-9);
                prop_assert!((base - order_length(scaled.cities(), &reversed, mode)).abs() < 1e-9);
            }
        }

        #[test]
        fn rounding_changes_length_by_at_most_half_per_edge(seed in any::<u64>(), n in 2usize..60) {
            let mut rng = RngStream::new(seed);
            let cities = (0..n).map(|_| City::new(rng.uniform() * 500.0, rng.uniform() * 500.0)).collect();
            let inst = TspInstance::new("r", cities).unwrap();
            let order = rng.permutation(n);
            let exact = order_length(inst.cities(), &order, DistanceMode::EuclideanExact);
            let rounded = order_length(inst.cities(), &order, DistanceMode::EuclideanRounded);
            prop_assert!((exact - rounded).abs() <= n as f64 / 2.0 + 1e-9);
        }
    }
}
