//! Center-of-sets type reduction with the Karnik–Mendel switch-point
//! iteration, plus midpoint defuzzification.

use serde::{Deserialize, Serialize};

use super::{FiringInterval, FuzzyError};

/// Output of type reduction: the interval of centroids of all embedded
/// type-1 sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeReducedInterval {
    pub y_l: f64,
    pub y_r: f64,
}

impl TypeReducedInterval {
    pub fn width(&self) -> f64 {
        self.y_r - self.y_l
    }
}

/// One rule's contribution to center-of-sets reduction: its firing interval
/// and the centroid interval of its consequent set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedCentroid {
    pub firing: FiringInterval,
    pub centroid: (f64, f64),
}

impl From<(FiringInterval, (f64, f64))> for WeightedCentroid {
    fn from((firing, centroid): (FiringInterval, (f64, f64))) -> Self {
        WeightedCentroid { firing, centroid }
    }
}

/// Type-reduced interval together with how many switch points each KM
/// endpoint search visited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmTrace {
    pub interval: TypeReducedInterval,
    pub left_iterations: usize,
    pub right_iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Left,
    Right,
}

struct Point {
    centroid: f64,
    lower: f64,
    upper: f64,
}

pub fn center_of_sets<T>(firings: &[T]) -> Result<TypeReducedInterval, FuzzyError>
where
    T: Copy + Into<WeightedCentroid>,
{
    center_of_sets_traced(firings).map(|t| t.interval)
}

pub fn center_of_sets_traced<T>(firings: &[T]) -> Result<KmTrace, FuzzyError>
where
    T: Copy + Into<WeightedCentroid>,
{
    let mut left = Vec::with_capacity(firings.len());
    let mut right = Vec::with_capacity(firings.len());
    for term in firings.iter().map(|&t| t.into()) {
        let WeightedCentroid { firing, centroid } = term;
        FiringInterval::new(firing.lower, firing.upper)?;
        let (c_l, c_r) = centroid;
        if !(c_l.is_finite() && c_r.is_finite()) || c_l > c_r {
            return Err(FuzzyError::InvalidCentroid(c_l, c_r));
        }
        // rules with zero upper firing carry no weight in any embedded set
        if firing.upper <= 0.0 {
            continue;
        }
        left.push(Point {
            centroid: c_l,
            lower: firing.lower,
            upper: firing.upper,
        });
        right.push(Point {
            centroid: c_r,
            lower: firing.lower,
            upper: firing.upper,
        });
    }
    if left.is_empty() {
        return Err(FuzzyError::NoRuleFired);
    }
    let (y_l, left_iterations) = km_endpoint(&mut left, Endpoint::Left);
    let (y_r, right_iterations) = km_endpoint(&mut right, Endpoint::Right);
    Ok(KmTrace {
        interval: TypeReducedInterval {
            y_l: y_l.min(y_r),
            y_r: y_r.max(y_l),
        },
        left_iterations,
        right_iterations,
    })
}

fn km_endpoint(points: &mut [Point], side: Endpoint) -> (f64, usize) {
    points.sort_by(|a, b| a.centroid.total_cmp(&b.centroid));
    let n = points.len();
    if n == 1 {
        return (points[0].centroid, 0);
    }

    let (mut num, mut den) = (0.0, 0.0);
    for p in points.iter() {
        let w = 0.5 * (p.lower + p.upper);
        num += w * p.centroid;
        den += w;
    }
    let mut y = num / den;
    let mut prev_switch = usize::MAX;
    let mut iterations = 0;

    // Each pass visits a new switch point; the sequence is monotone so at
    // most n - 1 distinct points exist.
    loop {
        let switch = switch_point(points, y);
        if switch == prev_switch {
            break;
        }
        prev_switch = switch;
        iterations += 1;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, p) in points.iter().enumerate() {
            let take_upper = match side {
                Endpoint::Left => i <= switch,
                Endpoint::Right => i > switch,
            };
            let w = if take_upper { p.upper } else { p.lower };
            num += w * p.centroid;
            den += w;
        }
        y = num / den;
        if iterations > n {
            log::warn!("karnik-mendel did not settle within {n} switch points");
            break;
        }
    }
    (y, iterations)
}

/// Index `k` in `0..=n-2` with `c[k] <= y <= c[k+1]` (clamped).
fn switch_point(points: &[Point], y: f64) -> usize {
    let at_or_below = points.partition_point(|p| p.centroid <= y);
    at_or_below.saturating_sub(1).min(points.len() - 2)
}

/// Crisp output: midpoint of the type-reduced interval.
pub fn defuzzify(interval: TypeReducedInterval) -> f64 {
    0.5 * (interval.y_l + interval.y_r)
}
