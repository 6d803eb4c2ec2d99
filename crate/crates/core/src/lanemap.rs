//! Lane corridors (centerline polyline plus constant width) and the map
//! queries used to weight estimates: hard membership, Gaussian probability
//! mass inside lanes, and a Gaussian-blurred membership.
//!
//! Text format, one lane per line: `width x1 y1 x2 y2 ...` in meters,
//! whitespace separated. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use libm::erfc;

use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Lane<T: Real> {
    pub centerline: Vec<Vector2<T>>,
    pub width: T,
}

impl<T: Real> Lane<T> {
    pub fn new(centerline: Vec<Vector2<T>>, width: T) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(Error::Config(format!("lane width must be positive, got {width}")));
        }
        let distinct = centerline
            .windows(2)
            .any(|w| (w[1] - w[0]).norm() > T::zero());
        if centerline.len() < 2 || !distinct {
            return Err(Error::Config("lane centerline needs at least two distinct points".into()));
        }
        Ok(Self { centerline, width })
    }

    /// Direction of the first non-degenerate segment, radians from +x.
    pub fn heading(&self) -> T {
        let d = self
            .centerline
            .windows(2)
            .map(|w| w[1] - w[0])
            .find(|d| d.norm() > T::zero())
            .expect("validated centerline");
        d.y.atan2(d.x)
    }

    /// Point at arc length `s` along the centerline, clamped to its ends.
    pub fn point_at(&self, s: T) -> Vector2<T> {
        let mut remaining = s.max(T::zero());
        for w in self.centerline.windows(2) {
            let d = w[1] - w[0];
            let len = d.norm();
            if len <= T::zero() {
                continue;
            }
            if remaining <= len {
                return w[0] + d * (remaining / len);
            }
            remaining -= len;
        }
        *self.centerline.last().expect("validated centerline")
    }

    pub fn length(&self) -> T {
        self.centerline
            .windows(2)
            .fold(T::zero(), |acc, w| acc + (w[1] - w[0]).norm())
    }
}

#[derive(Clone, Debug)]
struct Segment<T: Real> {
    origin: Vector2<T>,
    along: Vector2<T>,
    length: T,
    half_width: T,
}

impl<T: Real> Segment<T> {
    /// (longitudinal, lateral) coordinates of `p` in the segment frame.
    #[inline]
    fn local(&self, p: &Vector2<T>) -> (T, T) {
        let r = p - self.origin;
        let s = r.dot(&self.along);
        let l = self.along.x * r.y - self.along.y * r.x;
        (s, l)
    }

    #[inline]
    fn contains(&self, p: &Vector2<T>) -> bool {
        let (s, l) = self.local(p);
        s >= T::zero() && s <= self.length && l.abs() <= self.half_width
    }
}

/// Immutable collection of lanes. All queries are read-only.
#[derive(Clone, Debug)]
pub struct LaneMap<T: Real> {
    lanes: Vec<Lane<T>>,
    segments: Vec<Segment<T>>,
}

impl<T: Real> LaneMap<T> {
    pub fn new(lanes: Vec<Lane<T>>) -> Result<Self> {
        if lanes.is_empty() {
            return Err(Error::Config("lane map must contain at least one lane".into()));
        }
        let half = T::lit(0.5);
        let segments = lanes
            .iter()
            .flat_map(|lane| {
                lane.centerline.windows(2).filter_map(move |w| {
                    let d = w[1] - w[0];
                    let length = d.norm();
                    (length > T::zero()).then(|| Segment {
                        origin: w[0],
                        along: d / length,
                        length,
                        half_width: lane.width * half,
                    })
                })
            })
            .collect();
        Ok(Self { lanes, segments })
    }

    /// Two orthogonal two-lane roads crossing at the origin: an east-west road
    /// along the x axis and a north-south road along the y axis. Lanes run in
    /// right-hand traffic order: eastbound, westbound, northbound, southbound.
    pub fn intersection(lane_width: T, half_length: T) -> Self {
        let o = lane_width * T::lit(0.5);
        let l = half_length;
        let lane = |a: (T, T), b: (T, T)| {
            Lane::new(vec![Vector2::new(a.0, a.1), Vector2::new(b.0, b.1)], lane_width)
                .expect("well-formed lane")
        };
        Self::new(vec![
            lane((-l, -o), (l, -o)),
            lane((l, o), (-l, o)),
            lane((o, -l), (o, l)),
            lane((-o, l), (-o, -l)),
        ])
        .expect("non-empty map")
    }

    pub fn lanes(&self) -> &[Lane<T>] {
        &self.lanes
    }

    /// True when `point` lies within half a lane width of some centerline
    /// segment, inside that segment's longitudinal extent.
    pub fn in_lane(&self, point: &Vector2<T>) -> bool {
        self.segments.iter().any(|s| s.contains(point))
    }

    /// Monte Carlo estimate of the probability mass of `N(mean, cov)` lying
    /// on a lane, from `n_samples` draws.
    pub fn lane_mass<R: Rng + ?Sized>(
        &self,
        mean: &Vector2<T>,
        cov: &Matrix2<T>,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<T> {
        if n_samples == 0 {
            return Err(Error::Config("lane_mass needs at least one sample".into()));
        }
        let chol = cholesky2(cov)?;
        let mut hits = 0usize;
        for _ in 0..n_samples {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let xi = Vector2::new(T::lit(a), T::lit(b));
            let p = mean + chol * xi;
            if self.in_lane(&p) {
                hits += 1;
            }
        }
        Ok(T::lit(hits as f64 / n_samples as f64))
    }

    /// Lane indicator convolved with an isotropic Gaussian of std
    /// `blur_sigma`, evaluated at `point`. Each straight segment contributes
    /// the exact mass of its rectangle; contributions are summed and capped
    /// at one, which overcounts only where lanes overlap.
    pub fn blurred_weight(&self, point: &Vector2<T>, blur_sigma: T) -> T {
        debug_assert!(blur_sigma > T::zero());
        let sigma = blur_sigma.as_f64();
        let total: f64 = self
            .segments
            .iter()
            .map(|seg| {
                let (s, l) = seg.local(point);
                let (s, l) = (s.as_f64(), l.as_f64());
                let len = seg.length.as_f64();
                let hw = seg.half_width.as_f64();
                let along = normal_cdf((len - s) / sigma) - normal_cdf(-s / sigma);
                let across = normal_cdf((hw - l) / sigma) - normal_cdf((-hw - l) / sigma);
                along * across
            })
            .sum();
        T::lit(total.clamp(0.0, 1.0))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lanes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::MapParse { line: idx + 1, reason };
            let nums = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|e| err(format!("bad number {tok:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() < 5 || nums.len() % 2 == 0 {
                return Err(err(format!(
                    "expected width followed by x/y pairs, got {} values",
                    nums.len()
                )));
            }
            let points = nums[1..]
                .chunks_exact(2)
                .map(|p| Vector2::new(T::lit(p[0]), T::lit(p[1])))
                .collect();
            lanes.push(Lane::new(points, T::lit(nums[0])).map_err(|e| err(e.to_string()))?);
        }
        Self::new(lanes)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for lane in &self.lanes {
            write!(out, "{}", lane.width).unwrap();
            for p in &lane.centerline {
                write!(out, " {} {}", p.x, p.y).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Lower Cholesky factor of a symmetric positive definite 2x2 matrix.
pub(crate) fn cholesky2<T: Real>(cov: &Matrix2<T>) -> Result<Matrix2<T>> {
    let scale = cov[(0, 0)].abs().max(cov[(1, 1)].abs()).max(T::lit(1e-300));
    if (cov[(0, 1)] - cov[(1, 0)]).abs() > T::lit(1e-9) * scale {
        return Err(Error::Numeric(format!("covariance is not symmetric: {cov}")));
    }
    let a = cov[(0, 0)];
    if !(a > T::zero()) {
        return Err(Error::Numeric(format!("covariance is not positive definite: {cov}")));
    }
    let l00 = a.sqrt();
    let l10 = cov[(1, 0)] / l00;
    let rest = cov[(1, 1)] - l10 * l10;
    if !(rest > T::zero()) {
        return Err(Error::Numeric(format!("covariance is not positive definite: {cov}")));
    }
    Ok(Matrix2::new(l00, T::zero(), l10, rest.sqrt()))
}
