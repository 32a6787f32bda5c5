//! Centripetal Catmull–Rom splines.
//!
//! A spline over control points `P_0..P_{k-1}` is parameterized by
//! `u in [0, k-1]`; span `s` runs between `P_s` and `P_{s+1}`. Phantom end
//! points `2P_0 - P_1` and `2P_{k-1} - P_{k-2}` make the curve interpolate
//! both ends. For fixed knots the curve is linear in the control points,
//! which is what the least-squares fit exploits.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt, Vec3};

/// Weight of each real control point at one parameter value.
pub type Weights = [(usize, f64); 4];

#[derive(Debug, Clone, Copy)]
pub struct CatmullRom<'a> {
    points: &'a [Vec3],
}

impl<'a> CatmullRom<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        assert!(points.len() >= 2, "a spline needs at least two control points");
        CatmullRom { points }
    }

    pub fn max_param(&self) -> f64 {
        (self.points.len() - 1) as f64
    }

    /// Control-point weights at parameter `u`. Each slot is a real control
    /// point index; phantom points are expanded into their definitions, so
    /// an index can repeat.
    pub fn weights(&self, u: f64) -> Weights {
        span_weights(self.points, u)
    }

    pub fn point(&self, u: f64) -> Vec3 {
        self.weights(u).iter().fold(Vec3::ZERO, |acc, &(i, w)| acc + self.points[i] * w)
    }

    /// Interpolate scalar attributes with the same basis as the geometry.
    pub fn scalar(&self, values: &[f64], u: f64) -> f64 {
        self.weights(u).iter().map(|&(i, w)| values[i] * w).sum()
    }

    /// Derivative with respect to `u` by central differences.
    pub fn derivative(&self, u: f64) -> Vec3 {
        let h = 1e-6;
        let a = (u - h).max(0.0);
        let b = (u + h).min(self.max_param());
        (self.point(b) - self.point(a)) / (b - a)
    }

    pub fn tangent(&self, u: f64) -> Option<Vec3> {
        self.derivative(u).normalized()
    }

    /// Arc length over `[a, b]` by composite five-point Gauss–Legendre.
    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let pieces = (((b - a) * 8.0) as usize).clamp(1, 64);
        let h = (b - a) / pieces as f64;
        let mut sum = 0.0;
        for p in 0..pieces {
            let lo = a + h * p as f64;
            for (x, w) in GL5 {
                let u = lo + 0.5 * h * (1.0 + x);
                sum += w * 0.5 * h * self.derivative(u).norm();
            }
        }
        sum
    }

    /// Parameter at which the arc length from `a` reaches half of `[a, b]`.
    pub fn arc_midpoint(&self, a: f64, b: f64) -> f64 {
        let half = 0.5 * self.arc_length(a, b);
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.arc_length(a, mid) < half {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Slot `j` of span `s` as weights over real control points.
fn slot(points: &[Vec3], idx: isize) -> [(usize, f64); 2] {
    let last = points.len() as isize - 1;
    if idx < 0 {
        [(0, 2.0), (1, -1.0)]
    } else if idx > last {
        [(last as usize, 2.0), (last as usize - 1, -1.0)]
    } else {
        [(idx as usize, 1.0), (idx as usize, 0.0)]
    }
}

fn slot_point(points: &[Vec3], idx: isize) -> Vec3 {
    slot(points, idx).iter().fold(Vec3::ZERO, |acc, &(i, w)| acc + points[i] * w)
}

fn span_weights(points: &[Vec3], u: f64) -> Weights {
    let k = points.len();
    let u = u.clamp(0.0, (k - 1) as f64);
    let s = (crate::math::floor(u) as usize).min(k - 2);
    let tau = u - s as f64;
    let q: [Vec3; 4] = [-1isize, 0, 1, 2].map(|o| slot_point(points, s as isize + o));
    let scale = (q[2] - q[1]).norm().max(1e-300);
    let knot_gap = |a: Vec3, b: Vec3| sqrt((b - a).norm()).max(1e-9 * sqrt(scale));
    let t0 = 0.0;
    let t1 = t0 + knot_gap(q[0], q[1]);
    let t2 = t1 + knot_gap(q[1], q[2]);
    let t3 = t2 + knot_gap(q[2], q[3]);
    let t = t1 + tau * (t2 - t1);

    // Barry–Goldman pyramid on slot weights.
    let e = |j: usize| {
        let mut w = [0.0; 4];
        w[j] = 1.0;
        w
    };
    let mix = |a: [f64; 4], wa: f64, b: [f64; 4], wb: f64| [0, 1, 2, 3].map(|i| a[i] * wa + b[i] * wb);
    let a1 = mix(e(0), (t1 - t) / (t1 - t0), e(1), (t - t0) / (t1 - t0));
    let a2 = mix(e(1), (t2 - t) / (t2 - t1), e(2), (t - t1) / (t2 - t1));
    let a3 = mix(e(2), (t3 - t) / (t3 - t2), e(3), (t - t2) / (t3 - t2));
    let b1 = mix(a1, (t2 - t) / (t2 - t0), a2, (t - t0) / (t2 - t0));
    let b2 = mix(a2, (t3 - t) / (t3 - t1), a3, (t - t1) / (t3 - t1));
    let c = mix(b1, (t2 - t) / (t2 - t1), b2, (t - t1) / (t2 - t1));

    // Fold slots (with phantom expansion) onto real indices. Slots 1 and 2
    // are always real points.
    let mut out: Weights = [(s, 0.0), (s + 1, 0.0), (s, 0.0), (s + 1, 0.0)];
    out[0].1 += c[1];
    out[1].1 += c[2];
    let ph0 = slot(points, s as isize - 1);
    let ph3 = slot(points, s as isize + 2);
    out[2] = (ph0[0].0, c[0] * ph0[0].1);
    // ph0[1] always refers to one of P_0/P_1 (or is a zero-weight copy).
    accumulate(&mut out, ph0[1].0, c[0] * ph0[1].1);
    out[3] = (ph3[0].0, c[3] * ph3[0].1);
    accumulate(&mut out, ph3[1].0, c[3] * ph3[1].1);
    out
}

fn accumulate(w: &mut Weights, idx: usize, value: f64) {
    if value == 0.0 {
        return;
    }
    if let Some(slot) = w.iter_mut().find(|(i, _)| *i == idx) {
        slot.1 += value;
    } else {
        unreachable!("phantom expansion refers to a control point outside the span")
    }
}

/// Result of [`fit_spline`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub control_points: Vec<Vec3>,
    /// `true` when the least-squares system was rank deficient and the
    /// control points are a uniform subsample of the input instead.
    pub fallback: bool,
}

/// Least-squares centripetal Catmull–Rom fit with `k` control points. The
/// end control points are pinned to the first and last samples.
pub fn fit_spline(samples: &[Vec3], k: usize) -> crate::error::Result<SplineFit> {
    use crate::error::Error;
    if k < 4 {
        return Err(Error::InvalidInput(alloc::format!("need at least 4 control points, got {k}")));
    }
    if samples.len() < k {
        return Err(Error::InvalidInput(alloc::format!(
            "need at least {k} samples for {k} control points, got {}",
            samples.len()
        )));
    }
    let cum = cumulative_lengths(samples);
    let total = *cum.last().unwrap();
    let uniform = uniform_subsample(samples, &cum, k);
    if !(total > 0.0) {
        return Ok(SplineFit { control_points: uniform, fallback: true });
    }
    let mut params: Vec<f64> = cum.iter().map(|c| c / total * (k - 1) as f64).collect();
    let mut ctrl = uniform.clone();
    for iter in 0..12 {
        match least_squares_step(samples, &params, &ctrl) {
            Some(next) => ctrl = next,
            None => return Ok(SplineFit { control_points: uniform, fallback: true }),
        }
        if iter < 11 {
            reproject(samples, &ctrl, &mut params);
        }
    }
    Ok(SplineFit { control_points: ctrl, fallback: false })
}

fn cumulative_lengths(samples: &[Vec3]) -> Vec<f64> {
    let mut cum = vec![0.0; samples.len()];
    for i in 1..samples.len() {
        cum[i] = cum[i - 1] + samples[i].distance(samples[i - 1]);
    }
    cum
}

fn uniform_subsample(samples: &[Vec3], cum: &[f64], k: usize) -> Vec<Vec3> {
    let total = *cum.last().unwrap();
    (0..k)
        .map(|j| {
            if j == 0 {
                return samples[0];
            }
            if j == k - 1 {
                return *samples.last().unwrap();
            }
            if !(total > 0.0) {
                return samples[j * (samples.len() - 1) / (k - 1)];
            }
            let target = total * j as f64 / (k - 1) as f64;
            let i = cum.partition_point(|&c| c < target).clamp(1, samples.len() - 1);
            let seg = cum[i] - cum[i - 1];
            let t = if seg > 0.0 { (target - cum[i - 1]) / seg } else { 0.0 };
            samples[i - 1].lerp(samples[i], t)
        })
        .collect()
}

/// Solve for the interior control points with knots frozen at `ctrl`.
fn least_squares_step(samples: &[Vec3], params: &[f64], ctrl: &[Vec3]) -> Option<Vec<Vec3>> {
    let k = ctrl.len();
    let m = k - 2;
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![Vec3::ZERO; m];
    let spline = CatmullRom::new(ctrl);
    for (s, &u) in samples.iter().zip(params) {
        let mut row = vec![0.0; k];
        for (i, w) in spline.weights(u) {
            row[i] += w;
        }
        let fixed = ctrl[0] * row[0] + ctrl[k - 1] * row[k - 1];
        let rhs = *s - fixed;
        for a in 0..m {
            let ra = row[a + 1];
            if ra == 0.0 {
                continue;
            }
            atb[a] += rhs * ra;
            for b in 0..m {
                ata[a][b] += ra * row[b + 1];
            }
        }
    }
    let sol = solve_dense_spd(ata, atb)?;
    let mut out = Vec::with_capacity(k);
    out.push(ctrl[0]);
    out.extend(sol);
    out.push(ctrl[k - 1]);
    Some(out)
}

/// Dense Cholesky for the small normal equations; `None` if rank deficient.
fn solve_dense_spd(mut a: Vec<Vec<f64>>, mut b: Vec<Vec3>) -> Option<Vec<Vec3>> {
    let n = a.len();
    let scale = (0..n).map(|i| abs(a[i][i])).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 1e-12 * scale {
            return None;
        }
        let d = sqrt(d);
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= b[k] * a[i][k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= b[k] * a[k][i];
        }
        b[i] = s / a[i][i];
    }
    Some(b)
}

/// Move each interior sample parameter to the closest point on the curve,
/// keeping parameters monotone.
fn reproject(samples: &[Vec3], ctrl: &[Vec3], params: &mut [f64]) {
    let spline = CatmullRom::new(ctrl);
    let umax = spline.max_param();
    let n = params.len();
    for i in 1..n - 1 {
        let lo = params[i - 1];
        let hi = if i + 1 < n { params[i + 1] } else { umax };
        let target = samples[i];
        let dist = |u: f64| spline.point(u).distance(target);
        // Golden-section search on the bracket between neighbors.
        let (mut a, mut b) = (lo, hi.max(lo));
        let g = 0.618_033_988_749_894_9;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..40 {
            if dist(c) < dist(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        params[i] = 0.5 * (a + b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.5, 0.0),
            Vec3::new(2.0, 0.2, 0.3),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(3.5, -1.0, 0.5),
        ]
    }

    #[test]
    fn interpolates_control_points() {
        let p = curve();
        let s = CatmullRom::new(&p);
        for (i, q) in p.iter().enumerate() {
            assert!(s.point(i as f64).distance(*q) < 1e-12, "point {i}");
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let p = curve();
        let s = CatmullRom::new(&p);
        for j in 0..=40 {
            let u = 4.0 * j as f64 / 40.0;
            let sum: f64 = s.weights(u).iter().map(|w| w.1).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_scalar_is_reproduced() {
        let p = curve();
        let s = CatmullRom::new(&p);
        for j in 0..=20 {
            assert!((s.scalar(&[2.5; 5], 4.0 * j as f64 / 20.0) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_line_arc_length() {
        let p: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let s = CatmullRom::new(&p);
        assert!((s.arc_length(0.0, 3.0) - 3.0).abs() < 1e-9);
        assert!((s.point(s.arc_midpoint(0.0, 3.0)).x() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_too_few_samples() {
        assert!(fit_spline(&[Vec3::ZERO, Vec3::X, Vec3::Y], 4).is_err());
        assert!(fit_spline(&[Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z], 3).is_err());
    }

    #[test]
    fn coincident_samples_fall_back() {
        let fit = fit_spline(&[Vec3::X; 6], 4).unwrap();
        assert!(fit.fallback);
        assert_eq!(fit.control_points.len(), 4);
    }
}
