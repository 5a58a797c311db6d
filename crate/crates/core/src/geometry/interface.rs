//! Implicit interface representation and the built-in interface catalog.
//!
//! An [`Interface`] exposes a level-set field `phi` with `phi < 0` inside
//! (region 1) and `phi > 0` outside (region 2), its gradient, and a curvature
//! field valid near the zero level set. Analytic definitions are used where
//! the curve has a closed polar form; parametric curves are converted to an
//! implicit form as `sign * distance-to-polyline`, where the sign comes from
//! even-odd ray crossings against a dense polyline sample of the curve.

use crate::vec2::Vec2;
use std::f64::consts::PI;
use std::sync::Arc;

type Scalar = dyn Fn(Vec2) -> f64 + Send + Sync;
type Vector = dyn Fn(Vec2) -> Vec2 + Send + Sync;

/// Signed implicit description of a closed interface curve.
#[derive(Clone)]
pub struct Interface {
    name: String,
    phi: Arc<Scalar>,
    grad_phi: Arc<Vector>,
    curvature: Arc<Scalar>,
    /// Upper bound on |grad phi| near the curve; lets audits skip edges that
    /// provably cannot cross the zero set.
    lipschitz: f64,
    /// Present for polyline-backed interfaces; enables neighborhood
    /// curvature queries.
    polyline: Option<Arc<PolylineImplicit>>,
}

impl std::fmt::Debug for Interface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Interface({})", self.name)
    }
}

impl Interface {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        grad_phi: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        curvature: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Self {
        Interface {
            name: name.into(),
            phi: Arc::new(phi),
            grad_phi: Arc::new(grad_phi),
            curvature: Arc::new(curvature),
            lipschitz,
            polyline: None,
        }
    }

    /// Implicit interface from `phi` alone; the gradient falls back to
    /// central finite differences.
    pub fn implicit(
        name: impl Into<String>,
        phi: impl Fn(Vec2) -> f64 + Send + Sync + Clone + 'static,
        curvature: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Self {
        let phi2 = phi.clone();
        let grad = move |p: Vec2| fd_gradient(&phi2, p);
        Interface::new(name, phi, grad, curvature, lipschitz)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn phi(&self, p: Vec2) -> f64 {
        (self.phi)(p)
    }

    #[inline]
    pub fn grad_phi(&self, p: Vec2) -> Vec2 {
        (self.grad_phi)(p)
    }

    /// Unsigned curvature magnitude near the curve (1/length units).
    #[inline]
    pub fn curvature(&self, p: Vec2) -> f64 {
        (self.curvature)(p)
    }

    /// Maximum curvature over the portion of the curve within `radius` of
    /// `p`. Needle-sharp features can hide inside one element while every
    /// sample point on its chord sees only the gentle flanks, so refinement
    /// criteria must query the whole neighborhood. Analytic interfaces have
    /// moderate curvature variation and fall back to the point value.
    pub fn max_curvature_near(&self, p: Vec2, radius: f64) -> f64 {
        if let Some(poly) = &self.polyline {
            return poly.max_curvature_in_disc(p, radius);
        }
        (self.curvature)(p)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    /// Interface with the sign convention reversed (region 1 and 2 swapped).
    pub fn flipped(&self) -> Interface {
        let phi = self.phi.clone();
        let grad = self.grad_phi.clone();
        Interface {
            name: format!("{}-flipped", self.name),
            phi: Arc::new(move |p| -(phi)(p)),
            grad_phi: Arc::new(move |p| -(grad)(p)),
            curvature: self.curvature.clone(),
            lipschitz: self.lipschitz,
            polyline: self.polyline.clone(),
        }
    }

    /// Catalog lookup for the built-in curves.
    pub fn by_name(name: &str) -> Option<Interface> {
        match name {
            "circle" => Some(circle(0.5)),
            "flower5" => Some(flower5()),
            "petal6" => Some(petal6(1048576)),
            "spiralish" => Some(spiralish(16384)),
            "sharp20" => Some(sharp20(262144)),
            _ => None,
        }
    }
}

fn fd_gradient(phi: &(impl Fn(Vec2) -> f64 + ?Sized), p: Vec2) -> Vec2 {
    let d = 1e-6;
    Vec2::new(
        (phi(Vec2::new(p.x + d, p.y)) - phi(Vec2::new(p.x - d, p.y))) / (2.0 * d),
        (phi(Vec2::new(p.x, p.y + d)) - phi(Vec2::new(p.x, p.y - d))) / (2.0 * d),
    )
}

/// Circle of radius `r0` centered at the origin; `phi` is the exact signed
/// distance.
pub fn circle(r0: f64) -> Interface {
    Interface::new(
        "circle",
        move |p: Vec2| p.norm() - r0,
        |p: Vec2| {
            let r = p.norm();
            Vec2::new(p.x / r, p.y / r)
        },
        move |_| 1.0 / r0,
        1.0,
    )
}

/// Vertical line `x = c`; degenerate "interface" used by patch tests.
pub fn vertical_line(c: f64) -> Interface {
    Interface::new(
        "line",
        move |p: Vec2| p.x - c,
        |_| Vec2::new(1.0, 0.0),
        |_| 0.0,
        1.0,
    )
}

/// Polar-graph interface r = R(theta) with analytic derivatives.
fn polar_graph(
    name: &str,
    center: Vec2,
    r: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    dr: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    ddr: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    lipschitz: f64,
) -> Interface {
    let phi = move |p: Vec2| {
        let q = p - center;
        let th = q.y.atan2(q.x);
        q.norm() - r(th)
    };
    let grad = move |p: Vec2| {
        let q = p - center;
        let rr = q.norm();
        let th = q.y.atan2(q.x);
        let c = dr(th);
        // d(theta)/dx = -y/r^2, d(theta)/dy = x/r^2
        Vec2::new(q.x / rr + c * q.y / (rr * rr), q.y / rr - c * q.x / (rr * rr))
    };
    let curv = move |p: Vec2| {
        let q = p - center;
        let th = q.y.atan2(q.x);
        // curvature of a polar curve evaluated at the angle of p
        let (r0, r1, r2) = (r(th), dr(th), ddr(th));
        ((r0 * r0 + 2.0 * r1 * r1 - r0 * r2) / (r0 * r0 + r1 * r1).powf(1.5)).abs()
    };
    Interface::new(name, phi, grad, curv, lipschitz)
}

/// Flower with five petals, `r = 1/2 + sin(5 theta)/7`.
pub fn flower5() -> Interface {
    polar_graph(
        "flower5",
        Vec2::ZERO,
        |t| 0.5 + (5.0 * t).sin() / 7.0,
        |t| 5.0 * (5.0 * t).cos() / 7.0,
        |t| -25.0 * (5.0 * t).sin() / 7.0,
        3.0,
    )
}

/// Six-lobed petal curve `r = 0.40178 (1 + cos(2t) sin(6t)) cos(t)`.
/// The parametrization repeats with period pi, so one traversal is
/// `t in [-pi/2, pi/2)`.
pub fn petal6(samples: usize) -> Interface {
    let f = |t: f64| {
        let r = 0.40178 * (1.0 + (2.0 * t).cos() * (6.0 * t).sin()) * t.cos();
        Vec2::new(r * t.cos(), r * t.sin())
    };
    Interface::from_parametric("petal6", f, -PI / 2.0, PI / 2.0, samples)
}

/// Swirled four-armed curve: `theta(t) = t + sin(4t)`,
/// `r(t) = 0.60125 + 0.24012 cos(4t + pi/2)`.
pub fn spiralish(samples: usize) -> Interface {
    let f = |t: f64| {
        let th = t + (4.0 * t).sin();
        let r = 0.60125 + 0.24012 * (4.0 * t + PI / 2.0).cos();
        Vec2::new(r * th.cos(), r * th.sin())
    };
    Interface::from_parametric("spiralish", f, 0.0, 2.0 * PI, samples)
}

/// Twenty-lobed star `r = 0.4 + 0.2 sin(20 theta)` centered at
/// `(0.02 sqrt(5), 0.02 sqrt(5))`.
pub fn sharp20(samples: usize) -> Interface {
    let c = 0.02 * 5f64.sqrt();
    let f = move |t: f64| {
        let r = 0.4 + 0.2 * (20.0 * t).sin();
        Vec2::new(r * t.cos() + c, r * t.sin() + c)
    };
    Interface::from_parametric("sharp20", f, 0.0, 2.0 * PI, samples)
}

impl Interface {
    /// Converts a closed parametric curve into an implicit interface via a
    /// dense polyline: `phi` is the distance to the polyline signed by
    /// even-odd ray crossings, and curvature is carried on the samples from
    /// finite differences of the parametrization.
    pub fn from_parametric(
        name: impl Into<String>,
        f: impl Fn(f64) -> Vec2,
        t0: f64,
        t1: f64,
        samples: usize,
    ) -> Interface {
        let poly = Arc::new(PolylineImplicit::build(&f, t0, t1, samples.max(4096)));
        let p1 = poly.clone();
        let p2 = poly.clone();
        let p3 = poly.clone();
        Interface {
            name: name.into(),
            phi: Arc::new(move |p| p1.phi(p)),
            grad_phi: Arc::new(move |p| {
                let pp = p2.clone();
                fd_gradient(&move |q| pp.phi(q), p)
            }),
            curvature: Arc::new(move |p| p3.curvature_near(p)),
            // signed distance to a polyline is 1-Lipschitz
            lipschitz: 1.0,
            polyline: Some(poly),
        }
    }
}

/// Dense polyline with grid-accelerated distance queries and strip-bucketed
/// ray-crossing parity.
struct PolylineImplicit {
    pts: Vec<Vec2>,
    curv: Vec<f64>,
    grid: SegmentGrid,
    strips: CrossingStrips,
    blocks: Vec<CurveBlock>,
}

/// Bounding box and curvature maximum of a contiguous run of samples.
struct CurveBlock {
    lo: Vec2,
    hi: Vec2,
    kmax: f64,
}

impl CurveBlock {
    #[inline]
    fn dist_sq(&self, p: Vec2) -> f64 {
        let dx = (self.lo.x - p.x).max(p.x - self.hi.x).max(0.0);
        let dy = (self.lo.y - p.y).max(p.y - self.hi.y).max(0.0);
        dx * dx + dy * dy
    }
}

impl PolylineImplicit {
    fn build(f: &impl Fn(f64) -> Vec2, t0: f64, t1: f64, n: usize) -> Self {
        let dt = (t1 - t0) / n as f64;
        let mut pts = Vec::with_capacity(n);
        let mut curv = Vec::with_capacity(n);
        let eps = dt * 1e-4;
        for k in 0..n {
            let t = t0 + k as f64 * dt;
            pts.push(f(t));
            let a = f(t - eps);
            let b = f(t + eps);
            let m = f(t);
            let d1 = (b - a) / (2.0 * eps);
            let d2 = (b - m * 2.0 + a) / (eps * eps);
            let speed3 = d1.norm().powi(3);
            curv.push(if speed3 > 1e-30 {
                (d1.cross(d2) / speed3).abs()
            } else {
                0.0
            });
        }
        let grid = SegmentGrid::build(&pts);
        let strips = CrossingStrips::build(&pts);
        const BLOCK: usize = 256;
        let mut blocks = Vec::with_capacity(n / BLOCK + 1);
        let mut k = 0;
        while k < n {
            let end = (k + BLOCK + 1).min(n + 1);
            let mut lo = Vec2::new(f64::MAX, f64::MAX);
            let mut hi = Vec2::new(f64::MIN, f64::MIN);
            let mut kmax = 0.0f64;
            for j in k..end {
                let p = pts[j % n];
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
                kmax = kmax.max(curv[j % n]);
            }
            blocks.push(CurveBlock { lo, hi, kmax });
            k += BLOCK;
        }
        PolylineImplicit {
            pts,
            curv,
            grid,
            strips,
            blocks,
        }
    }

    fn phi(&self, p: Vec2) -> f64 {
        let (d, _) = self.nearest(p);
        if self.strips.inside(&self.pts, p) {
            -d
        } else {
            d
        }
    }

    fn curvature_near(&self, p: Vec2) -> f64 {
        let (_, seg) = self.nearest(p);
        // max over the segment's endpoints keeps tips visible
        let a = self.curv[seg];
        let b = self.curv[(seg + 1) % self.curv.len()];
        a.max(b)
    }

    /// Max sample curvature over curve blocks whose bounding boxes meet the
    /// disc of the given radius around `p` (conservative but tight: block
    /// boxes span a few hundred samples).
    fn max_curvature_in_disc(&self, p: Vec2, radius: f64) -> f64 {
        let r2 = radius * radius;
        let mut best = 0.0f64;
        let mut any = false;
        for b in &self.blocks {
            if b.dist_sq(p) <= r2 {
                best = best.max(b.kmax);
                any = true;
            }
        }
        if any {
            best
        } else {
            self.curvature_near(p)
        }
    }

    /// Nearest-segment query by multi-resolution descent along the curve
    /// parameter: scan the samples at a coarse stride, refine around the
    /// best few anchors at successively finer strides, then do an exact
    /// segment scan in the final windows. Keeping three anchors per level
    /// guards against near-equidistant branches of the curve.
    fn nearest(&self, p: Vec2) -> (f64, usize) {
        let n = self.pts.len();
        let mut stride = (n / 256).max(1);
        let mut anchors = Best3::new();
        let mut k = 0;
        while k < n {
            anchors.push((self.pts[k] - p).norm_sq(), k);
            k += stride;
        }
        while stride > 1 {
            let next = (stride / 16).max(1);
            let prev = anchors;
            anchors = Best3::new();
            for &(d0, a) in prev.items() {
                if d0 == f64::MAX {
                    continue;
                }
                let lo = a as isize - stride as isize - next as isize;
                let hi = a as isize + stride as isize + next as isize;
                let mut j = lo;
                while j <= hi {
                    let idx = j.rem_euclid(n as isize) as usize;
                    anchors.push((self.pts[idx] - p).norm_sq(), idx);
                    j += next as isize;
                }
            }
            stride = next;
        }
        let mut best = f64::MAX;
        let mut best_seg = 0usize;
        for &(d0, a) in anchors.items() {
            if d0 == f64::MAX {
                continue;
            }
            for s in (a as isize - 2)..=(a as isize + 2) {
                let s = s.rem_euclid(n as isize) as usize;
                let d = seg_dist_sq(self.pts[s], self.pts[(s + 1) % n], p);
                if d < best {
                    best = d;
                    best_seg = s;
                }
            }
        }
        (best.sqrt(), best_seg)
    }
}

/// Keeps the three smallest keyed entries seen.
#[derive(Clone, Copy)]
struct Best3 {
    items: [(f64, usize); 3],
}

impl Best3 {
    fn new() -> Self {
        Best3 {
            items: [(f64::MAX, 0); 3],
        }
    }

    #[inline]
    fn push(&mut self, key: f64, val: usize) {
        if key < self.items[2].0 {
            self.items[2] = (key, val);
            if self.items[2].0 < self.items[1].0 {
                self.items.swap(1, 2);
            }
            if self.items[1].0 < self.items[0].0 {
                self.items.swap(0, 1);
            }
        }
    }

    fn items(&self) -> &[(f64, usize); 3] {
        &self.items
    }
}

fn seg_dist_sq(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_sq()
}

/// Uniform grid over the bounding box of the polyline; each cell lists the
/// segments overlapping it.
struct SegmentGrid {
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl SegmentGrid {
    fn build(pts: &[Vec2]) -> Self {
        let n = pts.len();
        let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for &p in pts {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
        let target = (n as f64).sqrt().ceil() as usize;
        let res = target.clamp(16, 512);
        let cell = extent / res as f64;
        let pad = cell;
        lo = lo - Vec2::new(pad, pad);
        let nx = ((hi.x + pad - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y + pad - lo.y) / cell).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for s in 0..n {
            let a = pts[s];
            let b = pts[(s + 1) % n];
            let ix0 = (((a.x.min(b.x) - lo.x) / cell).floor() as usize).min(nx - 1);
            let ix1 = (((a.x.max(b.x) - lo.x) / cell).floor() as usize).min(nx - 1);
            let iy0 = (((a.y.min(b.y) - lo.y) / cell).floor() as usize).min(ny - 1);
            let iy1 = (((a.y.max(b.y) - lo.y) / cell).floor() as usize).min(ny - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    cells[iy * nx + ix].push(s as u32);
                }
            }
        }
        SegmentGrid {
            lo,
            cell,
            nx,
            ny,
            cells,
            cell_kmax: Vec::new(),
        }
    }

    fn fill_curvature_maxima(&mut self, curv: &[f64]) {
        let n = curv.len();
        self.cell_kmax = self
            .cells
            .iter()
            .map(|list| {
                list.iter()
                    .map(|&s| curv[s as usize].max(curv[(s as usize + 1) % n]))
                    .fold(0.0f64, f64::max)
            })
            .collect();
    }

    /// Max per-cell curvature over cells overlapping the box `p +- r`; a
    /// conservative over-approximation of the max curvature in the disc.
    fn curvature_max_in_box(&self, p: Vec2, r: f64) -> Option<f64> {
        if self.cell_kmax.is_empty() {
            return None;
        }
        let x0 = (((p.x - r - self.lo.x) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let x1 = (((p.x + r - self.lo.x) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let y0 = (((p.y - r - self.lo.y) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        let y1 = (((p.y + r - self.lo.y) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best = 0.0f64;
        let mut any = false;
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let k = self.cell_kmax[iy * self.nx + ix];
                if k > 0.0 {
                    best = best.max(k);
                    any = true;
                }
            }
        }
        any.then_some(best)
    }

}

/// Segments bucketed into horizontal strips for O(strip) ray-crossing tests.
struct CrossingStrips {
    y0: f64,
    dy: f64,
    strips: Vec<Vec<u32>>,
}

impl CrossingStrips {
    fn build(pts: &[Vec2]) -> Self {
        let n = pts.len();
        let (mut ylo, mut yhi) = (f64::MAX, f64::MIN);
        for &p in pts {
            ylo = ylo.min(p.y);
            yhi = yhi.max(p.y);
        }
        let count = (n / 8).clamp(64, 4096);
        let dy = ((yhi - ylo) / count as f64).max(1e-12);
        let mut strips = vec![Vec::new(); count + 2];
        for s in 0..n {
            let a = pts[s];
            let b = pts[(s + 1) % n];
            let i0 = (((a.y.min(b.y) - ylo) / dy).floor() as usize).min(count + 1);
            let i1 = (((a.y.max(b.y) - ylo) / dy).floor() as usize).min(count + 1);
            for i in i0..=i1 {
                strips[i].push(s as u32);
            }
        }
        CrossingStrips {
            y0: ylo,
            dy,
            strips,
        }
    }

    /// Even-odd parity of crossings of the rightward ray from `p`.
    fn inside(&self, pts: &[Vec2], p: Vec2) -> bool {
        let idx = (p.y - self.y0) / self.dy;
        if idx < 0.0 || idx >= self.strips.len() as f64 {
            return false;
        }
        let n = pts.len();
        let mut crossings = 0u32;
        for &s in &self.strips[idx as usize] {
            let a = pts[s as usize];
            let b = pts[(s as usize + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                if a.x + t * (b.x - a.x) > p.x {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    }
}
