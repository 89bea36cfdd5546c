use std::f64::consts::PI;

use crate::volume::Vec3;

/// Where a point sits relative to one bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum Zone {
    /// Inside the tube; carries the centerline tangent.
    Bundle(Vec3),
    /// Inside the end slab beyond end 0 or 1.
    Cap(usize),
    Rim,
    Outside,
}

/// Position of a point relative to a centerline.
struct Local {
    /// Distance past the nearer end along its outward tangent; zero within the centerline's range.
    overshoot: f64,
    /// Distance to the centerline (or to the end's axis when past an end).
    perp: f64,
    tangent: Vec3,
    end: usize,
}

#[derive(Debug, Clone)]
pub(super) enum Centerline {
    Segment { start: Vec3, dir: Vec3, len: f64 },
    /// Arc in the xy-plane from angle 0 to `arc` around `center`.
    Arc { center: Vec3, radius: f64, arc: f64 },
}

impl Centerline {
    pub fn segment_through(mid: Vec3, dir: Vec3, len: f64) -> Self {
        let dir = dir.normalize();
        Self::Segment { start: mid - dir * (len / 2.0), dir, len }
    }

    /// Arc whose extent, grown by `reach` sideways and `ext` past its ends, is centered on `mid`.
    pub fn arc_centered(mid: Vec3, radius: f64, arc: f64, reach: f64, ext: f64) -> Self {
        let probe = Self::Arc { center: Vec3::zeros(), radius, arc };
        let (lo, hi) = probe.bounding_box(reach, ext);
        Self::Arc { center: mid - (lo + hi) / 2.0, radius, arc }
    }

    fn point(&self, s: f64) -> Vec3 {
        match self {
            Self::Segment { start, dir, len } => start + dir * (s * len),
            Self::Arc { center, radius, arc } => {
                let a = s * arc;
                center + Vec3::new(a.cos(), a.sin(), 0.0) * *radius
            }
        }
    }

    /// Unit tangent pointing out of the centerline at end 0 or 1.
    fn outward(&self, end: usize) -> Vec3 {
        match self {
            Self::Segment { dir, .. } => {
                if end == 0 {
                    -dir
                } else {
                    *dir
                }
            }
            Self::Arc { arc, .. } => {
                if end == 0 {
                    Vec3::new(0.0, -1.0, 0.0)
                } else {
                    Vec3::new(-arc.sin(), arc.cos(), 0.0)
                }
            }
        }
    }

    fn tangent_at(&self, s: f64) -> Vec3 {
        match self {
            Self::Segment { dir, .. } => *dir,
            Self::Arc { arc, .. } => {
                let a = s * arc;
                Vec3::new(-a.sin(), a.cos(), 0.0)
            }
        }
    }

    /// Axis-aligned box holding every point within `reach` of the centerline, measured
    /// across it, including its extensions by `ext` past either end.
    pub fn bounding_box(&self, reach: f64, ext: f64) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        // A disk of radius `reach` normal to `n` spans reach·sqrt(1 - n_a²) along axis a.
        let mut grow = |p: Vec3, n: Vec3| {
            let half = n.map(|c| reach * (1.0 - c * c).max(0.0).sqrt());
            lo = lo.inf(&(p - half));
            hi = hi.sup(&(p + half));
        };
        let n = 720;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            grow(self.point(s), self.tangent_at(s));
        }
        for end in 0..2 {
            let e = self.point(end as f64);
            let tau = self.outward(end);
            grow(e + tau * ext, tau);
        }
        (lo, hi)
    }

    fn locate(&self, p: &Vec3) -> Local {
        match self {
            Self::Segment { start, dir, len } => {
                let t = (p - start).dot(dir);
                let (overshoot, end) = if t < 0.0 {
                    (-t, 0)
                } else if t > *len {
                    (t - len, 1)
                } else {
                    (0.0, 0)
                };
                let perp = (p - start - dir * t).norm();
                Local { overshoot, perp, tangent: *dir, end }
            }
            Self::Arc { center, radius, arc } => {
                let rel = p - center;
                let phi = rel.y.atan2(rel.x);
                let mut delta = phi - arc / 2.0;
                while delta > PI {
                    delta -= 2.0 * PI;
                }
                while delta <= -PI {
                    delta += 2.0 * PI;
                }
                if delta.abs() <= arc / 2.0 {
                    let rho = rel.x.hypot(rel.y);
                    let perp = (rho - radius).hypot(rel.z);
                    let tangent = Vec3::new(-phi.sin(), phi.cos(), 0.0);
                    return Local { overshoot: 0.0, perp, tangent, end: 0 };
                }
                let end = usize::from(delta > 0.0);
                let e = self.point(end as f64);
                let tau = self.outward(end);
                let along = (p - e).dot(&tau);
                let perp = (p - e - tau * along).norm();
                // Past the wedge but behind the end plane: only reachable far from the arc.
                let overshoot = if along > 0.0 { along } else { f64::INFINITY };
                Local { overshoot, perp, tangent: -tau, end }
            }
        }
    }

    /// Zone of `p` for tube radius `r`, cap thickness `cap` and CSF rim `rim`.
    pub fn zone(&self, p: &Vec3, r: f64, cap: f64, rim: f64) -> Zone {
        let l = self.locate(p);
        if l.overshoot == 0.0 && l.perp <= r {
            Zone::Bundle(l.tangent)
        } else if l.overshoot <= cap && l.perp <= r {
            Zone::Cap(l.end)
        } else if l.overshoot <= cap + rim && l.perp <= r + rim {
            Zone::Rim
        } else {
            Zone::Outside
        }
    }
}
