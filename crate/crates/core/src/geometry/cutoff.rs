use crate::error::{Result, SimError};

/// Smooth cutoff profile `f_Gamma : R -> [0, 1]` used in the general flow
/// map: identically 1 on a plateau around the surface, identically 0 outside
/// `(m2, mm2)`, mollified to `C^inf`.
///
/// Breakpoints are ordered `m2 < m1 < 0 < mm1 < mm2` (negative side lies
/// inside the body). The base profile is piecewise linear with its ramps
/// shrunk by the mollifier width so plateau and support survive mollification
/// exactly as stated.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    m2: f64,
    m1: f64,
    mm1: f64,
    mm2: f64,
    alpha: f64,
    /// Nodes and weights of the Gauss-Legendre rule on [-1, 1].
    gl: Vec<(f64, f64)>,
    norm: f64,
}

/// Builds a cutoff with plateau `[m1, mm1]` and support `(m2, mm2)`.
pub fn build_cutoff(m2: f64, m1: f64, mm1: f64, mm2: f64, alpha: f64) -> Result<CutoffProfile> {
    CutoffProfile::build(m2, m1, mm1, mm2, alpha)
}

impl CutoffProfile {
    pub fn build(m2: f64, m1: f64, mm1: f64, mm2: f64, alpha: f64) -> Result<CutoffProfile> {
        if !(m2 < m1 && m1 < 0.0 && 0.0 < mm1 && mm1 < mm2) {
            return Err(SimError::Param(format!(
                "cutoff breakpoints must satisfy m'' < m' < 0 < M' < M'', got ({m2}, {m1}, {mm1}, {mm2})"
            )));
        }
        if !(alpha > 0.0 && alpha < 0.5 * (m1 - m2).min(mm2 - mm1)) {
            return Err(SimError::Param(format!(
                "mollifier width must satisfy 0 < alpha < min(m' - m'', M'' - M')/2, got {alpha}"
            )));
        }
        let gl = gauss_legendre_32();
        let mut c = CutoffProfile { m2, m1, mm1, mm2, alpha, gl, norm: 1.0 };
        // Normalize the kernel with the same composite rule used in
        // evaluation.
        c.norm = 1.0 / c.integrate(-alpha, alpha, |t| bump(t, alpha));
        Ok(c)
    }

    /// Composite Gauss-Legendre quadrature over `[a, b]`.
    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let panels = 8;
        let mut acc = 0.0;
        for p in 0..panels {
            let pa = a + (b - a) * p as f64 / panels as f64;
            let pb = a + (b - a) * (p + 1) as f64 / panels as f64;
            let mid = 0.5 * (pa + pb);
            let half = 0.5 * (pb - pa);
            for &(t, w) in &self.gl {
                acc += w * half * f(mid + half * t);
            }
        }
        acc
    }

    /// Plateau of the mollified profile.
    pub fn plateau(&self) -> (f64, f64) {
        (self.m1, self.mm1)
    }

    /// Support of the mollified profile.
    pub fn support(&self) -> (f64, f64) {
        (self.m2, self.mm2)
    }

    /// Base piecewise-linear profile with ramps shrunk by `alpha`.
    fn base(&self, s: f64) -> f64 {
        let lo0 = self.m2 + self.alpha;
        let lo1 = self.m1 - self.alpha;
        let hi1 = self.mm1 + self.alpha;
        let hi0 = self.mm2 - self.alpha;
        if s <= lo0 || s >= hi0 {
            0.0
        } else if s < lo1 {
            (s - lo0) / (lo1 - lo0)
        } else if s <= hi1 {
            1.0
        } else {
            (hi0 - s) / (hi0 - hi1)
        }
    }

    /// Mollified profile value, `(base * omega_alpha)(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        // Fast paths where the convolution window sees a constant base.
        let lo0 = self.m2 + self.alpha;
        let lo1 = self.m1 - self.alpha;
        let hi1 = self.mm1 + self.alpha;
        let hi0 = self.mm2 - self.alpha;
        if s <= lo0 - self.alpha || s >= hi0 + self.alpha {
            return 0.0;
        }
        if s >= lo1 + self.alpha && s <= hi1 - self.alpha {
            return 1.0;
        }
        // Integrate base(s - t) omega(t) dt over [-alpha, alpha], split at the
        // kinks of the base profile to keep Gauss-Legendre accurate.
        let mut cuts = vec![-self.alpha, self.alpha];
        for b in [lo0, lo1, hi1, hi0] {
            let t = s - b;
            if t > -self.alpha && t < self.alpha {
                cuts.push(t);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a < 1e-300 {
                continue;
            }
            acc += self.integrate(a, b, |t| self.base(s - t) * bump(t, self.alpha) * self.norm);
        }
        acc
    }

    /// Quadrature of the normalized kernel; 1 up to quadrature error.
    pub fn kernel_mass(&self) -> f64 {
        self.integrate(-self.alpha, self.alpha, |t| bump(t, self.alpha) * self.norm)
    }
}

/// Standard mollifier bump supported on `(-alpha, alpha)`, unnormalized.
fn bump(t: f64, alpha: f64) -> f64 {
    let r = t / alpha;
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp() / alpha
    }
}

/// 32-point Gauss-Legendre nodes/weights on [-1, 1], generated by Newton
/// iteration on the Legendre polynomial.
fn gauss_legendre_32() -> Vec<(f64, f64)> {
    let n = 32usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> CutoffProfile {
        build_cutoff(-0.5, -0.2, 0.3, 0.6, 0.04).unwrap()
    }

    #[test]
    fn plateau_contains_zero() {
        let c = profile();
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(-0.1), 1.0);
        assert_eq!(c.eval(0.25), 1.0);
    }

    #[test]
    fn vanishes_outside_support() {
        let c = profile();
        assert_eq!(c.eval(1.6), 0.0);
        assert_eq!(c.eval(-0.9), 0.0);
        assert_eq!(c.eval(c.support().1 + 1.0), 0.0);
    }

    #[test]
    fn kernel_normalized() {
        let c = profile();
        assert!((c.kernel_mass() - 1.0).abs() < 1e-10);
        // Independent check with a fine midpoint rule.
        let alpha = 0.04;
        let n = 200_000;
        let h = 2.0 * alpha / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let t = -alpha + (i as f64 + 0.5) * h;
            total += h * bump(t, alpha) * c.norm;
        }
        assert!((total - 1.0).abs() < 1e-9, "midpoint mass {total}");
    }

    #[test]
    fn values_within_unit_interval_and_monotone_ramps() {
        let c = profile();
        let mut prev = 0.0;
        let mut s = -0.6;
        while s <= -0.15 {
            let v = c.eval(s);
            assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            assert!(v >= prev - 1e-9, "ramp must not decrease: {v} after {prev}");
            prev = v;
            s += 0.01;
        }
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(build_cutoff(-0.1, -0.2, 0.3, 0.6, 0.01).is_err());
        assert!(build_cutoff(-0.5, -0.2, 0.3, 0.6, 0.2).is_err());
    }
}
