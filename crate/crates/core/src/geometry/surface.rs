use crate::error::{Result, SimError};

use super::CutoffProfile;

/// Closest-point data of a point relative to a packaged surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    /// Foot of the normal on the surface.
    pub foot: [f64; 3],
    /// Unit outer normal at the foot.
    pub normal: [f64; 3],
    /// Signed distance (negative inside the body).
    pub dist: f64,
    /// Surface parameters of the foot, for displacement lookup.
    pub uv: [f64; 2],
}

/// Analytically packaged closed surface: projection, signed distance and
/// outer normal in closed form. Only evaluators exist for general
/// geometries; nothing is solved on them.
pub trait SurfacePack {
    fn project(&self, x: [f64; 3]) -> Result<SurfacePoint>;
}

/// Sphere of given radius centered at the origin.
#[derive(Debug, Clone, Copy)]
pub struct Sphere {
    pub radius: f64,
}

impl SurfacePack for Sphere {
    fn project(&self, x: [f64; 3]) -> Result<SurfacePoint> {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r < 1e-12 {
            return Err(SimError::Domain("projection undefined at the sphere center".into()));
        }
        let n = [x[0] / r, x[1] / r, x[2] / r];
        Ok(SurfacePoint {
            foot: [n[0] * self.radius, n[1] * self.radius, n[2] * self.radius],
            normal: n,
            dist: r - self.radius,
            uv: [x[1].atan2(x[0]), (x[2] / r).acos()],
        })
    }
}

/// Torus of revolution around the z axis: center-circle radius `major`,
/// tube radius `minor`.
#[derive(Debug, Clone, Copy)]
pub struct TorusOfRevolution {
    pub major: f64,
    pub minor: f64,
}

impl SurfacePack for TorusOfRevolution {
    fn project(&self, x: [f64; 3]) -> Result<SurfacePoint> {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if rho < 1e-12 {
            return Err(SimError::Domain("projection undefined on the torus axis".into()));
        }
        let phi = x[1].atan2(x[0]);
        let center = [self.major * phi.cos(), self.major * phi.sin(), 0.0];
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if dn < 1e-12 {
            return Err(SimError::Domain("projection undefined on the torus center circle".into()));
        }
        let n = [d[0] / dn, d[1] / dn, d[2] / dn];
        let theta = x[2].atan2(rho - self.major);
        Ok(SurfacePoint {
            foot: [
                center[0] + self.minor * n[0],
                center[1] + self.minor * n[1],
                center[2] + self.minor * n[2],
            ],
            normal: n,
            dist: dn - self.minor,
            uv: [phi, theta],
        })
    }
}

/// General flow map `x + f_Gamma(d(x)) w(pi(x)) n(pi(x))` for a packaged
/// surface. Identity outside the cutoff support.
pub fn general_flow_map(
    pack: &dyn SurfacePack,
    cutoff: &CutoffProfile,
    w: &dyn Fn([f64; 2]) -> f64,
    x: [f64; 3],
) -> Result<[f64; 3]> {
    displaced(pack, cutoff, w, x, 1.0)
}

/// Inverse-formula evaluation `x - f_Gamma(d(x)) w(pi(x)) n(pi(x))`.
pub fn general_flow_map_inverse(
    pack: &dyn SurfacePack,
    cutoff: &CutoffProfile,
    w: &dyn Fn([f64; 2]) -> f64,
    x: [f64; 3],
) -> Result<[f64; 3]> {
    displaced(pack, cutoff, w, x, -1.0)
}

fn displaced(
    pack: &dyn SurfacePack,
    cutoff: &CutoffProfile,
    w: &dyn Fn([f64; 2]) -> f64,
    x: [f64; 3],
    sign: f64,
) -> Result<[f64; 3]> {
    let sp = pack.project(x)?;
    let (lo, hi) = cutoff.support();
    if sp.dist <= lo || sp.dist >= hi {
        return Ok(x);
    }
    let wv = w(sp.uv);
    if wv <= lo || wv >= hi {
        return Err(SimError::Param(format!(
            "displacement {wv} outside the admissible band ({lo}, {hi})"
        )));
    }
    let f = cutoff.eval(sp.dist);
    Ok([
        x[0] + sign * f * wv * sp.normal[0],
        x[1] + sign * f * wv * sp.normal[1],
        x[2] + sign * f * wv * sp.normal[2],
    ])
}
