use super::{project_off, Point, RetractionKind, SpherePNorm, Tangent, TransportKind};
use crate::error::Result;
use crate::kernels::{self, dot, pnorm};

impl SpherePNorm {
    /// Carries `xi` from `x` to `R_x(eta)` for the normalization retraction.
    pub fn transport(
        &self,
        kind: TransportKind,
        x: &Point,
        eta: &Tangent,
        xi: &Tangent,
    ) -> Result<Tangent> {
        self.check_tangent(x, eta)?;
        self.check_tangent(x, xi)?;
        let y = self.retract_vec(RetractionKind::Normalization, x, eta.vec())?;
        Ok(self.tangent_unchecked(
            &y,
            self.transport_vec(kind, RetractionKind::Normalization, x, eta.vec(), &y, xi.vec()),
        ))
    }

    /// Differential of `R_x` at `eta` applied to `xi`, as a tangent at `R_x(eta)`.
    pub fn retraction_differential(
        &self,
        kind: RetractionKind,
        x: &Point,
        eta: &Tangent,
        xi: &Tangent,
    ) -> Result<Tangent> {
        self.check_tangent(x, eta)?;
        self.check_tangent(x, xi)?;
        let y = self.retract_vec(kind, x, eta.vec())?;
        let v = self.differential_vec(kind, x, eta.vec(), &y, xi.vec());
        Ok(self.tangent_unchecked(&y, v))
    }

    /// Transport onto `y = R_x(eta)` for an arbitrary retraction; the
    /// differentiated variant uses that retraction's own differential.
    pub(crate) fn transport_vec(
        &self,
        kind: TransportKind,
        retraction: RetractionKind,
        x: &Point,
        eta: &[f64],
        y: &Point,
        xi: &[f64],
    ) -> Vec<f64> {
        match kind {
            TransportKind::DifferentiatedRetraction => self.differential_vec(retraction, x, eta, y, xi),
            TransportKind::Projection => project_off(&self.normal_direction(y), xi),
        }
    }

    pub(crate) fn differential_vec(
        &self,
        kind: RetractionKind,
        x: &Point,
        eta: &[f64],
        y: &Point,
        xi: &[f64],
    ) -> Vec<f64> {
        let ny = self.normal_direction(y);
        let out = match kind {
            RetractionKind::Normalization => {
                let r = pnorm(&kernels::add(x.coords(), eta), self.p);
                let mut v = xi.to_vec();
                kernels::axpy(-dot(&ny, xi), y.coords(), &mut v);
                kernels::scaled(1.0 / r, &v)
            }
            RetractionKind::Orthographic => {
                let nx = self.normal_direction(x);
                let mut v = xi.to_vec();
                kernels::axpy(-dot(&ny, xi) / dot(&ny, &nx), &nx, &mut v);
                v
            }
            RetractionKind::Projective => {
                // y + alpha n_y = x + eta; differentiate with ||y||_p = 1 held fixed
                let c = kernels::add(x.coords(), eta);
                let alpha = (dot(&kernels::sub(&c, y.coords()), &ny) / dot(&ny, &ny)).max(0.0);
                let q = self.p - 1.0;
                let dinv: Vec<f64> = y
                    .coords()
                    .iter()
                    .map(|&yi| {
                        let curv = if yi == 0.0 {
                            if q < 1.0 { f64::INFINITY } else if q == 1.0 { 1.0 } else { 0.0 }
                        } else {
                            yi.abs().powf(q - 1.0)
                        };
                        let d = 1.0 + alpha * q * curv;
                        if d.is_finite() { 1.0 / d } else { 0.0 }
                    })
                    .collect();
                let dxi: Vec<f64> = dinv.iter().zip(xi).map(|(a, b)| a * b).collect();
                let dn: Vec<f64> = dinv.iter().zip(&ny).map(|(a, b)| a * b).collect();
                let den = dot(&ny, &dn);
                let dalpha = if den > 0.0 { dot(&ny, &dxi) / den } else { 0.0 };
                let mut v = dxi;
                kernels::axpy(-dalpha, &dn, &mut v);
                v
            }
        };
        project_off(&ny, &out)
    }
}
