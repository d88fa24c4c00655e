use super::{DynamicsError, Vec3, EPS_WIND};

/// Orthonormal basis attached to the kite, expressed in ground Cartesian axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub e_theta: Vec3,
    pub e_phi: Vec3,
    pub e_r: Vec3,
}

impl LocalFrame {
    /// Local components `(v_theta, v_phi, v_r)` to ground Cartesian.
    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.e_theta * local.x + self.e_phi * local.y + self.e_r * local.z
    }

    /// Ground Cartesian vector to local components.
    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        Vec3::new(
            self.e_theta.dot(world),
            self.e_phi.dot(world),
            self.e_r.dot(world),
        )
    }
}

pub fn local_frame(theta: f64, phi: f64) -> LocalFrame {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    LocalFrame {
        e_theta: Vec3::new(ct * cp, ct * sp, -st),
        e_phi: Vec3::new(-sp, cp, 0.0),
        e_r: Vec3::new(st * cp, st * sp, ct),
    }
}

/// Kite wind axes.
///
/// All vectors are stored in local `(e_theta, e_phi, e_r)` components; use
/// [`WindFrame::to_world`] for ground axes. `x_w` points against the relative
/// wind, `z_w` from the top surface to the bottom surface, so lift acts along
/// `-z_w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindFrame {
    pub x_w: Vec3,
    pub y_w: Vec3,
    pub z_w: Vec3,
    /// Tangent-plane direction of the relative wind.
    pub e_w: Vec3,
    /// Rotation of `y_w` about `e_r` needed to keep it normal to the wind (rad).
    pub eta: f64,
}

impl WindFrame {
    pub fn to_world(&self, frame: &LocalFrame) -> WindFrame {
        WindFrame {
            x_w: frame.to_world(&self.x_w),
            y_w: frame.to_world(&self.y_w),
            z_w: frame.to_world(&self.z_w),
            e_w: frame.to_world(&self.e_w),
            eta: self.eta,
        }
    }
}

/// Builds the wind axes from the relative wind (local components) and the bank
/// angle in degrees.
///
/// Fails with `AlignmentSingularity` when the relative wind has no usable
/// component in the tangent plane, or when the bank angle cannot be realised
/// (`|arcsin argument| > 1`).
pub fn wind_frame(w_rel_local: &Vec3, psi_deg: f64) -> Result<WindFrame, DynamicsError> {
    let speed = w_rel_local.norm();
    if speed <= EPS_WIND {
        return Err(DynamicsError::DegenerateWind { speed });
    }
    let e_r = Vec3::z();
    let radial = w_rel_local.z;
    let tangential = Vec3::new(w_rel_local.x, w_rel_local.y, 0.0);
    let tangential_norm = tangential.norm();
    if tangential_norm < EPS_WIND {
        return Err(DynamicsError::AlignmentSingularity { substep: None });
    }
    let e_w = tangential / tangential_norm;
    let psi = psi_deg.to_radians();
    let (sin_psi, cos_psi) = psi.sin_cos();
    let arg = radial / tangential_norm * psi.tan();
    if !(arg.abs() <= 1.0) {
        return Err(DynamicsError::AlignmentSingularity { substep: None });
    }
    let eta = arg.asin();
    let (sin_eta, cos_eta) = eta.sin_cos();

    let x_w = -w_rel_local / speed;
    let y_w = e_w * (-cos_psi * sin_eta) + e_r.cross(&e_w) * (cos_psi * cos_eta) + e_r * sin_psi;
    let z_w = x_w.cross(&y_w);
    Ok(WindFrame {
        x_w,
        y_w,
        z_w,
        e_w,
        eta,
    })
}
