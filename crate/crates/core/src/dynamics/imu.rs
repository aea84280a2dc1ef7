//! Absolute-orientation sensor model.

use nalgebra::UnitQuaternion;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Z-Y-X (yaw, pitch, roll) Euler angles in radians:
/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

const GIMBAL_EPS: f64 = 1e-9;

/// At `|pitch| = π/2` roll and yaw are not separable; yaw is reported as 0
/// and the whole rotation about the vertical is folded into roll.
pub fn euler_zyx(q: &UnitQuaternion<f64>) -> EulerAngles {
    let m = q.to_rotation_matrix();
    let m = m.matrix();
    let sin_pitch = (-m[(2, 0)]).clamp(-1.0, 1.0);
    if (1.0 - sin_pitch.abs()) < GIMBAL_EPS {
        let pitch = std::f64::consts::FRAC_PI_2.copysign(sin_pitch);
        // With yaw = 0: m01 = sinp·sinr, m02 = sinp·cosr (up to sign), m11 = cos r.
        let roll = (sin_pitch * m[(0, 1)]).atan2(m[(1, 1)]);
        return EulerAngles { roll, pitch, yaw: 0.0 };
    }
    EulerAngles {
        roll: m[(2, 1)].atan2(m[(2, 2)]),
        pitch: sin_pitch.asin(),
        yaw: m[(1, 0)].atan2(m[(0, 0)]),
    }
}

/// Orientation readout with optional additive Gaussian noise per angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuModel {
    pub noise_std_rad: f64,
}

impl Default for ImuModel {
    fn default() -> Self {
        Self { noise_std_rad: 0.0 }
    }
}

impl ImuModel {
    pub fn read<R: Rng + ?Sized>(&self, q: &UnitQuaternion<f64>, rng: &mut R) -> EulerAngles {
        let mut e = euler_zyx(q);
        if self.noise_std_rad > 0.0 {
            let normal = Normal::new(0.0, self.noise_std_rad).expect("positive std");
            e.roll += normal.sample(rng);
            e.pitch += normal.sample(rng);
            e.yaw += normal.sample(rng);
        }
        e
    }
}
