//! Rotations, rigid-body poses, and homogeneous transforms.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions are Hamilton-convention and stored `(w, x, y, z)` with unit
//!   norm. `Rotation` wraps the quaternion and exposes an equivalent 3x3
//!   matrix view.
//! * A rotation maps body-frame vectors into the global frame:
//!   `v_global = R * v_body`.
//! * Orientation errors attach on the right, `R = R_hat * exp(skew(dtheta))`,
//!   i.e. `q = q_hat ⊗ dq` with `dq ≈ [1, dtheta/2]`. The small-angle triple
//!   `dtheta` lives in the body frame. All error-state Jacobians in this
//!   crate are derived under this perturbation.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector4};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

/// Quaternion norms farther than this from 1 are rejected as invalid input;
/// smaller deviations are silently renormalized.
const QUAT_REJECT_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("quaternion norm {norm} deviates from unity by more than {QUAT_REJECT_TOL}")]
    NonUnitQuaternion { norm: f64 },
    #[error("non-finite value in geometric input")]
    NonFinite,
}

/// Skew-symmetric cross-product matrix: `skew(a) * b == a × b`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation stored as a Hamilton unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Builds a rotation from `(w, x, y, z)` components.
    ///
    /// Inputs within `1e-3` of unit norm are renormalized (silently when the
    /// deviation is below `1e-6`); anything farther off is rejected.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if (norm - 1.0).abs() > QUAT_REJECT_TOL {
            return Err(GeometryError::NonUnitQuaternion { norm });
        }
        Ok(Rotation(UnitQuaternion::new_normalize(q)))
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Rotation(q)
    }

    /// Rotation about the global z axis (used by the trajectory generator).
    pub fn from_yaw(yaw: f64) -> Self {
        Rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
    }

    /// Components in `(w, x, y, z)` order.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Equivalent 3x3 rotation matrix.
    pub fn matrix(&self) -> Mat3 {
        self.0.to_rotation_matrix().into_inner()
    }

    /// `self * other`, renormalized to keep drift below 1e-12 per product.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let mut q = self.0.into_inner() * other.0.into_inner();
        q.normalize_mut();
        Rotation(UnitQuaternion::new_unchecked(q))
    }

    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.inverse())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `R^T v` without forming the inverse rotation.
    pub fn rotate_transposed(&self, v: &Vec3) -> Vec3 {
        self.0.inverse_transform_vector(v)
    }

    /// Geodesic angle between two rotations, in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        log_so3(&self.inverse().compose(other)).norm()
    }

    pub fn norm_deviation(&self) -> f64 {
        (self.0.quaternion().norm() - 1.0).abs()
    }
}

/// Exponential map of so(3): rotation by angle `|phi|` about axis `phi/|phi|`.
///
/// Uses the closed-form quaternion with a Taylor fallback below 1e-8 rad so
/// the map is smooth through zero.
pub fn exp_so3(phi: &Vec3) -> Rotation {
    let theta_sq = phi.norm_squared();
    let (w, k) = if theta_sq < 1e-16 {
        // cos(t/2) ~ 1 - t^2/8, sin(t/2)/t ~ 1/2 - t^2/48
        (1.0 - theta_sq / 8.0, 0.5 - theta_sq / 48.0)
    } else {
        let theta = theta_sq.sqrt();
        ((0.5 * theta).cos(), (0.5 * theta).sin() / theta)
    };
    let q = Quaternion::new(w, k * phi.x, k * phi.y, k * phi.z);
    Rotation(UnitQuaternion::new_normalize(q))
}

/// Logarithm map of SO(3); returns the rotation vector with angle in [0, pi].
pub fn log_so3(r: &Rotation) -> Vec3 {
    let q = r.0.quaternion();
    // Pick the hemisphere with w >= 0 so the returned angle is minimal.
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let vn = v.norm();
    if vn < 1e-12 {
        // First-order: phi = 2 v / w.
        return v * (2.0 / w);
    }
    let angle = 2.0 * vn.atan2(w);
    v * (angle / vn)
}

/// Right Jacobian of SO(3): `exp(phi + d) ≈ exp(phi) * exp(J_r(phi) d)`.
pub fn so3_right_jacobian(phi: &Vec3) -> Mat3 {
    let theta_sq = phi.norm_squared();
    let s = skew(phi);
    let (c1, c2) = if theta_sq < 1e-12 {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        let theta = theta_sq.sqrt();
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    Mat3::identity() - c1 * s + c2 * (s * s)
}

/// Rigid-body pose: rotation plus translation, mapping body to global.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            position: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, position: Vec3) -> Self {
        Pose { rotation, position }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            position: self.rotation.rotate(&other.position) + self.position,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose {
            rotation: inv_rot,
            position: -inv_rot.rotate(&self.position),
        }
    }

    /// Maps a body-frame point into the global frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.position
    }

    /// Maps a global-frame point into the body frame.
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate_transposed(&(p - self.position))
    }

    /// Geodesic interpolation at fraction `s` in [0, 1] between `self` and `other`.
    pub fn interpolate(&self, other: &Pose, s: f64) -> Pose {
        let delta = log_so3(&self.rotation.inverse().compose(&other.rotation));
        Pose {
            rotation: self.rotation.compose(&exp_so3(&(s * delta))),
            position: self.position + s * (other.position - self.position),
        }
    }

    pub fn to_homogeneous(&self) -> HomogeneousTransform {
        HomogeneousTransform::from_pose(self)
    }
}

/// 4x4 homogeneous transform with an exact `[0 0 0 1]` bottom row.
#[derive(Debug, Clone, Copy)]
pub struct HomogeneousTransform(Mat4);

impl HomogeneousTransform {
    pub fn from_pose(pose: &Pose) -> Self {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.position);
        HomogeneousTransform(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    /// `T^T v` for a homogeneous 4-vector (used by plane back-projection).
    pub fn transpose_apply(&self, v: &Vec4) -> Vec4 {
        self.0.transpose() * v
    }

    /// Applies the transform to a point expressed homogeneously.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        let h = self.0 * Vec4::new(p.x, p.y, p.z, 1.0);
        Vec3::new(h.x, h.y, h.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: truncated Taylor series of the matrix exponential
    /// (30 terms keep the truncation error below 1e-15 for angles up to 3).
    fn exp_so3_taylor(phi: &Vec3) -> Mat3 {
        let s = skew(phi);
        let mut term = Mat3::identity();
        let mut sum = Mat3::identity();
        for k in 1..=30 {
            term = term * s / k as f64;
            sum += term;
        }
        sum
    }

    fn random_vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
        exp_so3(&random_vec3(rng, 2.5))
    }

    #[test]
    fn skew_matches_cross_product() {
        let a = Vec3::new(0.3, -1.2, 2.0);
        let b = Vec3::new(-0.5, 0.7, 1.1);
        assert_relative_eq!(skew(&a) * b, a.cross(&b), epsilon = 1e-15);
        // Antisymmetry.
        assert_eq!(skew(&a), -skew(&a).transpose());
    }

    #[test]
    fn exp_matches_taylor_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let phi = random_vec3(&mut rng, 1.0) * rng.gen_range(1e-10_f64..3.0);
            let m = exp_so3(&phi).matrix();
            let oracle = exp_so3_taylor(&phi);
            assert_relative_eq!(m, oracle, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let r = exp_so3(&Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let v = r.rotate(&Vec3::x());
        assert_relative_eq!(v, Vec3::y(), epsilon = 1e-14);
    }

    #[test]
    fn log_exp_roundtrip_below_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let dir = random_vec3(&mut rng, 1.0).normalize();
            let angle = rng.gen_range(1e-9_f64..3.0);
            let phi = dir * angle;
            let back = log_so3(&exp_so3(&phi));
            assert!(
                (back - phi).norm() < 1e-10,
                "roundtrip error {} at angle {}",
                (back - phi).norm(),
                angle
            );
        }
    }

    #[test]
    fn rotating_skew_conjugates_argument() {
        // R * skew(R^T n) * R^T == skew(n)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let r = random_rotation(&mut rng).matrix();
            let n = random_vec3(&mut rng, 2.0);
            let lhs = r * skew(&(r.transpose() * n)) * r.transpose();
            assert_relative_eq!(lhs, skew(&n), epsilon = 1e-13);
        }
    }

    #[test]
    fn composition_keeps_unit_norm_over_a_million_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let steps: Vec<Rotation> = (0..64)
            .map(|_| exp_so3(&random_vec3(&mut rng, 0.01)))
            .collect();
        let mut r = Rotation::identity();
        for i in 0..1_000_000 {
            r = r.compose(&steps[i % steps.len()]);
        }
        assert!(r.norm_deviation() < 1e-12, "drift {}", r.norm_deviation());
    }

    #[test]
    fn quaternion_input_validation_thresholds() {
        // Slightly off-norm input is accepted and renormalized.
        let r = Rotation::from_wxyz(1.0 + 5e-7, 0.0, 0.0, 0.0).unwrap();
        assert!(r.norm_deviation() < 1e-15);
        let r = Rotation::from_wxyz(1.0 + 5e-4, 0.0, 0.0, 0.0).unwrap();
        assert!(r.norm_deviation() < 1e-15);
        // Far off-norm input is rejected.
        assert!(matches!(
            Rotation::from_wxyz(1.1, 0.0, 0.0, 0.0),
            Err(GeometryError::NonUnitQuaternion { .. })
        ));
    }

    #[test]
    fn right_jacobian_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let phi = random_vec3(&mut rng, 1.5);
            let jr = so3_right_jacobian(&phi);
            let h = 1e-6;
            for col in 0..3 {
                let mut d = Vec3::zeros();
                d[col] = h;
                // log(exp(phi)^-1 exp(phi + d)) / h -> J_r column.
                let fd = log_so3(&exp_so3(&phi).inverse().compose(&exp_so3(&(phi + d)))) / h;
                assert_relative_eq!(fd, jr.column(col).into_owned(), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn pose_compose_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let a = Pose::new(random_rotation(&mut rng), random_vec3(&mut rng, 5.0));
            let b = Pose::new(random_rotation(&mut rng), random_vec3(&mut rng, 5.0));
            let p = random_vec3(&mut rng, 10.0);
            let ab = a.compose(&b);
            assert_relative_eq!(
                ab.transform_point(&p),
                a.transform_point(&b.transform_point(&p)),
                epsilon = 1e-12
            );
            let id = a.compose(&a.inverse());
            assert!(id.position.norm() < 1e-12);
            assert!(log_so3(&id.rotation).norm() < 1e-12);
            assert_relative_eq!(
                a.inverse_transform_point(&a.transform_point(&p)),
                p,
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn pose_transform_quarter_turn_with_offset() {
        let pose = Pose::new(
            Rotation::from_yaw(std::f64::consts::FRAC_PI_2),
            Vec3::new(1.0, 2.0, 3.0),
        );
        let p = pose.transform_point(&Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Vec3::new(1.0, 3.0, 3.0), epsilon = 1e-14);
    }

    #[test]
    fn homogeneous_transform_matches_pose_and_keeps_unit_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let pose = Pose::new(random_rotation(&mut rng), random_vec3(&mut rng, 4.0));
            let t = pose.to_homogeneous();
            let p = random_vec3(&mut rng, 8.0);
            assert_relative_eq!(t.transform_point(&p), pose.transform_point(&p), epsilon = 1e-12);
            let bottom = t.matrix().row(3);
            assert_eq!(bottom[0], 0.0);
            assert_eq!(bottom[1], 0.0);
            assert_eq!(bottom[2], 0.0);
            assert_eq!(bottom[3], 1.0);
        }
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let a = Pose::new(Rotation::from_yaw(0.2), Vec3::new(0.0, 0.0, 0.0));
        let b = Pose::new(Rotation::from_yaw(0.8), Vec3::new(2.0, -1.0, 4.0));
        let s0 = a.interpolate(&b, 0.0);
        let s1 = a.interpolate(&b, 1.0);
        let sm = a.interpolate(&b, 0.5);
        assert!(a.rotation.angle_to(&s0.rotation) < 1e-14);
        assert!(b.rotation.angle_to(&s1.rotation) < 1e-12);
        assert_relative_eq!(sm.position, Vec3::new(1.0, -0.5, 2.0), epsilon = 1e-14);
        assert_relative_eq!(log_so3(&sm.rotation).z, 0.5, epsilon = 1e-12);
    }
}
