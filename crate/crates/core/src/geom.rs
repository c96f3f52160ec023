//! Vector algebra on the unit sphere and the admissible rotation-operator family.
//!
//! The central objects are two transport operators between points `z1, z2` on S²:
//!
//! * [`p_rot`]: the regularized operator `P = <z1,z2> I + z2 z1^T - z1 z2^T`,
//!   defined for every pair of unit vectors, including antipodal ones.
//! * [`rodrigues`]: the classical rotation carrying `z1` onto `z2` about the
//!   axis `z1 x z2`, orthogonal with determinant one but singular at antipodal
//!   pairs.
//!
//! Both are members of the two-parameter admissible family produced by
//! [`admissible_rot`]; every member maps `z1 -> z2`, `z2 -> 2<z1,z2> z2 - z1`,
//! and tangent vectors at `z1` to tangent vectors at `z2`.
//!
//! All types are immutable values and every operation is a pure function.

use thiserror::Error;

/// Admissibility tolerance applied when constructing [`SpherePoint`] and
/// [`TangentVector`] values.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// Pairs closer than this to antipodal (measured as `||z1 + z2||`) are rejected
/// by [`rodrigues`]. The operator is exact arbitrarily close to the antipode in
/// exact arithmetic, but the axis direction loses all precision there.
pub const ANTIPODAL_TOL: f64 = 1e-8;

/// Pairs with `||z1 x z2||` below this are rejected by [`admissible_rot`],
/// whose two free parameters multiply rank-one terms built from the cross
/// product.
pub const DEGENERATE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(
        "point is off the unit sphere: | ||v|| - 1 | = {deviation:.3e} exceeds {tolerance:.1e}"
    )]
    OffSphere { deviation: f64, tolerance: f64 },
    #[error("vector is not tangent at its base point: |<v, base>| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotTangent { deviation: f64, tolerance: f64 },
    #[error("rotation is singular for an antipodal pair: ||z1 + z2|| = {gap:.3e}")]
    AntipodalSingularity { gap: f64 },
    #[error("admissible family is degenerate for a parallel pair: ||z1 x z2|| = {cross_norm:.3e}")]
    DegeneratePair { cross_norm: f64 },
    #[error("non-finite component encountered")]
    NonFinite,
}

/// A vector in ambient three-space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const EX: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const EY: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const EZ: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `self / ||self||`. Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n == 0.0 {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl std::ops::Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl std::ops::Add for Matrix3 {
    type Output = Matrix3;
    fn add(self, other: Matrix3) -> Matrix3 {
        let mut out = self.m;
        for (row, orow) in out.iter_mut().zip(other.m.iter()) {
            for (v, &o) in row.iter_mut().zip(orow.iter()) {
                *v += o;
            }
        }
        Matrix3::new(out)
    }
}

impl std::ops::Sub for Matrix3 {
    type Output = Matrix3;
    fn sub(self, other: Matrix3) -> Matrix3 {
        self + other.scale(-1.0)
    }
}

impl std::ops::AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl std::ops::SubAssign for Vec3 {
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

/// Right-handed cross product.
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    Vec3::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )
}

/// A position on the unit sphere: `| ||v|| - 1 |` is at most the construction
/// tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Validates against [`ADMISSIBILITY_TOL`].
    pub fn try_new(v: Vec3) -> Result<Self, GeomError> {
        Self::try_new_with_tol(v, ADMISSIBILITY_TOL)
    }

    /// Validates against a caller-chosen tolerance. Simulation code records
    /// drifting states with a loosened bound; the drift itself is monitored
    /// separately rather than rejected.
    pub fn try_new_with_tol(v: Vec3, tol: f64) -> Result<Self, GeomError> {
        if !v.is_finite() {
            return Err(GeomError::NonFinite);
        }
        let deviation = (v.norm() - 1.0).abs();
        if deviation <= tol {
            Ok(SpherePoint(v))
        } else {
            Err(GeomError::OffSphere {
                deviation,
                tolerance: tol,
            })
        }
    }

    /// Normalizes an arbitrary finite nonzero vector onto the sphere.
    pub fn project(v: Vec3) -> Result<Self, GeomError> {
        if !v.is_finite() {
            return Err(GeomError::NonFinite);
        }
        v.normalized().map(SpherePoint).ok_or(GeomError::NonFinite)
    }

    pub fn as_vec3(self) -> Vec3 {
        self.0
    }
}

/// A velocity attached to a base point, constrained to its tangent plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    v: Vec3,
}

impl TangentVector {
    pub fn try_new(base: SpherePoint, v: Vec3) -> Result<Self, GeomError> {
        Self::try_new_with_tol(base, v, ADMISSIBILITY_TOL)
    }

    pub fn try_new_with_tol(base: SpherePoint, v: Vec3, tol: f64) -> Result<Self, GeomError> {
        if !v.is_finite() {
            return Err(GeomError::NonFinite);
        }
        let deviation = v.dot(base.as_vec3()).abs();
        if deviation <= tol {
            Ok(TangentVector { base, v })
        } else {
            Err(GeomError::NotTangent {
                deviation,
                tolerance: tol,
            })
        }
    }

    /// Removes the normal component of `v` and attaches the remainder at `base`.
    pub fn project(base: SpherePoint, v: Vec3) -> Result<Self, GeomError> {
        if !v.is_finite() {
            return Err(GeomError::NonFinite);
        }
        Ok(TangentVector {
            base,
            v: tangent_project_raw(base.as_vec3(), v),
        })
    }

    pub fn base(self) -> SpherePoint {
        self.base
    }

    pub fn as_vec3(self) -> Vec3 {
        self.v
    }
}

/// A 3x3 matrix, row-major. All operations here are closed-form; no general
/// linear-algebra machinery is involved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Matrix3 {
    pub m: [[f64; 3]; 3],
}

impl Matrix3 {
    pub const fn new(m: [[f64; 3]; 3]) -> Self {
        Matrix3 { m }
    }

    pub fn identity() -> Self {
        Matrix3::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn zero() -> Self {
        Matrix3::default()
    }

    /// Outer product `a b^T`.
    pub fn outer(a: Vec3, b: Vec3) -> Self {
        let a = a.to_array();
        let b = b.to_array();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i] * b[j];
            }
        }
        Matrix3::new(m)
    }

    pub fn transpose(self) -> Self {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in self.m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t[j][i] = v;
            }
        }
        Matrix3::new(t)
    }

    pub fn det(self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn mul_vec(self, v: Vec3) -> Vec3 {
        let a = v.to_array();
        let mut out = [0.0; 3];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = row[0] * a[0] + row[1] * a[1] + row[2] * a[2];
        }
        Vec3::from_array(out)
    }

    pub fn mul_mat(self, other: Matrix3) -> Matrix3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.m[i][0] * other.m[0][j]
                    + self.m[i][1] * other.m[1][j]
                    + self.m[i][2] * other.m[2][j];
            }
        }
        Matrix3::new(out)
    }

    pub fn scale(self, s: f64) -> Matrix3 {
        let mut out = self.m;
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        Matrix3::new(out)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(self, other: Matrix3) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, orow) in self.m.iter().zip(other.m.iter()) {
            for (&v, &o) in row.iter().zip(orow.iter()) {
                worst = worst.max((v - o).abs());
            }
        }
        worst
    }

    pub fn is_finite(self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

pub(crate) fn p_rot_raw(z1: Vec3, z2: Vec3) -> Matrix3 {
    Matrix3::identity().scale(z1.dot(z2)) + Matrix3::outer(z2, z1) - Matrix3::outer(z1, z2)
}

/// Applies the regularized operator without materializing the matrix:
/// `P_{z1->z2} v = <z1,z2> v + <z1,v> z2 - <z2,v> z1`.
pub(crate) fn p_apply_raw(z1: Vec3, z2: Vec3, v: Vec3) -> Vec3 {
    z1.dot(z2) * v + z1.dot(v) * z2 - z2.dot(v) * z1
}

/// The regularized rotation operator `P_{z1->z2} = <z1,z2> I + z2 z1^T - z1 z2^T`.
///
/// Defined for every pair of unit vectors; `P = I` when `z1 = z2` and `P = -I`
/// when `z1 = -z2`. Restricted to the tangent plane at `z1` it maps into the
/// tangent plane at `z2`, and it is a bijection between the two planes exactly
/// when `<z1,z2> != 0` (its determinant equals `<z1,z2>`).
pub fn p_rot(z1: SpherePoint, z2: SpherePoint) -> Matrix3 {
    p_rot_raw(z1.as_vec3(), z2.as_vec3())
}

pub(crate) fn rodrigues_raw(z1: Vec3, z2: Vec3) -> Result<Matrix3, GeomError> {
    let gap = (z1 + z2).norm();
    if gap < ANTIPODAL_TOL {
        return Err(GeomError::AntipodalSingularity { gap });
    }
    let c = cross(z1, z2);
    let c2 = c.norm_squared();
    // Coincident pair: the axis term is 0/0 but its limit vanishes against the
    // identity, so no rotation is needed.
    if c2 == 0.0 {
        return Ok(Matrix3::identity());
    }
    let coeff = (1.0 - z1.dot(z2)) / c2;
    Ok(p_rot_raw(z1, z2) + Matrix3::outer(c, c).scale(coeff))
}

/// The classical rotation operator carrying `z1` onto `z2` about `z1 x z2`.
///
/// Orthogonal with determinant one, but singular at antipodal pairs: the
/// rotation axis is undefined there, so pairs with `||z1 + z2||` below
/// [`ANTIPODAL_TOL`] are rejected. Coincident pairs yield the identity.
pub fn rodrigues(z1: SpherePoint, z2: SpherePoint) -> Result<Matrix3, GeomError> {
    rodrigues_raw(z1.as_vec3(), z2.as_vec3())
}

/// A member of the admissible rotation family,
/// `P + a (z1 x z2)(z1 x z2)^T + b (z1 - <z1,z2> z2)(z1 x z2)^T`.
///
/// Every member satisfies the transport identities of [`p_rot`] regardless of
/// `a` and `b`; `a = b = 0` recovers `P` itself and
/// `a = (1 - <z1,z2>)/||z1 x z2||^2, b = 0` recovers [`rodrigues`]. The family
/// is parameterized by the cross product, so `z1` and `z2` must be linearly
/// independent.
pub fn admissible_rot(
    z1: SpherePoint,
    z2: SpherePoint,
    a: f64,
    b: f64,
) -> Result<Matrix3, GeomError> {
    let z1 = z1.as_vec3();
    let z2 = z2.as_vec3();
    let c = cross(z1, z2);
    let cross_norm = c.norm();
    if cross_norm < DEGENERATE_TOL {
        return Err(GeomError::DegeneratePair { cross_norm });
    }
    let skewed = z1 - z1.dot(z2) * z2;
    Ok(p_rot_raw(z1, z2) + Matrix3::outer(c, c).scale(a) + Matrix3::outer(skewed, c).scale(b))
}

/// The angular-velocity tensor: the skew-symmetric matrix with
/// `skew(w) x = w x x` for every `x`.
pub fn skew(w: Vec3) -> Matrix3 {
    Matrix3::new([[0.0, -w.z, w.y], [w.z, 0.0, -w.x], [-w.y, w.x, 0.0]])
}

pub(crate) fn tangent_project_raw(q: Vec3, u: Vec3) -> Vec3 {
    q.norm_squared() * u - u.dot(q) * q
}

/// Projection onto the tangent plane at `q`: `||q||^2 u - <u,q> q`.
///
/// The result is orthogonal to `q` up to roundoff; for unit `q` it is the
/// orthogonal projection of `u`.
pub fn tangent_project(q: SpherePoint, u: Vec3) -> Vec3 {
    tangent_project_raw(q.as_vec3(), u)
}
