/*
 * headfit - pin-based 3D head model fitting and evaluation.
 *
 * Copyright 2026 The headfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "Eigen/Core"

namespace headfit {

/// Orthonormality and determinant tolerance used by is_rotation().
inline constexpr double kRotationTolerance = 1e-9;

using RotationMatrix = Eigen::Matrix3d;

/**
 * Continuous 6D rotation representation: two 3-vectors that are turned into
 * the first two columns of a rotation matrix by Gram-Schmidt.
 */
struct Rotation6D
{
    Eigen::Vector3d a{1.0, 0.0, 0.0};
    Eigen::Vector3d b{0.0, 1.0, 0.0};
};

struct AxisAngle
{
    Eigen::Vector3d axis{0.0, 0.0, 1.0}; // unit; (0,0,1) by convention when angle == 0
    double angle = 0.0;                  // radians in [0, pi]
};

/// Intrinsic rotation order. ZYX: R = Rz(yaw) * Ry(pitch) * Rx(roll).
/// XYZ: R = Rx(roll) * Ry(pitch) * Rz(yaw).
enum class EulerConvention { ZYX, XYZ };

struct EulerAngles
{
    double yaw = 0.0;   // degrees
    double pitch = 0.0; // degrees
    double roll = 0.0;  // degrees
    EulerConvention convention = EulerConvention::ZYX;
    /// Set by matrix_to_euler when |pitch| is within 1e-6 degrees of 90.
    /// Yaw and roll are then only determined up to their sum/difference.
    bool gimbal_lock = false;
};

bool is_rotation(const Eigen::Matrix3d& m, double tol = kRotationTolerance);

/// Throws DegenerateInput if |a| < 1e-12 or b is (numerically) parallel to a.
RotationMatrix six_d_to_matrix(const Rotation6D& r);

/// The first two columns of R.
Rotation6D matrix_to_six_d(const RotationMatrix& r);

/**
 * Derivative of R(r) * q with respect to the six numbers (a, b), as a 3x6
 * matrix. Columns 0-2 are d/da, columns 3-5 d/db.
 */
Eigen::Matrix<double, 3, 6> six_d_rotate_jacobian(const Rotation6D& r, const Eigen::Vector3d& q);

/// Rodrigues' formula for a rotation vector (axis * angle, radians).
RotationMatrix rotation_vector_to_matrix(const Eigen::Vector3d& rotvec);
RotationMatrix axis_angle_to_matrix(const AxisAngle& aa);

/**
 * Derivative of R(rotvec) * p with respect to rotvec:
 * -R [p]x Jr(rotvec), with Jr the right Jacobian of SO(3).
 */
Eigen::Matrix3d rotation_vector_rotate_jacobian(const Eigen::Vector3d& rotvec, const Eigen::Vector3d& p);

AxisAngle matrix_to_axis_angle(const RotationMatrix& r);

/// ||I - R1 R2^T||_F, in [0, 2 sqrt(2)].
double pose_error_frobenius(const RotationMatrix& r1, const RotationMatrix& r2);

/// Angle of R1 R2^T in degrees, in [0, 180].
double pose_error_angle(const RotationMatrix& r1, const RotationMatrix& r2);

RotationMatrix euler_to_matrix(const EulerAngles& e);
EulerAngles matrix_to_euler(const RotationMatrix& r, EulerConvention convention = EulerConvention::ZYX);

/// Closest proper rotation in the Frobenius sense (SVD projection).
RotationMatrix nearest_rotation(const Eigen::Matrix3d& m);

/// Elementary rotations taking degrees. Exact multiples of 90 degrees produce
/// exact 0/+-1 entries.
RotationMatrix rotation_x_deg(double deg);
RotationMatrix rotation_y_deg(double deg);
RotationMatrix rotation_z_deg(double deg);

} // namespace headfit
