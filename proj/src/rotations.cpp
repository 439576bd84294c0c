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
#include "headfit/rotations.hpp"

#include "headfit/error.hpp"

#include "Eigen/Dense"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace headfit {
namespace {

constexpr double kDegenerate = 1e-12;
constexpr double kGimbalDegrees = 1e-6;

Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

double rad(double deg) { return deg * std::numbers::pi / 180.0; }
double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// sin/cos of an angle in degrees, exact for multiples of 90.
void sin_cos_deg(double d, double& s, double& c)
{
    const double q = d / 90.0;
    if (std::isfinite(q) && q == std::floor(q) && std::abs(q) < 1e15)
    {
        const auto quadrant = static_cast<long long>(q);
        switch (((quadrant % 4) + 4) % 4)
        {
        case 0: s = 0.0; c = 1.0; return;
        case 1: s = 1.0; c = 0.0; return;
        case 2: s = 0.0; c = -1.0; return;
        default: s = -1.0; c = 0.0; return;
        }
    }
    s = std::sin(rad(d));
    c = std::cos(rad(d));
}

// Wrap to (-180, 180].
double wrap_degrees(double d)
{
    double w = std::fmod(d, 360.0);
    if (w <= -180.0)
        w += 360.0;
    else if (w > 180.0)
        w -= 360.0;
    return w;
}

EulerAngles decompose_zyx(const RotationMatrix& r)
{
    EulerAngles e;
    const double pitch0 = deg(std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0))));
    e.gimbal_lock = std::abs(90.0 - std::abs(pitch0)) < kGimbalDegrees;

    // At the lock only yaw -/+ roll is observable; put all of it into yaw.
    const double yaw = e.gimbal_lock ? std::atan2(-r(0, 1), r(1, 1)) : std::atan2(r(1, 0), r(0, 0));

    // Strip yaw and read pitch/roll from the remainder. This stays accurate
    // near the lock, where reading all three angles directly from R does not.
    const Eigen::Matrix3d m = rotation_z_deg(-deg(yaw)) * r;
    e.yaw = wrap_degrees(deg(yaw));
    e.pitch = deg(std::atan2(-m(2, 0), m(0, 0)));
    e.roll = wrap_degrees(deg(std::atan2(-m(1, 2), m(1, 1))));
    return e;
}

} // namespace

bool is_rotation(const Eigen::Matrix3d& m, double tol)
{
    if (!m.allFinite())
        return false;
    const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

RotationMatrix six_d_to_matrix(const Rotation6D& r)
{
    const double na = r.a.norm();
    if (!(na >= kDegenerate))
        throw Error(ErrorCode::DegenerateInput, "6D rotation: first vector has zero length");
    const Eigen::Vector3d c1 = r.a / na;
    const Eigen::Vector3d u = r.b - c1.dot(r.b) * c1;
    const double nu = u.norm();
    if (!(nu >= kDegenerate))
        throw Error(ErrorCode::DegenerateInput, "6D rotation: second vector is parallel to the first");
    const Eigen::Vector3d c2 = u / nu;
    RotationMatrix m;
    m.col(0) = c1;
    m.col(1) = c2;
    m.col(2) = c1.cross(c2);
    return m;
}

Rotation6D matrix_to_six_d(const RotationMatrix& r)
{
    return Rotation6D{r.col(0), r.col(1)};
}

Eigen::Matrix<double, 3, 6> six_d_rotate_jacobian(const Rotation6D& r, const Eigen::Vector3d& q)
{
    const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
    const double na = r.a.norm();
    const Eigen::Vector3d c1 = r.a / na;
    const double c1b = c1.dot(r.b);
    const Eigen::Vector3d u = r.b - c1b * c1;
    const double nu = u.norm();
    const Eigen::Vector3d c2 = u / nu;

    const Eigen::Matrix3d dc1_da = (eye - c1 * c1.transpose()) / na;
    const Eigen::Matrix3d du_dc1 = -(c1 * r.b.transpose() + c1b * eye);
    const Eigen::Matrix3d du_db = eye - c1 * c1.transpose();
    const Eigen::Matrix3d dc2_du = (eye - c2 * c2.transpose()) / nu;
    const Eigen::Matrix3d dc2_da = dc2_du * du_dc1 * dc1_da;
    const Eigen::Matrix3d dc2_db = dc2_du * du_db;
    const Eigen::Matrix3d dc3_da = -skew(c2) * dc1_da + skew(c1) * dc2_da;
    const Eigen::Matrix3d dc3_db = skew(c1) * dc2_db;

    Eigen::Matrix<double, 3, 6> j;
    j.leftCols<3>() = q.x() * dc1_da + q.y() * dc2_da + q.z() * dc3_da;
    j.rightCols<3>() = q.y() * dc2_db + q.z() * dc3_db;
    return j;
}

RotationMatrix rotation_vector_to_matrix(const Eigen::Vector3d& rotvec)
{
    const double theta2 = rotvec.squaredNorm();
    const double theta = std::sqrt(theta2);
    double a, b; // sin(t)/t, (1 - cos(t))/t^2
    if (theta < 1e-4)
    {
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    }
    else
    {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    const Eigen::Matrix3d k = skew(rotvec);
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

RotationMatrix axis_angle_to_matrix(const AxisAngle& aa)
{
    return rotation_vector_to_matrix(aa.axis.normalized() * aa.angle);
}

Eigen::Matrix3d rotation_vector_rotate_jacobian(const Eigen::Vector3d& rotvec, const Eigen::Vector3d& p)
{
    const double theta2 = rotvec.squaredNorm();
    const double theta = std::sqrt(theta2);
    double b, c; // (1 - cos(t))/t^2, (t - sin(t))/t^3
    if (theta < 1e-4)
    {
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
        c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
    }
    else
    {
        b = (1.0 - std::cos(theta)) / theta2;
        c = (theta - std::sin(theta)) / (theta2 * theta);
    }
    const Eigen::Matrix3d k = skew(rotvec);
    const Eigen::Matrix3d jr = Eigen::Matrix3d::Identity() - b * k + c * k * k;
    return -rotation_vector_to_matrix(rotvec) * skew(p) * jr;
}

AxisAngle matrix_to_axis_angle(const RotationMatrix& r)
{
    const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double sin_t = 0.5 * w.norm();
    const double cos_t = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    AxisAngle out;
    out.angle = std::atan2(sin_t, cos_t);
    if (sin_t == 0.0 && cos_t > 0.0)
    {
        out.angle = 0.0;
        return out;
    }
    if (cos_t > -0.5)
    {
        out.axis = w / w.norm();
        return out;
    }
    // Near pi the skew part vanishes; read the axis from the symmetric part,
    // (R + R^T)/2 - cos(t) I = (1 - cos(t)) axis axis^T, whose largest
    // diagonal entry gives the best-conditioned column.
    const Eigen::Matrix3d s = 0.5 * (r + r.transpose()) - cos_t * Eigen::Matrix3d::Identity();
    Eigen::Index k = 0;
    s.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = s.col(k) / std::sqrt(std::max(s(k, k), 0.0));
    axis.normalize();
    if (axis.dot(w) < 0.0)
        axis = -axis;
    out.axis = axis;
    return out;
}

double pose_error_frobenius(const RotationMatrix& r1, const RotationMatrix& r2)
{
    // |I - R1 R2^T| = |(R2 - R1) R2^T| = |R2 - R1| for orthonormal R2; the
    // difference form is exact for identical inputs and avoids cancellation.
    return (r2 - r1).norm();
}

double pose_error_angle(const RotationMatrix& r1, const RotationMatrix& r2)
{
    if (r1 == r2)
    {
        return 0.0;
    }
    return deg(matrix_to_axis_angle(r1 * r2.transpose()).angle);
}

RotationMatrix rotation_x_deg(double d)
{
    double s, c;
    sin_cos_deg(d, s, c);
    RotationMatrix m;
    m << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
    return m;
}

RotationMatrix rotation_y_deg(double d)
{
    double s, c;
    sin_cos_deg(d, s, c);
    RotationMatrix m;
    m << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
    return m;
}

RotationMatrix rotation_z_deg(double d)
{
    double s, c;
    sin_cos_deg(d, s, c);
    RotationMatrix m;
    m << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return m;
}

RotationMatrix euler_to_matrix(const EulerAngles& e)
{
    if (e.convention == EulerConvention::ZYX)
        return rotation_z_deg(e.yaw) * rotation_y_deg(e.pitch) * rotation_x_deg(e.roll);
    return rotation_x_deg(e.roll) * rotation_y_deg(e.pitch) * rotation_z_deg(e.yaw);
}

EulerAngles matrix_to_euler(const RotationMatrix& r, EulerConvention convention)
{
    if (convention == EulerConvention::ZYX)
        return decompose_zyx(r);
    // Rx(r) Ry(p) Rz(y) = (Rz(-y) Ry(-p) Rx(-r))^T
    EulerAngles e = decompose_zyx(r.transpose());
    e.yaw = wrap_degrees(-e.yaw);
    e.pitch = -e.pitch;
    e.roll = wrap_degrees(-e.roll);
    e.convention = EulerConvention::XYZ;
    return e;
}

RotationMatrix nearest_rotation(const Eigen::Matrix3d& m)
{
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
}

} // namespace headfit
