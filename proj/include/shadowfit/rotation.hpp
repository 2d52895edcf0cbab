#pragma once

#include "shadowfit/core.hpp"

#include <cmath>

namespace shadowfit {

inline Mat3 hat(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

// Rodrigues: axis-angle vector to rotation matrix.
inline Mat3 exp_so3(const Vec3& v) {
    const double th2 = v.squaredNorm();
    const Mat3 V = hat(v);
    if (th2 < 1e-16) {
        return Mat3::Identity() + V + 0.5 * (V * V);
    }
    const double th = std::sqrt(th2);
    return Mat3::Identity() + (std::sin(th) / th) * V + ((1.0 - std::cos(th)) / th2) * (V * V);
}

// Rotation matrix to axis-angle vector with magnitude in [0, pi].
inline Vec3 log_so3(const Mat3& R) {
    const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    const double sin_th = 0.5 * w.norm();
    const double cos_th = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double th = std::atan2(sin_th, cos_th);
    if (sin_th > 1e-7) {
        return (0.5 * th / sin_th) * w;
    }
    if (cos_th > 0.0) {
        // angle near zero; w/2 is exact to O(th^3)
        return 0.5 * w;
    }
    // angle near pi: extract the axis from the symmetric part
    const Mat3 S = 0.5 * (R + Mat3::Identity());
    Vec3 ax(std::sqrt(std::max(0.0, S(0, 0))),
            std::sqrt(std::max(0.0, S(1, 1))),
            std::sqrt(std::max(0.0, S(2, 2))));
    int k = 0;
    if (ax.y() > ax.x()) k = 1;
    if (ax.z() > ax[k]) k = 2;
    if (ax[k] < 1e-12) return Vec3::Zero();
    if (k == 0) {
        ax.y() = S(0, 1) / ax.x();
        ax.z() = S(0, 2) / ax.x();
    } else if (k == 1) {
        ax.x() = S(0, 1) / ax.y();
        ax.z() = S(1, 2) / ax.y();
    } else {
        ax.x() = S(0, 2) / ax.z();
        ax.y() = S(1, 2) / ax.z();
    }
    ax.normalize();
    if (ax.dot(w) < 0.0) ax = -ax;
    return th * ax;
}

// Left Jacobian of exp_so3: d/dt exp(v + t*dv) * exp(v)^T = hat(J_l(v) * dv).
inline Mat3 left_jacobian(const Vec3& v) {
    const double th2 = v.squaredNorm();
    const Mat3 V = hat(v);
    if (th2 < 1e-12) {
        return Mat3::Identity() + 0.5 * V + (V * V) / 6.0;
    }
    const double th = std::sqrt(th2);
    return Mat3::Identity() + ((1.0 - std::cos(th)) / th2) * V +
           ((th - std::sin(th)) / (th2 * th)) * (V * V);
}

// Remaps an axis-angle vector with magnitude >= 2*pi to the equivalent vector
// with magnitude in [0, pi].
inline Vec3 wrap_axis_angle(const Vec3& v) {
    const double th = v.norm();
    if (th < 2.0 * M_PI) return v;
    const double r = std::fmod(th, 2.0 * M_PI);
    const Vec3 axis = v / th;
    if (r <= M_PI) return r * axis;
    return (r - 2.0 * M_PI) * axis;  // flips direction via negative magnitude
}

}  // namespace shadowfit
