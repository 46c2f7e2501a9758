#pragma once

#include <array>
#include <cmath>

#include "phong_splat/tape.hpp"

namespace phong_splat {

// Small fixed-size vector/matrix types generic over the scalar, so the same
// geometry code runs on plain doubles and on tape variables.
template <class S>
struct Vec3 {
    S x{}, y{}, z{};

    Vec3() = default;
    Vec3(S x_, S y_, S z_) : x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {}

    template <class U>
    static Vec3 from(const Vec3<U>& o) {
        return {S(o.x), S(o.y), S(o.z)};
    }

    S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend Vec3 operator*(const Vec3& a, const S& s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(const S& s, const Vec3& a) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator/(const Vec3& a, const S& s) { return {a.x / s, a.y / s, a.z / s}; }
};

using Vec3d = Vec3<double>;

template <class S>
S dot(const Vec3<S>& a, const Vec3<S>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class S>
Vec3<S> cross(const Vec3<S>& a, const Vec3<S>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class S>
Vec3<S> hadamard(const Vec3<S>& a, const Vec3<S>& b) {
    return {a.x * b.x, a.y * b.y, a.z * b.z};
}

template <class S>
S norm(const Vec3<S>& a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}

template <class S>
Vec3<S> normalize(const Vec3<S>& a) {
    const S n = norm(a);
    return a / n;
}

template <class S>
Vec3<double> primal(const Vec3<S>& a) {
    return {primal(a.x), primal(a.y), primal(a.z)};
}

// Row-major 3x3.
template <class S>
struct Mat3 {
    std::array<S, 9> m{};

    S& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }
    const S& operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }

    static Mat3 identity() {
        Mat3 out;
        out(0, 0) = S(1.0);
        out(1, 1) = S(1.0);
        out(2, 2) = S(1.0);
        return out;
    }

    Vec3<S> column(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
    Vec3<S> row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

    friend Vec3<S> operator*(const Mat3& a, const Vec3<S>& v) {
        return {dot(a.row(0), v), dot(a.row(1), v), dot(a.row(2), v)};
    }
    friend Mat3 operator*(const Mat3& a, const Mat3& b) {
        Mat3 out;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
            }
        }
        return out;
    }
};

using Mat3d = Mat3<double>;

template <class S>
Mat3<S> transpose(const Mat3<S>& a) {
    Mat3<S> out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out(r, c) = a(c, r);
    }
    return out;
}

template <class S>
Mat3<S> from_columns(const Vec3<S>& c0, const Vec3<S>& c1, const Vec3<S>& c2) {
    Mat3<S> out;
    for (int r = 0; r < 3; ++r) {
        out(r, 0) = c0[r];
        out(r, 1) = c1[r];
        out(r, 2) = c2[r];
    }
    return out;
}

// Rotation matrix of quaternion (w, x, y, z); the quaternion is normalized first.
template <class S>
Mat3<S> rotation_from_quaternion(const S& qw, const S& qx, const S& qy, const S& qz) {
    using std::sqrt;
    const S n = sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    const S w = qw / n, x = qx / n, y = qy / n, z = qz / n;
    Mat3<S> r;
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - w * z);
    r(0, 2) = 2.0 * (x * z + w * y);
    r(1, 0) = 2.0 * (x * y + w * z);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - w * x);
    r(2, 0) = 2.0 * (x * z - w * y);
    r(2, 1) = 2.0 * (y * z + w * x);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

// R diag(d) R^T.
template <class S>
Mat3<S> rotate_diagonal(const Mat3<S>& r, const Vec3<S>& d) {
    Mat3<S> out;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            out(i, j) = r(i, 0) * d.x * r(j, 0) + r(i, 1) * d.y * r(j, 1) + r(i, 2) * d.z * r(j, 2);
            if (j != i) out(j, i) = out(i, j);
        }
    }
    return out;
}

}  // namespace phong_splat
