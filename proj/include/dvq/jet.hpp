#pragma once

#include <Eigen/Core>
#include <cmath>

namespace dvq {

// Forward-mode dual number with a fixed number of derivative slots.
// Used to extract dense Jacobians from the hand layer, where reverse-mode
// bookkeeping would cost more than it saves (61 inputs, thousands of outputs).
template <int N>
struct Jet {
    using Grad = Eigen::Matrix<double, N, 1>;

    double v = 0.0;
    Grad d = Grad::Zero();

    Jet() = default;
    Jet(double value) : v(value) {}
    static Jet seeded(double value, int slot) {
        Jet j(value);
        j.d[slot] = 1.0;
        return j;
    }

    Jet operator-() const {
        Jet r(-v);
        r.d = -d;
        return r;
    }
    Jet& operator+=(const Jet& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    Jet& operator*=(const Jet& o) {
        d = d * o.v + o.d * v;
        v *= o.v;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(Jet a, const Jet& b) { return a *= b; }
    friend Jet operator*(Jet a, double s) {
        a.v *= s;
        a.d *= s;
        return a;
    }
    friend Jet operator*(double s, Jet a) { return a * s; }
    friend Jet operator/(const Jet& a, const Jet& b) {
        Jet r(a.v / b.v);
        r.d = (a.d - r.v * b.d) / b.v;
        return r;
    }
    friend Jet operator+(Jet a, double s) {
        a.v += s;
        return a;
    }
    friend Jet operator-(Jet a, double s) {
        a.v -= s;
        return a;
    }
};

template <int N>
Jet<N> sin(const Jet<N>& a) {
    Jet<N> r(std::sin(a.v));
    r.d = std::cos(a.v) * a.d;
    return r;
}

template <int N>
Jet<N> cos(const Jet<N>& a) {
    Jet<N> r(std::cos(a.v));
    r.d = -std::sin(a.v) * a.d;
    return r;
}

template <int N>
Jet<N> sqrt(const Jet<N>& a) {
    const double s = std::sqrt(a.v);
    Jet<N> r(s);
    r.d = a.d / (2.0 * s);
    return r;
}

template <int N>
Jet<N> acos(const Jet<N>& a) {
    Jet<N> r(std::acos(a.v));
    r.d = -a.d / std::sqrt(1.0 - a.v * a.v);
    return r;
}

}  // namespace dvq
