// SPDX-License-Identifier: Apache-2.0
//
// cfmm - downlink simulator for user-centric cell-free mmWave networks
// Copyright (c) 2026 The cfmm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <algorithm>
#include <cmath>

namespace cfmm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

// Axis-aligned rectangle, corners (x0,y0) and (x1,y1) with x0 < x1, y0 < y1.
struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(const Vec2& p) const {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
    bool contains_strict(const Vec2& p, double tol = 0.0) const {
        return p.x > x0 + tol && p.x < x1 - tol && p.y > y0 + tol && p.y < y1 - tol;
    }
};

// One face of a building. `a` and `b` are the endpoints, `normal` is the
// outward unit normal of the face.
struct Wall {
    Vec2 a;
    Vec2 b;
    Vec2 normal;
    int building = -1;  // index of the owning rectangle
};

// Map an angle into [0, 2*pi).
inline double wrap_two_pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

// Map an angle difference into (-pi, pi]; used for shorter-arc interpolation.
inline double wrap_pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    if (a > kPi) a -= kTwoPi;
    return a;
}

// Angle of the vector from `from` to `to`, in [0, 2*pi).
inline double bearing(const Vec2& from, const Vec2& to) {
    return wrap_two_pi(std::atan2(to.y - from.y, to.x - from.x));
}

// Signed distance of p from the infinite line carrying the wall, positive on
// the outward side.
inline double signed_side(const Wall& w, const Vec2& p) {
    return (p - w.a).dot(w.normal);
}

// Reflect a point across the infinite line carrying the wall. Involutive and
// distance preserving.
inline Vec2 mirror_across(const Wall& w, const Vec2& p) {
    const double s = signed_side(w, p);
    return p - w.normal * (2.0 * s);
}

// True when the open segment (a,b) passes through the interior of the
// rectangle. Touching the boundary (corner graze, running along a face) does
// not count: a tangent ray is not blocked. Implemented as a Liang-Barsky clip
// against the closed rectangle followed by a strict interior test of the
// midpoint of the clipped span.
inline bool segment_crosses_rect(const Vec2& a, const Vec2& b, const Rect& r,
                                 double tol = 1e-9) {
    if (a.x == b.x && a.y == b.y) return false;  // a point cannot cross
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    double t0 = 0.0, t1 = 1.0;

    auto clip = [&](double p, double d, double lo, double hi) {
        if (d == 0.0) return p >= lo && p <= hi;
        double ta = (lo - p) / d;
        double tb = (hi - p) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        return t0 <= t1;
    };

    if (!clip(a.x, dx, r.x0, r.x1)) return false;
    if (!clip(a.y, dy, r.y0, r.y1)) return false;
    if (t1 <= t0) return false;  // point contact only

    const double tm = 0.5 * (t0 + t1);
    const Vec2 m{a.x + tm * dx, a.y + tm * dy};
    return r.contains_strict(m, tol);
}

}  // namespace cfmm
