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

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "cfmm/geometry.hpp"
#include "cfmm/sitemap.hpp"

namespace cfmm {

inline constexpr double kSpeedOfLight = 299792458.0;

// Access point site. The antenna array is a horizontal uniform linear array
// with half-wavelength spacing; departure angles are measured against the
// boresight direction.
struct APSite {
    Vec2 pos;
    double height = 6.0;     // [m]
    double boresight = 0.0;  // [rad], direction of the array normal
    int n_antennas = 8;
};

struct ChannelConfig {
    double f_c = 28e9;          // carrier frequency [Hz]
    double rho_refl_db = -6.0;  // per-bounce reflection loss, power dB
    int max_reflections = 1;    // 0 = LOS only, up to 2 supported
    double ue_height = 1.5;     // [m]
};

// One specular propagation path between an AP and a UE position.
struct PropPath {
    double gain = 0.0;      // amplitude alpha (free space times reflections)
    double aod = 0.0;       // departure angle relative to boresight, (-pi, pi]
    double length = 0.0;    // 3-D travelled distance [m]
    int bounces = 0;
    std::vector<int> walls;  // wall indices in bounce order; empty for LOS
};

using PathSet = std::vector<PropPath>;

// Free-space amplitude with per-bounce reflection loss:
//   alpha = c / (4*pi*f_c*length) * rho^bounces,
// where rho is the amplitude ratio of one reflection.
inline double path_gain(double f_c, double length, int bounces, double rho_refl_db) {
    if (length <= 0.0) throw std::invalid_argument("path length must be positive");
    const double rho_amp = std::pow(10.0, rho_refl_db / 20.0);
    return kSpeedOfLight / (4.0 * kPi * f_c * length) *
           std::pow(rho_amp, static_cast<double>(bounces));
}

// Average channel gain of a path set: beta = sum of squared amplitudes.
inline double avg_gain(const PathSet& paths) {
    double beta = 0.0;
    for (const PropPath& p : paths) beta += p.gain * p.gain;
    return beta;
}

// ULA steering vector, element m responds with exp(-j*m*pi*sin(phi)).
inline Eigen::VectorXcd array_response(int n_antennas, double phi) {
    Eigen::VectorXcd a(n_antennas);
    const double s = std::sin(phi);
    for (int m = 0; m < n_antennas; ++m)
        a(m) = std::exp(std::complex<double>(0.0, -kPi * m * s));
    return a;
}

namespace detail {

// Intersection of the segment (p,q) with the infinite line of wall w,
// expressed through the signed side distances. Returns false when the
// segment does not cross the line transversally.
inline bool cross_wall_line(const Wall& w, const Vec2& p, const Vec2& q, Vec2& out) {
    const double sp = signed_side(w, p);
    const double sq = signed_side(w, q);
    if (!(sp < 0.0) == !(sq < 0.0)) return false;  // same side
    const double t = sp / (sp - sq);
    out = p + (q - p) * t;
    return true;
}

inline bool on_wall_segment(const Wall& w, const Vec2& r) {
    const Vec2 ab = w.b - w.a;
    const double len2 = ab.dot(ab);
    const double u = (r - w.a).dot(ab) / len2;
    return u >= 0.0 && u <= 1.0;
}

inline void add_path(PathSet& out, const APSite& ap, const ChannelConfig& cfg,
                     const Vec2& first_hop, double horiz_len, int bounces,
                     std::vector<int> walls) {
    PropPath p;
    p.bounces = bounces;
    p.walls = std::move(walls);
    p.length = std::hypot(horiz_len, ap.height - cfg.ue_height);
    p.gain = path_gain(cfg.f_c, p.length, bounces, cfg.rho_refl_db);
    p.aod = wrap_pi(std::atan2(first_hop.y - ap.pos.y,
                               first_hop.x - ap.pos.x) -
                    ap.boresight);
    out.push_back(std::move(p));
}

}  // namespace detail

// Specular ray trace by the image method: the direct path when unobstructed,
// plus every valid single-bounce path off a building wall, plus (optionally)
// double bounces off ordered wall pairs. Each reflection requires both path
// endpoints on the outward side of the mirror wall, the reflection point on
// the wall segment, and all sub-segments free of building interiors. An
// empty result means the UE is out of coverage of this AP.
inline PathSet trace_paths(const SiteMap& map, const APSite& ap, const Vec2& ue,
                           const ChannelConfig& cfg) {
    if (cfg.max_reflections < 0 || cfg.max_reflections > 2)
        throw std::invalid_argument("max_reflections must be 0, 1 or 2");

    PathSet out;
    if (map.los_clear(ap.pos, ue))
        detail::add_path(out, ap, cfg, ue, (ue - ap.pos).norm(), 0, {});

    if (cfg.max_reflections < 1) return out;
    const std::vector<Wall>& walls = map.walls();

    for (size_t wi = 0; wi < walls.size(); ++wi) {
        const Wall& w = walls[wi];
        if (signed_side(w, ap.pos) <= 0.0 || signed_side(w, ue) <= 0.0) continue;
        const Vec2 img = mirror_across(w, ap.pos);
        Vec2 r;
        if (!detail::cross_wall_line(w, img, ue, r)) continue;
        if (!detail::on_wall_segment(w, r)) continue;
        if (!map.los_clear(ap.pos, r) || !map.los_clear(r, ue)) continue;
        detail::add_path(out, ap, cfg, r, (img - ue).norm(), 1,
                         {static_cast<int>(wi)});
    }

    if (cfg.max_reflections < 2) return out;

    for (size_t w1 = 0; w1 < walls.size(); ++w1) {
        const Wall& first = walls[w1];
        if (signed_side(first, ap.pos) <= 0.0) continue;
        const Vec2 img1 = mirror_across(first, ap.pos);
        for (size_t w2 = 0; w2 < walls.size(); ++w2) {
            if (w1 == w2) continue;
            const Wall& second = walls[w2];
            if (signed_side(second, ue) <= 0.0) continue;
            const Vec2 img2 = mirror_across(second, img1);

            Vec2 r2;
            if (!detail::cross_wall_line(second, img2, ue, r2)) continue;
            if (!detail::on_wall_segment(second, r2)) continue;
            if (signed_side(first, r2) <= 0.0) continue;

            Vec2 r1;
            if (!detail::cross_wall_line(first, img1, r2, r1)) continue;
            if (!detail::on_wall_segment(first, r1)) continue;

            if (!map.los_clear(ap.pos, r1) || !map.los_clear(r1, r2) ||
                !map.los_clear(r2, ue))
                continue;
            detail::add_path(out, ap, cfg, r1, (img2 - ue).norm(), 2,
                             {static_cast<int>(w1), static_cast<int>(w2)});
        }
    }
    return out;
}

// Draw one small-scale realization: every path gets an independent uniform
// phase, and the contributions superpose on the array response of the
// departure angle. Phases are redrawn each coherence block.
inline Eigen::VectorXcd realize_channel(const PathSet& paths, int n_antennas,
                                        std::mt19937_64& rng) {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(n_antennas);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    for (const PropPath& p : paths) {
        const double psi = phase(rng);
        h += p.gain * std::exp(std::complex<double>(0.0, -psi)) *
             array_response(n_antennas, p.aod);
    }
    return h;
}

}  // namespace cfmm
