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

#include <cmath>
#include <random>
#include <stdexcept>

#include "cfmm/geometry.hpp"
#include "cfmm/sitemap.hpp"

namespace cfmm {

// Smooth random waypoint walker on the pixel grid. Each UE keeps a waypoint
// (target pixel) and turns towards it gradually: when a new waypoint is
// drawn, the heading interpolates from the current travel direction to the
// waypoint bearing over `h_steps` intervals instead of snapping. Obstacles
// trigger a deterministic left/right scan around the bearing to the waypoint
// with randomised scan amplitudes.
struct MobilityParams {
    int h_steps = 3;        // intervals to complete a turn
    double d_min = 50.0;    // waypoint segment length, lower bound [m]
    double d_max = 100.0;   // waypoint segment length, upper bound [m]
    double v_ue = 1.5;      // UE speed [m/s]
    double t_ho = 2.0;      // interval duration [s]

    double step_len() const { return v_ue * t_ho; }           // d_s [m]
    double scan_angle() const { return std::atan(1.0 / step_len()); }
};

struct UEMobilityState {
    Pixel pos;
    Pixel target;
    double heading = 0.0;          // direction moved last interval, [0, 2*pi)
    double pending_heading = 0.0;  // bearing towards the current waypoint
    int h_remaining = 0;           // smoothing steps left
};

struct MobilityStepInfo {
    bool scan_exhausted = false;  // full sweep found no free pixel; UE held still
};

namespace detail {

inline Vec2 pixel_vec(const Pixel& p) {
    return {static_cast<double>(p.i), static_cast<double>(p.j)};
}

inline Pixel round_to_pixel(const Vec2& v) {
    return {static_cast<int>(std::lround(v.x)), static_cast<int>(std::lround(v.y))};
}

// Draw a waypoint reachable from `pos`: rotate the aim direction by a random
// amount in [-pi/2, pi/2] and step a random distance in [d_min, d_max],
// repeating (with cumulative rotation) until the landing pixel is walkable.
inline Pixel sample_target(const SiteMap& map, const MobilityParams& mp,
                           const Pixel& pos, double aim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> seg(mp.d_min, mp.d_max);
    double theta = aim;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        theta += (unit(rng) - 0.5) * kPi;
        const double d = seg(rng);
        const Pixel t = round_to_pixel(
            pixel_vec(pos) + Vec2{std::cos(theta), std::sin(theta)} * d);
        if (map.is_free_for_ue(t)) return t;
    }
    throw std::runtime_error("mobility: no reachable waypoint from current position");
}

}  // namespace detail

// Place a UE uniformly at random on the free pixels of the UE region and give
// it an initial waypoint. The initial heading points at the waypoint, so the
// first interval starts in steady travel (no turn in progress).
inline UEMobilityState init_mobility(const SiteMap& map, const MobilityParams& mp,
                                     std::mt19937_64& rng) {
    std::uniform_int_distribution<int> di(map.ue_lo(), map.ue_hi_x());
    std::uniform_int_distribution<int> dj(map.ue_lo(), map.ue_hi_y());

    UEMobilityState st;
    bool placed = false;
    for (int attempt = 0; attempt < 1000000; ++attempt) {
        st.pos = {di(rng), dj(rng)};
        if (map.is_free_for_ue(st.pos)) {
            placed = true;
            break;
        }
    }
    if (!placed)
        throw std::runtime_error("mobility: UE region has no free pixel");

    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    st.target = detail::sample_target(map, mp, st.pos, angle(rng), rng);
    st.heading = bearing(detail::pixel_vec(st.pos), detail::pixel_vec(st.target));
    st.pending_heading = st.heading;
    st.h_remaining = 0;
    return st;
}

// Advance one interval. Order of business: turn smoothing, tentative move,
// obstacle scan if the move lands on an occupied or out-of-range pixel,
// waypoint renewal on arrival, and finally re-aim of the pending heading.
inline MobilityStepInfo step_mobility(UEMobilityState& st, const SiteMap& map,
                                      const MobilityParams& mp,
                                      std::mt19937_64& rng) {
    MobilityStepInfo info;
    const double d_s = mp.step_len();
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    if (st.h_remaining > 0) {
        // Mid-turn: close a fraction of the remaining arc (shorter direction).
        const double delta = wrap_pi(st.pending_heading - st.heading) / st.h_remaining;
        st.heading = wrap_two_pi(st.heading + delta);
        --st.h_remaining;
    } else {
        st.heading = st.pending_heading;
    }

    const Vec2 here = detail::pixel_vec(st.pos);
    Pixel next = detail::round_to_pixel(
        here + Vec2{std::cos(st.heading), std::sin(st.heading)} * d_s);

    if (!map.is_free_for_ue(next)) {
        // Blocked: abort the turn, re-aim at the waypoint and scan
        // alternately to the left and right of that bearing in randomised
        // multiples of the scan angle until a walkable pixel appears. A full
        // sweep on both sides without success keeps the UE in place.
        st.h_remaining = 0;
        const double aim = bearing(here, detail::pixel_vec(st.target));
        const double th_scan = mp.scan_angle();
        const int i_max =
            2 * static_cast<int>(std::ceil(kTwoPi / th_scan)) + 1;

        bool moved = false;
        for (int i = 1; i <= i_max; ++i) {
            const double r = unit(rng);
            const double mult = (i % 2 == 1) ? std::ceil(i / 2.0) : -(i / 2.0);
            const double theta_try = aim + mult * r * th_scan;
            const Pixel cand = detail::round_to_pixel(
                here + Vec2{std::cos(theta_try), std::sin(theta_try)} * d_s);
            if (map.is_free_for_ue(cand)) {
                st.pos = cand;
                st.heading = wrap_two_pi(theta_try);  // direction actually moved
                moved = true;
                break;
            }
        }
        if (!moved) {
            st.heading = wrap_two_pi(aim);
            info.scan_exhausted = true;
        }
    } else {
        st.pos = next;
    }

    const Vec2 now = detail::pixel_vec(st.pos);
    if ((detail::pixel_vec(st.target) - now).norm() < d_s) {
        // Arrived: draw the next waypoint in the forward cone and schedule a
        // smooth turn towards it.
        st.h_remaining = mp.h_steps;
        st.target = detail::sample_target(map, mp, st.pos, st.heading, rng);
    }
    st.pending_heading = bearing(now, detail::pixel_vec(st.target));
    return info;
}

}  // namespace cfmm
