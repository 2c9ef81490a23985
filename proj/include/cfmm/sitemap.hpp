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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmm/geometry.hpp"

namespace cfmm {

// Integer pixel on the 1 m grid. Indices are 1-based: i in [1, width],
// j in [1, height]. The pixel centre sits at (i - 0.5, j - 0.5) metres.
struct Pixel {
    int i = 0;
    int j = 0;
    bool operator==(const Pixel&) const = default;
};

inline Vec2 pixel_center(const Pixel& p) {
    return {static_cast<double>(p.i) - 0.5, static_cast<double>(p.j) - 0.5};
}

// Deployment map: binary walkability grid on a 1 m raster plus the exact
// building rectangles used for ray blocking and reflections. UEs are
// confined to [ue_lo, ue_hi] in both axes (an optional inner margin keeps
// them away from the map edge); APs may sit anywhere on the full map.
class SiteMap {
  public:
    SiteMap() = default;

    SiteMap(int width_m, int height_m, std::vector<Rect> buildings,
            int inner_margin_m = 0)
        : width_(width_m), height_(height_m), buildings_(std::move(buildings)) {
        if (width_ <= 0 || height_ <= 0)
            throw std::invalid_argument("map dimensions must be positive");
        if (inner_margin_m < 0 || 2 * inner_margin_m >= std::min(width_, height_))
            throw std::invalid_argument("inner margin leaves no UE area");
        ue_lo_ = 1 + inner_margin_m;
        ue_hi_x_ = width_ - inner_margin_m;
        ue_hi_y_ = height_ - inner_margin_m;

        for (const Rect& r : buildings_) {
            if (!(r.x0 < r.x1) || !(r.y0 < r.y1))
                throw std::invalid_argument("building rectangle has non-positive area");
            if (r.x0 < 0.0 || r.y0 < 0.0 || r.x1 > width_ || r.y1 > height_)
                throw std::invalid_argument("building rectangle outside map bounds");
        }

        flags_.assign(static_cast<size_t>(width_) * height_, 1);
        for (int j = 1; j <= height_; ++j) {
            for (int i = 1; i <= width_; ++i) {
                const Vec2 c = pixel_center({i, j});
                for (const Rect& r : buildings_) {
                    if (r.contains(c)) {  // boundary counts as occupied
                        flags_[idx(i, j)] = 0;
                        break;
                    }
                }
            }
        }

        walls_.reserve(buildings_.size() * 4);
        for (size_t b = 0; b < buildings_.size(); ++b) {
            const Rect& r = buildings_[b];
            const int bi = static_cast<int>(b);
            walls_.push_back({{r.x0, r.y0}, {r.x0, r.y1}, {-1.0, 0.0}, bi});  // left
            walls_.push_back({{r.x1, r.y0}, {r.x1, r.y1}, {1.0, 0.0}, bi});   // right
            walls_.push_back({{r.x0, r.y0}, {r.x1, r.y0}, {0.0, -1.0}, bi});  // bottom
            walls_.push_back({{r.x0, r.y1}, {r.x1, r.y1}, {0.0, 1.0}, bi});   // top
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<Rect>& buildings() const { return buildings_; }
    const std::vector<Wall>& walls() const { return walls_; }

    // Walkable: inside the map and the pixel centre is not covered by any
    // building rectangle (boundary included).
    bool is_free(const Pixel& p) const {
        if (p.i < 1 || p.i > width_ || p.j < 1 || p.j > height_) return false;
        return flags_[idx(p.i, p.j)] != 0;
    }

    // Walkable for a UE: additionally restricted to the inner region.
    bool is_free_for_ue(const Pixel& p) const {
        if (p.i < ue_lo_ || p.i > ue_hi_x_ || p.j < ue_lo_ || p.j > ue_hi_y_)
            return false;
        return flags_[idx(p.i, p.j)] != 0;
    }

    int ue_lo() const { return ue_lo_; }
    int ue_hi_x() const { return ue_hi_x_; }
    int ue_hi_y() const { return ue_hi_y_; }

    // True when the open segment (a,b) crosses no building interior.
    // Symmetric in its arguments; a degenerate segment is clear.
    bool los_clear(const Vec2& a, const Vec2& b) const {
        for (const Rect& r : buildings_)
            if (segment_crosses_rect(a, b, r)) return false;
        return true;
    }

    // A point is admissible as an AP site when it is inside the map and not
    // strictly inside a building.
    bool point_admissible(const Vec2& p) const {
        if (p.x < 0.0 || p.x > width_ || p.y < 0.0 || p.y > height_) return false;
        for (const Rect& r : buildings_)
            if (r.contains_strict(p)) return false;
        return true;
    }

  private:
    size_t idx(int i, int j) const {
        return static_cast<size_t>(j - 1) * width_ + (i - 1);
    }

    int width_ = 0;
    int height_ = 0;
    int ue_lo_ = 1;
    int ue_hi_x_ = 0;
    int ue_hi_y_ = 0;
    std::vector<Rect> buildings_;
    std::vector<Wall> walls_;
    std::vector<uint8_t> flags_;
};

}  // namespace cfmm
