// SPDX-License-Identifier: Apache-2.0
//
// Walker behaviour: straight travel, turn smoothing, waypoint renewal,
// obstacle scanning and the safety properties (never leaves the walkable
// region, bounded per-step displacement).

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cfmm/mobility.hpp"
#include "cfmm/rng.hpp"

using namespace cfmm;

namespace {

MobilityParams desk_params() {
    MobilityParams mp;
    mp.h_steps = 3;
    mp.d_min = 50.0;
    mp.d_max = 100.0;
    mp.v_ue = 1.5;
    mp.t_ho = 2.0;
    return mp;
}

double displacement(const Pixel& a, const Pixel& b) {
    return std::hypot(double(a.i - b.i), double(a.j - b.j));
}

}  // namespace

TEST_CASE("derived step quantities", "[mobility]") {
    const MobilityParams mp = desk_params();
    REQUIRE(mp.step_len() == Catch::Approx(3.0));
    // atan(1/3) -> roughly 18.4 degrees
    REQUIRE(mp.scan_angle() * 180.0 / kPi == Catch::Approx(18.4349).margin(1e-3));
}

TEST_CASE("steady travel moves d_s along the heading", "[mobility]") {
    SiteMap map(200, 200, {});
    const MobilityParams mp = desk_params();
    auto rng = derive_stream(1, StreamTag::MobilityStep, 0, 0, 0);

    UEMobilityState st;
    st.pos = {10, 10};
    st.target = {100, 10};
    st.heading = 0.0;
    st.pending_heading = 0.0;
    st.h_remaining = 0;

    step_mobility(st, map, mp, rng);
    REQUIRE(st.pos == Pixel{13, 10});
    REQUIRE(st.heading == 0.0);
}

TEST_CASE("turn smoothing closes the arc in h steps", "[mobility]") {
    SiteMap map(400, 400, {});
    const MobilityParams mp = desk_params();
    auto rng = derive_stream(2, StreamTag::MobilityStep, 0, 0, 0);

    UEMobilityState st;
    st.pos = {200, 200};
    st.target = {200, 390};  // due north, far away
    st.heading = 0.0;        // currently travelling east
    st.pending_heading = kPi / 2.0;
    st.h_remaining = 3;

    for (int n = 0; n < 3; ++n) {
        const double heading_before = st.heading;
        const double pending_before = st.pending_heading;
        const int h_before = st.h_remaining;
        step_mobility(st, map, mp, rng);
        const double expected = wrap_two_pi(
            heading_before + wrap_pi(pending_before - heading_before) / h_before);
        REQUIRE(st.heading == Catch::Approx(expected).margin(1e-12));
        REQUIRE(st.h_remaining == h_before - 1);
    }
    // Turn completed: the last smoothing step lands exactly on the bearing
    // that was pending when it ran.
    REQUIRE(st.h_remaining == 0);
}

TEST_CASE("the turn takes the shorter arc", "[mobility]") {
    SiteMap map(400, 400, {});
    const MobilityParams mp = desk_params();
    auto rng = derive_stream(3, StreamTag::MobilityStep, 0, 0, 0);

    UEMobilityState st;
    st.pos = {200, 200};
    st.target = {390, 180};
    st.heading = 0.1;
    st.pending_heading = kTwoPi - 0.1;  // 0.2 rad away clockwise
    st.h_remaining = 2;

    step_mobility(st, map, mp, rng);
    // Went clockwise by 0.1, not counter-clockwise by (2*pi - 0.2)/2.
    REQUIRE(st.heading == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("arrival renews the waypoint and schedules a smooth turn", "[mobility]") {
    SiteMap map(400, 400, {});
    const MobilityParams mp = desk_params();
    auto rng = derive_stream(4, StreamTag::MobilityStep, 0, 0, 0);

    UEMobilityState st;
    st.pos = {200, 200};
    st.target = {202, 200};
    st.heading = 0.0;
    st.pending_heading = 0.0;
    st.h_remaining = 0;

    step_mobility(st, map, mp, rng);
    REQUIRE(st.h_remaining == mp.h_steps);
    const double d = displacement(st.pos, st.target);
    // Segment length is drawn from [d_min, d_max]; integer rounding moves the
    // endpoint by at most half a pixel diagonal.
    REQUIRE(d >= mp.d_min - 1.0);
    REQUIRE(d <= mp.d_max + 1.0);
    REQUIRE(map.is_free_for_ue(st.target));
    // Pending heading aims at the new waypoint.
    const double aim = bearing({double(st.pos.i), double(st.pos.j)},
                               {double(st.target.i), double(st.target.j)});
    REQUIRE(st.pending_heading == Catch::Approx(aim).margin(1e-12));
}

TEST_CASE("obstacle triggers the scan and cancels the turn", "[mobility]") {
    // Wall straight ahead of the walker.
    SiteMap map(100, 100, {{53.0, 30.0, 56.0, 70.0}});
    const MobilityParams mp = desk_params();
    auto rng = derive_stream(5, StreamTag::MobilityStep, 0, 0, 0);

    UEMobilityState st;
    st.pos = {51, 50};
    st.target = {90, 50};  // beyond the wall
    st.heading = 0.0;
    st.pending_heading = 0.0;
    st.h_remaining = 0;

    const auto info = step_mobility(st, map, mp, rng);
    REQUIRE_FALSE(info.scan_exhausted);
    REQUIRE(map.is_free_for_ue(st.pos));
    REQUIRE_FALSE(st.pos == Pixel{54, 50});  // the blocked tentative pixel
    REQUIRE(st.h_remaining == 0);
    // The heading is the direction actually moved.
    const double moved = bearing({51.0, 50.0}, {double(st.pos.i), double(st.pos.j)});
    REQUIRE(std::abs(wrap_pi(st.heading - moved)) < 0.35);  // same scan cone step
}

TEST_CASE("fully penned walker holds its position", "[mobility]") {
    // Exactly one free pixel at (11,11); every step candidate is occupied.
    const std::vector<Rect> pen = {{0.0, 0.0, 21.0, 10.0},
                                   {0.0, 11.0, 21.0, 21.0},
                                   {0.0, 10.0, 10.0, 11.0},
                                   {11.0, 10.0, 21.0, 11.0}};
    SiteMap map(21, 21, pen);
    REQUIRE(map.is_free({11, 11}));

    const MobilityParams mp = desk_params();
    auto rng = derive_stream(6, StreamTag::MobilityStep, 0, 0, 0);

    UEMobilityState st;
    st.pos = {11, 11};
    st.target = {18, 11};
    st.heading = 0.0;
    st.pending_heading = 0.0;
    st.h_remaining = 0;

    const auto info = step_mobility(st, map, mp, rng);
    REQUIRE(info.scan_exhausted);
    REQUIRE(st.pos == Pixel{11, 11});
}

TEST_CASE("initial placement lands on free inner pixels with a sane waypoint",
          "[mobility]") {
    SiteMap map(120, 120, {{40.0, 40.0, 80.0, 80.0}}, 10);
    const MobilityParams mp = desk_params();

    for (uint64_t ue = 0; ue < 200; ++ue) {
        auto rng = derive_stream(42, StreamTag::MobilityInit, 0, ue, 0);
        const UEMobilityState st = init_mobility(map, mp, rng);
        REQUIRE(map.is_free_for_ue(st.pos));
        REQUIRE(map.is_free_for_ue(st.target));
        const double d = displacement(st.pos, st.target);
        REQUIRE(d >= mp.d_min - 1.0);
        REQUIRE(d <= mp.d_max + 1.0);
        REQUIRE(st.h_remaining == 0);
        REQUIRE(st.heading == st.pending_heading);
    }
}

TEST_CASE("placement fails cleanly on a fully occupied UE region", "[mobility]") {
    SiteMap map(30, 30, {{8.0, 8.0, 22.0, 22.0}}, 8);  // inner region all covered
    const MobilityParams mp = desk_params();
    auto rng = derive_stream(1, StreamTag::MobilityInit, 0, 0, 0);
    REQUIRE_THROWS_AS(init_mobility(map, mp, rng), std::runtime_error);
}

TEST_CASE("long walks stay walkable with bounded steps", "[mobility]") {
    const std::vector<Rect> rects = {{20.0, 20.0, 45.0, 40.0},
                                     {60.0, 15.0, 85.0, 45.0},
                                     {25.0, 60.0, 55.0, 85.0},
                                     {65.0, 60.0, 90.0, 80.0}};
    SiteMap map(110, 110, rects, 5);
    const MobilityParams mp = desk_params();
    const double bound = mp.step_len() + std::sqrt(2.0) / 2.0 + 1e-9;

    for (uint64_t ue = 0; ue < 4; ++ue) {
        auto rng = derive_stream(99, StreamTag::MobilityInit, 0, ue, 0);
        UEMobilityState st = init_mobility(map, mp, rng);
        for (uint64_t n = 1; n <= 2500; ++n) {
            const Pixel before = st.pos;
            auto step_rng = derive_stream(99, StreamTag::MobilityStep, 0, n, ue);
            step_mobility(st, map, mp, step_rng);
            REQUIRE(map.is_free_for_ue(st.pos));
            REQUIRE(displacement(before, st.pos) <= bound);
        }
    }
}

TEST_CASE("trajectories reproduce under the same seed", "[mobility]") {
    SiteMap map(150, 150, {{50.0, 50.0, 90.0, 90.0}}, 5);
    const MobilityParams mp = desk_params();

    auto run = [&](uint64_t seed) {
        auto rng = derive_stream(seed, StreamTag::MobilityInit, 0, 3, 0);
        UEMobilityState st = init_mobility(map, mp, rng);
        std::vector<Pixel> trace;
        for (uint64_t n = 1; n <= 400; ++n) {
            auto step_rng = derive_stream(seed, StreamTag::MobilityStep, 0, n, 3);
            step_mobility(st, map, mp, step_rng);
            trace.push_back(st.pos);
        }
        return trace;
    };

    REQUIRE(run(7) == run(7));
    REQUIRE(run(7) != run(8));
}
