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
#include <random>

namespace cfmm {

// Every random decision in the simulator draws from a stream derived from
// the master seed plus the identity of the consumer (drop, interval, purpose,
// entity indices). Streams therefore do not depend on scheduling: the same
// configuration and seed give the same draws no matter how work is split
// across threads.

// Purpose tags baked into the stream key.
enum class StreamTag : uint64_t {
    MobilityInit = 1,
    MobilityStep = 2,
    AssocTieBreak = 3,
    AssocOrder = 4,
    ChannelPhase = 5,
    EstimationNoise = 6,
};

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix(uint64_t acc, uint64_t v) {
    return splitmix64(acc ^ (v + 0x9e3779b97f4a7c15ULL + (acc << 6) + (acc >> 2)));
}
}  // namespace detail

// Derive an independent generator from the master seed and up to five key
// fields. Key collisions across distinct field tuples are as unlikely as a
// 64-bit hash collision.
inline std::mt19937_64 derive_stream(uint64_t seed, StreamTag tag, uint64_t a = 0,
                                     uint64_t b = 0, uint64_t c = 0, uint64_t d = 0,
                                     uint64_t e = 0) {
    uint64_t h = detail::splitmix64(seed);
    h = detail::mix(h, static_cast<uint64_t>(tag));
    h = detail::mix(h, a);
    h = detail::mix(h, b);
    h = detail::mix(h, c);
    h = detail::mix(h, d);
    h = detail::mix(h, e);
    return std::mt19937_64(h);
}

}  // namespace cfmm
