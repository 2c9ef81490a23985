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
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmm/rng.hpp"

namespace cfmm {

// Serving-set management: who serves whom, on which pilot. An AP owns one
// slot per pilot and serves at most one UE per slot; a UE owns one pilot and
// a cluster of APs that all hold that pilot for it. The initial sign-on walk
// and the per-interval maintenance keep this structure consistent while UEs
// move, lose walls, and steal better anchors from each other.

enum class PilotMetric { Basic, Ssb };
enum class UeOrder { Ascending, SeededRandom };

struct AssocParams {
    int tau_p = 10;                  // pilots per coherence block
    int m_max = 5;                   // cluster size cap
    double m_ho_db = 3.0;            // anchor handover margin [dB]
    double gain_threshold = 1e-10;   // linear; "noticeable" gain cutoff
    PilotMetric pilot_metric = PilotMetric::Basic;
    UeOrder ue_order = UeOrder::Ascending;

    double ho_margin() const { return std::pow(10.0, m_ho_db / 10.0); }
};

struct UEAssoc {
    bool connected = false;
    int master = -1;                 // anchor AP, in cluster when connected
    int pilot = -1;
    std::vector<int> cluster;        // AP ids, ascending
    std::vector<int> candidates;     // AP ids, descending gain
};

struct APAssoc {
    std::vector<int> slots;          // pilot -> UE id, -1 when free

    explicit APAssoc(int tau_p = 0) : slots(tau_p, -1) {}

    int load() const {
        return static_cast<int>(
            std::count_if(slots.begin(), slots.end(), [](int s) { return s >= 0; }));
    }
    bool full() const { return load() == static_cast<int>(slots.size()); }
    bool slot_free(int t) const { return slots[t] < 0; }
    bool has_free_slot() const { return !full(); }
};

struct AssocState {
    std::vector<UEAssoc> ues;
    std::vector<APAssoc> aps;

    int n_ues() const { return static_cast<int>(ues.size()); }
    int n_aps() const { return static_cast<int>(aps.size()); }
};

// Per-interval event flags, one per UE. Totals are sums of flags, so a UE
// contributes each event kind at most once per interval.
struct AssocEvents {
    std::vector<uint8_t> master_handover;
    std::vector<uint8_t> pilot_change;
    std::vector<uint8_t> denial;
    std::vector<uint8_t> reconnect;

    explicit AssocEvents(int k = 0)
        : master_handover(k, 0), pilot_change(k, 0), denial(k, 0), reconnect(k, 0) {}

    static int total(const std::vector<uint8_t>& v) {
        return std::accumulate(v.begin(), v.end(), 0);
    }
    int n_master_handovers() const { return total(master_handover); }
    int n_pilot_changes() const { return total(pilot_change); }
    int n_denials() const { return total(denial); }
    int n_reconnects() const { return total(reconnect); }
};

// APs with noticeable gain to the UE, strongest first; equal gains break
// towards the lower AP id.
inline std::vector<int> candidate_set(const Eigen::MatrixXd& beta, int ue,
                                      double threshold) {
    std::vector<int> out;
    for (int l = 0; l < beta.cols(); ++l)
        if (beta(ue, l) > threshold) out.push_back(l);
    std::sort(out.begin(), out.end(), [&](int a, int b) {
        if (beta(ue, a) != beta(ue, b)) return beta(ue, a) > beta(ue, b);
        return a < b;
    });
    return out;
}

namespace detail {

inline void reserve_slot(AssocState& st, int ap, int pilot, int ue) {
    if (st.aps[ap].slots[pilot] >= 0)
        throw std::logic_error("assoc: reserving an occupied pilot slot");
    st.aps[ap].slots[pilot] = ue;
}

inline void release_slot(AssocState& st, int ap, int pilot, int ue) {
    if (st.aps[ap].slots[pilot] != ue)
        throw std::logic_error("assoc: releasing a slot the UE does not hold");
    st.aps[ap].slots[pilot] = -1;
}

// Interference sensed by `ap` on pilot t: the gains of every UE currently
// assigned that pilot anywhere in the network, as received at this AP.
inline double sensed_on_pilot(const AssocState& st, const Eigen::MatrixXd& beta,
                              int ap, int t, int exclude_ue) {
    double acc = 0.0;
    for (int i = 0; i < st.n_ues(); ++i)
        if (i != exclude_ue && st.ues[i].pilot == t) acc += beta(i, ap);
    return acc;
}

inline std::vector<int> free_pilots(const AssocState& st, int ap) {
    std::vector<int> out;
    for (int t = 0; t < static_cast<int>(st.aps[ap].slots.size()); ++t)
        if (st.aps[ap].slot_free(t)) out.push_back(t);
    return out;
}

}  // namespace detail

// Least-interference pilot among the master's free slots. When two or more
// free pilots are completely unused network-wide there is nothing to prefer,
// so the choice is drawn uniformly; any measurable interference makes the
// argmin deterministic (ascending pilot id on exact ties).
inline int pick_pilot_basic(const AssocState& st, const Eigen::MatrixXd& beta,
                            int ue, int master, std::mt19937_64& rng) {
    const std::vector<int> free = detail::free_pilots(st, master);
    if (free.empty())
        throw std::logic_error("pick_pilot_basic: no free pilot at the master AP");

    std::vector<int> silent;
    int best = free[0];
    double best_val = std::numeric_limits<double>::infinity();
    for (int t : free) {
        const double v = detail::sensed_on_pilot(st, beta, master, t, ue);
        if (v == 0.0) silent.push_back(t);
        if (v < best_val) {
            best_val = v;
            best = t;
        }
    }
    if (silent.size() >= 2) {
        std::uniform_int_distribution<size_t> pick(0, silent.size() - 1);
        return silent[pick(rng)];
    }
    return best;
}

// Availability-weighted pilot choice: rewards pilots that the UE's strongest
// candidate APs still have free (so later service invitations can succeed)
// and penalises pilots already heard loudly at the master. Requires the UE's
// candidate list to be current. Deterministic; ties break on pilot id.
inline int pick_pilot_ssb(const AssocState& st, const Eigen::MatrixXd& beta,
                          int ue, int master, const AssocParams& p) {
    const std::vector<int> free = detail::free_pilots(st, master);
    if (free.empty())
        throw std::logic_error("pick_pilot_ssb: no free pilot at the master AP");

    const std::vector<int>& cand = st.ues[ue].candidates;
    const size_t n_strong = std::min<size_t>(p.m_max, cand.size());

    int best = free[0];
    double best_val = -std::numeric_limits<double>::infinity();
    for (int t : free) {
        double avail = 0.0;
        for (size_t c = 0; c < n_strong; ++c)
            if (st.aps[cand[c]].slot_free(t)) avail += beta(ue, cand[c]);
        const double v = avail - detail::sensed_on_pilot(st, beta, master, t, ue);
        if (v > best_val) {
            best_val = v;
            best = t;
        }
    }
    return best;
}

inline int pick_pilot(const AssocState& st, const Eigen::MatrixXd& beta, int ue,
                      int master, const AssocParams& p, std::mt19937_64& rng) {
    return p.pilot_metric == PilotMetric::Basic
               ? pick_pilot_basic(st, beta, ue, master, rng)
               : pick_pilot_ssb(st, beta, ue, master, p);
}

namespace detail {

inline std::vector<int> processing_order(int k, const AssocParams& p,
                                         std::mt19937_64& rng) {
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    if (p.ue_order == UeOrder::SeededRandom) std::shuffle(order.begin(), order.end(), rng);
    return order;
}

// Keep the master plus the strongest other members, release the slots of
// everyone squeezed out. `members` may contain the master; order is free.
inline void finalize_cluster(AssocState& st, const Eigen::MatrixXd& beta, int ue,
                             int master, std::vector<int> members,
                             const AssocParams& p) {
    members.erase(std::remove(members.begin(), members.end(), master), members.end());
    std::sort(members.begin(), members.end(), [&](int a, int b) {
        if (beta(ue, a) != beta(ue, b)) return beta(ue, a) > beta(ue, b);
        return a < b;
    });
    const size_t keep = std::min<size_t>(p.m_max - 1, members.size());
    for (size_t j = keep; j < members.size(); ++j)
        release_slot(st, members[j], st.ues[ue].pilot, ue);
    members.resize(keep);
    members.push_back(master);
    std::sort(members.begin(), members.end());

    UEAssoc& u = st.ues[ue];
    u.cluster = std::move(members);
    u.master = master;
    u.connected = true;
}

// Send service invitations on the UE's pilot to every candidate from
// `first` on, skipping APs already in `skip`; accepting APs reserve the
// slot. Returns the acceptors.
inline std::vector<int> invite(AssocState& st, int ue, size_t first,
                               const std::vector<int>& cand,
                               const std::vector<int>& skip) {
    std::vector<int> acceptors;
    const int t = st.ues[ue].pilot;
    for (size_t j = first; j < cand.size(); ++j) {
        const int l = cand[j];
        if (std::find(skip.begin(), skip.end(), l) != skip.end()) continue;
        if (st.aps[l].slot_free(t)) {
            reserve_slot(st, l, t, ue);
            acceptors.push_back(l);
        }
    }
    return acceptors;
}

}  // namespace detail

// Network-wide sign-on. Every AP provisionally shortlists the UEs it hears
// best (at most one per pilot slot); each UE then walks its candidate list
// strongest-first until an AP that shortlisted it (and still has a free
// slot) takes it as anchor. The anchor assigns a pilot, invites the UE's
// weaker candidates to co-serve on that pilot, and the cluster keeps the
// anchor plus the strongest acceptors.
inline std::pair<AssocState, AssocEvents> initial_access(const Eigen::MatrixXd& beta,
                                                         const AssocParams& p,
                                                         std::mt19937_64& rng) {
    const int K = static_cast<int>(beta.rows());
    const int L = static_cast<int>(beta.cols());
    if (p.tau_p <= 0 || p.m_max <= 0)
        throw std::invalid_argument("assoc: tau_p and m_max must be positive");

    AssocState st;
    st.ues.resize(K);
    st.aps.assign(L, APAssoc(p.tau_p));
    AssocEvents ev(K);

    // Provisional shortlists: the tau_p best-heard noticeable UEs per AP.
    std::vector<std::vector<uint8_t>> shortlisted(L, std::vector<uint8_t>(K, 0));
    for (int l = 0; l < L; ++l) {
        std::vector<int> heard;
        for (int k = 0; k < K; ++k)
            if (beta(k, l) > p.gain_threshold) heard.push_back(k);
        std::sort(heard.begin(), heard.end(), [&](int a, int b) {
            if (beta(a, l) != beta(b, l)) return beta(a, l) > beta(b, l);
            return a < b;
        });
        const size_t n = std::min<size_t>(p.tau_p, heard.size());
        for (size_t j = 0; j < n; ++j) shortlisted[l][heard[j]] = 1;
    }

    for (int k : detail::processing_order(K, p, rng)) {
        UEAssoc& u = st.ues[k];
        u.candidates = candidate_set(beta, k, p.gain_threshold);

        size_t i = 0;
        while (i < u.candidates.size()) {
            const int l = u.candidates[i];
            if (shortlisted[l][k] && st.aps[l].has_free_slot()) break;
            ++i;
        }
        if (i == u.candidates.size()) {
            ev.denial[k] = 1;
            continue;
        }

        const int master = u.candidates[i];
        u.pilot = pick_pilot(st, beta, k, master, p, rng);
        detail::reserve_slot(st, master, u.pilot, k);
        std::vector<int> members =
            detail::invite(st, k, i + 1, u.candidates, {master});
        members.push_back(master);
        detail::finalize_cluster(st, beta, k, master, std::move(members), p);
    }
    return {std::move(st), std::move(ev)};
}

// One maintenance round against fresh gains. Three passes over the UEs:
//  (1) prune dead links, promote a surviving member when the anchor died,
//      collect UEs with nothing left (plus still-unconnected ones);
//  (2) collected UEs redo the sign-on walk, where an AP now rejects only
//      when all its pilot slots are taken;
//  (3) everyone else looks for the strongest AP with a free slot, hands the
//      anchor role over when that AP clears the margin, changes pilot only
//      if forced (new anchor outside the cluster and the pilot taken
//      there), and tops the cluster back up with invitations.
inline AssocEvents update(AssocState& st, const Eigen::MatrixXd& beta,
                          const AssocParams& p, std::mt19937_64& rng) {
    const int K = st.n_ues();
    AssocEvents ev(K);
    const double margin = p.ho_margin();

    std::vector<int> old_master(K), old_pilot(K);
    for (int k = 0; k < K; ++k) {
        old_master[k] = st.ues[k].master;
        old_pilot[k] = st.ues[k].pilot;
    }

    const std::vector<int> order = detail::processing_order(K, p, rng);
    std::vector<uint8_t> lost(K, 0);
    std::vector<int> retry;

    // Pass 1: prune and refresh.
    for (int k : order) {
        UEAssoc& u = st.ues[k];
        u.candidates = candidate_set(beta, k, p.gain_threshold);
        if (!u.connected) {
            lost[k] = 1;
            retry.push_back(k);
            continue;
        }
        std::vector<int> alive;
        for (int l : u.cluster) {
            if (beta(k, l) > 0.0) {
                alive.push_back(l);
            } else {
                detail::release_slot(st, l, u.pilot, k);
            }
        }
        u.cluster = std::move(alive);
        if (u.cluster.empty()) {
            u.connected = false;
            u.master = -1;
            u.pilot = -1;
            lost[k] = 1;
            retry.push_back(k);
            continue;
        }
        if (std::find(u.cluster.begin(), u.cluster.end(), u.master) ==
            u.cluster.end()) {
            // Anchor gone dark; strongest survivor takes over, pilot stays.
            int best = u.cluster[0];
            for (int l : u.cluster)
                if (beta(k, l) > beta(k, best)) best = l;
            u.master = best;
            ev.master_handover[k] = 1;
        }
    }

    // Pass 2: sign back on where capacity allows.
    for (int k : retry) {
        UEAssoc& u = st.ues[k];
        size_t i = 0;
        while (i < u.candidates.size() && st.aps[u.candidates[i]].full()) ++i;
        if (i == u.candidates.size()) {
            ev.denial[k] = 1;
            continue;
        }
        const int master = u.candidates[i];
        u.pilot = pick_pilot(st, beta, k, master, p, rng);
        detail::reserve_slot(st, master, u.pilot, k);
        std::vector<int> members =
            detail::invite(st, k, i + 1, u.candidates, {master});
        members.push_back(master);
        detail::finalize_cluster(st, beta, k, master, std::move(members), p);

        ev.reconnect[k] = 1;
        if (old_master[k] >= 0 && old_master[k] != u.master) ev.master_handover[k] = 1;
        if (old_pilot[k] >= 0 && old_pilot[k] != u.pilot) ev.pilot_change[k] = 1;
    }

    // Pass 3: maintenance of the still-connected.
    for (int k : order) {
        if (lost[k]) continue;
        UEAssoc& u = st.ues[k];

        // Serving APs already hold this UE's slot, so they stay valid anchor
        // targets even when every slot is taken; an AP that is not yet
        // serving the UE must have capacity before it can be approached.
        auto serves_ue = [&](int l) {
            return std::find(u.cluster.begin(), u.cluster.end(), l) !=
                   u.cluster.end();
        };
        size_t i = 0;
        while (i < u.candidates.size() && !serves_ue(u.candidates[i]) &&
               st.aps[u.candidates[i]].full())
            ++i;
        if (i == u.candidates.size()) continue;  // nothing reachable has capacity

        const int best = u.candidates[i];
        if (beta(k, best) > beta(k, u.master) * margin) {
            ev.master_handover[k] = 1;
            const bool in_cluster = serves_ue(best);
            if (!in_cluster && !st.aps[best].slot_free(u.pilot)) {
                // Forced pilot change: tear the old cluster down and rebuild
                // around the new anchor, exactly like a fresh sign-on.
                for (int l : u.cluster) detail::release_slot(st, l, u.pilot, k);
                u.cluster.clear();
                u.master = best;
                u.pilot = pick_pilot(st, beta, k, best, p, rng);
                detail::reserve_slot(st, best, u.pilot, k);
                ev.pilot_change[k] = 1;
                std::vector<int> members =
                    detail::invite(st, k, i + 1, u.candidates, {best});
                members.push_back(best);
                detail::finalize_cluster(st, beta, k, best, std::move(members), p);
                continue;
            }
            u.master = best;
        }
        // Top up on the existing pilot; current members keep their slots.
        std::vector<int> acceptors = detail::invite(st, k, i, u.candidates, u.cluster);
        std::vector<int> members = u.cluster;
        members.insert(members.end(), acceptors.begin(), acceptors.end());
        detail::finalize_cluster(st, beta, k, u.master, std::move(members), p);
    }
    return ev;
}

// Single-anchor baseline: each UE is served by exactly one AP with all the
// downlink power. Same capacity rule (one UE per pilot slot), same handover
// margin; the pilot follows the UE to the new server when that server still
// has it free, otherwise it is re-picked by interference.
inline AssocEvents udn_step(AssocState& st, const Eigen::MatrixXd& beta,
                            const AssocParams& p, std::mt19937_64& rng) {
    const int K = st.n_ues();
    AssocEvents ev(K);
    const double margin = p.ho_margin();

    for (int k : detail::processing_order(K, p, rng)) {
        UEAssoc& u = st.ues[k];
        u.candidates = candidate_set(beta, k, p.gain_threshold);
        const int old_master = u.master;
        const int old_pilot = u.pilot;

        const bool had_service = u.connected && beta(k, u.master) > 0.0;
        if (!had_service && u.connected) {
            detail::release_slot(st, u.master, u.pilot, k);
            u.connected = false;
            u.master = -1;
            u.pilot = -1;
            u.cluster.clear();
        }

        size_t i = 0;
        while (i < u.candidates.size() && st.aps[u.candidates[i]].full()) ++i;
        const bool found = i < u.candidates.size();

        if (!u.connected) {
            if (!found) {
                ev.denial[k] = 1;
                continue;
            }
            const int best = u.candidates[i];
            if (old_pilot >= 0 && st.aps[best].slot_free(old_pilot)) {
                u.pilot = old_pilot;
            } else {
                u.pilot = pick_pilot_basic(st, beta, k, best, rng);
                if (old_pilot >= 0) ev.pilot_change[k] = 1;
            }
            detail::reserve_slot(st, best, u.pilot, k);
            u.master = best;
            u.cluster = {best};
            u.connected = true;
            ev.reconnect[k] = 1;
            if (old_master >= 0 && old_master != best) ev.master_handover[k] = 1;
            continue;
        }

        if (!found) continue;
        const int best = u.candidates[i];
        if (beta(k, best) > beta(k, u.master) * margin) {
            detail::release_slot(st, u.master, u.pilot, k);
            ev.master_handover[k] = 1;
            if (!st.aps[best].slot_free(u.pilot)) {
                u.pilot = pick_pilot_basic(st, beta, k, best, rng);
                ev.pilot_change[k] = 1;
            }
            detail::reserve_slot(st, best, u.pilot, k);
            u.master = best;
            u.cluster = {best};
        }
    }
    return ev;
}

// Event flags derived by comparing two states, for policies that rebuild the
// whole association from scratch each interval.
inline AssocEvents diff_events(const AssocState& prev, const AssocState& next) {
    const int K = next.n_ues();
    AssocEvents ev(K);
    for (int k = 0; k < K; ++k) {
        const UEAssoc& a = prev.ues[k];
        const UEAssoc& b = next.ues[k];
        if (!b.connected) {
            ev.denial[k] = 1;
            continue;
        }
        if (!a.connected) {
            ev.reconnect[k] = 1;
            continue;
        }
        if (a.master != b.master) ev.master_handover[k] = 1;
        if (a.pilot != b.pilot) ev.pilot_change[k] = 1;
    }
    return ev;
}

// Structural soundness of a state against the gains it was built from.
// Returns human-readable violations; an empty vector means all good.
inline std::vector<std::string> check_invariants(const AssocState& st,
                                                 const Eigen::MatrixXd& beta,
                                                 const AssocParams& p) {
    std::vector<std::string> bad;
    const int K = st.n_ues();
    const int L = st.n_aps();
    auto complain = [&](const std::string& s) { bad.push_back(s); };

    for (int l = 0; l < L; ++l) {
        const APAssoc& ap = st.aps[l];
        if (static_cast<int>(ap.slots.size()) != p.tau_p)
            complain("ap " + std::to_string(l) + ": wrong slot table size");
        if (ap.load() > p.tau_p)
            complain("ap " + std::to_string(l) + ": serves more UEs than pilots");
        for (int t = 0; t < static_cast<int>(ap.slots.size()); ++t) {
            const int k = ap.slots[t];
            if (k < 0) continue;
            if (k >= K) {
                complain("ap " + std::to_string(l) + ": slot holds unknown UE");
                continue;
            }
            const UEAssoc& u = st.ues[k];
            if (!u.connected || u.pilot != t ||
                std::find(u.cluster.begin(), u.cluster.end(), l) == u.cluster.end())
                complain("ap " + std::to_string(l) + " slot " + std::to_string(t) +
                         ": held by UE " + std::to_string(k) +
                         " that does not serve through it");
        }
    }

    for (int k = 0; k < K; ++k) {
        const UEAssoc& u = st.ues[k];
        const std::string tag = "ue " + std::to_string(k) + ": ";
        if (!u.connected) {
            if (u.master != -1 || u.pilot != -1 || !u.cluster.empty())
                complain(tag + "disconnected but retains assignment");
            for (int l = 0; l < L; ++l)
                for (int s : st.aps[l].slots)
                    if (s == k) complain(tag + "disconnected but holds a slot");
            continue;
        }
        if (u.cluster.empty()) complain(tag + "connected with empty cluster");
        if (static_cast<int>(u.cluster.size()) > p.m_max)
            complain(tag + "cluster exceeds the size cap");
        if (std::find(u.cluster.begin(), u.cluster.end(), u.master) == u.cluster.end())
            complain(tag + "anchor not in own cluster");
        if (u.pilot < 0 || u.pilot >= p.tau_p) complain(tag + "pilot out of range");
        for (int l : u.cluster) {
            if (beta(k, l) <= 0.0) complain(tag + "cluster member with zero gain");
            if (st.aps[l].slots[u.pilot] != k)
                complain(tag + "cluster member does not hold the pilot slot");
        }
        for (int i = k + 1; i < K; ++i) {
            const UEAssoc& v = st.ues[i];
            if (!v.connected || v.pilot != u.pilot) continue;
            for (int l : u.cluster)
                if (std::find(v.cluster.begin(), v.cluster.end(), l) != v.cluster.end())
                    complain(tag + "shares pilot and AP " + std::to_string(l) +
                             " with ue " + std::to_string(i));
        }
    }
    return bad;
}

}  // namespace cfmm
