// SPDX-License-Identifier: Apache-2.0
//
// Downlink physical layer. Each AP learns channels from shared uplink
// pilots by least squares, precodes with maximum ratio or regularised
// zero forcing, and splits its power budget across the UEs it serves in
// proportion to a power of the large-scale gain. Ergodic rates use the
// hardening bound: only the average aligned gain is treated as known at
// the receiver, everything else counts as interference. The Monte-Carlo
// average runs over fixed-size block chunks folded in index order, so
// results are bit-identical for any worker thread count.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "cfmm/assoc.hpp"
#include "cfmm/channel.hpp"
#include "cfmm/rng.hpp"

namespace cfmm {

struct PhyParams {
    int tau_c = 200;               // symbols per coherence block
    int tau_p = 10;                // symbols spent on pilots
    double sigma2 = 1e-11;         // receiver noise power [W]
    double p_max = 1.0;            // per-AP downlink budget [W]
    double p_ul = 0.1;             // per-UE uplink pilot power [W]
    double power_exponent = 0.5;   // gain weighting for the downlink split
    int n_blocks = 500;            // Monte-Carlo coherence blocks
    int n_threads = 1;

    double prelog() const { return double(tau_c - tau_p) / double(tau_c); }
};

inline void validate_phy(const PhyParams& p) {
    if (p.tau_p < 1) throw std::invalid_argument("tau_p must be at least 1");
    if (p.tau_c <= p.tau_p)
        throw std::invalid_argument("coherence block must exceed the pilot phase");
    if (!(p.sigma2 > 0.0)) throw std::invalid_argument("noise power must be positive");
    if (!(p.p_max > 0.0)) throw std::invalid_argument("downlink budget must be positive");
    if (!(p.p_ul > 0.0)) throw std::invalid_argument("pilot power must be positive");
    if (p.n_blocks < 1) throw std::invalid_argument("need at least one block");
}

// Circularly symmetric complex Gaussian vector with total per-entry power
// sigma2 (i.e. sigma2/2 in each quadrature).
inline Eigen::VectorXcd cn_vector(std::mt19937_64& rng, int n, double sigma2) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    if (sigma2 <= 0.0) return v;
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * sigma2));
    for (int i = 0; i < n; ++i) {
        const double re = g(rng);
        const double im = g(rng);
        v(i) = std::complex<double>(re, im);
    }
    return v;
}

// Least-squares estimate of one UE's channel from a shared pilot: the true
// channel, plus every co-pilot UE weighted by the power ratio, plus thermal
// noise scaled down by the processing gain. `noise` is raw CN(0, sigma2 I).
inline Eigen::VectorXcd ls_estimate(
    const Eigen::VectorXcd& h_own, double p_own,
    const std::vector<std::pair<double, Eigen::VectorXcd>>& copilot,
    int tau_p, const Eigen::VectorXcd& noise) {
    if (!(p_own > 0.0)) throw std::invalid_argument("pilot power must be positive");
    if (tau_p < 1) throw std::invalid_argument("pilot length must be at least 1");
    Eigen::VectorXcd hhat = h_own;
    for (const auto& [p_i, h_i] : copilot) hhat += std::sqrt(p_i / p_own) * h_i;
    hhat += noise / std::sqrt(double(tau_p) * p_own);
    return hhat;
}

// Unit-norm precoder aligned so the estimated effective gain hhat^H w is
// real and non-negative; a zero direction stays zero.
inline Eigen::VectorXcd align_and_normalize(Eigen::VectorXcd w,
                                            const Eigen::VectorXcd& hhat) {
    const double nw = w.norm();
    if (nw == 0.0) return w;
    w /= nw;
    const std::complex<double> z = hhat.dot(w);  // hhat^H w
    const double az = std::abs(z);
    if (az > 0.0) w *= std::conj(z) / az;
    return w;
}

inline Eigen::VectorXcd mr_direction(const Eigen::VectorXcd& hhat) {
    return align_and_normalize(hhat, hhat);
}

// Regularised zero-forcing directions for every UE an AP serves, from that
// AP's own estimates only. The Gram matrix is Hermitian positive definite
// for sigma2 > 0, so a Cholesky solve is exact and cheap.
inline std::vector<Eigen::VectorXcd> rzf_directions(
    const std::vector<Eigen::VectorXcd>& hhat_served,
    const std::vector<double>& p_served, double sigma2) {
    if (hhat_served.size() != p_served.size())
        throw std::invalid_argument("one pilot power per served estimate");
    std::vector<Eigen::VectorXcd> out(hhat_served.size());
    if (hhat_served.empty()) return out;
    const int n = int(hhat_served[0].size());
    Eigen::MatrixXcd gram = sigma2 * Eigen::MatrixXcd::Identity(n, n);
    for (std::size_t j = 0; j < hhat_served.size(); ++j)
        gram.noalias() += p_served[j] * hhat_served[j] * hhat_served[j].adjoint();
    const Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("regularised Gram matrix is not positive definite");
    for (std::size_t j = 0; j < hhat_served.size(); ++j) {
        const Eigen::VectorXcd w = llt.solve(p_served[j] * hhat_served[j]);
        out[j] = align_and_normalize(w, hhat_served[j]);
    }
    return out;
}

// Split each AP's budget over the UEs it serves, weighting by beta^nu.
// Every transmitting AP spends exactly p_max; idle APs spend nothing.
inline Eigen::MatrixXd allocate_power(const Eigen::MatrixXd& beta,
                                      const AssocState& st, double p_max,
                                      double nu) {
    Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(beta.rows(), beta.cols());
    for (int l = 0; l < st.n_aps(); ++l) {
        double wsum = 0.0;
        std::vector<std::pair<int, double>> served;
        for (int ue : st.aps[l].slots) {
            if (ue < 0) continue;
            const double w = std::pow(beta(ue, l), nu);
            served.emplace_back(ue, w);
            wsum += w;
        }
        if (!(wsum > 0.0)) continue;
        for (const auto& [ue, w] : served) rho(ue, l) = p_max * w / wsum;
    }
    return rho;
}

// Running sums for the hardening-bound SINR. For each receiver k we keep
// the aligned-gain sums over its own serving set, and for every source i a
// square sum over i's serving set of the real parts of the cross products
// of the effective gains. Merging two accumulators adds the sums, so a
// chunk fold in fixed order reproduces the sequential result exactly.
struct SEAccumulator {
    std::vector<Eigen::VectorXd> a_sum;               // [k], size |M_k|
    std::vector<std::vector<Eigen::MatrixXd>> b_sum;  // [k][i], |M_i| x |M_i|
    long n_blocks = 0;

    static SEAccumulator zero(const AssocState& st) {
        const int K = st.n_ues();
        SEAccumulator acc;
        acc.a_sum.resize(K);
        acc.b_sum.assign(K, std::vector<Eigen::MatrixXd>(K));
        for (int k = 0; k < K; ++k) {
            const int mk = int(st.ues[k].cluster.size());
            acc.a_sum[k] = Eigen::VectorXd::Zero(mk);
            for (int i = 0; i < K; ++i) {
                const int mi = int(st.ues[i].cluster.size());
                acc.b_sum[k][i] = Eigen::MatrixXd::Zero(mi, mi);
            }
        }
        return acc;
    }

    void merge(const SEAccumulator& o) {
        if (a_sum.size() != o.a_sum.size())
            throw std::logic_error("accumulator shape mismatch");
        for (std::size_t k = 0; k < a_sum.size(); ++k) {
            a_sum[k] += o.a_sum[k];
            for (std::size_t i = 0; i < b_sum[k].size(); ++i)
                b_sum[k][i] += o.b_sum[k][i];
        }
        n_blocks += o.n_blocks;
    }
};

// Everything one Monte-Carlo evaluation needs. Paths are per (UE, AP) for
// the current positions; the association state fixes serving sets, pilots
// and slot tables for the whole interval.
struct SEJob {
    const std::vector<std::vector<PathSet>>* paths = nullptr;  // [k][l]
    const std::vector<APSite>* aps = nullptr;
    const AssocState* assoc = nullptr;
    const Eigen::MatrixXd* beta = nullptr;
    PhyParams phy;
    uint64_t seed = 0;
    uint64_t drop = 0;
    uint64_t interval = 0;
};

inline void validate_job(const SEJob& job) {
    if (!job.paths || !job.aps || !job.assoc || !job.beta)
        throw std::invalid_argument("evaluation job is missing inputs");
    validate_phy(job.phy);
    const int K = job.assoc->n_ues();
    const int L = job.assoc->n_aps();
    if (int(job.paths->size()) != K)
        throw std::invalid_argument("path table must have one row per UE");
    for (const auto& row : *job.paths)
        if (int(row.size()) != L)
            throw std::invalid_argument("path table must have one column per AP");
    if (int(job.aps->size()) != L)
        throw std::invalid_argument("need one site description per AP");
    if (job.beta->rows() != K || job.beta->cols() != L)
        throw std::invalid_argument("gain matrix shape mismatch");
    for (const auto& ap : job.assoc->aps)
        if (int(ap.slots.size()) != job.phy.tau_p)
            throw std::invalid_argument("slot tables disagree with tau_p");
}

// One coherence block: realize channels, estimate, precode with both
// schemes, and add this block's contribution to both accumulators.
inline void accumulate_block(const SEJob& job, uint64_t block,
                             SEAccumulator& mr_acc, SEAccumulator& rzf_acc) {
    const AssocState& st = *job.assoc;
    const int K = st.n_ues();
    const int L = st.n_aps();
    const PhyParams& phy = job.phy;

    // Serving layout from the slot tables, in slot order.
    std::vector<std::vector<int>> served(L);        // [l] -> UE ids
    std::vector<std::vector<int>> served_pilot(L);  // [l] -> pilot of each
    std::vector<std::vector<int>> idx_at(L);        // [l][ue] -> serving index
    for (int l = 0; l < L; ++l) {
        idx_at[l].assign(K, -1);
        for (int t = 0; t < phy.tau_p; ++t) {
            const int ue = st.aps[l].slots[t];
            if (ue < 0) continue;
            idx_at[l][ue] = int(served[l].size());
            served[l].push_back(ue);
            served_pilot[l].push_back(t);
        }
    }

    // Small-scale realizations for every connected UE at every active AP.
    std::vector<std::vector<Eigen::VectorXcd>> h(K, std::vector<Eigen::VectorXcd>(L));
    for (int l = 0; l < L; ++l) {
        if (served[l].empty()) continue;
        for (int k = 0; k < K; ++k) {
            if (!st.ues[k].connected) continue;
            auto rng = derive_stream(job.seed, StreamTag::ChannelPhase, job.drop,
                                     job.interval, block, uint64_t(k), uint64_t(l));
            h[k][l] = realize_channel((*job.paths)[k][l], (*job.aps)[l].n_antennas, rng);
        }
    }

    // Per-AP estimates and precoding directions, both schemes at once.
    std::vector<std::vector<Eigen::VectorXcd>> w_mr(L), w_rzf(L);
    for (int l = 0; l < L; ++l) {
        if (served[l].empty()) continue;
        const int n_ant = (*job.aps)[l].n_antennas;
        std::vector<Eigen::VectorXcd> hhat(served[l].size());
        std::vector<double> powers(served[l].size(), phy.p_ul);
        for (std::size_t j = 0; j < served[l].size(); ++j) {
            const int k = served[l][j];
            const int t = served_pilot[l][j];
            std::vector<std::pair<double, Eigen::VectorXcd>> copilot;
            for (int i = 0; i < K; ++i)
                if (i != k && st.ues[i].connected && st.ues[i].pilot == t)
                    copilot.emplace_back(phy.p_ul, h[i][l]);
            auto rng = derive_stream(job.seed, StreamTag::EstimationNoise, job.drop,
                                     job.interval, block, uint64_t(l), uint64_t(t));
            const Eigen::VectorXcd noise = cn_vector(rng, n_ant, phy.sigma2);
            hhat[j] = ls_estimate(h[k][l], phy.p_ul, copilot, phy.tau_p, noise);
        }
        w_rzf[l] = rzf_directions(hhat, powers, phy.sigma2);
        w_mr[l].resize(hhat.size());
        for (std::size_t j = 0; j < hhat.size(); ++j) w_mr[l][j] = mr_direction(hhat[j]);
    }

    // Effective gains g_l = h_kl^H w_il over each source's serving set.
    auto add_scheme = [&](const std::vector<std::vector<Eigen::VectorXcd>>& w,
                          SEAccumulator& acc) {
        for (int k = 0; k < K; ++k) {
            if (!st.ues[k].connected) continue;
            for (int i = 0; i < K; ++i) {
                if (!st.ues[i].connected) continue;
                const auto& mi = st.ues[i].cluster;
                Eigen::VectorXcd g(mi.size());
                for (std::size_t j = 0; j < mi.size(); ++j) {
                    const int l = mi[j];
                    g(j) = h[k][l].dot(w[l][idx_at[l][i]]);
                }
                acc.b_sum[k][i].noalias() += (g * g.adjoint()).real();
                if (i == k) acc.a_sum[k] += g.real();
            }
        }
    };
    add_scheme(w_mr, mr_acc);
    add_scheme(w_rzf, rzf_acc);
    ++mr_acc.n_blocks;
    ++rzf_acc.n_blocks;
}

namespace detail {
inline constexpr int kBlockChunk = 32;
}

// Monte-Carlo sums for both schemes. Blocks are grouped into chunks whose
// count depends on n_blocks alone; workers grab chunks from a shared
// counter, and the partial sums are folded in chunk-index order, so any
// thread count gives the same bits as a sequential run.
inline std::pair<SEAccumulator, SEAccumulator> accumulate_blocks(const SEJob& job) {
    const AssocState& st = *job.assoc;
    const int nb = job.phy.n_blocks;
    const int n_chunks = (nb + detail::kBlockChunk - 1) / detail::kBlockChunk;

    std::vector<std::pair<SEAccumulator, SEAccumulator>> parts(n_chunks);
    for (auto& p : parts) {
        p.first = SEAccumulator::zero(st);
        p.second = SEAccumulator::zero(st);
    }

    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        try {
            int c;
            while ((c = next.fetch_add(1)) < n_chunks) {
                const uint64_t b0 = uint64_t(c) * detail::kBlockChunk;
                const uint64_t b1 = std::min<uint64_t>(b0 + detail::kBlockChunk, nb);
                for (uint64_t b = b0; b < b1; ++b)
                    accumulate_block(job, b, parts[c].first, parts[c].second);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };

    const int n_threads = std::max(1, std::min(job.phy.n_threads, n_chunks));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    SEAccumulator mr = SEAccumulator::zero(st);
    SEAccumulator rzf = SEAccumulator::zero(st);
    for (int c = 0; c < n_chunks; ++c) {
        mr.merge(parts[c].first);
        rzf.merge(parts[c].second);
    }
    return {std::move(mr), std::move(rzf)};
}

struct SinrReport {
    Eigen::VectorXd sinr;
    long clamped = 0;  // denominators below the noise floor (should never happen)
};

// Contract the Monte-Carlo sums with the power split. The interference
// term dominates the coherent one by construction (mean of |x|^2 versus
// the squared mean of Re x), so the denominator stays at or above the
// noise power up to rounding; anything below it is flagged.
inline SinrReport assemble_sinr(const SEAccumulator& acc, const AssocState& st,
                                const Eigen::MatrixXd& rho, double sigma2) {
    if (acc.n_blocks <= 0) throw std::invalid_argument("no blocks accumulated");
    const int K = st.n_ues();
    const double n = double(acc.n_blocks);

    std::vector<Eigen::VectorXd> mu(K);
    for (int i = 0; i < K; ++i) {
        if (!st.ues[i].connected) continue;
        const auto& mi = st.ues[i].cluster;
        mu[i] = Eigen::VectorXd::Zero(mi.size());
        for (std::size_t j = 0; j < mi.size(); ++j) mu[i](j) = std::sqrt(rho(i, mi[j]));
    }

    SinrReport rep;
    rep.sinr = Eigen::VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
        if (!st.ues[k].connected) continue;
        const double coherent = mu[k].dot(acc.a_sum[k]) / n;
        const double num = coherent * coherent;
        double interference = 0.0;
        for (int i = 0; i < K; ++i) {
            if (!st.ues[i].connected) continue;
            interference += mu[i].dot(acc.b_sum[k][i] * mu[i]) / n;
        }
        double den = interference - num + sigma2;
        if (!(den >= sigma2 * (1.0 - 1e-6))) {
            ++rep.clamped;
            if (!(den > sigma2 * 1e-12)) den = sigma2 * 1e-12;
        }
        rep.sinr(k) = num / den;
    }
    return rep;
}

struct SEResult {
    Eigen::VectorXd sinr_mr, se_mr, sinr_rzf, se_rzf;
    long clamp_anomalies = 0;
};

// Full evaluation of one interval: Monte-Carlo sums, power split, SINR and
// spectral efficiency for both precoding schemes on shared realizations.
inline SEResult evaluate_se(const SEJob& job) {
    validate_job(job);
    auto [mr, rzf] = accumulate_blocks(job);
    const Eigen::MatrixXd rho = allocate_power(*job.beta, *job.assoc, job.phy.p_max,
                                               job.phy.power_exponent);
    const SinrReport rep_mr = assemble_sinr(mr, *job.assoc, rho, job.phy.sigma2);
    const SinrReport rep_rzf = assemble_sinr(rzf, *job.assoc, rho, job.phy.sigma2);

    const double prelog = job.phy.prelog();
    const int K = job.assoc->n_ues();
    SEResult res;
    res.sinr_mr = rep_mr.sinr;
    res.sinr_rzf = rep_rzf.sinr;
    res.se_mr = Eigen::VectorXd::Zero(K);
    res.se_rzf = Eigen::VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
        if (!job.assoc->ues[k].connected) continue;
        res.se_mr(k) = prelog * std::log2(1.0 + res.sinr_mr(k));
        res.se_rzf(k) = prelog * std::log2(1.0 + res.sinr_rzf(k));
    }
    res.clamp_anomalies = rep_mr.clamped + rep_rzf.clamped;
    return res;
}

}  // namespace cfmm
