#pragma once

// K-means over latent encodings, cluster-to-category naming and the
// per-category one-vs-rest metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentlab/binary_io.hpp"
#include "latentlab/codebook.hpp"
#include "latentlab/error.hpp"
#include "latentlab/synthdata.hpp"

namespace latentlab {

enum class FeatureKind : std::uint8_t { mu = 0, z_fixed = 1 };

inline std::string_view to_string(FeatureKind f) { return f == FeatureKind::mu ? "mu" : "z_fixed"; }

inline FeatureKind parse_feature_kind(std::string_view s) {
    if (s == "mu") return FeatureKind::mu;
    if (s == "z_fixed") return FeatureKind::z_fixed;
    throw ArgumentError("unknown feature kind \"" + std::string(s) + "\" (expected mu or z_fixed)");
}

inline std::vector<Latent> codebook_features(const Codebook& cb, FeatureKind kind) {
    std::vector<Latent> out;
    out.reserve(cb.size());
    for (const auto& e : cb.encodings) out.push_back(kind == FeatureKind::mu ? e.mu : e.z_fixed);
    return out;
}

struct KMeansConfig {
    std::size_t k = 3;
    std::uint64_t seed = 0;
    int max_iters = 300;
    double tol = 1e-6;
    /// Independent k-means++ starts; the lowest final inertia wins.
    int restarts = 10;
};

struct ClusterModel {
    std::vector<Latent> centers;
    FeatureKind feature_kind = FeatureKind::mu;
    std::vector<int> assignments;
    double inertia = 0.0;
    std::vector<double> inertia_trace;  // after each assignment step of the winning run
    std::vector<Category> cluster_to_class;
    std::uint64_t seed = 0;
    int iterations = 0;

    [[nodiscard]] std::size_t k() const { return centers.size(); }
    [[nodiscard]] std::size_t latent_dim() const { return centers.empty() ? 0 : centers.front().size(); }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Nearest center by Euclidean distance; ties go to the lower cluster id.
inline int assign_cluster(std::span<const double> z_bar, std::span<const Latent> centers) {
    if (centers.empty()) throw StateError("assign_cluster: no centers");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (centers[c].size() != z_bar.size())
            throw DimensionError("assign_cluster: vector has length " + std::to_string(z_bar.size()) +
                                 ", centers have " + std::to_string(centers[c].size()));
        const double d = squared_distance(z_bar, centers[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

inline int assign_cluster(std::span<const double> z_bar, const ClusterModel& model) {
    return assign_cluster(z_bar, model.centers);
}

namespace detail {

struct LloydRun {
    std::vector<Latent> centers;
    std::vector<int> assignments;
    std::vector<double> inertia_trace;
    double inertia = 0.0;
    int iterations = 0;
};

inline std::vector<Latent> kmeanspp_init(std::span<const Latent> points, std::size_t k, std::mt19937_64& rng) {
    std::vector<Latent> centers;
    std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
    centers.push_back(points[first(rng)]);
    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centers[0]);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    while (centers.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double target = u01(rng) * total;
            double acc = 0.0;
            chosen = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        centers.push_back(points[chosen]);
        for (std::size_t i = 0; i < points.size(); ++i)
            d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
    return centers;
}

inline double assign_all(std::span<const Latent> points, std::span<const Latent> centers, std::vector<int>& out) {
    double inertia = 0.0;
    out.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        out[i] = assign_cluster(points[i], centers);
        inertia += squared_distance(points[i], centers[static_cast<std::size_t>(out[i])]);
    }
    return inertia;
}

inline LloydRun lloyd(std::span<const Latent> points, std::size_t k, std::mt19937_64& rng, int max_iters,
                      double tol) {
    const std::size_t d = points.front().size();
    LloydRun run;
    run.centers = kmeanspp_init(points, k, rng);
    for (int it = 0; it < max_iters; ++it) {
        run.inertia = assign_all(points, run.centers, run.assignments);
        run.inertia_trace.push_back(run.inertia);
        run.iterations = it + 1;

        std::vector<Latent> next(k, Latent(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto c = static_cast<std::size_t>(run.assignments[i]);
            ++counts[c];
            for (std::size_t j = 0; j < d; ++j) next[c][j] += points[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Empty cluster: move it onto the point farthest from its own center.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    const double di =
                        squared_distance(points[i], run.centers[static_cast<std::size_t>(run.assignments[i])]);
                    if (di > far_d) {
                        far_d = di;
                        far = i;
                    }
                }
                next[c] = points[far];
            } else {
                for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(next[c], run.centers[c])));
        run.centers = std::move(next);
        if (shift < tol) break;
    }
    // Final assignment against the final centers.
    run.inertia = assign_all(points, run.centers, run.assignments);
    if (run.inertia_trace.empty() || run.inertia != run.inertia_trace.back()) run.inertia_trace.push_back(run.inertia);
    return run;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeds, repeated `restarts` times from one
/// seeded stream; stops a run when no center moves by `tol` or more.
inline ClusterModel kmeans_fit(std::span<const Latent> vectors, const KMeansConfig& config) {
    if (config.k < 1) throw ArgumentError("kmeans: k must be at least 1");
    if (vectors.size() < config.k)
        throw ArgumentError("kmeans: " + std::to_string(vectors.size()) + " points cannot form " +
                            std::to_string(config.k) + " clusters");
    if (config.restarts < 1) throw ArgumentError("kmeans: restarts must be at least 1");
    const std::size_t d = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != d) throw DimensionError("kmeans: vectors have differing lengths");
        for (double x : v)
            if (!std::isfinite(x)) throw NumericalError("kmeans: non-finite coordinate");
    }

    std::mt19937_64 rng(config.seed);
    detail::LloydRun best;
    bool have = false;
    for (int r = 0; r < config.restarts; ++r) {
        auto run = detail::lloyd(vectors, config.k, rng, config.max_iters, config.tol);
        if (!have || run.inertia < best.inertia) {
            best = std::move(run);
            have = true;
        }
    }
    ClusterModel model;
    model.centers = std::move(best.centers);
    model.assignments = std::move(best.assignments);
    model.inertia = best.inertia;
    model.inertia_trace = std::move(best.inertia_trace);
    model.iterations = best.iterations;
    model.seed = config.seed;
    return model;
}

struct ClassMapping {
    std::vector<Category> cluster_to_class;
    std::size_t agreement = 0;
    bool majority_vote = false;
};

/// Names clusters after categories. With k equal to the category count, the
/// bijection with the most agreeing items wins (lexicographically first on
/// ties); otherwise each cluster takes its majority category.
inline ClassMapping map_clusters_to_classes(std::span<const int> assignments, std::span<const Category> tags,
                                            std::size_t k) {
    if (assignments.size() != tags.size())
        throw DimensionError("cluster mapping: " + std::to_string(assignments.size()) + " assignments but " +
                             std::to_string(tags.size()) + " tags");
    std::vector<std::array<std::size_t, kCategoryCount>> table(k);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const auto c = assignments[i];
        if (c < 0 || static_cast<std::size_t>(c) >= k)
            throw ArgumentError("cluster mapping: assignment " + std::to_string(c) + " outside [0, k)");
        ++table[static_cast<std::size_t>(c)][index_of(tags[i])];
    }
    ClassMapping out;
    if (k == kCategoryCount) {
        std::array<std::size_t, kCategoryCount> perm{0, 1, 2};
        bool first = true;
        do {
            std::size_t agree = 0;
            for (std::size_t c = 0; c < k; ++c) agree += table[c][perm[c]];
            if (first || agree > out.agreement) {
                out.agreement = agree;
                out.cluster_to_class.clear();
                for (auto p : perm) out.cluster_to_class.push_back(static_cast<Category>(p));
                first = false;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return out;
    }
    warn("cluster mapping: k = " + std::to_string(k) + " differs from the " + std::to_string(kCategoryCount) +
         " categories; falling back to per-cluster majority vote");
    out.majority_vote = true;
    for (std::size_t c = 0; c < k; ++c) {
        const auto it = std::max_element(table[c].begin(), table[c].end());
        out.cluster_to_class.push_back(static_cast<Category>(it - table[c].begin()));
        out.agreement += *it;
    }
    return out;
}

struct BinaryMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ClassMetrics {
    std::array<BinaryMetrics, kCategoryCount> per_class{};

    [[nodiscard]] const BinaryMetrics& of(Category c) const { return per_class[index_of(c)]; }
    [[nodiscard]] double macro_f1() const {
        double s = 0.0;
        for (const auto& m : per_class) s += m.f1;
        return s / static_cast<double>(kCategoryCount);
    }
};

/// One-vs-rest metrics per category, predicting each item's category as the
/// name of its cluster.
inline ClassMetrics cluster_metrics(std::span<const int> assignments, std::span<const Category> cluster_to_class,
                                    std::span<const Category> tags) {
    if (assignments.size() != tags.size())
        throw DimensionError("cluster metrics: assignment and tag counts differ");
    ClassMetrics out;
    const auto total = static_cast<double>(tags.size());
    for (auto cat : kCategories) {
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < tags.size(); ++i) {
            const auto c = static_cast<std::size_t>(assignments[i]);
            if (c >= cluster_to_class.size()) throw ArgumentError("cluster metrics: mapping is not total");
            const bool predicted = cluster_to_class[c] == cat;
            const bool actual = tags[i] == cat;
            if (predicted && actual) ++tp;
            else if (predicted) ++fp;
            else if (actual) ++fn;
            else ++tn;
        }
        auto& m = out.per_class[index_of(cat)];
        m.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
        m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    }
    return out;
}

inline std::string format_metrics_table(const ClassMetrics& metrics) {
    std::string out = "Class\tAccuracy\tPrecision\tRecall\tF1\n";
    char buf[128];
    for (auto cat : kCategories) {
        const auto& m = metrics.of(cat);
        std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\t%.6f\n", std::string(to_string(cat)).c_str(), m.accuracy,
                      m.precision, m.recall, m.f1);
        out += buf;
    }
    return out;
}

/// Fits on the chosen codebook feature, names the clusters from the tags and
/// returns the model; annotate the codebook with `with_clusters`.
inline ClusterModel cluster_codebook(const Codebook& cb, FeatureKind kind, const KMeansConfig& config) {
    auto model = kmeans_fit(codebook_features(cb, kind), config);
    model.feature_kind = kind;
    std::vector<Category> tags;
    for (const auto& e : cb.encodings) tags.push_back(e.tag);
    model.cluster_to_class = map_clusters_to_classes(model.assignments, tags, model.k()).cluster_to_class;
    return model;
}

// ---------------------------------------------------------------------------
// Centers file (little-endian):
//   "LLKM1" | u32 k | u32 d_z | u8 feature_kind | f64 centers[k * d_z] |
//   u8 cluster_to_class[k] | u64 seed | f64 inertia

inline constexpr std::string_view kCentersMagic = "LLKM1";

inline Bytes serialize_centers(const ClusterModel& m) {
    Bytes out;
    put_magic(out, kCentersMagic);
    put_u32(out, static_cast<std::uint32_t>(m.k()));
    put_u32(out, static_cast<std::uint32_t>(m.latent_dim()));
    put_u8(out, static_cast<std::uint8_t>(m.feature_kind));
    for (const auto& c : m.centers)
        for (double v : c) put_f64(out, v);
    if (m.cluster_to_class.size() != m.k()) throw StateError("centers: cluster-to-class mapping missing");
    for (auto c : m.cluster_to_class) put_u8(out, static_cast<std::uint8_t>(c));
    put_u64(out, m.seed);
    put_f64(out, m.inertia);
    return out;
}

/// Assignments are not stored; they live in the codebook's cluster ids.
inline ClusterModel parse_centers(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kCentersMagic, "centers");
    ClusterModel m;
    const auto k = in.u32("centers header");
    const auto d = in.u32("centers header");
    if (k == 0 || d == 0) throw ParseError("centers header: k and d_z must be positive");
    const auto kind = in.u8("centers header");
    if (kind > 1) throw ParseError("centers header: unknown feature kind " + std::to_string(kind));
    m.feature_kind = static_cast<FeatureKind>(kind);
    m.centers.assign(k, Latent(d));
    for (std::uint32_t c = 0; c < k; ++c)
        for (auto& v : m.centers[c]) v = in.f64("centers: center " + std::to_string(c));
    for (std::uint32_t c = 0; c < k; ++c) m.cluster_to_class.push_back(category_from_tag(in.u8("centers mapping")));
    m.seed = in.u64("centers trailer");
    m.inertia = in.f64("centers trailer");
    if (in.remaining() != 0) throw ParseError("centers: trailing bytes");
    return m;
}

inline void save_centers(const ClusterModel& m, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_centers(m));
}

inline ClusterModel load_centers(const std::filesystem::path& path) { return parse_centers(read_file(path)); }

}  // namespace latentlab
