#pragma once

// Cross-category recommendation by latent arithmetic: shift the query by the
// difference between its own cluster center and another cluster's center,
// then retrieve the nearest stored item inside that other cluster.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latentlab/clustering.hpp"
#include "latentlab/codebook.hpp"
#include "latentlab/error.hpp"
#include "latentlab/retrieval.hpp"

namespace latentlab {

/// center_to - center_from. A query sitting on center_from lands exactly on
/// center_to once this is added.
inline Latent center_diff(const ClusterModel& model, int from, int to) {
    const auto k = static_cast<int>(model.k());
    if (from < 0 || from >= k || to < 0 || to >= k)
        throw ArgumentError("center_diff: cluster ids " + std::to_string(from) + ", " + std::to_string(to) +
                            " outside [0, " + std::to_string(k) + ")");
    if (from == to) throw ArgumentError("center_diff: source and target cluster are both " + std::to_string(from));
    const auto& a = model.centers[static_cast<std::size_t>(from)];
    const auto& b = model.centers[static_cast<std::size_t>(to)];
    Latent d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
    return d;
}

struct RecommendationEntry {
    int target_cluster = 0;
    Latent diff;
    Latent translated;
    std::vector<RankedEntry> items;  // best first, all inside target_cluster
};

struct Recommendation {
    int source_cluster = 0;
    RetrievalMethod method = RetrievalMethod::fixed_epsilon;
    std::vector<RecommendationEntry> entries;
    std::vector<std::string> warnings;
};

/// One entry per non-source cluster, each holding the `count` best stored
/// items of that cluster for the translated query. Clusters without members
/// are skipped with a warning.
inline Recommendation recommend_cross(std::span<const double> z_bar, const Codebook& codebook,
                                      const ClusterModel& clusters, RetrievalMethod method, std::size_t count = 1) {
    if (!codebook.clustered()) throw StateError("recommend: codebook has no cluster annotations");
    if (z_bar.size() != codebook.latent_dim)
        throw DimensionError("recommend: query has length " + std::to_string(z_bar.size()) +
                             ", codebook latent dimension is " + std::to_string(codebook.latent_dim));
    Recommendation rec;
    rec.method = method;
    rec.source_cluster = assign_cluster(z_bar, clusters);
    for (int j = 0; j < static_cast<int>(clusters.k()); ++j) {
        if (j == rec.source_cluster) continue;
        RecommendationEntry entry;
        entry.target_cluster = j;
        entry.diff = center_diff(clusters, rec.source_cluster, j);
        entry.translated.resize(z_bar.size());
        for (std::size_t i = 0; i < z_bar.size(); ++i) entry.translated[i] = z_bar[i] + entry.diff[i];
        RetrievalQuery q{entry.translated, method, j, count, {}};
        entry.items = retrieve_top_k(q, codebook).entries;
        if (entry.items.empty()) {
            rec.warnings.push_back("cluster " + std::to_string(j) + " has no members; skipped");
            warn(rec.warnings.back());
            continue;
        }
        rec.entries.push_back(std::move(entry));
    }
    return rec;
}

}  // namespace latentlab
