#pragma once

// Similar-item retrieval over a codebook, by posterior log-likelihood or by
// Euclidean distance between fixed-epsilon encodings, and the mAP harness.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentlab/codebook.hpp"
#include "latentlab/error.hpp"

namespace latentlab {

enum class RetrievalMethod : std::uint8_t { log_likelihood = 0, fixed_epsilon = 1 };

inline constexpr std::array<RetrievalMethod, 2> kRetrievalMethods{RetrievalMethod::log_likelihood,
                                                                   RetrievalMethod::fixed_epsilon};

inline std::string_view to_string(RetrievalMethod m) {
    return m == RetrievalMethod::log_likelihood ? "log_likelihood" : "fixed_epsilon";
}

inline std::optional<RetrievalMethod> parse_method(std::string_view s) {
    for (auto m : kRetrievalMethods)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

/// log N(z | mu, diag(sigma^2)) = sum_i -(z_i - mu_i)^2 / (2 sigma_i^2) - ln(sqrt(2 pi) sigma_i)
inline double loglik_score(std::span<const double> z_bar, std::span<const double> mu, std::span<const double> sigma) {
    if (z_bar.size() != mu.size() || z_bar.size() != sigma.size())
        throw DimensionError("loglik_score: lengths " + std::to_string(z_bar.size()) + ", " +
                             std::to_string(mu.size()) + ", " + std::to_string(sigma.size()) + " differ");
    static const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double s = 0.0;
    for (std::size_t i = 0; i < z_bar.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw DomainError("loglik_score: sigma[" + std::to_string(i) + "] is not positive");
        const double d = z_bar[i] - mu[i];
        s += -(d * d) / (2.0 * sigma[i] * sigma[i]) - (kLogSqrt2Pi + std::log(sigma[i]));
    }
    return s;
}

inline double fixed_eps_distance(std::span<const double> z_bar, std::span<const double> z_fixed) {
    if (z_bar.size() != z_fixed.size())
        throw DimensionError("fixed_eps_distance: lengths " + std::to_string(z_bar.size()) + " and " +
                             std::to_string(z_fixed.size()) + " differ");
    double s = 0.0;
    for (std::size_t i = 0; i < z_bar.size(); ++i) {
        const double d = z_bar[i] - z_fixed[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Log-likelihood: higher is better. Distance: lower is better.
inline double score_entry(RetrievalMethod method, std::span<const double> z_bar, const ItemEncoding& e) {
    return method == RetrievalMethod::log_likelihood ? loglik_score(z_bar, e.mu, e.sigma)
                                                     : fixed_eps_distance(z_bar, e.z_fixed);
}

inline bool score_better(RetrievalMethod method, double a, double b) {
    return method == RetrievalMethod::log_likelihood ? a > b : a < b;
}

struct RetrievalQuery {
    Latent z_bar;
    RetrievalMethod method = RetrievalMethod::fixed_epsilon;
    std::optional<int> cluster;  // nullopt = full codebook
    std::size_t k = 10;
    std::vector<std::uint64_t> exclude_ids;
};

struct RankedEntry {
    std::uint64_t item_id = 0;
    double score = 0.0;
    Category tag = Category::bag;
    std::optional<int> cluster_id;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedResult {
    std::vector<RankedEntry> entries;
    RetrievalMethod method = RetrievalMethod::fixed_epsilon;
    std::optional<int> cluster;

    friend bool operator==(const RankedResult&, const RankedResult&) = default;
};

/// Exact best-first scan over the scoped entries, skipping excluded ids.
/// Ties go to the lower item id. An empty scope gives an empty result.
inline RankedResult retrieve_top_k(const RetrievalQuery& query, const Codebook& codebook) {
    if (query.k < 1) throw ArgumentError("retrieve_top_k: k must be at least 1");
    if (query.z_bar.size() != codebook.latent_dim)
        throw DimensionError("retrieve_top_k: query has length " + std::to_string(query.z_bar.size()) +
                             ", codebook latent dimension is " + std::to_string(codebook.latent_dim));
    if (query.cluster && !codebook.clustered())
        throw StateError("retrieve_top_k: cluster scope requested but the codebook has no cluster annotations");

    std::vector<std::uint64_t> excluded = query.exclude_ids;
    std::sort(excluded.begin(), excluded.end());

    std::vector<RankedEntry> scored;
    scored.reserve(query.cluster ? codebook.size() / 2 : codebook.size());
    for (const auto& e : codebook.encodings) {
        if (query.cluster && e.cluster_id != query.cluster) continue;
        if (std::binary_search(excluded.begin(), excluded.end(), e.item_id)) continue;
        scored.push_back({e.item_id, score_entry(query.method, query.z_bar, e), e.tag, e.cluster_id});
    }
    auto before = [m = query.method](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return score_better(m, a.score, b.score);
        return a.item_id < b.item_id;
    };
    const std::size_t keep = std::min(query.k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), before);
    scored.resize(keep);
    return {std::move(scored), query.method, query.cluster};
}

/// AP@k: sum of precision@r over the matching ranks r <= k, divided by
/// min(relevant_total, k). Lists shorter than k count the missing ranks as misses.
inline double average_precision(std::span<const Category> ranked_tags, Category query_tag, std::size_t relevant_total,
                                std::size_t k) {
    const std::size_t denom = std::min(relevant_total, k);
    if (denom == 0) return 0.0;
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t n = std::min(k, ranked_tags.size());
    for (std::size_t r = 0; r < n; ++r) {
        if (ranked_tags[r] == query_tag) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(denom);
}

inline double average_precision(std::span<const Category> ranked_tags, Category query_tag,
                                std::size_t relevant_total) {
    return average_precision(ranked_tags, query_tag, relevant_total, ranked_tags.size());
}

enum class ScopeMode : std::uint8_t { full = 0, cluster = 1 };

inline std::string_view to_string(ScopeMode s) { return s == ScopeMode::full ? "full" : "cluster"; }

/// Assigns a query vector to a cluster; supplied by the clustering module.
using ClusterAssigner = std::function<int(std::span<const double>)>;

struct MapRow {
    ScopeMode scope = ScopeMode::full;
    RetrievalMethod method = RetrievalMethod::fixed_epsilon;
    std::vector<double> values;  // one per cutoff

    friend bool operator==(const MapRow&, const MapRow&) = default;
};

struct MapTable {
    std::vector<std::size_t> cutoffs;
    std::vector<MapRow> rows;
    std::size_t queries = 0;

    friend bool operator==(const MapTable&, const MapTable&) = default;
};

/// Per category, a seeded sample of `queries_per_category` items (clamped to
/// the category size). Categories sample in a fixed order from one stream.
inline std::vector<std::size_t> sample_queries(const Codebook& codebook, std::size_t queries_per_category,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> out;
    for (auto cat : kCategories) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < codebook.size(); ++i)
            if (codebook.encodings[i].tag == cat) members.push_back(i);
        std::size_t take = queries_per_category;
        if (take > members.size()) {
            warn("evaluate_map: " + std::to_string(queries_per_category) + " queries requested for " +
                 std::string(to_string(cat)) + " but only " + std::to_string(members.size()) +
                 " items exist; clamping");
            take = members.size();
        }
        // Partial Fisher-Yates.
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
            std::swap(members[i], members[pick(rng)]);
        }
        out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

/// mAP for one (scope, method) configuration. Each sampled item queries with
/// its own z_fixed, excluding itself; relevance is a matching category tag and
/// the relevant total is the number of other items with that tag in the whole
/// codebook. In cluster scope the query is first assigned with `assign`.
inline MapRow evaluate_map(const Codebook& codebook, std::span<const std::size_t> query_indices,
                           std::span<const std::size_t> cutoffs, RetrievalMethod method, ScopeMode scope,
                           const ClusterAssigner& assign = {}) {
    if (cutoffs.empty()) throw ArgumentError("evaluate_map: no cutoffs");
    if (scope == ScopeMode::cluster) {
        if (!codebook.clustered()) throw StateError("evaluate_map: cluster scope needs a clustered codebook");
        if (!assign) throw ArgumentError("evaluate_map: cluster scope needs a cluster assigner");
    }
    std::array<std::size_t, kCategoryCount> tag_counts{};
    for (const auto& e : codebook.encodings) ++tag_counts[index_of(e.tag)];
    const std::size_t max_k = *std::max_element(cutoffs.begin(), cutoffs.end());

    MapRow row{scope, method, std::vector<double>(cutoffs.size(), 0.0)};
    std::vector<Category> tags;
    for (std::size_t qi : query_indices) {
        const auto& item = codebook.encodings.at(qi);
        RetrievalQuery q{item.z_fixed, method, std::nullopt, max_k, {item.item_id}};
        if (scope == ScopeMode::cluster) q.cluster = assign(item.z_fixed);
        const auto result = retrieve_top_k(q, codebook);
        tags.clear();
        for (const auto& r : result.entries) tags.push_back(r.tag);
        const std::size_t relevant = tag_counts[index_of(item.tag)] - 1;
        for (std::size_t c = 0; c < cutoffs.size(); ++c)
            row.values[c] += average_precision(tags, item.tag, relevant, cutoffs[c]);
    }
    if (!query_indices.empty())
        for (auto& v : row.values) v /= static_cast<double>(query_indices.size());
    return row;
}

/// All four (scope, method) rows over one shared query sample. Cluster rows
/// are skipped when `assign` is empty.
inline MapTable evaluate_map_table(const Codebook& codebook, std::size_t queries_per_category,
                                   std::vector<std::size_t> cutoffs, std::uint64_t seed,
                                   const ClusterAssigner& assign = {}) {
    const auto queries = sample_queries(codebook, queries_per_category, seed);
    MapTable table{std::move(cutoffs), {}, queries.size()};
    for (auto scope : {ScopeMode::full, ScopeMode::cluster}) {
        if (scope == ScopeMode::cluster && !assign) continue;
        for (auto method : kRetrievalMethods)
            table.rows.push_back(evaluate_map(codebook, queries, table.cutoffs, method, scope, assign));
    }
    return table;
}

/// Tab-separated: a header of cutoffs, then one "scope/method" row each.
inline std::string format_map_table(const MapTable& table) {
    std::string out = "config";
    for (auto c : table.cutoffs) out += "\ttop" + std::to_string(c);
    out += "\n";
    char buf[32];
    for (const auto& row : table.rows) {
        out += std::string(to_string(row.scope)) + "/" + std::string(to_string(row.method));
        for (double v : row.values) {
            std::snprintf(buf, sizeof buf, "\t%.6f", v);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace latentlab
