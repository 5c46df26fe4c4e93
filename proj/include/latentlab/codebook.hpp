#pragma once

// The per-item encoding store: mu, sigma and the fixed-epsilon z of every
// corpus item, plus the one shared epsilon they were computed with.
//
// File layout (little-endian):
//   "LLCB1" | u32 d_z | u64 count | f64 epsilon[d_z] | u64 model checksum |
//   u64 corpus checksum | count x record
//   record: u64 item_id | u8 tag | i32 cluster_id (-1 = none) |
//           f64 mu[d_z] | f64 sigma[d_z] | f64 z_fixed[d_z]

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latentlab/binary_io.hpp"
#include "latentlab/error.hpp"
#include "latentlab/synthdata.hpp"
#include "latentlab/vae.hpp"

namespace latentlab {

using Latent = std::vector<double>;

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr std::string_view kCodebookMagic = "LLCB1";

struct ItemEncoding {
    std::uint64_t item_id = 0;
    Latent mu;
    Latent sigma;
    Latent z_fixed;
    Category tag = Category::bag;
    std::optional<int> cluster_id;

    friend bool operator==(const ItemEncoding&, const ItemEncoding&) = default;
};

struct Codebook {
    std::vector<ItemEncoding> encodings;
    Latent epsilon_shared;
    std::size_t latent_dim = 0;
    std::uint64_t model_checksum = 0;
    std::uint64_t corpus_checksum = 0;

    [[nodiscard]] std::size_t size() const { return encodings.size(); }
    [[nodiscard]] bool empty() const { return encodings.empty(); }
    [[nodiscard]] bool clustered() const {
        return !encodings.empty() &&
               std::all_of(encodings.begin(), encodings.end(), [](const auto& e) { return e.cluster_id.has_value(); });
    }

    friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// d_z standard-normal draws from a stream seeded with `seed`.
inline Latent sample_shared_epsilon(std::size_t latent_dim, std::uint64_t seed) {
    if (latent_dim < 1) throw ArgumentError("latent dimension must be at least 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent eps(latent_dim);
    for (auto& e : eps) e = normal(rng);
    return eps;
}

/// mu + sigma (.) epsilon, the fixed-epsilon z of one item.
inline Latent fixed_epsilon_z(std::span<const double> mu, std::span<const double> sigma,
                              std::span<const double> epsilon) {
    if (mu.size() != sigma.size() || mu.size() != epsilon.size())
        throw DimensionError("fixed-epsilon z: lengths " + std::to_string(mu.size()) + ", " +
                             std::to_string(sigma.size()) + ", " + std::to_string(epsilon.size()) + " differ");
    Latent z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + sigma[i] * epsilon[i];
    return z;
}

/// Encodes every corpus item in order. Item ids are corpus indices.
template <class T>
Codebook build_codebook(const VaeModel<T>& model, const Corpus& corpus, std::span<const double> epsilon_shared) {
    if (corpus.empty()) throw EmptyCorpusError("build_codebook: corpus is empty");
    if (corpus.dims != model.image_dims())
        throw DimensionError("build_codebook: model expects " + model.image_dims().str() + " images, corpus has " +
                             corpus.dims.str());
    if (epsilon_shared.size() != model.latent_dim())
        throw DimensionError("build_codebook: epsilon has length " + std::to_string(epsilon_shared.size()) +
                             ", model latent dimension is " + std::to_string(model.latent_dim()));

    Codebook cb;
    cb.latent_dim = model.latent_dim();
    cb.epsilon_shared.assign(epsilon_shared.begin(), epsilon_shared.end());
    cb.model_checksum = model_checksum(model);
    cb.corpus_checksum = corpus.checksum();
    cb.encodings.reserve(corpus.size());

    constexpr std::size_t kChunk = 256;
    const auto dz = static_cast<Eigen::Index>(model.latent_dim());
    for (std::size_t start = 0; start < corpus.size(); start += kChunk) {
        const std::size_t count = std::min(kChunk, corpus.size() - start);
        nn::Matrix<T> batch(static_cast<Eigen::Index>(model.image_dims().size()), static_cast<Eigen::Index>(count));
        for (std::size_t j = 0; j < count; ++j)
            batch.col(static_cast<Eigen::Index>(j)) = model.image_column(corpus.items[start + j].image);
        nn::Matrix<T> mu, logvar;
        model.encode_batch(batch, mu, logvar);
        for (std::size_t j = 0; j < count; ++j) {
            ItemEncoding e;
            e.item_id = start + j;
            e.tag = corpus.items[start + j].category;
            e.mu.resize(cb.latent_dim);
            e.sigma.resize(cb.latent_dim);
            for (Eigen::Index i = 0; i < dz; ++i) {
                const auto col = static_cast<Eigen::Index>(j);
                e.mu[static_cast<std::size_t>(i)] = static_cast<double>(mu(i, col));
                e.sigma[static_cast<std::size_t>(i)] =
                    std::max(std::exp(0.5 * static_cast<double>(logvar(i, col))), kSigmaFloor);
            }
            e.z_fixed = fixed_epsilon_z(e.mu, e.sigma, cb.epsilon_shared);
            cb.encodings.push_back(std::move(e));
        }
    }
    return cb;
}

/// Copy of `cb` with cluster ids set from `assignments` (one per entry).
inline Codebook with_clusters(const Codebook& cb, std::span<const int> assignments) {
    if (assignments.size() != cb.size())
        throw DimensionError("cluster annotation: " + std::to_string(assignments.size()) + " assignments for " +
                             std::to_string(cb.size()) + " entries");
    Codebook out = cb;
    for (std::size_t i = 0; i < out.size(); ++i) out.encodings[i].cluster_id = assignments[i];
    return out;
}

inline Bytes serialize_codebook(const Codebook& cb) {
    Bytes out;
    const std::size_t d = cb.latent_dim;
    out.reserve(64 + cb.size() * (13 + 24 * d));
    put_magic(out, kCodebookMagic);
    put_u32(out, static_cast<std::uint32_t>(d));
    put_u64(out, cb.size());
    for (double e : cb.epsilon_shared) put_f64(out, e);
    put_u64(out, cb.model_checksum);
    put_u64(out, cb.corpus_checksum);
    for (const auto& e : cb.encodings) {
        if (e.mu.size() != d || e.sigma.size() != d || e.z_fixed.size() != d)
            throw DimensionError("codebook entry " + std::to_string(e.item_id) + " has wrong vector lengths");
        put_u64(out, e.item_id);
        put_u8(out, static_cast<std::uint8_t>(e.tag));
        put_i32(out, e.cluster_id.value_or(-1));
        for (double v : e.mu) put_f64(out, v);
        for (double v : e.sigma) put_f64(out, v);
        for (double v : e.z_fixed) put_f64(out, v);
    }
    return out;
}

/// Parses and verifies a codebook; every z_fixed must be exactly
/// recomputable from (mu, sigma, epsilon).
inline Codebook parse_codebook(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kCodebookMagic, "codebook");
    Codebook cb;
    cb.latent_dim = in.u32("codebook header");
    if (cb.latent_dim == 0) throw ParseError("codebook header: latent dimension is zero");
    const auto count = in.u64("codebook header");
    cb.epsilon_shared.resize(cb.latent_dim);
    for (auto& e : cb.epsilon_shared) e = in.f64("codebook header");
    cb.model_checksum = in.u64("codebook header");
    cb.corpus_checksum = in.u64("codebook header");
    const std::size_t record_size = 13 + 24 * cb.latent_dim;
    if (count > in.remaining() / record_size + 1)
        throw ParseError("codebook header: declares " + std::to_string(count) + " records but only " +
                         std::to_string(in.remaining()) + " bytes follow");
    cb.encodings.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        const std::string what = "codebook record " + std::to_string(r);
        ItemEncoding e;
        e.item_id = in.u64(what);
        const auto tag = in.u8(what);
        if (tag >= kCategoryCount) throw ParseError(what + ": category tag " + std::to_string(tag) + " out of range");
        e.tag = static_cast<Category>(tag);
        const auto cluster = in.i32(what);
        if (cluster < -1) throw ParseError(what + ": cluster id " + std::to_string(cluster) + " invalid");
        if (cluster >= 0) e.cluster_id = cluster;
        e.mu.resize(cb.latent_dim);
        e.sigma.resize(cb.latent_dim);
        e.z_fixed.resize(cb.latent_dim);
        for (auto& v : e.mu) v = in.f64(what);
        for (auto& v : e.sigma) {
            v = in.f64(what);
            if (!(v > 0.0)) throw ParseError(what + ": non-positive sigma");
        }
        for (auto& v : e.z_fixed) v = in.f64(what);
        if (fixed_epsilon_z(e.mu, e.sigma, cb.epsilon_shared) != e.z_fixed)
            throw ParseError(what + ": z_fixed is not mu + sigma * epsilon");
        cb.encodings.push_back(std::move(e));
    }
    if (in.remaining() != 0) throw ParseError("codebook: " + std::to_string(in.remaining()) + " trailing bytes");
    return cb;
}

inline void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_codebook(cb));
}

inline Codebook load_codebook(const std::filesystem::path& path) { return parse_codebook(read_file(path)); }

/// Throws StaleCodebookError when the latent dimension disagrees with the
/// model; returns false (and warns) when only the model checksum differs.
template <class T>
bool check_codebook_against_model(const Codebook& cb, const VaeModel<T>& model) {
    if (cb.latent_dim != model.latent_dim())
        throw StaleCodebookError("codebook latent dimension " + std::to_string(cb.latent_dim) +
                                 " does not match model latent dimension " + std::to_string(model.latent_dim()));
    if (cb.model_checksum != model_checksum(model)) {
        warn("codebook was built with a different model (checksum mismatch); rebuild it");
        return false;
    }
    return true;
}

}  // namespace latentlab
