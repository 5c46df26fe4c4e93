#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "latentlab/codebook.hpp"
#include "latentlab/synthdata.hpp"

namespace testing_support {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("latentlab_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Codebook with random mu/sigma around per-category means, so categories
/// are separated along the first three axes.
inline latentlab::Codebook synthetic_codebook(std::size_t per_category, std::size_t d, std::uint64_t seed,
                                              double separation = 6.0) {
    using namespace latentlab;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> sig(0.2, 1.5);
    Codebook cb;
    cb.latent_dim = d;
    cb.epsilon_shared = sample_shared_epsilon(d, seed + 1);
    std::uint64_t id = 0;
    for (auto cat : kCategories) {
        for (std::size_t i = 0; i < per_category; ++i) {
            ItemEncoding e;
            e.item_id = id++;
            e.tag = cat;
            e.mu.resize(d);
            e.sigma.resize(d);
            for (std::size_t j = 0; j < d; ++j) {
                e.mu[j] = normal(rng) + (j == index_of(cat) ? separation : 0.0);
                e.sigma[j] = sig(rng);
            }
            e.z_fixed = fixed_epsilon_z(e.mu, e.sigma, cb.epsilon_shared);
            cb.encodings.push_back(std::move(e));
        }
    }
    return cb;
}

}  // namespace testing_support
