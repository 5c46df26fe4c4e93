#include <gtest/gtest.h>

#include <filesystem>

#include "latentlab/codebook.hpp"
#include "support.hpp"

using namespace latentlab;
using testing_support::TempDir;

namespace {

VaeArchitecture small_arch() {
    VaeArchitecture a;
    a.image = {16, 16, 3};
    a.encoder_hidden = {32};
    a.latent_dim = 4;
    a.decoder_hidden = {32};
    return a;
}

}  // namespace

TEST(SharedEpsilon, SeededAndSized) {
    EXPECT_EQ(sample_shared_epsilon(16, 5), sample_shared_epsilon(16, 5));
    EXPECT_NE(sample_shared_epsilon(16, 5), sample_shared_epsilon(16, 6));
    EXPECT_EQ(sample_shared_epsilon(16, 0).size(), 16u);
    EXPECT_THROW(sample_shared_epsilon(0, 0), ArgumentError);
}

TEST(SharedEpsilon, StandardNormalMoments) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 625; ++seed) {
        for (double e : sample_shared_epsilon(16, seed)) {
            sum += e;
            sq += e * e;
            ++n;
        }
    }
    ASSERT_EQ(n, 10000u);
    const double mean = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(Build, EntriesMatchEncoderAndEpsilon) {
    const auto model = VaeModel<float>::initialized(small_arch(), 4);
    const auto corpus = generate_corpus({5, 4, 3}, small_arch().image, 2);
    const auto eps = sample_shared_epsilon(4, 11);
    const auto cb = build_codebook(model, corpus, eps);
    ASSERT_EQ(cb.size(), corpus.size());
    EXPECT_EQ(cb.latent_dim, 4u);
    EXPECT_EQ(cb.epsilon_shared, eps);
    EXPECT_EQ(cb.model_checksum, model_checksum(model));
    EXPECT_EQ(cb.corpus_checksum, corpus.checksum());
    for (std::size_t i = 0; i < cb.size(); ++i) {
        const auto& e = cb.encodings[i];
        EXPECT_EQ(e.item_id, i);
        EXPECT_EQ(e.tag, corpus.items[i].category);
        EXPECT_FALSE(e.cluster_id.has_value());
        // Single-item and batched float encodes may differ in summation order.
        const auto post = model.encode(corpus.items[i].image);
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_NEAR(e.mu[j], static_cast<double>(post.mu[j]), 1e-5);
            EXPECT_NEAR(e.sigma[j], std::exp(0.5 * static_cast<double>(post.logvar[j])), 1e-5);
            EXPECT_GT(e.sigma[j], 0.0);
            EXPECT_EQ(e.z_fixed[j], e.mu[j] + e.sigma[j] * eps[j]);
        }
    }
}

TEST(Build, DifferentEpsilonChangesOnlyZ) {
    const auto model = VaeModel<float>::initialized(small_arch(), 4);
    const auto corpus = generate_corpus({3, 3, 3}, small_arch().image, 2);
    const auto a = build_codebook(model, corpus, sample_shared_epsilon(4, 1));
    const auto b = build_codebook(model, corpus, sample_shared_epsilon(4, 2));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.encodings[i].mu, b.encodings[i].mu);
        EXPECT_EQ(a.encodings[i].sigma, b.encodings[i].sigma);
        EXPECT_NE(a.encodings[i].z_fixed, b.encodings[i].z_fixed);
    }
    EXPECT_EQ(build_codebook(model, corpus, sample_shared_epsilon(4, 1)), a);  // deterministic
}

TEST(Build, SigmaFloor) {
    auto model = VaeModel<float>::initialized(small_arch(), 4);
    model.logvar_head().weights.setZero();
    model.logvar_head().bias.setConstant(-60.0f);  // sigma = e^-30, below the floor
    const auto corpus = generate_corpus({1, 1, 1}, small_arch().image, 2);
    const auto cb = build_codebook(model, corpus, sample_shared_epsilon(4, 1));
    for (const auto& e : cb.encodings)
        for (double s : e.sigma) EXPECT_EQ(s, kSigmaFloor);
}

TEST(Build, Errors) {
    const auto model = VaeModel<float>::initialized(small_arch(), 4);
    const auto corpus = generate_corpus({1, 1, 1}, small_arch().image, 2);
    EXPECT_THROW(build_codebook(model, corpus, sample_shared_epsilon(5, 1)), DimensionError);
    const auto wrong = generate_corpus({1, 1, 1}, {8, 8, 3}, 2);
    EXPECT_THROW(build_codebook(model, wrong, sample_shared_epsilon(4, 1)), DimensionError);
    EXPECT_THROW(build_codebook(model, Corpus{small_arch().image, 0, {}}, sample_shared_epsilon(4, 1)),
                 EmptyCorpusError);
}

TEST(File, RoundTripIsLossless) {
    TempDir dir("codebook");
    auto cb = testing_support::synthetic_codebook(10, 16, 3);
    std::vector<int> clusters(cb.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i] = static_cast<int>(i % 3);
    cb = with_clusters(cb, clusters);
    cb.model_checksum = 0x1234;
    cb.corpus_checksum = 0xabcdef;
    save_codebook(cb, dir / "cb.llcb");
    EXPECT_EQ(load_codebook(dir / "cb.llcb"), cb);

    auto unclustered = testing_support::synthetic_codebook(2, 3, 4);
    save_codebook(unclustered, dir / "u.llcb");
    EXPECT_EQ(load_codebook(dir / "u.llcb"), unclustered);
}

TEST(File, SizeIsCompactBinary) {
    const auto cb = testing_support::synthetic_codebook(1000, 16, 3);
    const auto bytes = serialize_codebook(cb);
    const double nominal = 3000.0 * (3 * 16 * 8 + 1);
    EXPECT_LE(static_cast<double>(bytes.size()), 2.0 * nominal);
    EXPECT_GE(static_cast<double>(bytes.size()), nominal / 2.0);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "LLCB1");
}

TEST(File, CorruptRecordNamesIndex) {
    const auto cb = testing_support::synthetic_codebook(2, 3, 4);
    auto bytes = serialize_codebook(cb);
    const std::size_t header = 5 + 4 + 8 + 3 * 8 + 8 + 8;
    const std::size_t record = 8 + 1 + 4 + 3 * 3 * 8;
    // Last z_fixed coordinate of record 4.
    bytes[header + 4 * record + record - 1] ^= 0x40;
    try {
        parse_codebook(bytes);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("record 4"), std::string::npos) << e.what();
    }
    auto bad_tag = serialize_codebook(cb);
    bad_tag[header + 2 * record + 8] = 7;
    EXPECT_THROW(parse_codebook(bad_tag), ParseError);
    auto truncated = serialize_codebook(cb);
    truncated.resize(truncated.size() - 3);
    EXPECT_THROW(parse_codebook(truncated), ParseError);
}

TEST(Staleness, DimensionMismatchIsError) {
    const auto model = VaeModel<float>::initialized(small_arch(), 4);
    const auto cb = testing_support::synthetic_codebook(2, 16, 4);
    EXPECT_THROW(check_codebook_against_model(cb, model), StaleCodebookError);
}

TEST(Staleness, ChecksumMismatchWarns) {
    const auto model = VaeModel<float>::initialized(small_arch(), 4);
    const auto corpus = generate_corpus({1, 1, 1}, small_arch().image, 2);
    const auto cb = build_codebook(model, corpus, sample_shared_epsilon(4, 1));
    EXPECT_TRUE(check_codebook_against_model(cb, model));
    const auto other = VaeModel<float>::initialized(small_arch(), 5);
    testing::internal::CaptureStderr();
    EXPECT_FALSE(check_codebook_against_model(cb, other));
    EXPECT_NE(testing::internal::GetCapturedStderr().find("warning"), std::string::npos);
}

TEST(Annotation, WithClustersProducesNewVersion) {
    const auto cb = testing_support::synthetic_codebook(2, 3, 4);
    EXPECT_FALSE(cb.clustered());
    const std::vector<int> ids{0, 1, 2, 0, 1, 2};
    const auto annotated = with_clusters(cb, ids);
    EXPECT_TRUE(annotated.clustered());
    EXPECT_FALSE(cb.clustered());
    EXPECT_EQ(annotated.encodings[4].cluster_id, 1);
    EXPECT_THROW(with_clusters(cb, std::vector<int>{0, 1}), DimensionError);
}
