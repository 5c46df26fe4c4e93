#pragma once

// The operator pipeline: gen-data -> train -> encode -> cluster -> eval.
// Each command writes its artifact and a run manifest (JSON) next to it, and
// removes whatever it wrote if it fails part way.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "latentlab/clustering.hpp"
#include "latentlab/codebook.hpp"
#include "latentlab/retrieval.hpp"
#include "latentlab/synthdata.hpp"
#include "latentlab/vae.hpp"

namespace latentlab::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::array<std::size_t, kCategoryCount> kBalancedCounts{1000, 1000, 1000};
inline constexpr std::array<std::size_t, kCategoryCount> kImbalancedCounts{940, 890, 340};

struct RunManifest {
    std::string command;
    json parameters = json::object();
    json inputs = json::object();
    json outputs = json::object();  // name -> {path, checksum}
    double duration_seconds = 0.0;

    [[nodiscard]] json to_json() const {
        return json{{"command", command},
                    {"parameters", parameters},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"duration_seconds", duration_seconds}};
    }
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Manifest location for an artifact: inside it for directories, alongside for files.
inline fs::path manifest_path_for(const fs::path& artifact) {
    if (fs::is_directory(artifact)) return artifact / "run.json";
    return fs::path(artifact.string() + ".run.json");
}

inline RunManifest read_manifest(const fs::path& path) {
    const auto bytes = read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.parameters = j.at("parameters");
    m.inputs = j.at("inputs");
    m.outputs = j.at("outputs");
    m.duration_seconds = j.at("duration_seconds").get<double>();
    return m;
}

/// Tracks the paths a command creates so a failure can remove them.
class OutputGuard {
public:
    void track(const fs::path& p) { paths_.push_back(p); }
    void commit() { committed_ = true; }
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove_all(*it, ec);
    }

private:
    std::vector<fs::path> paths_;
    bool committed_ = false;
};

class Stopwatch {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void write_manifest(RunManifest& m, const fs::path& artifact, const Stopwatch& clock, OutputGuard& guard) {
    m.duration_seconds = clock.seconds();
    const auto path = manifest_path_for(artifact);
    guard.track(path);
    write_file_atomic(path, m.to_json().dump(2) + "\n");
}

inline json output_entry(const fs::path& p, std::uint64_t checksum) {
    return json{{"path", p.string()}, {"checksum", hex64(checksum)}};
}

inline std::uint64_t file_checksum(const fs::path& p) { return fnv1a(read_file(p)); }

inline void require_exists(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw ArgumentError(what + " " + p.string() + " does not exist");
}

// ---------------------------------------------------------------------------

struct GenDataOptions {
    std::array<std::size_t, kCategoryCount> counts = kBalancedCounts;
    ImageDims dims{};
    std::uint64_t seed = 0;
    fs::path out;
};

inline Corpus cmd_gen_data(const GenDataOptions& o) {
    Stopwatch clock;
    OutputGuard guard;
    if (!fs::exists(o.out)) guard.track(o.out);
    auto corpus = generate_corpus(o.counts, o.dims, o.seed);
    save_corpus(corpus, o.out);
    RunManifest m{"gen-data"};
    m.parameters = {{"counts", o.counts}, {"dims", o.dims.str()}, {"seed", o.seed}};
    m.outputs["corpus"] = output_entry(o.out, corpus.checksum());
    m.outputs["manifest"] = output_entry(o.out / "manifest.tsv", file_checksum(o.out / "manifest.tsv"));
    write_manifest(m, o.out, clock, guard);
    guard.commit();
    return corpus;
}

struct TrainOptions {
    fs::path corpus;
    fs::path out;
    TrainConfig config{};
    VaeArchitecture arch{};
    std::uint64_t init_seed = 0;
    std::ostream* log = nullptr;
};

/// Trains from a fresh initialization; writes the checkpoint, the per-epoch
/// loss trace (<out>.loss.tsv) and the manifest.
inline std::vector<EpochRecord> cmd_train(const TrainOptions& o) {
    Stopwatch clock;
    OutputGuard guard;
    require_exists(o.corpus, "corpus");
    const auto corpus = load_corpus(o.corpus);
    auto arch = o.arch;
    arch.image = corpus.dims;
    auto model = VaeModel<float>::initialized(arch, o.init_seed);
    const auto images = corpus.images();
    const auto trace = train(model, std::span<const Image>(images), o.config, [&](const EpochRecord& r) {
        if (!o.log) return;
        char buf[128];
        std::snprintf(buf, sizeof buf, "epoch %d\ttotal %.4f\trecon %.4f\tkl %.4f\n", r.epoch, r.total, r.recon, r.kl);
        *o.log << buf << std::flush;
    });

    guard.track(o.out);
    save_checkpoint(model, o.out);
    const fs::path loss_path = o.out.string() + ".loss.tsv";
    std::string loss = "epoch\ttotal\trecon\tkl\n";
    char buf[128];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\n", r.epoch, r.total, r.recon, r.kl);
        loss += buf;
    }
    guard.track(loss_path);
    write_file_atomic(loss_path, loss);

    RunManifest m{"train"};
    m.parameters = {{"epochs", o.config.epochs},
                    {"batch_size", o.config.batch_size},
                    {"learning_rate", o.config.learning_rate},
                    {"kl_weight", o.config.kl_weight},
                    {"seed", o.config.seed},
                    {"init_seed", o.init_seed},
                    {"latent_dim", arch.latent_dim},
                    {"encoder_hidden", arch.encoder_hidden},
                    {"decoder_hidden", arch.decoder_hidden}};
    m.inputs["corpus"] = output_entry(o.corpus, corpus.checksum());
    m.outputs["checkpoint"] = output_entry(o.out, file_checksum(o.out));
    m.outputs["checkpoint"]["model_checksum"] = hex64(model_checksum(model));
    m.outputs["loss_trace"] = output_entry(loss_path, file_checksum(loss_path));
    write_manifest(m, o.out, clock, guard);
    guard.commit();
    return trace;
}

struct EncodeOptions {
    fs::path model;
    fs::path corpus;
    std::uint64_t seed = 0;  // shared epsilon
    fs::path out;
};

inline Codebook cmd_encode(const EncodeOptions& o) {
    Stopwatch clock;
    OutputGuard guard;
    require_exists(o.model, "model");
    require_exists(o.corpus, "corpus");
    const auto model = load_checkpoint<float>(o.model);
    const auto corpus = load_corpus(o.corpus);
    const auto eps = sample_shared_epsilon(model.latent_dim(), o.seed);
    auto cb = build_codebook(model, corpus, eps);
    guard.track(o.out);
    save_codebook(cb, o.out);
    RunManifest m{"encode"};
    m.parameters = {{"seed", o.seed}};
    m.inputs["model"] = output_entry(o.model, cb.model_checksum);
    m.inputs["corpus"] = output_entry(o.corpus, cb.corpus_checksum);
    m.outputs["codebook"] = output_entry(o.out, file_checksum(o.out));
    write_manifest(m, o.out, clock, guard);
    guard.commit();
    return cb;
}

struct ClusterOptions {
    fs::path codebook;
    FeatureKind feature = FeatureKind::z_fixed;
    KMeansConfig kmeans{};
    fs::path out;                          // centers file
    std::optional<fs::path> codebook_out;  // annotated codebook; defaults to rewriting `codebook`
};

struct ClusterResult {
    ClusterModel model;
    ClassMetrics metrics;
    Codebook codebook;
};

/// Fits k-means, writes the centers file, the annotated codebook and the
/// metrics table (<out>.metrics.tsv).
inline ClusterResult cmd_cluster(const ClusterOptions& o) {
    Stopwatch clock;
    OutputGuard guard;
    require_exists(o.codebook, "codebook");
    const auto input_checksum = file_checksum(o.codebook);  // before any in-place rewrite
    const auto cb = load_codebook(o.codebook);
    if (cb.empty()) throw EmptyCorpusError("codebook " + o.codebook.string() + " has no entries");
    auto model = cluster_codebook(cb, o.feature, o.kmeans);
    std::vector<Category> tags;
    for (const auto& e : cb.encodings) tags.push_back(e.tag);
    const auto metrics = cluster_metrics(model.assignments, model.cluster_to_class, tags);
    auto annotated = with_clusters(cb, model.assignments);
    const fs::path cb_out = o.codebook_out.value_or(o.codebook);

    guard.track(o.out);
    save_centers(model, o.out);
    const fs::path metrics_path = o.out.string() + ".metrics.tsv";
    guard.track(metrics_path);
    write_file_atomic(metrics_path, format_metrics_table(metrics));
    if (cb_out != o.codebook) guard.track(cb_out);
    save_codebook(annotated, cb_out);

    RunManifest m{"cluster"};
    m.parameters = {{"feature", std::string(to_string(o.feature))},
                    {"k", o.kmeans.k},
                    {"seed", o.kmeans.seed},
                    {"max_iters", o.kmeans.max_iters},
                    {"tol", o.kmeans.tol},
                    {"restarts", o.kmeans.restarts}};
    m.inputs["codebook"] = output_entry(o.codebook, input_checksum);
    m.outputs["centers"] = output_entry(o.out, file_checksum(o.out));
    m.outputs["codebook"] = output_entry(cb_out, file_checksum(cb_out));
    m.outputs["metrics"] = output_entry(metrics_path, file_checksum(metrics_path));
    write_manifest(m, o.out, clock, guard);
    guard.commit();
    return {std::move(model), metrics, std::move(annotated)};
}

struct EvalOptions {
    fs::path codebook;  // must carry cluster ids
    fs::path centers;
    std::vector<std::size_t> cutoffs{10, 25, 50, 500};
    std::size_t queries_per_category = 500;
    std::uint64_t seed = 0;  // query sampling
    int restarts = KMeansConfig{}.restarts;
    fs::path out;  // directory
};

struct EvalResult {
    MapTable map;
    ClassMetrics metrics_mu;
    ClassMetrics metrics_z_fixed;
};

/// Writes map.tsv (cluster rows use the given centers), metrics_mu.tsv and
/// metrics_z_fixed.tsv. The feature kind the centers were not fitted on is
/// refitted with the centers' k and seed so both tables exist.
inline EvalResult cmd_eval(const EvalOptions& o) {
    Stopwatch clock;
    OutputGuard guard;
    require_exists(o.codebook, "codebook");
    require_exists(o.centers, "centers");
    const auto cb = load_codebook(o.codebook);
    const auto centers = load_centers(o.centers);
    if (cb.empty()) throw EmptyCorpusError("codebook " + o.codebook.string() + " has no entries");
    if (!cb.clustered()) throw StateError("codebook " + o.codebook.string() + " has no cluster ids; run cluster first");
    if (centers.latent_dim() != cb.latent_dim)
        throw DimensionError("centers have dimension " + std::to_string(centers.latent_dim()) + ", codebook has " +
                             std::to_string(cb.latent_dim));

    EvalResult r;
    r.map = evaluate_map_table(cb, o.queries_per_category, o.cutoffs, o.seed,
                               [&centers](std::span<const double> z) { return assign_cluster(z, centers); });

    std::vector<Category> tags;
    std::vector<int> stored;
    for (const auto& e : cb.encodings) {
        tags.push_back(e.tag);
        stored.push_back(*e.cluster_id);
    }
    for (auto kind : {FeatureKind::mu, FeatureKind::z_fixed}) {
        ClassMetrics metrics;
        if (kind == centers.feature_kind) {
            metrics = cluster_metrics(stored, centers.cluster_to_class, tags);
        } else {
            const auto refit = cluster_codebook(cb, kind, {.k = centers.k(), .seed = centers.seed, .restarts = o.restarts});
            metrics = cluster_metrics(refit.assignments, refit.cluster_to_class, tags);
        }
        (kind == FeatureKind::mu ? r.metrics_mu : r.metrics_z_fixed) = metrics;
    }

    if (!fs::exists(o.out)) guard.track(o.out);
    fs::create_directories(o.out);
    RunManifest m{"eval"};
    const std::vector<std::pair<std::string, std::string>> files{
        {"map.tsv", format_map_table(r.map)},
        {"metrics_mu.tsv", format_metrics_table(r.metrics_mu)},
        {"metrics_z_fixed.tsv", format_metrics_table(r.metrics_z_fixed)}};
    for (const auto& [name, text] : files) {
        guard.track(o.out / name);
        write_file_atomic(o.out / name, text);
        m.outputs[name] = output_entry(o.out / name, file_checksum(o.out / name));
    }
    m.parameters = {{"cutoffs", o.cutoffs},
                    {"queries_per_category", o.queries_per_category},
                    {"seed", o.seed},
                    {"restarts", o.restarts}};
    m.inputs["codebook"] = output_entry(o.codebook, file_checksum(o.codebook));
    m.inputs["centers"] = output_entry(o.centers, file_checksum(o.centers));
    write_manifest(m, o.out, clock, guard);
    guard.commit();
    return r;
}

}  // namespace latentlab::pipeline
