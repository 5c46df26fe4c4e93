#pragma once

// Request handlers behind the HTTP service. Every handler is a function of
// an immutable ServiceState and the request, returning status, content type
// and body; mount() binds them to routes.
//
//   GET  /config         {d_z, image, k, categories, methods}
//   GET  /seed-encoding  {item_id, z}             optional ?seed=N
//   POST /decode         {z}                      -> binary pixmap
//   POST /similar        {z, method, k, scoped}   -> ranked items
//   POST /recommend      {z, method, count}       -> one entry per other cluster
//
// Errors are {"error": {"code", "message", ["field"]}}.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentlab/clustering.hpp"
#include "latentlab/codebook.hpp"
#include "latentlab/error.hpp"
#include "latentlab/image.hpp"
#include "latentlab/recommend.hpp"
#include "latentlab/retrieval.hpp"
#include "latentlab/synthdata.hpp"
#include "latentlab/vae.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with
// Eigen parameter names.
#include "httplib.h"
#include "json.hpp"

namespace latentlab::service {

using json = nlohmann::json;

struct ServiceState {
    VaeModel<float> model;
    Codebook codebook;
    ClusterModel clusters;
    std::optional<Corpus> corpus;  // original images for thumbnails, when available

    /// Cross-checks the snapshot; throws on any inconsistency.
    void validate() const {
        if (codebook.latent_dim != model.latent_dim())
            throw StaleCodebookError("codebook latent dimension " + std::to_string(codebook.latent_dim) +
                                     " does not match model latent dimension " + std::to_string(model.latent_dim()));
        if (codebook.model_checksum != model_checksum(model))
            throw StaleCodebookError("codebook was built with a different model (checksum mismatch)");
        if (clusters.latent_dim() != codebook.latent_dim)
            throw DimensionError("centers have dimension " + std::to_string(clusters.latent_dim()) +
                                 ", codebook has " + std::to_string(codebook.latent_dim));
        if (!codebook.clustered()) throw StateError("codebook has no cluster annotations; run the cluster step");
        for (const auto& e : codebook.encodings)
            if (*e.cluster_id >= static_cast<int>(clusters.k()))
                throw StateError("codebook cluster id " + std::to_string(*e.cluster_id) + " exceeds k");
        if (corpus) {
            if (corpus->size() != codebook.size() || corpus->checksum() != codebook.corpus_checksum)
                throw StaleCodebookError("corpus does not match the codebook (checksum mismatch)");
        }
    }
};

inline ServiceState load_state(const std::filesystem::path& model_path, const std::filesystem::path& codebook_path,
                               const std::filesystem::path& centers_path,
                               const std::optional<std::filesystem::path>& corpus_dir = std::nullopt) {
    ServiceState s{load_checkpoint<float>(model_path), load_codebook(codebook_path), load_centers(centers_path),
                   std::nullopt};
    if (corpus_dir) s.corpus = load_corpus(*corpus_dir);
    s.validate();
    return s;
}

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;

    friend bool operator==(const Response&, const Response&) = default;
};

inline Response error_response(int status, const std::string& code, const std::string& message,
                               const std::optional<std::string>& field = std::nullopt) {
    json err{{"code", code}, {"message", message}};
    if (field) err["field"] = *field;
    return {status, "application/json", json{{"error", err}}.dump()};
}

/// Request validation failure carrying the offending field.
struct BadRequest {
    std::string code;
    std::string message;
    std::optional<std::string> field;
};

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
    return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

/// The decoded pixmap of a latent vector, as the /decode endpoint returns it.
inline Bytes decode_payload(const ServiceState& state, std::span<const double> z) {
    std::vector<float> zf(z.begin(), z.end());
    return encode_pnm(state.model.decode(std::span<const float>(zf)));
}

/// Original corpus image when loaded, otherwise the decoded mean encoding.
inline std::string thumbnail(const ServiceState& state, std::uint64_t item_id) {
    if (state.corpus) return base64_encode(encode_pnm(state.corpus->items.at(item_id).image));
    return base64_encode(decode_payload(state, state.codebook.encodings.at(item_id).mu));
}

inline json entry_json(const ServiceState& state, const RankedEntry& e) {
    return json{{"item_id", e.item_id},
                {"score", e.score},
                {"tag", std::string(to_string(e.tag))},
                {"cluster_id", e.cluster_id ? json(*e.cluster_id) : json(nullptr)},
                {"thumbnail", thumbnail(state, e.item_id)}};
}

inline std::string similar_body(const ServiceState& state, const RankedResult& result) {
    json items = json::array();
    for (const auto& e : result.entries) items.push_back(entry_json(state, e));
    json out{{"method", std::string(to_string(result.method))},
             {"scope", result.cluster ? "cluster" : "full"},
             {"cluster", result.cluster ? json(*result.cluster) : json(nullptr)},
             {"items", items}};
    return out.dump();
}

inline std::string recommend_body(const ServiceState& state, const Recommendation& rec) {
    json entries = json::array();
    for (const auto& e : rec.entries) {
        json items = json::array();
        for (const auto& it : e.items) items.push_back(entry_json(state, it));
        entries.push_back(json{{"cluster_id", e.target_cluster},
                               {"category", std::string(to_string(state.clusters.cluster_to_class.at(
                                                static_cast<std::size_t>(e.target_cluster))))},
                               {"diff", e.diff},
                               {"vector", e.translated},
                               {"items", items}});
    }
    json out{{"source_cluster", rec.source_cluster},
             {"method", std::string(to_string(rec.method))},
             {"recommendations", entries},
             {"warnings", rec.warnings}};
    return out.dump();
}

inline std::string config_body(const ServiceState& state) {
    json categories = json::array();
    for (auto c : kCategories) categories.push_back(std::string(to_string(c)));
    json methods = json::array();
    for (auto m : kRetrievalMethods) methods.push_back(std::string(to_string(m)));
    json cluster_classes = json::array();
    for (auto c : state.clusters.cluster_to_class) cluster_classes.push_back(std::string(to_string(c)));
    const auto& d = state.model.image_dims();
    json out{{"d_z", state.model.latent_dim()},
             {"image", {{"height", d.height}, {"width", d.width}, {"channels", d.channels}}},
             {"k", state.clusters.k()},
             {"categories", categories},
             {"methods", methods},
             {"cluster_classes", cluster_classes},
             {"feature_kind", std::string(to_string(state.clusters.feature_kind))},
             {"items", state.codebook.size()}};
    return out.dump();
}

namespace detail {

inline json parse_body(const std::string& body) {
    try {
        auto j = json::parse(body);
        if (!j.is_object()) throw BadRequest{"invalid_json", "request body must be a JSON object", std::nullopt};
        return j;
    } catch (const json::exception& e) {
        throw BadRequest{"invalid_json", std::string("request body is not valid JSON: ") + e.what(), std::nullopt};
    }
}

inline Latent parse_z(const json& j, std::size_t latent_dim) {
    if (!j.contains("z")) throw BadRequest{"missing_field", "field z is required", "z"};
    const auto& z = j["z"];
    if (!z.is_array()) throw BadRequest{"invalid_field", "z must be an array of numbers", "z"};
    if (z.size() != latent_dim)
        throw BadRequest{"invalid_field",
                         "z must have length " + std::to_string(latent_dim) + ", got " + std::to_string(z.size()), "z"};
    Latent out;
    out.reserve(z.size());
    for (const auto& v : z) {
        if (!v.is_number()) throw BadRequest{"invalid_field", "z must contain only numbers", "z"};
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw BadRequest{"invalid_field", "z must be finite", "z"};
        out.push_back(x);
    }
    return out;
}

inline RetrievalMethod parse_method_field(const json& j) {
    if (!j.contains("method")) return RetrievalMethod::fixed_epsilon;
    const auto& m = j["method"];
    std::string valid = "valid methods: log_likelihood, fixed_epsilon";
    if (!m.is_string()) throw BadRequest{"unknown_method", "method must be a string; " + valid, "method"};
    auto parsed = parse_method(m.get<std::string>());
    if (!parsed) throw BadRequest{"unknown_method", "unknown method \"" + m.get<std::string>() + "\"; " + valid, "method"};
    return *parsed;
}

inline std::size_t parse_positive(const json& j, const char* field, std::size_t fallback) {
    if (!j.contains(field)) return fallback;
    const auto& v = j[field];
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw BadRequest{"invalid_field", std::string(field) + " must be a positive integer", field};
    return static_cast<std::size_t>(v.get<long long>());
}

template <class Fn>
Response guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const BadRequest& e) {
        return error_response(400, e.code, e.message, e.field);
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

}  // namespace detail

inline Response handle_config(const ServiceState& state) {
    return detail::guarded([&] { return Response{200, "application/json", config_body(state)}; });
}

/// A uniformly drawn item. With a seed the draw is reproducible.
inline Response handle_seed_encoding(const ServiceState& state, std::optional<std::uint64_t> seed) {
    return detail::guarded([&] {
        if (state.codebook.empty()) return error_response(503, "empty_codebook", "the codebook has no entries");
        std::uint64_t s = 0;
        if (seed) {
            s = *seed;
        } else {
            thread_local std::mt19937_64 entropy{std::random_device{}()};
            s = entropy();
        }
        std::mt19937_64 rng(s);
        std::uniform_int_distribution<std::size_t> pick(0, state.codebook.size() - 1);
        const auto& e = state.codebook.encodings[pick(rng)];
        json out{{"item_id", e.item_id}, {"z", e.z_fixed}, {"tag", std::string(to_string(e.tag))}};
        return Response{200, "application/json", out.dump()};
    });
}

inline Response handle_decode(const ServiceState& state, const std::string& body) {
    return detail::guarded([&] {
        const auto j = detail::parse_body(body);
        const auto z = detail::parse_z(j, state.model.latent_dim());
        const auto bytes = decode_payload(state, z);
        return Response{200, "image/x-portable-pixmap", std::string(bytes.begin(), bytes.end())};
    });
}

inline Response handle_similar(const ServiceState& state, const std::string& body) {
    return detail::guarded([&] {
        const auto j = detail::parse_body(body);
        RetrievalQuery q;
        q.z_bar = detail::parse_z(j, state.codebook.latent_dim);
        q.method = detail::parse_method_field(j);
        q.k = detail::parse_positive(j, "k", 10);
        bool scoped = false;
        if (j.contains("scoped")) {
            if (!j["scoped"].is_boolean()) throw BadRequest{"invalid_field", "scoped must be a boolean", "scoped"};
            scoped = j["scoped"].get<bool>();
        }
        if (scoped) q.cluster = assign_cluster(q.z_bar, state.clusters);
        return Response{200, "application/json", similar_body(state, retrieve_top_k(q, state.codebook))};
    });
}

inline Response handle_recommend(const ServiceState& state, const std::string& body) {
    return detail::guarded([&] {
        const auto j = detail::parse_body(body);
        const auto z = detail::parse_z(j, state.codebook.latent_dim);
        const auto method = detail::parse_method_field(j);
        const auto count = detail::parse_positive(j, "count", 1);
        return Response{200, "application/json",
                        recommend_body(state, recommend_cross(z, state.codebook, state.clusters, method, count))};
    });
}

inline void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

/// Registers every endpoint on `server`, plus the UI bundle under /ui when a
/// directory is given. `state` must outlive the server.
inline void mount(httplib::Server& server, const ServiceState& state,
                  const std::optional<std::filesystem::path>& ui_dir = std::nullopt) {
    // Headers and body go out in separate writes; with Nagle on, every
    // response stalls on the client's delayed ACK.
    server.set_tcp_nodelay(true);
    server.Get("/config", [&state](const httplib::Request&, httplib::Response& res) {
        reply(res, handle_config(state));
    });
    server.Get("/seed-encoding", [&state](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::uint64_t> seed;
        if (req.has_param("seed")) {
            const auto raw = req.get_param_value("seed");
            try {
                std::size_t used = 0;
                seed = std::stoull(raw, &used);
                if (used != raw.size() || raw.front() == '-') throw std::invalid_argument(raw);
            } catch (const std::exception&) {
                reply(res, error_response(400, "invalid_field", "seed must be a non-negative integer", "seed"));
                return;
            }
        }
        reply(res, handle_seed_encoding(state, seed));
    });
    server.Post("/decode", [&state](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_decode(state, req.body));
    });
    server.Post("/similar", [&state](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_similar(state, req.body));
    });
    server.Post("/recommend", [&state](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_recommend(state, req.body));
    });
    if (ui_dir && !server.set_mount_point("/ui", ui_dir->string()))
        throw ArgumentError("ui directory " + ui_dir->string() + " does not exist");
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        const std::string code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
        res.set_content(error_response(res.status, code, req.method + " " + req.path + " failed").body,
                        "application/json");
    });
}

/// Splits "host:port"; the host may be empty (all interfaces).
inline std::pair<std::string, int> parse_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw ArgumentError("--bind expects ADDR:PORT, got \"" + bind + "\"");
    std::string host = bind.substr(0, colon);
    if (host.empty()) host = "0.0.0.0";
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(bind.substr(colon + 1), &used);
        if (used != bind.size() - colon - 1) throw std::invalid_argument(bind);
    } catch (const std::exception&) {
        throw ArgumentError("--bind port is not a number: \"" + bind + "\"");
    }
    if (port < 0 || port > 65535) throw ArgumentError("--bind port out of range: " + std::to_string(port));
    return {host, port};
}

}  // namespace latentlab::service
