#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <thread>

#include "latentlab/service.hpp"
#include "support.hpp"

using namespace latentlab;
using namespace latentlab::service;
using testing_support::TempDir;

namespace {

ServiceState make_state(bool with_corpus = false) {
    auto model = VaeModel<float>::initialized(VaeArchitecture{}, 3);
    auto corpus = generate_corpus({10, 10, 10}, model.image_dims(), 4);
    auto cb = build_codebook(model, corpus, sample_shared_epsilon(model.latent_dim(), 5));
    auto clusters = cluster_codebook(cb, FeatureKind::z_fixed, {.k = 3, .seed = 6});
    cb = with_clusters(cb, clusters.assignments);
    ServiceState s{std::move(model), std::move(cb), std::move(clusters), std::nullopt};
    if (with_corpus) s.corpus = std::move(corpus);
    return s;
}

const ServiceState& shared_state() {
    static const ServiceState s = make_state();
    return s;
}

std::string z_body(const Latent& z, const json& extra = json::object()) {
    json j = extra;
    j["z"] = z;
    return j.dump();
}

json error_of(const Response& r) { return json::parse(r.body).at("error"); }

}  // namespace

TEST(Config, Descriptor) {
    const auto r = handle_config(shared_state());
    EXPECT_EQ(r.status, 200);
    const auto j = json::parse(r.body);
    EXPECT_EQ(j["d_z"], 16);
    EXPECT_EQ(j["k"], 3);
    EXPECT_EQ(j["methods"], (json{"log_likelihood", "fixed_epsilon"}));
    EXPECT_EQ(j["categories"], (json{"bag", "footwear", "eyewear"}));
    EXPECT_EQ(j["image"]["height"], 32);
    EXPECT_EQ(j["image"]["channels"], 3);
    EXPECT_EQ(j["items"], 30);
}

TEST(SeedEncoding, ReturnsExistingItem) {
    const auto& s = shared_state();
    const auto j = json::parse(handle_seed_encoding(s, 42).body);
    const auto id = j["item_id"].get<std::uint64_t>();
    ASSERT_LT(id, s.codebook.size());
    EXPECT_EQ(j["z"].get<Latent>(), s.codebook.encodings[id].z_fixed);
    EXPECT_EQ(j["z"].size(), 16u);
    EXPECT_EQ(handle_seed_encoding(s, 42), handle_seed_encoding(s, 42));
}

TEST(SeedEncoding, DrawsSpanCategories) {
    std::set<std::string> tags;
    for (int i = 0; i < 1000; ++i) tags.insert(json::parse(handle_seed_encoding(shared_state(), std::nullopt).body)["tag"]);
    EXPECT_GE(tags.size(), 2u);
}

TEST(SeedEncoding, EmptyCodebookIs503) {
    auto s = make_state();
    s.codebook.encodings.clear();
    const auto r = handle_seed_encoding(s, 1);
    EXPECT_EQ(r.status, 503);
    EXPECT_EQ(error_of(r)["code"], "empty_codebook");
}

TEST(Decode, DimsAndDeterminism) {
    const auto& s = shared_state();
    const Latent z(16, 0.3);
    const auto a = handle_decode(s, z_body(z));
    ASSERT_EQ(a.status, 200);
    EXPECT_EQ(a.content_type, "image/x-portable-pixmap");
    const auto img = decode_pnm(std::span(reinterpret_cast<const std::uint8_t*>(a.body.data()), a.body.size()));
    EXPECT_EQ(img.dims, s.model.image_dims());
    EXPECT_EQ(handle_decode(s, z_body(z)), a);
    const auto direct = encode_pnm(s.model.decode(std::vector<float>(16, 0.3f)));
    EXPECT_EQ(a.body, std::string(direct.begin(), direct.end()));
}

TEST(Decode, BadInputNamesField) {
    const auto& s = shared_state();
    for (const std::string& body : {z_body(Latent(15, 0.0)), std::string(R"({"z": [1, "x"]})"), std::string("{}"),
                                   std::string(R"({"z": 3})")}) {
        const auto r = handle_decode(s, body);
        EXPECT_EQ(r.status, 400) << body;
        EXPECT_EQ(error_of(r)["field"], "z") << body;
    }
    // JSON has no NaN literal; a huge exponent overflows to infinity.
    auto inf = handle_decode(s, R"({"z": [1e999, 0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]})");
    EXPECT_EQ(inf.status, 400);
    const auto junk = handle_decode(s, "not json");
    EXPECT_EQ(junk.status, 400);
    EXPECT_EQ(error_of(junk)["code"], "invalid_json");
}

TEST(Similar, MatchesLibraryCall) {
    const auto& s = shared_state();
    const auto& item = s.codebook.encodings[7];
    const auto r = handle_similar(s, z_body(item.z_fixed, {{"method", "fixed_epsilon"}, {"k", 5}}));
    ASSERT_EQ(r.status, 200);
    const auto j = json::parse(r.body);
    EXPECT_EQ(j["items"][0]["item_id"], 7);
    const auto lib = retrieve_top_k({item.z_fixed, RetrievalMethod::fixed_epsilon, std::nullopt, 5, {}}, s.codebook);
    EXPECT_EQ(r.body, similar_body(s, lib));
    EXPECT_EQ(j["scope"], "full");
    EXPECT_FALSE(j["items"][0]["thumbnail"].get<std::string>().empty());
}

TEST(Similar, ScopedStaysInAssignedCluster) {
    const auto& s = shared_state();
    const Latent z = s.codebook.encodings[22].mu;
    const int cluster = assign_cluster(z, s.clusters);
    const auto r = handle_similar(s, z_body(z, {{"method", "log_likelihood"}, {"k", 50}, {"scoped", true}}));
    ASSERT_EQ(r.status, 200);
    const auto j = json::parse(r.body);
    EXPECT_EQ(j["cluster"], cluster);
    for (const auto& it : j["items"]) EXPECT_EQ(it["cluster_id"], cluster);
    const auto lib = retrieve_top_k({z, RetrievalMethod::log_likelihood, cluster, 50, {}}, s.codebook);
    EXPECT_EQ(r.body, similar_body(s, lib));
}

TEST(Similar, DefaultsAndErrors) {
    const auto& s = shared_state();
    const Latent z(16, 0.0);
    const auto j = json::parse(handle_similar(s, z_body(z)).body);
    EXPECT_EQ(j["method"], "fixed_epsilon");
    EXPECT_EQ(j["items"].size(), 10u);

    const auto bad = handle_similar(s, z_body(z, {{"method", "cosine"}}));
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(error_of(bad)["code"], "unknown_method");
    const std::string msg = error_of(bad)["message"];
    EXPECT_NE(msg.find("log_likelihood"), std::string::npos);
    EXPECT_NE(msg.find("fixed_epsilon"), std::string::npos);
    EXPECT_EQ(handle_similar(s, z_body(z, {{"k", 0}})).status, 400);
    EXPECT_EQ(handle_similar(s, z_body(z, {{"scoped", "yes"}})).status, 400);
}

TEST(Recommend, MatchesLibraryCall) {
    const auto& s = shared_state();
    for (auto method : kRetrievalMethods) {
        const Latent z = s.codebook.encodings[3].z_fixed;
        const auto r = handle_recommend(s, z_body(z, {{"method", std::string(to_string(method))}}));
        ASSERT_EQ(r.status, 200);
        const auto lib = recommend_cross(z, s.codebook, s.clusters, method);
        EXPECT_EQ(r.body, recommend_body(s, lib));
        const auto j = json::parse(r.body);
        ASSERT_EQ(j["recommendations"].size(), 2u);
        for (const auto& rec : j["recommendations"])
            for (const auto& it : rec["items"]) EXPECT_EQ(it["cluster_id"], rec["cluster_id"]);
    }
    EXPECT_EQ(handle_recommend(s, z_body(Latent(3, 0.0))).status, 400);
}

TEST(Thumbnails, CorpusImageWhenLoaded) {
    const auto s = make_state(true);
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(thumbnail(s, 4), base64_encode(encode_pnm(s.corpus->items[4].image)));
    EXPECT_EQ(thumbnail(shared_state(), 4), base64_encode(decode_payload(shared_state(), shared_state().codebook.encodings[4].mu)));
    const std::vector<std::uint8_t> abc{'a', 'b', 'c', 'd'};
    EXPECT_EQ(base64_encode(abc), "YWJjZA==");
}

TEST(State, ValidationCatchesStaleSnapshots) {
    auto s = make_state();
    EXPECT_NO_THROW(s.validate());
    auto other = s;
    other.model = VaeModel<float>::initialized(VaeArchitecture{}, 99);
    EXPECT_THROW(other.validate(), StaleCodebookError);
    auto plain = s;
    for (auto& e : plain.codebook.encodings) e.cluster_id.reset();
    EXPECT_THROW(plain.validate(), StateError);
    auto narrow = s;
    for (auto& c : narrow.clusters.centers) c.pop_back();
    EXPECT_THROW(narrow.validate(), DimensionError);
}

TEST(State, LoadFromFiles) {
    TempDir dir("service_state");
    const auto s = make_state(true);
    save_checkpoint(s.model, dir / "model.llvae");
    save_codebook(s.codebook, dir / "cb.llcb");
    save_centers(s.clusters, dir / "centers.llkm");
    save_corpus(*s.corpus, dir / "corpus");
    const auto loaded = load_state(dir / "model.llvae", dir / "cb.llcb", dir / "centers.llkm", dir / "corpus");
    EXPECT_EQ(handle_config(loaded), handle_config(s));
    EXPECT_EQ(handle_similar(loaded, z_body(Latent(16, 0.1))), handle_similar(s, z_body(Latent(16, 0.1))));
}

TEST(Bind, Parse) {
    EXPECT_EQ(parse_bind("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
    EXPECT_EQ(parse_bind(":0").first, "0.0.0.0");
    EXPECT_THROW(parse_bind("localhost"), ArgumentError);
    EXPECT_THROW(parse_bind("h:99999"), ArgumentError);
    EXPECT_THROW(parse_bind("h:80x"), ArgumentError);
}

TEST(Http, RoundTripMatchesHandlers) {
    const auto& s = shared_state();
    TempDir ui("service_ui");
    {
        std::ofstream(ui / "index.html") << "<html></html>";
    }
    httplib::Server server;
    mount(server, s, ui.path());
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto cfg = client.Get("/config");
    ASSERT_TRUE(cfg);
    EXPECT_EQ(cfg->status, 200);
    EXPECT_EQ(cfg->body, handle_config(s).body);

    auto seed = client.Get("/seed-encoding?seed=9");
    ASSERT_TRUE(seed);
    EXPECT_EQ(seed->body, handle_seed_encoding(s, 9).body);
    auto bad_seed = client.Get("/seed-encoding?seed=-3");
    ASSERT_TRUE(bad_seed);
    EXPECT_EQ(bad_seed->status, 400);

    const auto body = z_body(s.codebook.encodings[11].z_fixed, {{"method", "log_likelihood"}, {"scoped", true}});
    auto sim = client.Post("/similar", body, "application/json");
    ASSERT_TRUE(sim);
    EXPECT_EQ(sim->body, handle_similar(s, body).body);
    auto rec = client.Post("/recommend", body, "application/json");
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->body, handle_recommend(s, body).body);
    auto dec = client.Post("/decode", body, "application/json");
    ASSERT_TRUE(dec);
    EXPECT_EQ(dec->get_header_value("Content-Type"), "image/x-portable-pixmap");
    EXPECT_EQ(dec->body, handle_decode(s, body).body);
    auto bad = client.Post("/decode", R"({"z": [1]})", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(json::parse(bad->body)["error"]["field"], "z");

    auto missing = client.Get("/nope");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body)["error"]["code"], "not_found");
    auto page = client.Get("/ui/index.html");
    ASSERT_TRUE(page);
    EXPECT_EQ(page->status, 200);
    EXPECT_EQ(page->body, "<html></html>");

    server.stop();
    th.join();
}
