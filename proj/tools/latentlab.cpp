// latentlab: command-line entry point for the whole pipeline.
//
//   latentlab gen-data --out corpus --seed 0
//   latentlab train    --corpus corpus --out model.llnn --epochs 50 --seed 0
//   latentlab encode   --model model.llnn --corpus corpus --out codebook.llcb --seed 0
//   latentlab cluster  --codebook codebook.llcb --out centers.llkm --seed 0
//   latentlab eval     --codebook codebook.llcb --centers centers.llkm --out eval --seed 0
//   latentlab serve    --model model.llnn --codebook codebook.llcb --centers centers.llkm --bind 127.0.0.1:8080

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "latentlab/pipeline.hpp"
#include "latentlab/service.hpp"

namespace ll = latentlab;
namespace pl = latentlab::pipeline;

namespace {

std::vector<std::size_t> parse_list(const std::string& text, const char* flag) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(tok, &used);
            if (used != tok.size() || tok.front() == '-') throw std::invalid_argument(tok);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ll::ArgumentError(std::string(flag) + ": \"" + tok + "\" is not a non-negative integer");
        }
    }
    return out;
}

ll::ImageDims parse_dims(const std::string& text) {
    const auto parts = [&] {
        std::string t = text;
        for (auto& c : t)
            if (c == 'x') c = ',';
        return parse_list(t, "--dims");
    }();
    if (parts.size() != 3) throw ll::ArgumentError("--dims expects HxWxC, got \"" + text + "\"");
    if (parts[2] != 1 && parts[2] != 3) throw ll::ArgumentError("--dims: channels must be 1 or 3");
    return {parts[0], parts[1], parts[2]};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentlab: variational autoencoder retrieval and recommendation pipeline"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic product corpus");
    std::string preset = "balanced", counts_text, dims_text = "32x32x3";
    pl::GenDataOptions gen_o;
    gen->add_option("--preset", preset, "balanced (1000/1000/1000) or imbalanced (940/890/340)")
        ->check(CLI::IsMember({"balanced", "imbalanced"}));
    gen->add_option("--counts", counts_text, "bags,footwear,eyewear counts (overrides --preset)");
    gen->add_option("--dims", dims_text, "image dims HxWxC")->capture_default_str();
    gen->add_option("--seed", gen_o.seed, "generator seed")->required();
    gen->add_option("--out", gen_o.out, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "train the VAE on a corpus");
    pl::TrainOptions tr_o;
    std::string enc_hidden = "512,128", dec_hidden = "128,512";
    tr->add_option("--corpus", tr_o.corpus, "corpus directory")->required();
    tr->add_option("--out", tr_o.out, "checkpoint path")->required();
    tr->add_option("--seed", tr_o.config.seed, "shuffle and sampling seed")->required();
    tr->add_option("--init-seed", tr_o.init_seed, "weight initialization seed (defaults to --seed)");
    tr->add_option("--epochs", tr_o.config.epochs)->capture_default_str();
    tr->add_option("--batch-size", tr_o.config.batch_size)->capture_default_str();
    tr->add_option("--lr", tr_o.config.learning_rate)->capture_default_str();
    tr->add_option("--kl-weight", tr_o.config.kl_weight)->capture_default_str();
    tr->add_option("--latent-dim", tr_o.arch.latent_dim)->capture_default_str();
    tr->add_option("--encoder-hidden", enc_hidden)->capture_default_str();
    tr->add_option("--decoder-hidden", dec_hidden)->capture_default_str();
    bool quiet = false;
    tr->add_flag("--quiet", quiet, "no per-epoch log");

    // encode
    auto* en = app.add_subcommand("encode", "build the codebook from a trained model");
    pl::EncodeOptions en_o;
    en->add_option("--model", en_o.model)->required();
    en->add_option("--corpus", en_o.corpus)->required();
    en->add_option("--seed", en_o.seed, "shared epsilon seed")->required();
    en->add_option("--out", en_o.out, "codebook path")->required();

    // cluster
    auto* cl = app.add_subcommand("cluster", "k-means over the codebook");
    pl::ClusterOptions cl_o;
    std::string feature = "z_fixed";
    std::string codebook_out;
    cl->add_option("--codebook", cl_o.codebook)->required();
    cl->add_option("--out", cl_o.out, "centers path")->required();
    cl->add_option("--codebook-out", codebook_out, "annotated codebook path (default: rewrite --codebook)");
    cl->add_option("--feature", feature)->check(CLI::IsMember({"mu", "z_fixed"}))->capture_default_str();
    cl->add_option("--k", cl_o.kmeans.k)->capture_default_str();
    cl->add_option("--seed", cl_o.kmeans.seed)->required();
    cl->add_option("--max-iters", cl_o.kmeans.max_iters)->capture_default_str();
    cl->add_option("--tol", cl_o.kmeans.tol)->capture_default_str();
    cl->add_option("--restarts", cl_o.kmeans.restarts)->capture_default_str();

    // eval
    auto* ev = app.add_subcommand("eval", "mAP and clustering metric tables");
    pl::EvalOptions ev_o;
    std::string cutoffs = "10,25,50,500";
    ev->add_option("--codebook", ev_o.codebook)->required();
    ev->add_option("--centers", ev_o.centers)->required();
    ev->add_option("--out", ev_o.out, "output directory")->required();
    ev->add_option("--seed", ev_o.seed, "query sampling seed")->required();
    ev->add_option("--cutoffs", cutoffs)->capture_default_str();
    ev->add_option("--queries", ev_o.queries_per_category, "queries per category")->capture_default_str();
    ev->add_option("--restarts", ev_o.restarts, "k-means restarts for the refitted feature kind")
        ->capture_default_str();

    // serve
    auto* sv = app.add_subcommand("serve", "HTTP service over a trained snapshot");
    std::string model_path, codebook_path, centers_path, corpus_path, ui_dir, bind = "127.0.0.1:8080";
    sv->add_option("--model", model_path)->required();
    sv->add_option("--codebook", codebook_path, "clustered codebook")->required();
    sv->add_option("--centers", centers_path)->required();
    sv->add_option("--bind", bind, "ADDR:PORT")->capture_default_str();
    sv->add_option("--ui-dir", ui_dir, "static UI bundle served under /ui");
    sv->add_option("--corpus", corpus_path, "corpus directory for original-image thumbnails");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_o.counts = preset == "imbalanced" ? pl::kImbalancedCounts : pl::kBalancedCounts;
            if (!counts_text.empty()) {
                const auto c = parse_list(counts_text, "--counts");
                if (c.size() != ll::kCategoryCount) throw ll::ArgumentError("--counts expects three values");
                gen_o.counts = {c[0], c[1], c[2]};
            }
            gen_o.dims = parse_dims(dims_text);
            const auto corpus = pl::cmd_gen_data(gen_o);
            const auto c = corpus.counts();
            std::printf("wrote %zu items (%zu bags, %zu footwear, %zu eyewear) to %s\n", corpus.size(), c[0], c[1],
                        c[2], gen_o.out.string().c_str());
        } else if (tr->parsed()) {
            if (!tr->count("--init-seed")) tr_o.init_seed = tr_o.config.seed;
            tr_o.arch.encoder_hidden = parse_list(enc_hidden, "--encoder-hidden");
            tr_o.arch.decoder_hidden = parse_list(dec_hidden, "--decoder-hidden");
            if (!quiet) tr_o.log = &std::cout;
            const auto trace = pl::cmd_train(tr_o);
            std::printf("trained %d epochs: total loss %.4f -> %.4f; checkpoint %s\n", tr_o.config.epochs,
                        trace.front().total, trace.back().total, tr_o.out.string().c_str());
        } else if (en->parsed()) {
            const auto cb = pl::cmd_encode(en_o);
            std::printf("encoded %zu items (d_z = %zu) into %s\n", cb.size(), cb.latent_dim,
                        en_o.out.string().c_str());
        } else if (cl->parsed()) {
            cl_o.feature = ll::parse_feature_kind(feature);
            if (!codebook_out.empty()) cl_o.codebook_out = codebook_out;
            const auto r = pl::cmd_cluster(cl_o);
            std::printf("k = %zu on %s, inertia %.6g after %d iterations\n", r.model.k(), feature.c_str(),
                        r.model.inertia, r.model.iterations);
            std::fputs(ll::format_metrics_table(r.metrics).c_str(), stdout);
        } else if (ev->parsed()) {
            ev_o.cutoffs = parse_list(cutoffs, "--cutoffs");
            const auto r = pl::cmd_eval(ev_o);
            std::fputs(ll::format_map_table(r.map).c_str(), stdout);
            std::puts("\nclustering on mu");
            std::fputs(ll::format_metrics_table(r.metrics_mu).c_str(), stdout);
            std::puts("\nclustering on z_fixed");
            std::fputs(ll::format_metrics_table(r.metrics_z_fixed).c_str(), stdout);
        } else if (sv->parsed()) {
            std::optional<std::filesystem::path> corpus;
            if (!corpus_path.empty()) corpus = corpus_path;
            const auto state = ll::service::load_state(model_path, codebook_path, centers_path, corpus);
            std::optional<std::filesystem::path> ui;
            if (!ui_dir.empty()) ui = ui_dir;
            const auto [host, port] = ll::service::parse_bind(bind);
            httplib::Server server;
            ll::service::mount(server, state, ui);
            int bound = port;
            if (port == 0) {
                bound = server.bind_to_any_port(host);
            } else if (!server.bind_to_port(host, port)) {
                bound = -1;
            }
            if (bound < 0) throw ll::ArgumentError("cannot bind " + bind);
            std::printf("listening on %s:%d\n", host.c_str(), bound);
            std::fflush(stdout);
            if (!server.listen_after_bind()) throw ll::Error("server stopped unexpectedly");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
