#pragma once

// Variational autoencoder over flattened images.
//
// Encoder: relu trunk feeding two linear heads, mean and log-variance.
// Decoder: relu stack ending in a sigmoid over H*W*C pixels.
// Loss per image: summed binary cross-entropy + kl_weight * KL(q(z|x) || N(0, I)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latentlab/binary_io.hpp"
#include "latentlab/error.hpp"
#include "latentlab/image.hpp"
#include "latentlab/nn.hpp"

namespace latentlab {

struct VaeArchitecture {
    ImageDims image{32, 32, 3};
    std::vector<std::size_t> encoder_hidden{512, 128};
    std::size_t latent_dim = 16;
    std::vector<std::size_t> decoder_hidden{128, 512};

    void validate() const {
        if (latent_dim < 1) throw ArgumentError("latent dimension must be at least 1");
        if (image.size() == 0) throw ArgumentError("image dimensions must be non-zero");
        if (encoder_hidden.empty()) throw ArgumentError("encoder needs at least one hidden layer");
        for (auto h : encoder_hidden)
            if (h == 0) throw ArgumentError("hidden layer width must be non-zero");
        for (auto h : decoder_hidden)
            if (h == 0) throw ArgumentError("hidden layer width must be non-zero");
    }
};

template <class T>
struct Posterior {
    std::vector<T> mu;
    std::vector<T> logvar;
};

struct LossTerms {
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
    long double total_extended = 0.0L;  // total before rounding to double
};

/// z_i = mu_i + exp(0.5 * logvar_i) * eps_i
template <class T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> logvar, std::span<const T> epsilon) {
    if (mu.size() != logvar.size() || mu.size() != epsilon.size())
        throw DimensionError("reparameterize: mu has " + std::to_string(mu.size()) + " entries, logvar " +
                             std::to_string(logvar.size()) + ", epsilon " + std::to_string(epsilon.size()));
    std::vector<T> z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(T(0.5) * logvar[i]) * epsilon[i];
    return z;
}

/// -1/2 * sum(1 + logvar - mu^2 - exp(logvar))
template <class T>
double kl_divergence(std::span<const T> mu, std::span<const T> logvar) {
    if (mu.size() != logvar.size()) throw DimensionError("kl: mu and logvar lengths differ");
    double kl = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu[i];
        const double lv = logvar[i];
        kl += -0.5 * (1.0 + lv - m * m - std::exp(lv));
    }
    return kl;
}

/// Gradients for every parameter group of a VaeModel.
template <class T>
struct VaeGradients {
    nn::GradientTape<T> encoder;
    nn::LayerGradient<T> mu_head;
    nn::LayerGradient<T> logvar_head;
    nn::GradientTape<T> decoder;

    void zero() {
        encoder.zero();
        decoder.zero();
        mu_head.weights.setZero();
        mu_head.bias.setZero();
        logvar_head.weights.setZero();
        logvar_head.bias.setZero();
    }

    std::vector<nn::ParameterView<T>> views() {
        std::vector<nn::ParameterView<T>> out;
        for (std::size_t i = 0; i < encoder.layers.size(); ++i)
            nn::append_views(out, encoder.layers[i], "encoder." + std::to_string(i));
        nn::append_views(out, mu_head, "mu_head");
        nn::append_views(out, logvar_head, "logvar_head");
        for (std::size_t i = 0; i < decoder.layers.size(); ++i)
            nn::append_views(out, decoder.layers[i], "decoder." + std::to_string(i));
        return out;
    }
};

template <class T>
class VaeModel {
public:
    using Matrix = nn::Matrix<T>;
    using Vector = nn::Vector<T>;

    /// All parameters zero.
    explicit VaeModel(VaeArchitecture arch = {}) : arch_(std::move(arch)) {
        arch_.validate();
        std::vector<nn::DenseLayer<T>> enc;
        auto in = static_cast<Eigen::Index>(arch_.image.size());
        for (auto h : arch_.encoder_hidden) {
            enc.emplace_back(in, static_cast<Eigen::Index>(h), nn::Activation::relu);
            in = static_cast<Eigen::Index>(h);
        }
        encoder_ = nn::Network<T>(std::move(enc));
        const auto dz = static_cast<Eigen::Index>(arch_.latent_dim);
        mu_head_ = nn::DenseLayer<T>(in, dz, nn::Activation::linear);
        logvar_head_ = nn::DenseLayer<T>(in, dz, nn::Activation::linear);
        std::vector<nn::DenseLayer<T>> dec;
        in = dz;
        for (auto h : arch_.decoder_hidden) {
            dec.emplace_back(in, static_cast<Eigen::Index>(h), nn::Activation::relu);
            in = static_cast<Eigen::Index>(h);
        }
        dec.emplace_back(in, static_cast<Eigen::Index>(arch_.image.size()), nn::Activation::sigmoid);
        decoder_ = nn::Network<T>(std::move(dec));
    }

    /// Scaled-uniform weights drawn from one seeded stream in declared layer order.
    static VaeModel initialized(VaeArchitecture arch, std::uint64_t seed) {
        VaeModel model(std::move(arch));
        std::mt19937_64 rng(seed);
        for (auto& l : model.encoder_.layers()) l.init_uniform(rng);
        model.mu_head_.init_uniform(rng);
        model.logvar_head_.init_uniform(rng);
        for (auto& l : model.decoder_.layers()) l.init_uniform(rng);
        return model;
    }

    [[nodiscard]] const VaeArchitecture& architecture() const { return arch_; }
    [[nodiscard]] std::size_t latent_dim() const { return arch_.latent_dim; }
    [[nodiscard]] const ImageDims& image_dims() const { return arch_.image; }

    [[nodiscard]] const nn::Network<T>& encoder() const { return encoder_; }
    [[nodiscard]] const nn::Network<T>& decoder() const { return decoder_; }
    [[nodiscard]] const nn::DenseLayer<T>& mu_head() const { return mu_head_; }
    [[nodiscard]] const nn::DenseLayer<T>& logvar_head() const { return logvar_head_; }
    nn::Network<T>& encoder() { return encoder_; }
    nn::Network<T>& decoder() { return decoder_; }
    nn::DenseLayer<T>& mu_head() { return mu_head_; }
    nn::DenseLayer<T>& logvar_head() { return logvar_head_; }

    /// Every layer in checkpoint order: encoder, mu head, logvar head, decoder.
    [[nodiscard]] std::vector<const nn::DenseLayer<T>*> ordered_layers() const {
        std::vector<const nn::DenseLayer<T>*> out;
        for (const auto& l : encoder_.layers()) out.push_back(&l);
        out.push_back(&mu_head_);
        out.push_back(&logvar_head_);
        for (const auto& l : decoder_.layers()) out.push_back(&l);
        return out;
    }

    std::vector<nn::ParameterView<T>> parameters() {
        std::vector<nn::ParameterView<T>> out;
        auto enc = encoder_.layers();
        for (std::size_t i = 0; i < enc.size(); ++i) nn::append_views(out, enc[i], "encoder." + std::to_string(i));
        nn::append_views(out, mu_head_, "mu_head");
        nn::append_views(out, logvar_head_, "logvar_head");
        auto dec = decoder_.layers();
        for (std::size_t i = 0; i < dec.size(); ++i) nn::append_views(out, dec[i], "decoder." + std::to_string(i));
        return out;
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* l : ordered_layers()) n += l->parameter_count();
        return n;
    }

    [[nodiscard]] VaeGradients<T> make_gradients() const {
        VaeGradients<T> g;
        g.encoder = nn::GradientTape<T>(encoder_.layers());
        g.decoder = nn::GradientTape<T>(decoder_.layers());
        g.mu_head = {Matrix::Zero(mu_head_.out_dim(), mu_head_.in_dim()), Vector::Zero(mu_head_.out_dim())};
        g.logvar_head = {Matrix::Zero(logvar_head_.out_dim(), logvar_head_.in_dim()),
                         Vector::Zero(logvar_head_.out_dim())};
        return g;
    }

    template <class U>
    [[nodiscard]] VaeModel<U> cast() const {
        VaeModel<U> out(arch_);
        auto enc = encoder_.layers();
        for (std::size_t i = 0; i < enc.size(); ++i) out.encoder().layers()[i] = enc[i].template cast<U>();
        out.mu_head() = mu_head_.template cast<U>();
        out.logvar_head() = logvar_head_.template cast<U>();
        auto dec = decoder_.layers();
        for (std::size_t i = 0; i < dec.size(); ++i) out.decoder().layers()[i] = dec[i].template cast<U>();
        return out;
    }

    /// Checks dims and pixel range and returns the image as a column.
    [[nodiscard]] Vector image_column(const Image& image) const {
        if (image.dims != arch_.image)
            throw DimensionError("model expects " + arch_.image.str() + " images, got " + image.dims.str());
        Vector x(static_cast<Eigen::Index>(image.pixels.size()));
        for (std::size_t i = 0; i < image.pixels.size(); ++i) {
            const float p = image.pixels[i];
            if (!(p >= 0.0f && p <= 1.0f))
                throw DomainError("pixel " + std::to_string(i) + " is " + std::to_string(p) + ", outside [0,1]");
            x[static_cast<Eigen::Index>(i)] = static_cast<T>(p);
        }
        return x;
    }

    /// Batched encoder: columns of `images` in, (mu, logvar) columns out.
    void encode_batch(const Matrix& images, Matrix& mu, Matrix& logvar) const {
        if (images.rows() != static_cast<Eigen::Index>(arch_.image.size()))
            throw DimensionError("encode: expected " + std::to_string(arch_.image.size()) + " pixel rows, got " +
                                 std::to_string(images.rows()));
        Matrix h = encoder_.forward_batch(images);
        mu = mu_head_.forward_batch(h);
        logvar = logvar_head_.forward_batch(h);
    }

    [[nodiscard]] Posterior<T> encode(const Image& image) const {
        Matrix mu, logvar;
        encode_batch(image_column(image), mu, logvar);
        return {std::vector<T>(mu.data(), mu.data() + mu.size()),
                std::vector<T>(logvar.data(), logvar.data() + logvar.size())};
    }

    /// Batched decoder returning sigmoid pixel probabilities, one image per column.
    [[nodiscard]] Matrix decode_batch(const Matrix& z) const {
        if (z.rows() != static_cast<Eigen::Index>(arch_.latent_dim))
            throw DimensionError("decode: expected latent length " + std::to_string(arch_.latent_dim) + ", got " +
                                 std::to_string(z.rows()));
        return decoder_.forward_batch(z);
    }

    [[nodiscard]] Image decode(std::span<const T> z) const {
        if (z.size() != arch_.latent_dim)
            throw DimensionError("decode: expected latent length " + std::to_string(arch_.latent_dim) + ", got " +
                                 std::to_string(z.size()));
        Matrix zc = Eigen::Map<const Matrix>(z.data(), static_cast<Eigen::Index>(z.size()), 1);
        Matrix out = decode_batch(zc);
        Image image(arch_.image);
        for (std::size_t i = 0; i < image.pixels.size(); ++i)
            image.pixels[i] = static_cast<float>(out(static_cast<Eigen::Index>(i), 0));
        return image;
    }

    /// Loss summed over the batch columns. When `grads` is non-null, adds
    /// `grad_scale` * dLoss/dParam into it. `epsilon` is d_z x batch.
    LossTerms forward_backward(const Matrix& images, const Matrix& epsilon, double kl_weight,
                               VaeGradients<T>* grads = nullptr, T grad_scale = T(1)) const {
        const auto dz = static_cast<Eigen::Index>(arch_.latent_dim);
        if (images.rows() != static_cast<Eigen::Index>(arch_.image.size()))
            throw DimensionError("loss: expected " + std::to_string(arch_.image.size()) + " pixel rows, got " +
                                 std::to_string(images.rows()));
        if (epsilon.rows() != dz || epsilon.cols() != images.cols())
            throw DimensionError("loss: epsilon must be " + std::to_string(dz) + "x" + std::to_string(images.cols()) +
                                 ", got " + std::to_string(epsilon.rows()) + "x" + std::to_string(epsilon.cols()));

        nn::Trace<T> enc_trace;
        Matrix h = encoder_.forward(images, enc_trace);
        Matrix mu = mu_head_.forward_batch(h);
        Matrix logvar = logvar_head_.forward_batch(h);
        Matrix sigma = (T(0.5) * logvar.array()).exp().matrix();
        Matrix z = mu + sigma.cwiseProduct(epsilon);

        nn::Trace<T> dec_trace;
        decoder_.forward(z, dec_trace);
        const Matrix& logits = dec_trace.last_preactivation;

        // Extended-precision accumulation keeps the summed loss accurate enough
        // for finite-difference checks at small steps.
        long double recon = 0.0L, kl = 0.0L;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            for (Eigen::Index p = 0; p < logits.rows(); ++p) {
                const double l = logits(p, c);
                recon += static_cast<long double>(nn::softplus(l)) - static_cast<long double>(images(p, c)) * l;
            }
            for (Eigen::Index i = 0; i < dz; ++i) {
                const long double m = mu(i, c);
                const long double lv = logvar(i, c);
                kl += -0.5L * (1.0L + lv - m * m - std::exp(lv));
            }
        }
        LossTerms terms;
        terms.recon = static_cast<double>(recon);
        terms.kl = static_cast<double>(kl);
        terms.total_extended = recon + static_cast<long double>(kl_weight) * kl;
        terms.total = static_cast<double>(terms.total_extended);
        if (!grads) return terms;

        const T klw = static_cast<T>(kl_weight);
        Matrix d_logits = (dec_trace.outputs.back() - images) * grad_scale;
        Matrix d_z = decoder_.backward(dec_trace, d_logits, grads->decoder, true, true);
        Matrix d_mu = d_z + (klw * grad_scale) * mu;
        Matrix d_logvar = (d_z.cwiseProduct(epsilon).cwiseProduct(sigma) * T(0.5)).eval();
        d_logvar.array() += (klw * grad_scale * T(0.5)) * (logvar.array().exp() - T(1));

        grads->mu_head.weights.noalias() += d_mu * h.transpose();
        grads->mu_head.bias += d_mu.rowwise().sum();
        grads->logvar_head.weights.noalias() += d_logvar * h.transpose();
        grads->logvar_head.bias += d_logvar.rowwise().sum();
        Matrix d_h = mu_head_.weights.transpose() * d_mu;
        d_h.noalias() += logvar_head_.weights.transpose() * d_logvar;
        encoder_.backward(enc_trace, d_h, grads->encoder, false, false);
        return terms;
    }

private:
    VaeArchitecture arch_;
    nn::Network<T> encoder_;
    nn::DenseLayer<T> mu_head_;
    nn::DenseLayer<T> logvar_head_;
    nn::Network<T> decoder_;
};

template <class T>
Posterior<T> encode(const VaeModel<T>& model, const Image& image) {
    return model.encode(image);
}

template <class T>
Image decode(const VaeModel<T>& model, std::span<const T> z) {
    return model.decode(z);
}

/// Loss of one image for an externally supplied epsilon.
template <class T>
LossTerms loss(const VaeModel<T>& model, const Image& image, std::span<const T> epsilon, double kl_weight = 1.0) {
    auto x = model.image_column(image);
    if (epsilon.size() != model.latent_dim())
        throw DimensionError("loss: epsilon length " + std::to_string(epsilon.size()) + ", expected " +
                             std::to_string(model.latent_dim()));
    nn::Matrix<T> eps = Eigen::Map<const nn::Matrix<T>>(epsilon.data(), static_cast<Eigen::Index>(epsilon.size()), 1);
    return model.forward_backward(x, eps, kl_weight);
}

struct TrainConfig {
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    double kl_weight = 1.0;

    void validate() const {
        if (epochs < 1) throw ArgumentError("epochs must be at least 1");
        if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
        if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
        if (!(kl_weight >= 0.0)) throw ArgumentError("kl weight must be non-negative");
    }
};

/// Per-item means over one epoch.
struct EpochRecord {
    int epoch = 0;
    double recon = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

/// Stacks images into a pixel-rows x items matrix.
template <class T>
nn::Matrix<T> stack_images(const VaeModel<T>& model, std::span<const Image> images) {
    nn::Matrix<T> data(static_cast<Eigen::Index>(model.image_dims().size()), static_cast<Eigen::Index>(images.size()));
    for (std::size_t i = 0; i < images.size(); ++i) data.col(static_cast<Eigen::Index>(i)) = model.image_column(images[i]);
    return data;
}

/// Minibatch Adam on the ELBO. One seeded stream drives both the epoch
/// shuffles and the per-item epsilon draws, so a given seed reproduces the
/// trace bit for bit.
template <class T>
std::vector<EpochRecord> train(VaeModel<T>& model, std::span<const Image> dataset, const TrainConfig& config,
                               const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    config.validate();
    if (dataset.empty()) throw ArgumentError("train: dataset is empty");
    const nn::Matrix<T> data = stack_images(model, dataset);
    const auto n = static_cast<std::size_t>(data.cols());
    const auto dz = static_cast<Eigen::Index>(model.latent_dim());
    const auto bs = static_cast<std::size_t>(config.batch_size);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    nn::Adam<T> adam(nn::AdamConfig{.learning_rate = config.learning_rate});
    auto grads = model.make_gradients();
    auto params = model.parameters();
    auto grad_views = grads.views();
    std::vector<std::size_t> order(n);
    std::vector<EpochRecord> trace;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec{.epoch = epoch};
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
            const std::size_t count = std::min(bs, n - start);
            nn::Matrix<T> batch(data.rows(), static_cast<Eigen::Index>(count));
            for (std::size_t j = 0; j < count; ++j)
                batch.col(static_cast<Eigen::Index>(j)) = data.col(static_cast<Eigen::Index>(order[start + j]));
            nn::Matrix<T> eps(dz, static_cast<Eigen::Index>(count));
            for (Eigen::Index c = 0; c < eps.cols(); ++c)
                for (Eigen::Index r = 0; r < dz; ++r) eps(r, c) = static_cast<T>(normal(rng));

            grads.zero();
            const auto terms =
                model.forward_backward(batch, eps, config.kl_weight, &grads, T(1) / static_cast<T>(count));
            if (!std::isfinite(terms.total))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
            adam.step(params, grad_views);
            rec.recon += terms.recon;
            rec.kl += terms.kl;
            rec.total += terms.total;
        }
        rec.recon /= static_cast<double>(n);
        rec.kl /= static_cast<double>(n);
        rec.total /= static_cast<double>(n);
        trace.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Checkpoint: "LLNN1", image dims, d_z, hidden-layer counts, per-layer
// (out, in, activation), then every layer's row-major weights and bias as
// little-endian float32 in checkpoint order.

inline constexpr std::string_view kCheckpointMagic = "LLNN1";

template <class T>
Bytes serialize_checkpoint(const VaeModel<T>& model) {
    const auto& arch = model.architecture();
    Bytes out;
    put_magic(out, kCheckpointMagic);
    put_u32(out, static_cast<std::uint32_t>(arch.image.height));
    put_u32(out, static_cast<std::uint32_t>(arch.image.width));
    put_u32(out, static_cast<std::uint32_t>(arch.image.channels));
    put_u32(out, static_cast<std::uint32_t>(arch.latent_dim));
    put_u32(out, static_cast<std::uint32_t>(arch.encoder_hidden.size()));
    put_u32(out, static_cast<std::uint32_t>(arch.decoder_hidden.size()));
    const auto layers = model.ordered_layers();
    put_u32(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto* l : layers) {
        put_u32(out, static_cast<std::uint32_t>(l->out_dim()));
        put_u32(out, static_cast<std::uint32_t>(l->in_dim()));
        put_u8(out, static_cast<std::uint8_t>(l->activation));
    }
    for (const auto* l : layers) {
        for (Eigen::Index r = 0; r < l->weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l->weights.cols(); ++c) put_f32(out, static_cast<float>(l->weights(r, c)));
        for (Eigen::Index r = 0; r < l->bias.size(); ++r) put_f32(out, static_cast<float>(l->bias(r)));
    }
    return out;
}

template <class T = float>
VaeModel<T> parse_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kCheckpointMagic, "checkpoint");
    VaeArchitecture arch;
    arch.image.height = in.u32("checkpoint header");
    arch.image.width = in.u32("checkpoint header");
    arch.image.channels = in.u32("checkpoint header");
    arch.latent_dim = in.u32("checkpoint header");
    const auto n_enc = in.u32("checkpoint header");
    const auto n_dec = in.u32("checkpoint header");
    const auto n_layers = in.u32("checkpoint header");
    if (n_layers != n_enc + n_dec + 3)
        throw ParseError("checkpoint: " + std::to_string(n_layers) + " layers inconsistent with " +
                         std::to_string(n_enc) + " encoder and " + std::to_string(n_dec) + " decoder hidden layers");
    struct Shape {
        std::uint32_t out, in;
        nn::Activation act;
    };
    std::vector<Shape> shapes;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::string what = "checkpoint layer " + std::to_string(i);
        Shape s{in.u32(what), in.u32(what), nn::Activation::linear};
        s.act = nn::activation_from_tag(in.u8(what));
        shapes.push_back(s);
    }
    arch.encoder_hidden.clear();
    arch.decoder_hidden.clear();
    for (std::uint32_t i = 0; i < n_enc; ++i) arch.encoder_hidden.push_back(shapes[i].out);
    for (std::uint32_t i = 0; i < n_dec; ++i) arch.decoder_hidden.push_back(shapes[n_enc + 2 + i].out);

    VaeModel<T> model(arch);
    std::vector<nn::DenseLayer<T>*> targets;
    for (auto& l : model.encoder().layers()) targets.push_back(&l);
    targets.push_back(&model.mu_head());
    targets.push_back(&model.logvar_head());
    for (auto& l : model.decoder().layers()) targets.push_back(&l);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto* l = targets[i];
        if (static_cast<std::uint32_t>(l->out_dim()) != shapes[i].out ||
            static_cast<std::uint32_t>(l->in_dim()) != shapes[i].in || l->activation != shapes[i].act)
            throw ParseError("checkpoint layer " + std::to_string(i) + ": declared shape " +
                             std::to_string(shapes[i].out) + "x" + std::to_string(shapes[i].in) + " (" +
                             nn::to_string(shapes[i].act) + ") does not fit the architecture");
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto* l = targets[i];
        const std::string what = "checkpoint parameters of layer " + std::to_string(i);
        for (Eigen::Index r = 0; r < l->weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l->weights.cols(); ++c) l->weights(r, c) = static_cast<T>(in.f32(what));
        for (Eigen::Index r = 0; r < l->bias.size(); ++r) l->bias(r) = static_cast<T>(in.f32(what));
    }
    if (in.remaining() != 0) throw ParseError("checkpoint: " + std::to_string(in.remaining()) + " trailing bytes");
    return model;
}

template <class T>
void save_checkpoint(const VaeModel<T>& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_checkpoint(model));
}

template <class T = float>
VaeModel<T> load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint<T>(read_file(path));
}

/// Identity of a model as stored: FNV-1a of its checkpoint bytes.
template <class T>
std::uint64_t model_checksum(const VaeModel<T>& model) {
    return fnv1a(serialize_checkpoint(model));
}

}  // namespace latentlab
