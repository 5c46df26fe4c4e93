#pragma once

// Procedural three-category product corpus: bags, footwear, eyewear.
//
// Every item is a pure function of its ItemSpec and the canvas size, drawn on
// a white background with 4x4 supersampling and snapped to 8 bits so that the
// on-disk pixmaps round-trip exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "latentlab/binary_io.hpp"
#include "latentlab/error.hpp"
#include "latentlab/image.hpp"

namespace latentlab {

enum class Category : std::uint8_t { bag = 0, footwear = 1, eyewear = 2 };

inline constexpr std::size_t kCategoryCount = 3;
inline constexpr std::array<Category, kCategoryCount> kCategories{Category::bag, Category::footwear, Category::eyewear};

inline std::string_view to_string(Category c) {
    switch (c) {
        case Category::bag: return "bag";
        case Category::footwear: return "footwear";
        case Category::eyewear: return "eyewear";
    }
    return "unknown";
}

inline Category category_from_string(std::string_view s) {
    for (auto c : kCategories)
        if (to_string(c) == s) return c;
    throw ParseError("unknown category \"" + std::string(s) + "\"");
}

inline Category category_from_tag(std::uint8_t tag) {
    if (tag >= kCategoryCount) throw ParseError("category tag " + std::to_string(tag) + " out of range");
    return static_cast<Category>(tag);
}

inline std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

struct ItemSpec {
    Category category = Category::bag;
    double hue = 0.0;        // [0, 1)
    double scale = 0.75;     // [0.5, 1.0]
    double thickness = 0.1;  // [0.05, 0.3]
    double aspect = 1.0;     // [0.5, 2.0]
    std::uint64_t seed = 0;

    void validate() const {
        auto check = [](double v, double lo, double hi, bool hi_open, const char* name) {
            if (!(v >= lo && (hi_open ? v < hi : v <= hi)))
                throw DomainError(std::string(name) + " = " + std::to_string(v) + " outside its range");
        };
        check(hue, 0.0, 1.0, true, "hue");
        check(scale, 0.5, 1.0, false, "scale");
        check(thickness, 0.05, 0.3, false, "thickness");
        check(aspect, 0.5, 2.0, false, "aspect");
        if (index_of(category) >= kCategoryCount) throw DomainError("invalid category");
    }
};

namespace detail {

struct Rgb {
    double r = 1.0, g = 1.0, b = 1.0;
};

inline Rgb hue_color(double hue) {
    // Fully saturated HSV at full value.
    const double s = 1.0, v = 1.0;
    const double h6 = hue * 6.0;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

inline Rgb shade(Rgb c, double k) { return {c.r * k, c.g * k, c.b * k}; }

inline Rgb tint(Rgb c, double white) {
    return {c.r * (1 - white) + white, c.g * (1 - white) + white, c.b * (1 - white) + white};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Shape painter: returns the color at a point, or nullopt for background.
using Painter = std::optional<Rgb> (*)(const ItemSpec&, double, double, double, double, double, double);

inline bool in_rounded_rect(double x, double y, double x0, double y0, double x1, double y1, double radius) {
    if (x < x0 || x > x1 || y < y0 || y > y1) return false;
    const double cx = std::clamp(x, x0 + radius, x1 - radius);
    const double cy = std::clamp(y, y0 + radius, y1 - radius);
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
}

// Geometry below works in pixel units; `unit` is the short canvas side and
// (cx, cy) the jittered canvas center.

inline std::optional<Rgb> paint_bag(const ItemSpec& s, double x, double y, double unit, double stroke_unit, double cx,
                                    double cy) {
    const double f = std::pow(s.aspect, 0.2);
    const double bw = unit * (0.35 + 0.3 * s.scale) * f;
    const double bh = unit * (0.3 + 0.25 * s.scale) / f;
    const double hr = 0.3 * bw;
    const double stroke = (1.0 + s.thickness * 6.0) * stroke_unit;
    const double total = bh + hr + stroke / 2;
    const double top = cy - total / 2;
    const double body_top = top + hr + stroke / 2;
    const Rgb color = hue_color(s.hue);
    if (in_rounded_rect(x, y, cx - bw / 2, body_top, cx + bw / 2, body_top + bh, 0.15 * std::min(bw, bh)))
        return color;
    const double d = std::hypot(x - cx, y - body_top);
    if (y <= body_top && std::abs(d - hr) <= stroke / 2) return shade(color, 0.6);
    return std::nullopt;
}

inline std::optional<Rgb> paint_footwear(const ItemSpec& s, double x, double y, double unit, double stroke_unit,
                                         double cx, double cy) {
    const double len = unit * (0.5 + 0.4 * s.scale);
    const double h = len / (2.4 * std::pow(s.aspect, 0.3));
    const double sole = (1.0 + s.thickness * 6.0) * stroke_unit;
    const double x0 = cx - len / 2;
    const double bottom = cy + h / 2;
    const Rgb color = hue_color(s.hue);
    if (x < x0 || x > x0 + len || y > bottom) return std::nullopt;
    if (y >= bottom - sole) return shade(color, 0.45);
    // Upper: full height over the heel, then sloping down to a low toe.
    const double u = (x - x0) / len;
    const double toe = sole + 0.3 * h;
    const double height = u <= 0.4 ? h : h + (toe - h) * (u - 0.4) / 0.6;
    if (y >= bottom - height) return color;
    return std::nullopt;
}

inline std::optional<Rgb> paint_eyewear(const ItemSpec& s, double x, double y, double unit, double stroke_unit,
                                        double cx, double cy) {
    const double r = unit * (0.1 + 0.09 * s.scale);
    const double rx = r * std::pow(s.aspect, 0.1);
    const double ry = r / std::pow(s.aspect, 0.1);
    const double stroke = (0.8 + s.thickness * 4.0) * stroke_unit;
    const double gap = 0.5 * r;
    const double lcx = cx - gap / 2 - rx;
    const double rcx = cx + gap / 2 + rx;
    const Rgb color = hue_color(s.hue);
    for (double lens_cx : {lcx, rcx}) {
        const double e = std::hypot((x - lens_cx) / rx, (y - cy) / ry);
        const double dist = (e - 1.0) * std::min(rx, ry);
        if (std::abs(dist) <= stroke / 2) return color;
        if (dist < 0) return tint(color, 0.85);
    }
    const double bridge_y = cy - 0.2 * ry;
    if (x >= lcx + rx && x <= rcx - rx && std::abs(y - bridge_y) <= stroke / 2) return color;
    return std::nullopt;
}

}  // namespace detail

/// Draws one item. Deterministic in (spec, dims); the spec seed only picks a
/// +-1 pixel placement jitter.
inline Image render_item(const ItemSpec& spec, ImageDims dims) {
    spec.validate();
    if (dims.channels != 1 && dims.channels != 3)
        throw DimensionError("render: channels must be 1 or 3, got " + std::to_string(dims.channels));
    Image image(dims, 1.0f);
    const double unit = static_cast<double>(std::min(dims.height, dims.width));
    const double stroke_unit = unit / 32.0;
    const std::uint64_t jitter = detail::splitmix64(spec.seed);
    const double jx = static_cast<double>(jitter % 3) - 1.0;
    const double jy = static_cast<double>((jitter / 3) % 3) - 1.0;
    const double cx = static_cast<double>(dims.width) / 2 + jx;
    const double cy = static_cast<double>(dims.height) / 2 + jy;

    detail::Painter paint = nullptr;
    switch (spec.category) {
        case Category::bag: paint = detail::paint_bag; break;
        case Category::footwear: paint = detail::paint_footwear; break;
        case Category::eyewear: paint = detail::paint_eyewear; break;
    }
    constexpr int kSub = 4;
    for (std::size_t py = 0; py < dims.height; ++py) {
        for (std::size_t px = 0; px < dims.width; ++px) {
            detail::Rgb acc{0, 0, 0};
            for (int sy = 0; sy < kSub; ++sy) {
                for (int sx = 0; sx < kSub; ++sx) {
                    const double x = static_cast<double>(px) + (sx + 0.5) / kSub;
                    const double y = static_cast<double>(py) + (sy + 0.5) / kSub;
                    const auto c = paint(spec, x, y, unit, stroke_unit, cx, cy).value_or(detail::Rgb{});
                    acc.r += c.r;
                    acc.g += c.g;
                    acc.b += c.b;
                }
            }
            const double n = kSub * kSub;
            if (dims.channels == 3) {
                image.at(py, px, 0) = static_cast<float>(acc.r / n);
                image.at(py, px, 1) = static_cast<float>(acc.g / n);
                image.at(py, px, 2) = static_cast<float>(acc.b / n);
            } else {
                image.at(py, px, 0) = static_cast<float>((0.299 * acc.r + 0.587 * acc.g + 0.114 * acc.b) / n);
            }
        }
    }
    quantize_in_place(image);
    return image;
}

/// Foreground = pixels whose darkest channel is below this level; the light
/// lens tint and anti-aliased fringes stay background.
inline constexpr float kForegroundLevel = 0.75f;

inline std::size_t foreground_pixel_count(const Image& image) {
    std::size_t n = 0;
    for (std::size_t y = 0; y < image.dims.height; ++y)
        for (std::size_t x = 0; x < image.dims.width; ++x) {
            float m = 1.0f;
            for (std::size_t c = 0; c < image.dims.channels; ++c) m = std::min(m, image.at(y, x, c));
            if (m < kForegroundLevel) ++n;
        }
    return n;
}

/// Hand-written silhouette heuristic: squat-ish bounding box means bag; a wide
/// box that is sparsely filled means eyewear (two rings); wide and dense means
/// footwear. nullopt on a blank image.
inline std::optional<Category> classify_silhouette(const Image& image) {
    std::size_t x0 = image.dims.width, x1 = 0, y0 = image.dims.height, y1 = 0, count = 0;
    for (std::size_t y = 0; y < image.dims.height; ++y)
        for (std::size_t x = 0; x < image.dims.width; ++x) {
            float m = 1.0f;
            for (std::size_t c = 0; c < image.dims.channels; ++c) m = std::min(m, image.at(y, x, c));
            if (m < kForegroundLevel) {
                ++count;
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
    if (count == 0) return std::nullopt;
    const double w = static_cast<double>(x1 - x0 + 1);
    const double h = static_cast<double>(y1 - y0 + 1);
    if (w / h < 1.6) return Category::bag;
    const double fill = static_cast<double>(count) / (w * h);
    return fill < 0.6 ? Category::eyewear : Category::footwear;
}

struct CorpusItem {
    Image image;
    Category category = Category::bag;
    ItemSpec spec;
};

struct Corpus {
    ImageDims dims;
    std::uint64_t seed = 0;
    std::vector<CorpusItem> items;

    [[nodiscard]] std::array<std::size_t, kCategoryCount> counts() const {
        std::array<std::size_t, kCategoryCount> c{};
        for (const auto& it : items) ++c[index_of(it.category)];
        return c;
    }
    [[nodiscard]] std::size_t size() const { return items.size(); }
    [[nodiscard]] bool empty() const { return items.empty(); }

    [[nodiscard]] std::vector<Image> images() const {
        std::vector<Image> out;
        out.reserve(items.size());
        for (const auto& it : items) out.push_back(it.image);
        return out;
    }

    [[nodiscard]] std::vector<Category> tags() const {
        std::vector<Category> out;
        out.reserve(items.size());
        for (const auto& it : items) out.push_back(it.category);
        return out;
    }

    /// FNV-1a over dims, tags and 8-bit pixels; identical before save and after load.
    [[nodiscard]] std::uint64_t checksum() const {
        Fnv1a h;
        h.update_u64(dims.height);
        h.update_u64(dims.width);
        h.update_u64(dims.channels);
        h.update_u64(items.size());
        Bytes buf;
        for (const auto& it : items) {
            buf.clear();
            buf.push_back(static_cast<std::uint8_t>(it.category));
            for (float p : it.image.pixels) buf.push_back(quantize_u8(p));
            h.update(buf);
        }
        return h.value();
    }
};

inline std::uint64_t item_seed(std::uint64_t corpus_seed, std::size_t index) {
    return detail::splitmix64(corpus_seed ^ detail::splitmix64(static_cast<std::uint64_t>(index)));
}

/// Items in category order (bags, footwear, eyewear). Item i draws its
/// attributes from its own stream seeded by (seed, i), so items are
/// independent of one another.
inline Corpus generate_corpus(const std::array<std::size_t, kCategoryCount>& counts, ImageDims dims,
                              std::uint64_t seed) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw EmptyCorpusError("generate_corpus: all category counts are zero");
    Corpus corpus{dims, seed, {}};
    corpus.items.reserve(total);
    std::size_t index = 0;
    for (auto cat : kCategories) {
        for (std::size_t n = 0; n < counts[index_of(cat)]; ++n, ++index) {
            std::mt19937_64 rng(item_seed(seed, index));
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            ItemSpec spec;
            spec.category = cat;
            spec.hue = u01(rng);
            spec.scale = 0.5 + 0.5 * u01(rng);
            spec.thickness = 0.05 + 0.25 * u01(rng);
            spec.aspect = 0.5 + 1.5 * u01(rng);
            spec.seed = item_seed(seed, index);
            corpus.items.push_back({render_item(spec, dims), cat, spec});
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// On disk: <dir>/manifest.tsv plus <dir>/images/NNNNNN.ppm (or .pgm for one
// channel). The manifest starts with "# key value" metadata lines, then a
// header row and one tab-separated record per item.

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string image_file_name(std::size_t index, std::size_t channels) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.%s", index, channels == 1 ? "pgm" : "ppm");
    return buf;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

inline constexpr std::string_view kManifestHeader = "index\tfilename\tcategory\thue\tscale\tthickness\taspect";

inline std::string manifest_text(const Corpus& corpus) {
    const auto c = corpus.counts();
    std::string out;
    out += "# latentlab-corpus 1\n";
    out += "# dims " + std::to_string(corpus.dims.height) + " " + std::to_string(corpus.dims.width) + " " +
           std::to_string(corpus.dims.channels) + "\n";
    out += "# seed " + std::to_string(corpus.seed) + "\n";
    out += "# counts " + std::to_string(c[0]) + " " + std::to_string(c[1]) + " " + std::to_string(c[2]) + "\n";
    out += kManifestHeader;
    out += "\n";
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        const auto& it = corpus.items[i];
        out += std::to_string(i) + "\t" + detail::image_file_name(i, corpus.dims.channels) + "\t" +
               std::string(to_string(it.category)) + "\t" + detail::format_double(it.spec.hue) + "\t" +
               detail::format_double(it.spec.scale) + "\t" + detail::format_double(it.spec.thickness) + "\t" +
               detail::format_double(it.spec.aspect) + "\n";
    }
    return out;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    for (std::size_t i = 0; i < corpus.items.size(); ++i)
        write_file_atomic(dir / "images" / detail::image_file_name(i, corpus.dims.channels),
                          encode_pnm(corpus.items[i].image));
    write_file_atomic(dir / "manifest.tsv", manifest_text(corpus));
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const auto manifest = dir / "manifest.tsv";
    if (!fs::exists(manifest)) throw EmptyCorpusError("no corpus at " + dir.string() + " (manifest.tsv missing)");
    std::ifstream in(manifest);
    if (!in) throw Error("cannot open " + manifest.string());

    Corpus corpus;
    std::optional<std::array<std::size_t, kCategoryCount>> declared_counts;
    bool have_dims = false;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) -> ParseError {
        return ParseError(manifest.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string key;
            meta >> key;
            if (key == "dims") {
                if (!(meta >> corpus.dims.height >> corpus.dims.width >> corpus.dims.channels))
                    throw fail("malformed dims line");
                have_dims = true;
            } else if (key == "seed") {
                if (!(meta >> corpus.seed)) throw fail("malformed seed line");
            } else if (key == "counts") {
                std::array<std::size_t, kCategoryCount> c{};
                if (!(meta >> c[0] >> c[1] >> c[2])) throw fail("malformed counts line");
                declared_counts = c;
            }
            continue;
        }
        if (!have_header) {
            if (line != kManifestHeader) throw fail("expected header row \"" + std::string(kManifestHeader) + "\"");
            have_header = true;
            if (!have_dims) throw fail("dims metadata missing before header");
            continue;
        }
        const auto cols = detail::split_tabs(line);
        if (cols.size() != 7) throw fail("expected 7 columns, got " + std::to_string(cols.size()));
        CorpusItem item;
        std::size_t index = 0;
        std::size_t used = 0;
        try {
            index = std::stoull(cols[0], &used);
            item.category = category_from_string(cols[2]);
            item.spec.category = item.category;
            item.spec.hue = std::stod(cols[3]);
            item.spec.scale = std::stod(cols[4]);
            item.spec.thickness = std::stod(cols[5]);
            item.spec.aspect = std::stod(cols[6]);
        } catch (const std::exception& e) {
            throw fail(std::string("bad field: ") + e.what());
        }
        if (used != cols[0].size()) throw fail("bad index \"" + cols[0] + "\"");
        if (index != corpus.items.size())
            throw fail("index " + std::to_string(index) + " out of sequence, expected " +
                       std::to_string(corpus.items.size()));
        item.spec.seed = item_seed(corpus.seed, index);
        const auto path = dir / "images" / cols[1];
        Bytes bytes;
        try {
            bytes = read_file(path);
        } catch (const Error&) {
            throw ParseError("item " + std::to_string(index) + ": cannot read " + path.string());
        }
        try {
            item.image = decode_pnm(bytes);
        } catch (const ParseError& e) {
            throw ParseError("item " + std::to_string(index) + " (" + path.string() + "): " + e.what());
        }
        if (item.image.dims != corpus.dims)
            throw ParseError("item " + std::to_string(index) + ": image is " + item.image.dims.str() + ", corpus is " +
                             corpus.dims.str());
        corpus.items.push_back(std::move(item));
    }
    if (corpus.items.empty()) throw EmptyCorpusError("corpus at " + dir.string() + " has no items");
    if (declared_counts && *declared_counts != corpus.counts())
        throw ParseError(manifest.string() + ": declared counts do not match the records");
    return corpus;
}

}  // namespace latentlab
