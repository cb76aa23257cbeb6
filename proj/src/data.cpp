#include "tslearn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>

#include "tslearn/lcg.hpp"

namespace tsl {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t range) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % range;
    std::uint64_t v;
    do {
        v = gen();
    } while (v >= limit);
    return v % range;
}

}  // namespace

Dataset load_cifar10(const std::vector<std::filesystem::path>& paths, std::size_t classes, const Shape& image_shape) {
    if (image_shape.size() != 3) throw ConfigError("record image shape must be c x h x w");
    if (classes < 2 || classes > 256) throw ConfigError("record files support 2..256 classes");
    const std::size_t pixels = shape_numel(image_shape);
    const std::size_t record = pixels + 1;

    std::vector<float> values;
    std::vector<std::uint32_t> labels;
    for (const auto& path : paths) {
        const auto bytes = read_file(path);
        if (bytes.size() % record != 0) {
            throw FormatError(FormatError::Kind::Truncated,
                              path.string() + ": truncated record at byte offset " +
                                  std::to_string(bytes.size() - bytes.size() % record) + " (file size " +
                                  std::to_string(bytes.size()) + " is not a multiple of " +
                                  std::to_string(record) + ")");
        }
        for (std::size_t off = 0; off < bytes.size(); off += record) {
            const unsigned label = bytes[off];
            if (label >= classes) {
                throw FormatError(FormatError::Kind::Label, path.string() + ": label byte " + std::to_string(label) +
                                                                " at byte offset " + std::to_string(off) +
                                                                " exceeds " + std::to_string(classes - 1));
            }
            labels.push_back(label);
            for (std::size_t p = 0; p < pixels; ++p) values.push_back(static_cast<float>(bytes[off + 1 + p]) / 255.0f);
        }
    }
    if (labels.empty()) throw FormatError(FormatError::Kind::Layout, "record files contain no samples");
    Dataset d;
    d.images = Tensor<float>({labels.size(), image_shape[0], image_shape[1], image_shape[2]}, std::move(values));
    d.labels = std::move(labels);
    d.classes = classes;
    return d;
}

Dataset load_cifar10(const std::filesystem::path& path, std::size_t classes, const Shape& image_shape) {
    return load_cifar10(std::vector<std::filesystem::path>{path}, classes, image_shape);
}

void save_records(const Dataset& dataset, const std::filesystem::path& path) {
    if (dataset.classes > 256) throw ConfigError("record files hold at most 256 classes");
    const std::size_t pixels = dataset.images.numel() / dataset.size();
    std::vector<char> bytes;
    bytes.reserve(dataset.size() * (pixels + 1));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        bytes.push_back(static_cast<char>(dataset.labels[i]));
        for (std::size_t p = 0; p < pixels; ++p) {
            const float v = std::clamp(dataset.images[i * pixels + p], 0.0f, 1.0f);
            bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
        }
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Dataset make_synthetic(const SyntheticConfig& cfg) {
    if (cfg.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (cfg.per_class == 0) throw ConfigError("synthetic data needs at least 1 sample per class");
    if (cfg.image_shape.size() != 3) throw ConfigError("synthetic image shape must be c x h x w");
    if (!(cfg.noise >= 0.0) || !(cfg.contrast >= 0.0)) throw ConfigError("noise and contrast must be non-negative");

    const std::size_t ch = cfg.image_shape[0], h = cfg.image_shape[1], w = cfg.image_shape[2];
    const std::size_t pixels = ch * h * w;
    const double two_pi = 2.0 * std::numbers::pi;

    // Noise-free class templates.
    std::vector<std::vector<double>> templates(cfg.classes, std::vector<double>(pixels));
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(cfg.classes);
        const double base_freq = 1.5 + 0.5 * static_cast<double>(k % 3);
        const double ramp = 2.0 + static_cast<double>(k % 2);
        for (std::size_t c = 0; c < ch; ++c) {
            const double phase = two_pi * static_cast<double>(c) / static_cast<double>(ch);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double cx = (static_cast<double>(x) - 0.5 * static_cast<double>(w - 1)) / static_cast<double>(w);
                    const double cy = (static_cast<double>(y) - 0.5 * static_cast<double>(h - 1)) / static_cast<double>(h);
                    const double u = cx * std::cos(angle) + cy * std::sin(angle);
                    // Frequency grows linearly along u: d(phase)/du = base_freq + ramp * u.
                    const double v = std::sin(two_pi * (base_freq * u + 0.5 * ramp * u * u) + phase);
                    templates[k][(c * h + y) * w + x] = 0.5 + cfg.contrast * v;
                }
            }
        }
    }

    const std::size_t n = cfg.classes * cfg.per_class;
    std::vector<float> values(n * pixels);
    std::vector<std::uint32_t> labels(n);
    LcgState lcg = default_lcg(cfg.seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % cfg.classes;
        labels[i] = static_cast<std::uint32_t>(k);
        for (std::size_t p = 0; p < pixels; ++p) {
            const double noise = cfg.noise * (2.0 * lcg_unit(lcg) - 1.0);
            values[i * pixels + p] = static_cast<float>(std::clamp(templates[k][p] + noise, 0.0, 1.0));
        }
    }
    Dataset d;
    d.images = Tensor<float>({n, ch, h, w}, std::move(values));
    d.labels = std::move(labels);
    d.classes = cfg.classes;
    return d;
}

Tensor<float> one_hot(const std::vector<std::uint32_t>& labels, std::size_t classes) {
    Tensor<float> t({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw ValidationError("label " + std::to_string(labels[i]) + " out of range");
        t[i * classes + labels[i]] = 1.0f;
    }
    return t;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(e >> 32)};
    std::mt19937_64 gen(seq);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded(gen, i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, const BatchPlan& plan, std::size_t epoch) {
    if (plan.batch_size == 0) throw ConfigError("batch size must be positive");
    if (plan.batch_size > n) {
        throw ConfigError("batch size " + std::to_string(plan.batch_size) + " exceeds dataset size " + std::to_string(n));
    }
    const auto perm = epoch_permutation(n, plan.seed, epoch);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += plan.batch_size) {
        const std::size_t end = std::min(n, start + plan.batch_size);
        if (plan.drop_last && end - start < plan.batch_size) break;
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

Batch gather(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    const std::size_t pixels = dataset.images.numel() / dataset.size();
    const auto shape = dataset.image_shape();
    std::vector<float> values;
    values.reserve(indices.size() * pixels);
    std::vector<std::uint32_t> labels;
    labels.reserve(indices.size());
    for (std::size_t idx : indices) {
        const auto src = dataset.images.data().subspan(idx * pixels, pixels);
        values.insert(values.end(), src.begin(), src.end());
        labels.push_back(dataset.labels.at(idx));
    }
    Batch b;
    b.images = Tensor<float>({indices.size(), shape[0], shape[1], shape[2]}, std::move(values));
    b.targets = one_hot(labels, dataset.classes);
    b.labels = std::move(labels);
    b.real_count = indices.size();
    return b;
}

std::vector<Batch> batches(const Dataset& dataset, const BatchPlan& plan, std::size_t epoch) {
    std::vector<Batch> out;
    for (const auto& idx : batch_indices(dataset.size(), plan, epoch)) out.push_back(gather(dataset, idx));
    return out;
}

Batch whole(const Dataset& dataset) {
    std::vector<std::size_t> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return gather(dataset, idx);
}

}  // namespace tsl
