#include "tslearn/model.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "tslearn/kernels.hpp"

namespace tsl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::size_t parse_count(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto t = trim(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError("invalid " + what + " '" + s + "'");
    }
    return v;
}

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Linear: return "linear";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::Flatten: return "flatten";
    }
    return "?";
}

std::string layer_error(std::size_t index, const LayerSpec& layer, const std::string& what) {
    return "layer " + std::to_string(index) + " (" + kind_name(layer.kind) + "): " + what;
}

// Uniform in [0, 1) from the top 53 bits; portable, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string format_shape(const Shape& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s;
}

Shape parse_shape(const std::string& text) {
    Shape shape;
    for (const auto& part : split(text, 'x')) {
        const std::size_t v = parse_count(part, "shape extent");
        if (v == 0) throw ConfigError("shape extents must be positive in '" + text + "'");
        shape.push_back(v);
    }
    return shape;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
    std::string s;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) s += ";";
        const LayerSpec& l = layers[i];
        s += kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::Conv2d:
                s += "(" + std::to_string(l.channels) + "," + std::to_string(l.kernel) + "," +
                     std::to_string(l.stride) + "," + std::to_string(l.padding) + ")";
                break;
            case LayerKind::Linear: s += "(" + std::to_string(l.width) + ")"; break;
            case LayerKind::MaxPool2d:
                s += "(" + std::to_string(l.kernel) + "," + std::to_string(l.stride) + ")";
                break;
            default: break;
        }
    }
    return s;
}

std::vector<LayerSpec> parse_layers(const std::string& text) {
    std::vector<LayerSpec> layers;
    if (trim(text).empty()) return layers;
    for (const auto& item : split(text, ';')) {
        std::string name = item;
        std::vector<std::size_t> args;
        const auto open = item.find('(');
        if (open != std::string::npos) {
            if (item.back() != ')') throw ConfigError("unterminated layer arguments in '" + item + "'");
            name = trim(item.substr(0, open));
            for (const auto& a : split(item.substr(open + 1, item.size() - open - 2), ','))
                args.push_back(parse_count(a, "layer argument"));
        }
        auto want = [&](std::size_t lo, std::size_t hi) {
            if (args.size() < lo || args.size() > hi) {
                throw ConfigError("layer '" + item + "' takes " + std::to_string(lo) + ".." +
                                  std::to_string(hi) + " arguments");
            }
        };
        if (name == "conv2d") {
            want(2, 4);
            layers.push_back(LayerSpec::conv2d(args[0], args[1], args.size() > 2 ? args[2] : 1,
                                               args.size() > 3 ? args[3] : 0));
        } else if (name == "linear") {
            want(1, 1);
            layers.push_back(LayerSpec::linear(args[0]));
        } else if (name == "maxpool2d") {
            want(1, 2);
            layers.push_back(LayerSpec::maxpool2d(args[0], args.size() > 1 ? args[1] : args[0]));
        } else if (name == "relu") {
            want(0, 0);
            layers.push_back(LayerSpec::relu());
        } else if (name == "flatten") {
            want(0, 0);
            layers.push_back(LayerSpec::flatten());
        } else {
            throw ConfigError("unknown layer kind '" + name + "'");
        }
    }
    return layers;
}

std::string format_spec(const NetworkSpec& spec) {
    return "input=" + format_shape(spec.input) + " layers=" + format_layers(spec.layers) +
           " features=" + std::to_string(spec.feature_dim) + " classes=" + std::to_string(spec.num_classes);
}

NetworkSpec parse_spec(const std::string& text) {
    NetworkSpec spec;
    bool seen[4] = {false, false, false, false};
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ConfigError("spec token '" + token + "' is not key=value");
        const std::string key = token.substr(0, eq), val = token.substr(eq + 1);
        if (key == "input") {
            spec.input = parse_shape(val);
            seen[0] = true;
        } else if (key == "layers") {
            spec.layers = parse_layers(val);
            seen[1] = true;
        } else if (key == "features") {
            spec.feature_dim = parse_count(val, "features");
            seen[2] = true;
        } else if (key == "classes") {
            spec.num_classes = parse_count(val, "classes");
            seen[3] = true;
        } else {
            throw ConfigError("unknown spec key '" + key + "'");
        }
    }
    const char* names[4] = {"input", "layers", "features", "classes"};
    for (int i = 0; i < 4; ++i)
        if (!seen[i]) throw ConfigError(std::string("spec is missing '") + names[i] + "'");
    return spec;
}

std::vector<Shape> propagate_shapes(const NetworkSpec& spec) {
    if (spec.input.size() != 3) throw ConfigError("input shape must be c x h x w, got " + shape_str(spec.input));
    if (spec.feature_dim == 0) throw ConfigError("feature dimension must be positive");
    if (spec.num_classes < 2) throw ConfigError("class count must be at least 2");
    std::vector<Shape> shapes;
    Shape cur = spec.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        try {
            switch (l.kind) {
                case LayerKind::Conv2d:
                    if (cur.size() != 3) throw ConfigError("expects c x h x w input, got " + shape_str(cur));
                    if (l.channels == 0) throw ConfigError("output channels must be positive");
                    cur = {l.channels, kernels::window_extent(cur[1], l.kernel, l.stride, l.padding, "conv2d"),
                           kernels::window_extent(cur[2], l.kernel, l.stride, l.padding, "conv2d")};
                    break;
                case LayerKind::MaxPool2d:
                    if (cur.size() != 3) throw ConfigError("expects c x h x w input, got " + shape_str(cur));
                    cur = {cur[0], kernels::window_extent(cur[1], l.kernel, l.stride, 0, "maxpool2d"),
                           kernels::window_extent(cur[2], l.kernel, l.stride, 0, "maxpool2d")};
                    break;
                case LayerKind::Flatten: cur = {shape_numel(cur)}; break;
                case LayerKind::Linear:
                    if (cur.size() != 1) throw ConfigError("expects flat input, got " + shape_str(cur));
                    if (l.width == 0) throw ConfigError("width must be positive");
                    cur = {l.width};
                    break;
                case LayerKind::Relu: break;
            }
        } catch (const ConfigError& e) {
            throw ConfigError(layer_error(i, l, e.what()));
        }
        shapes.push_back(cur);
    }
    if (cur.size() != 1 || cur[0] != spec.feature_dim) {
        throw ConfigError("layer stack ends in " + shape_str(cur) + " but features=" +
                          std::to_string(spec.feature_dim) + " requires a flat vector of that length");
    }
    return shapes;
}

namespace {

// (name, shape, fan_in) of every parameter in layer order.
struct ParamLayout {
    std::string name;
    Shape shape;
    std::size_t fan_in;
    bool is_bias;
};

std::vector<ParamLayout> parameter_layout(const NetworkSpec& spec) {
    const auto shapes = propagate_shapes(spec);
    std::vector<ParamLayout> out;
    Shape in = spec.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::string prefix = "layers." + std::to_string(i) + ".";
        if (l.kind == LayerKind::Conv2d) {
            const std::size_t fan = in[0] * l.kernel * l.kernel;
            out.push_back({prefix + "weight", {l.channels, in[0], l.kernel, l.kernel}, fan, false});
            out.push_back({prefix + "bias", {l.channels}, fan, true});
        } else if (l.kind == LayerKind::Linear) {
            out.push_back({prefix + "weight", {in[0], l.width}, in[0], false});
            out.push_back({prefix + "bias", {l.width}, in[0], true});
        }
        in = shapes[i];
    }
    out.push_back({"head.weight", {spec.feature_dim, spec.num_classes}, spec.feature_dim, false});
    out.push_back({"head.bias", {spec.num_classes}, spec.feature_dim, true});
    return out;
}

}  // namespace

std::size_t parameter_count(const NetworkSpec& spec) {
    std::size_t total = 0;
    for (const auto& p : parameter_layout(spec)) total += shape_numel(p.shape);
    return total;
}

CompatibilityReport validate_pair(const NetworkSpec& teacher, const NetworkSpec& student) {
    CompatibilityReport r;
    if (teacher.feature_dim != student.feature_dim) {
        r.violations.push_back("feature dimension: teacher d=" + std::to_string(teacher.feature_dim) +
                               " vs student d=" + std::to_string(student.feature_dim));
    }
    if (teacher.num_classes != student.num_classes) {
        r.violations.push_back("class count: teacher c=" + std::to_string(teacher.num_classes) +
                               " vs student c=" + std::to_string(student.num_classes));
    }
    r.compatible = r.violations.empty();
    return r;
}

template <class T>
ModelState<T>::ModelState(NetworkSpec spec, std::vector<NamedParameter<T>> parameters)
    : spec_(std::move(spec)), params_(std::move(parameters)) {
    const auto layout = parameter_layout(spec_);
    if (layout.size() != params_.size()) {
        throw DimensionError("model expects " + std::to_string(layout.size()) + " parameter tensors, got " +
                             std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (params_[i].tensor.shape() != layout[i].shape || params_[i].name != layout[i].name) {
            throw DimensionError("parameter " + std::to_string(i) + " '" + params_[i].name + "' " +
                                 shape_str(params_[i].tensor.shape()) + " does not match spec '" +
                                 layout[i].name + "' " + shape_str(layout[i].shape));
        }
    }
}

template <class T>
std::vector<NamedParameter<T>>& ModelState<T>::mutable_parameters() {
    if (frozen()) throw UsageError("model is frozen; its parameters are immutable");
    return params_;
}

template <class T>
void ModelState<T>::freeze() {
    mode_ = ModelMode::Frozen;
    for (auto& p : params_) p.tensor.clear_grad();
}

template <class T>
void ModelState<T>::check_batch(const Tensor<T>& batch) const {
    if (batch.rank() != 4 || batch.dim(1) != spec_.input[0] || batch.dim(2) != spec_.input[1] ||
        batch.dim(3) != spec_.input[2]) {
        throw DimensionError("batch " + shape_str(batch.shape()) + " does not match model input " +
                             shape_str(spec_.input));
    }
}

template <class T>
ForwardVars<T> ModelState<T>::forward(Graph<T>& graph, Var batch) {
    if (frozen()) throw UsageError("frozen models do not record graphs; use infer()");
    check_batch(graph.value(batch));
    Var cur = batch;
    std::size_t p = 0;
    for (const LayerSpec& l : spec_.layers) {
        switch (l.kind) {
            case LayerKind::Conv2d: {
                const Var w = graph.parameter(params_[p].tensor);
                const Var b = graph.parameter(params_[p + 1].tensor);
                p += 2;
                cur = graph.conv2d(cur, w, b, l.stride, l.padding);
                break;
            }
            case LayerKind::Linear: {
                const Var w = graph.parameter(params_[p].tensor);
                const Var b = graph.parameter(params_[p + 1].tensor);
                p += 2;
                cur = graph.linear(cur, w, b);
                break;
            }
            case LayerKind::Relu: cur = graph.relu(cur); break;
            case LayerKind::MaxPool2d: cur = graph.maxpool2d(cur, l.kernel, l.stride); break;
            case LayerKind::Flatten: cur = graph.flatten(cur); break;
        }
    }
    const Var w = graph.parameter(params_[p].tensor);
    const Var b = graph.parameter(params_[p + 1].tensor);
    return {cur, graph.linear(cur, w, b)};
}

template <class T>
ForwardResult<T> ModelState<T>::infer(const Tensor<T>& batch) const {
    check_batch(batch);
    const std::size_t m = batch.dim(0);
    Tensor<T> cur = batch;
    std::size_t p = 0;
    auto linear = [&](const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
        const kernels::LinearGeometry geo{m, x.numel() / m, w.dim(1)};
        Tensor<T> y({m, geo.columns});
        kernels::linear_forward<T>(geo, x.data(), w.data(), b.data(), y.data());
        return y;
    };
    for (const LayerSpec& l : spec_.layers) {
        switch (l.kind) {
            case LayerKind::Conv2d: {
                const Tensor<T>& k = params_[p].tensor;
                const kernels::ConvGeometry geo{m, cur.dim(1), cur.dim(2), cur.dim(3), k.dim(0),
                                                k.dim(2), k.dim(3), l.stride, l.padding};
                Tensor<T> y({m, geo.out_channels, geo.out_h(), geo.out_w()});
                kernels::conv2d_forward<T>(geo, cur.data(), k.data(), params_[p + 1].tensor.data(), y.data());
                cur = std::move(y);
                p += 2;
                break;
            }
            case LayerKind::Linear:
                cur = linear(cur, params_[p].tensor, params_[p + 1].tensor);
                p += 2;
                break;
            case LayerKind::Relu: {
                Tensor<T> y(cur.shape());
                kernels::relu_forward<T>(cur.data(), y.data());
                cur = std::move(y);
                break;
            }
            case LayerKind::MaxPool2d: {
                const kernels::PoolGeometry geo{m, cur.dim(1), cur.dim(2), cur.dim(3), l.kernel, l.stride};
                Tensor<T> y({m, geo.channels, geo.out_h(), geo.out_w()});
                std::vector<std::size_t> argmax(y.numel());
                kernels::maxpool2d_forward<T>(geo, cur.data(), y.data(), argmax);
                cur = std::move(y);
                break;
            }
            case LayerKind::Flatten: cur = cur.reshaped({m, cur.numel() / m}); break;
        }
    }
    Tensor<T> logits = linear(cur, params_[p].tensor, params_[p + 1].tensor);
    return {std::move(cur), std::move(logits)};
}

template <class T>
ModelState<T> build_model(const NetworkSpec& spec, std::uint64_t init_seed) {
    std::mt19937_64 gen(init_seed);
    std::vector<NamedParameter<T>> params;
    for (const auto& layout : parameter_layout(spec)) {
        Tensor<T> t(layout.shape);
        if (!layout.is_bias) {
            const double bound = std::sqrt(6.0 / static_cast<double>(layout.fan_in));
            for (auto& v : t.values()) v = static_cast<T>((2.0 * unit_uniform(gen) - 1.0) * bound);
        }
        params.push_back({layout.name, std::move(t)});
    }
    return ModelState<T>(spec, std::move(params));
}

template class ModelState<float>;
template class ModelState<double>;
template ModelState<float> build_model<float>(const NetworkSpec&, std::uint64_t);
template ModelState<double> build_model<double>(const NetworkSpec&, std::uint64_t);

}  // namespace tsl
