#include "tslearn/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace tsl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"experiment",
         {"mode", "epochs", "batch_size", "drop_last", "lambda_mse", "lambda_xent", "xent_reduction", "record_time"}},
        {"teacher", {"input", "layers", "features", "classes"}},
        {"student", {"input", "layers", "features", "classes"}},
        {"optimizer", {"lr", "beta1", "beta2", "epsilon", "decay_every", "decay_factor"}},
        {"augment", {"images_per_batch", "lcg_a", "lcg_c", "lcg_m"}},
        {"data",
         {"kind", "classes", "shape", "train_per_class", "test_per_class", "noise", "contrast", "seed", "train",
          "test"}},
        {"seeds", {"init", "shuffle", "augment"}},
    };
    return keys;
}

class Fields {
public:
    explicit Fields(const ConfigFile& f) : f_(f) {}

    const ConfigFile::Entry& require(const std::string& s, const std::string& k) const { return f_.require(s, k); }

    std::uint64_t uint(const std::string& s, const std::string& k, std::uint64_t fallback, bool required = false) const {
        const auto* e = required ? &f_.require(s, k) : f_.find(s, k);
        if (!e) return fallback;
        std::uint64_t v = 0;
        const auto& t = e->value;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
            throw ConfigError("[" + s + "] " + k + " must be a non-negative integer, got '" + t + "'", e->line);
        }
        return v;
    }

    double real(const std::string& s, const std::string& k, double fallback, bool required = false) const {
        const auto* e = required ? &f_.require(s, k) : f_.find(s, k);
        if (!e) return fallback;
        double v = 0.0;
        const auto& t = e->value;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
            throw ConfigError("[" + s + "] " + k + " must be a number, got '" + t + "'", e->line);
        }
        return v;
    }

    bool boolean(const std::string& s, const std::string& k, bool fallback) const {
        const auto* e = f_.find(s, k);
        if (!e) return fallback;
        if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
        if (e->value == "false" || e->value == "0" || e->value == "no") return false;
        throw ConfigError("[" + s + "] " + k + " must be true or false, got '" + e->value + "'", e->line);
    }

    template <class F>
    auto with_line(const ConfigFile::Entry& e, F&& f) const {
        try {
            return f(e.value);
        } catch (const ConfigError& err) {
            if (err.line() > 0) throw;
            throw ConfigError(err.what(), e.line);
        }
    }

    NetworkSpec network(const std::string& section) const {
        NetworkSpec spec;
        spec.input = with_line(require(section, "input"), parse_shape);
        spec.layers = with_line(require(section, "layers"), parse_layers);
        spec.feature_dim = uint(section, "features", 0, true);
        spec.num_classes = uint(section, "classes", 0, true);
        try {
            propagate_shapes(spec);
        } catch (const ConfigError& e) {
            throw ConfigError("[" + section + "] " + e.what(), f_.require(section, "layers").line);
        }
        return spec;
    }

private:
    const ConfigFile& f_;
};

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile f;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
            section = trim(s.substr(1, s.size() - 2));
            if (!allowed_keys().count(section)) throw ConfigError("unknown section [" + section + "]", line);
            if (f.section_lines_.count(section)) throw ConfigError("duplicate section [" + section + "]", line);
            f.section_lines_[section] = line;
            f.sections_[section];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
        if (section.empty()) throw ConfigError("key outside of any section", line);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!allowed_keys().at(section).count(key)) {
            throw ConfigError("unknown key '" + key + "' in section [" + section + "]", line);
        }
        auto& entries = f.sections_[section];
        if (entries.count(key)) throw ConfigError("duplicate key '" + key + "' in section [" + section + "]", line);
        entries[key] = {value, line};
    }
    return f;
}

ConfigFile ConfigFile::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
}

const ConfigFile::Entry& ConfigFile::require(const std::string& section, const std::string& key) const {
    if (const auto* e = find(section, key)) return *e;
    throw ConfigError("missing required key '" + key + "' in section [" + section + "]", section_line(section));
}

int ConfigFile::section_line(const std::string& section) const {
    const auto it = section_lines_.find(section);
    return it == section_lines_.end() ? 0 : it->second;
}

Experiment parse_experiment(const ConfigFile& file, const std::filesystem::path& base_dir) {
    Fields f(file);
    Experiment ex;
    TrainConfig& t = ex.train;

    const auto& mode_entry = f.require("experiment", "mode");
    t.mode = f.with_line(mode_entry, parse_mode);
    t.epochs = f.uint("experiment", "epochs", 0, true);
    t.batch_size = f.uint("experiment", "batch_size", 0, true);
    t.drop_last = f.boolean("experiment", "drop_last", false);
    t.record_time = f.boolean("experiment", "record_time", false);
    t.lambda_mse = f.real("experiment", "lambda_mse", t.mode == TrainMode::StudentPlain ? 0.0 : 1.0);
    t.lambda_xent = f.real("experiment", "lambda_xent", 1.0);
    if (const auto* e = file.find("experiment", "xent_reduction")) {
        if (e->value == "mean") t.xent_reduction = Reduction::Mean;
        else if (e->value == "sum") t.xent_reduction = Reduction::Sum;
        else throw ConfigError("xent_reduction must be mean or sum", e->line);
    }

    if (t.mode == TrainMode::Teacher) {
        t.teacher = f.network("teacher");
    } else {
        t.student = f.network("student");
        if (file.has_section("teacher")) t.teacher = f.network("teacher");
    }

    t.schedule.base_lr = f.real("optimizer", "lr", 0.0, true);
    t.schedule.decay_every = f.uint("optimizer", "decay_every", 50);
    t.schedule.decay_factor = f.real("optimizer", "decay_factor", 0.1);
    t.adam.beta1 = f.real("optimizer", "beta1", 0.9);
    t.adam.beta2 = f.real("optimizer", "beta2", 0.999);
    t.adam.epsilon = f.real("optimizer", "epsilon", 1e-8);

    const bool aug = t.mode == TrainMode::StudentTeacherAug;
    t.augment_images = aug ? f.uint("augment", "images_per_batch", 0, true) : f.uint("augment", "images_per_batch", 0);
    t.lcg.a = f.uint("augment", "lcg_a", t.lcg.a);
    t.lcg.c = f.uint("augment", "lcg_c", t.lcg.c);
    t.lcg.m = f.uint("augment", "lcg_m", t.lcg.m);

    t.seeds.init = f.uint("seeds", "init", t.seeds.init);
    t.seeds.shuffle = f.uint("seeds", "shuffle", t.seeds.shuffle);
    t.seeds.augment = f.uint("seeds", "augment", t.seeds.augment);

    DataConfig& d = ex.data;
    const auto& kind = f.require("data", "kind");
    if (kind.value == "synthetic") {
        d.kind = DataConfig::Kind::Synthetic;
        d.classes = f.uint("data", "classes", 0, true);
        d.image_shape = f.with_line(f.require("data", "shape"), parse_shape);
        d.train_per_class = f.uint("data", "train_per_class", 0, true);
        d.test_per_class = f.uint("data", "test_per_class", 0, true);
        d.noise = f.real("data", "noise", d.noise);
        d.contrast = f.real("data", "contrast", d.contrast);
        d.seed = static_cast<std::uint32_t>(f.uint("data", "seed", 0, true));
    } else if (kind.value == "records") {
        d.kind = DataConfig::Kind::Records;
        d.classes = f.uint("data", "classes", 10);
        if (const auto* e = file.find("data", "shape")) d.image_shape = f.with_line(*e, parse_shape);
        std::stringstream ss(f.require("data", "train").value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) d.train_files.push_back(base_dir / item);
        }
        d.test_file = base_dir / f.require("data", "test").value;
    } else {
        throw ConfigError("[data] kind must be synthetic or records, got '" + kind.value + "'", kind.line);
    }

    try {
        validate(t);
    } catch (const ConfigError& e) {
        if (e.line() > 0) throw;
        throw ConfigError(e.what(), file.section_line("experiment"));
    }
    return ex;
}

std::pair<Dataset, Dataset> load_data(const DataConfig& d) {
    if (d.kind == DataConfig::Kind::Records) {
        return {load_cifar10(d.train_files, d.classes, d.image_shape), load_cifar10(d.test_file, d.classes, d.image_shape)};
    }
    SyntheticConfig train{d.classes, d.train_per_class, d.image_shape, d.seed, d.noise, d.contrast};
    SyntheticConfig test = train;
    test.per_class = d.test_per_class;
    test.seed = d.seed + 1;
    return {make_synthetic(train), make_synthetic(test)};
}

}  // namespace tsl
