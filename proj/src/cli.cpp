#include "tslearn/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>

#include "tslearn/config.hpp"
#include "tslearn/data.hpp"
#include "tslearn/persist.hpp"
#include "tslearn/train.hpp"

namespace tsl {

namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

void log_epochs(const std::vector<EpochMetrics>& history, std::ostream& out) {
    for (const auto& m : history) {
        out << "epoch " << m.epoch << " lr=" << m.lr << " loss=" << fixed(m.loss_total, 6)
            << " xent=" << fixed(m.loss_xent, 6) << " mse=" << fixed(m.loss_mse, 6)
            << " train_acc=" << fixed(m.train_acc, 4) << " test_acc=" << fixed(m.test_acc, 4) << '\n';
    }
}

Experiment read_experiment(const fs::path& config) {
    return parse_experiment(ConfigFile::read(config), config.parent_path());
}

std::string dims(const NetworkSpec& s) {
    return "(d=" + std::to_string(s.feature_dim) + ", c=" + std::to_string(s.num_classes) + ")";
}

int cmd_train_teacher(const fs::path& config, const fs::path& ckpt, const fs::path& metrics, std::ostream& out) {
    const Experiment ex = read_experiment(config);
    if (ex.train.mode != TrainMode::Teacher) {
        throw ConfigError(std::string("[experiment] mode is ") + mode_name(ex.train.mode) +
                          "; train-teacher needs mode = teacher");
    }
    const auto [train, test] = load_data(ex.data);
    auto result = train_teacher(ex.train, train, test);
    log_epochs(result.history, out);
    save(freeze(std::move(result.model)), ckpt);
    write_metrics_csv(result.history, metrics);
    out << "best_test_acc=" << fixed(result.best_test_accuracy(), 4) << '\n';
    return kExitOk;
}

int cmd_train_student(const fs::path& config, const std::string& teacher_path, const fs::path& ckpt,
                      const fs::path& metrics, std::ostream& out, std::ostream& err) {
    const Experiment ex = read_experiment(config);
    const TrainMode mode = ex.train.mode;
    if (mode == TrainMode::Teacher) {
        throw ConfigError("[experiment] mode is teacher; train-student needs a student mode");
    }
    std::optional<ModelState<float>> teacher;
    if (uses_teacher(mode)) {
        if (teacher_path.empty()) {
            throw ConfigError(std::string("mode ") + mode_name(mode) + " requires --teacher CKPT");
        }
        teacher = load(teacher_path);
        const auto report = validate_pair(teacher->spec(), ex.train.student);
        if (!report.compatible) {
            err << "incompatible teacher/student pair: teacher " << dims(teacher->spec()) << " vs student "
                << dims(ex.train.student) << '\n';
            for (const auto& v : report.violations) err << "  " << v << '\n';
            return kExitCompatibility;
        }
    } else if (!teacher_path.empty()) {
        err << "note: --teacher ignored in student_plain mode\n";
    }
    const auto [train, test] = load_data(ex.data);
    auto result = train_student(ex.train, train, test, teacher ? &*teacher : nullptr);
    log_epochs(result.history, out);
    save(result.model, ckpt);
    write_metrics_csv(result.history, metrics);
    out << "best_test_acc=" << fixed(result.best_test_accuracy(), 4) << '\n';
    return kExitOk;
}

int cmd_eval(const fs::path& model_path, const fs::path& data, std::size_t classes, const std::string& shape,
             std::ostream& out) {
    const auto model = load(model_path);
    const Dataset ds = load_cifar10(data, classes, parse_shape(shape));
    out << "accuracy=" << fixed(evaluate(model, ds), 4) << '\n';
    return kExitOk;
}

int cmd_gen_data(const std::string& kind, std::size_t classes, std::size_t per_class, std::uint32_t seed,
                 const std::string& shape, double noise, double contrast, const fs::path& path, std::ostream& out) {
    if (kind != "synthetic") throw ConfigError("--kind must be synthetic");
    SyntheticConfig cfg{classes, per_class, parse_shape(shape), seed, noise, contrast};
    const Dataset ds = make_synthetic(cfg);
    save_records(ds, path);
    out << "wrote " << ds.size() << " records to " << path.string() << '\n';
    return kExitOk;
}

int cmd_inspect(const fs::path& model_path, std::ostream& out) {
    const auto model = load(model_path);
    const NetworkSpec& spec = model.spec();
    const auto shapes = propagate_shapes(spec);
    out << "spec: " << format_spec(spec) << '\n';
    out << "mode: " << (model.frozen() ? "frozen" : "training") << '\n';
    out << "input: " << format_shape(spec.input) << '\n';
    out << "d: " << spec.feature_dim << '\n';
    out << "c: " << spec.num_classes << '\n';
    out << "parameters: " << parameter_count(spec) << '\n';
    out << "layers:\n";
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        out << "  " << i << " " << format_layers({spec.layers[i]}) << " -> " << format_shape(shapes[i]) << '\n';
    }
    out << "  head linear(" << spec.feature_dim << "->" << spec.num_classes << ")\n";
    out << "tensors:\n";
    for (const auto& p : model.parameters()) out << "  " << p.name << " " << format_shape(p.tensor.shape()) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Teacher-student feature transfer training toolkit"};
    app.require_subcommand(1);

    std::string config, ckpt, metrics, teacher, model, data, kind = "synthetic";
    std::string shape = "3x32x32";
    std::size_t classes = 10, per_class = 0;
    std::uint32_t seed = 1;
    double noise = SyntheticConfig{}.noise, contrast = SyntheticConfig{}.contrast;

    auto* tt = app.add_subcommand("train-teacher", "Train a teacher network with cross-entropy");
    tt->add_option("--config", config, "Experiment config file")->required();
    tt->add_option("--out", ckpt, "Output checkpoint")->required();
    tt->add_option("--metrics", metrics, "Output metrics CSV")->required();

    auto* ts = app.add_subcommand("train-student", "Train a student, optionally guided by a frozen teacher");
    ts->add_option("--config", config, "Experiment config file")->required();
    ts->add_option("--teacher", teacher, "Teacher checkpoint (teacher modes)");
    ts->add_option("--out", ckpt, "Output checkpoint")->required();
    ts->add_option("--metrics", metrics, "Output metrics CSV")->required();

    auto* ev = app.add_subcommand("eval", "Report accuracy of a checkpoint on a record file");
    ev->add_option("--model", model, "Checkpoint")->required();
    ev->add_option("--data", data, "Record file (CIFAR-10 binary layout)")->required();
    ev->add_option("--classes", classes, "Number of classes in the record file");
    ev->add_option("--shape", shape, "Image shape c x h x w");

    auto* gd = app.add_subcommand("gen-data", "Write a synthetic dataset in the record layout");
    gd->add_option("--kind", kind, "Dataset kind")->required();
    gd->add_option("--classes", classes, "Number of classes")->required();
    gd->add_option("--per-class", per_class, "Samples per class")->required();
    gd->add_option("--seed", seed, "Noise seed")->required();
    gd->add_option("--out", data, "Output record file")->required();
    gd->add_option("--shape", shape, "Image shape c x h x w");
    gd->add_option("--noise", noise, "Uniform pixel noise amplitude");
    gd->add_option("--contrast", contrast, "Pattern amplitude");

    auto* in = app.add_subcommand("inspect", "Describe a checkpoint");
    in->add_option("--model", model, "Checkpoint")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        if (*tt) return cmd_train_teacher(config, ckpt, metrics, out);
        if (*ts) return cmd_train_student(config, teacher, ckpt, metrics, out, err);
        if (*ev) return cmd_eval(model, data, classes, shape, out);
        if (*gd) return cmd_gen_data(kind, classes, per_class, seed, shape, noise, contrast, data, out);
        if (*in) return cmd_inspect(model, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const CompatibilityError& e) {
        err << "incompatible: " << e.what() << '\n';
        return kExitCompatibility;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace tsl
