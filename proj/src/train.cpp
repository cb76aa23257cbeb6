#include "tslearn/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

namespace tsl {

const char* mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::Teacher: return "teacher";
        case TrainMode::StudentPlain: return "student_plain";
        case TrainMode::StudentTeacher: return "student_teacher";
        case TrainMode::StudentTeacherAug: return "student_teacher_aug";
    }
    return "?";
}

TrainMode parse_mode(const std::string& name) {
    for (TrainMode m : {TrainMode::Teacher, TrainMode::StudentPlain, TrainMode::StudentTeacher,
                        TrainMode::StudentTeacherAug}) {
        if (name == mode_name(m)) return m;
    }
    throw ConfigError("unknown mode '" + name + "' (teacher, student_plain, student_teacher, student_teacher_aug)");
}

bool uses_teacher(TrainMode mode) {
    return mode == TrainMode::StudentTeacher || mode == TrainMode::StudentTeacherAug;
}

void validate(const TrainConfig& c) {
    if (c.epochs == 0) throw ConfigError("epochs must be positive");
    if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(c.lambda_mse >= 0.0) || !(c.lambda_xent >= 0.0)) throw ConfigError("loss weights must be non-negative");
    if (c.mode == TrainMode::StudentPlain && c.lambda_mse != 0.0) {
        throw ConfigError("student_plain mode requires lambda_mse = 0");
    }
    if (c.mode != TrainMode::StudentTeacherAug && c.augment_images != 0) {
        throw ConfigError("augment images are only used in student_teacher_aug mode");
    }
    validate(c.schedule);
    Adam<float> probe(c.adam);
    LcgState lcg = c.lcg;
    if (lcg.m == 0) throw ConfigError("lcg modulus m must be non-zero");
    lcg.x = c.seeds.augment % lcg.m;
    validate(lcg);
    propagate_shapes(c.mode == TrainMode::Teacher ? c.teacher : c.student);
}

double TrainResult::best_test_accuracy() const {
    double best = 0.0;
    for (const auto& m : history) best = std::max(best, m.test_acc);
    return best;
}

template <class T>
double evaluate(const ModelState<T>& model, const Dataset& dataset) {
    constexpr std::size_t kChunk = 256;
    const std::size_t n = dataset.size();
    const std::size_t pixels = dataset.images.numel() / n;
    const Shape s = dataset.image_shape();
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t count = std::min(kChunk, n - start);
        const auto src = dataset.images.data().subspan(start * pixels, count * pixels);
        Tensor<T> images({count, s[0], s[1], s[2]}, std::vector<T>(src.begin(), src.end()));
        const auto logits = model.infer(images).logits;
        const std::size_t classes = logits.dim(1);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < classes; ++j)
                if (logits[i * classes + j] > logits[i * classes + best]) best = j;
            if (best == dataset.labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

void check_data(const NetworkSpec& spec, const Dataset& data, const char* split) {
    if (data.size() == 0) throw ConfigError(std::string(split) + " split is empty");
    if (data.classes != spec.num_classes) {
        throw DimensionError(std::string(split) + " data has " + std::to_string(data.classes) +
                             " classes but the network predicts " + std::to_string(spec.num_classes));
    }
    if (data.image_shape() != spec.input) {
        throw DimensionError(std::string(split) + " images " + shape_str(data.image_shape()) +
                             " do not match network input " + shape_str(spec.input));
    }
}

std::size_t count_correct(const Tensor<float>& logits, const std::vector<std::uint32_t>& labels, std::size_t rows) {
    const std::size_t classes = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (logits[i * classes + j] > logits[i * classes + best]) best = j;
        if (best == labels[i]) ++correct;
    }
    return correct;
}

TrainResult run(const TrainConfig& config, const Dataset& train, const Dataset& test,
                const ModelState<float>* teacher, ModelState<float> model) {
    const TrainMode mode = config.mode;
    const bool teacher_phase = mode == TrainMode::Teacher;
    const bool with_teacher = uses_teacher(mode);
    const bool augment = mode == TrainMode::StudentTeacherAug && config.augment_images > 0;

    check_data(model.spec(), train, "train");
    check_data(model.spec(), test, "test");
    if (config.batch_size > train.size()) {
        throw ConfigError("batch_size " + std::to_string(config.batch_size) + " exceeds train set size " +
                          std::to_string(train.size()));
    }
    if (with_teacher) {
        if (!teacher) throw UsageError(std::string(mode_name(mode)) + " mode needs a teacher model");
        if (!teacher->frozen()) throw UsageError("teacher must be frozen before student training");
        const auto report = validate_pair(teacher->spec(), model.spec());
        if (!report.compatible) {
            std::string msg = "teacher/student pair incompatible:";
            for (const auto& v : report.violations) msg += " " + v + ";";
            throw CompatibilityError(msg);
        }
        if (teacher->spec().input != model.spec().input) {
            throw DimensionError("teacher input " + shape_str(teacher->spec().input) + " differs from student input " +
                                 shape_str(model.spec().input));
        }
    }

    const BatchPlan plan{config.seeds.shuffle, config.batch_size, config.drop_last};
    const AugmentConfig aug{config.augment_images, model.spec().input, LabelMode::Hard};
    LcgState lcg = config.lcg;
    lcg.x = config.seeds.augment % lcg.m;

    const float lambda_mse = static_cast<float>(config.lambda_mse);
    const float lambda_xent = static_cast<float>(config.lambda_xent);
    Adam<float> adam(config.adam);
    std::vector<EpochMetrics> history;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const double lr = lr_at(config.schedule, epoch);
        double xent_sum = 0.0, mse_sum = 0.0;
        std::size_t correct = 0, seen = 0, steps = 0;

        for (const auto& indices : batch_indices(train.size(), plan, epoch)) {
            Batch batch = gather(train, indices);
            if (augment) {
                auto [expanded, next] = expand_batch(batch, aug, lcg, *teacher);
                batch = std::move(expanded);
                lcg = next;
            }

            Graph<float> graph;
            const Var input = graph.constant(batch.images);
            const auto out = model.forward(graph, input);
            const auto xent = graph.cross_entropy(out.logits, batch.targets, config.xent_reduction);
            LossValue<float> total = xent;
            if (with_teacher) {
                const auto target = teacher->infer(batch.images).features;
                const auto mse = graph.mse_feature(out.features, target);
                total = graph.combined(mse, xent, lambda_mse, lambda_xent);
                mse_sum += mse.value;
            } else if (!teacher_phase) {
                total = graph.scale(xent, lambda_xent);
            }
            xent_sum += xent.value;

            correct += count_correct(graph.value(out.logits), batch.labels, batch.real_count);
            seen += batch.real_count;

            graph.backward(total);
            adam.step(model, lr);
            ++steps;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr;
        m.loss_xent = xent_sum / static_cast<double>(steps);
        m.loss_mse = mse_sum / static_cast<double>(steps);
        m.loss_total = teacher_phase ? m.loss_xent
                                     : config.lambda_mse * m.loss_mse + config.lambda_xent * m.loss_xent;
        m.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        m.test_acc = evaluate(model, test);
        if (config.record_time) {
            m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
        history.push_back(m);
    }
    return {std::move(model), std::move(history)};
}

}  // namespace

TrainResult train_teacher(const TrainConfig& config, const Dataset& train, const Dataset& test) {
    if (config.mode != TrainMode::Teacher) throw ConfigError("train_teacher requires mode = teacher");
    validate(config);
    return run(config, train, test, nullptr, build_model<float>(config.teacher, config.seeds.init));
}

TrainResult train_student(const TrainConfig& config, const Dataset& train, const Dataset& test,
                          const ModelState<float>* teacher) {
    if (config.mode == TrainMode::Teacher) throw ConfigError("train_student requires a student mode");
    validate(config);
    return run(config, train, test, teacher, build_model<float>(config.student, config.seeds.init));
}

TrainResult train_student(const TrainConfig& config, const Dataset& train, const Dataset& test,
                          const ModelState<float>* teacher, ModelState<float> student) {
    if (config.mode == TrainMode::Teacher) throw ConfigError("train_student requires a student mode");
    validate(config);
    if (student.spec() != config.student) throw ConfigError("initial student does not match the configured student spec");
    student.thaw();
    return run(config, train, test, teacher, std::move(student));
}

namespace {

std::string number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::runtime_error(path.string() + ": bad number '" + s + "'");
    }
    return v;
}

}  // namespace

void write_metrics_csv(const std::vector<EpochMetrics>& history, std::ostream& out) {
    out << kMetricsHeader << '\n';
    for (const auto& m : history) {
        out << m.epoch << ',' << number(m.lr) << ',' << number(m.loss_total) << ',' << number(m.loss_xent) << ','
            << number(m.loss_mse) << ',' << number(m.train_acc) << ',' << number(m.test_acc) << ','
            << number(m.seconds) << '\n';
    }
}

void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_metrics_csv(history, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) {
        throw std::runtime_error(path.string() + ": missing metrics header");
    }
    std::vector<EpochMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw std::runtime_error(path.string() + ": expected 8 columns in '" + line + "'");
        EpochMetrics m;
        m.epoch = static_cast<std::size_t>(parse_number(cells[0], path));
        m.lr = parse_number(cells[1], path);
        m.loss_total = parse_number(cells[2], path);
        m.loss_xent = parse_number(cells[3], path);
        m.loss_mse = parse_number(cells[4], path);
        m.train_acc = parse_number(cells[5], path);
        m.test_acc = parse_number(cells[6], path);
        m.seconds = parse_number(cells[7], path);
        out.push_back(m);
    }
    return out;
}

template double evaluate<float>(const ModelState<float>&, const Dataset&);
template double evaluate<double>(const ModelState<double>&, const Dataset&);

}  // namespace tsl
