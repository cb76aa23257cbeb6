#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tslearn/augment.hpp"
#include "tslearn/autodiff.hpp"
#include "tslearn/data.hpp"
#include "tslearn/lcg.hpp"
#include "tslearn/model.hpp"
#include "tslearn/optim.hpp"

namespace tsl {

enum class TrainMode { Teacher, StudentPlain, StudentTeacher, StudentTeacherAug };

const char* mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& name);
bool uses_teacher(TrainMode mode);

// Independent streams so that one factor can vary at a time.
struct Seeds {
    std::uint64_t init = 1;
    std::uint64_t shuffle = 2;
    std::uint64_t augment = 3;
};

struct TrainConfig {
    TrainMode mode = TrainMode::Teacher;
    NetworkSpec teacher;
    NetworkSpec student;
    std::size_t epochs = 1;
    std::size_t batch_size = 128;
    bool drop_last = false;
    double lambda_mse = 1.0;
    double lambda_xent = 1.0;
    Reduction xent_reduction = Reduction::Mean;
    AdamConfig adam;
    LrSchedule schedule;
    std::size_t augment_images = 0;  // N per batch, student_teacher_aug only
    LcgState lcg;                    // constants; state seeded from seeds.augment
    Seeds seeds;
    bool record_time = false;        // wall-clock seconds column; off keeps CSVs reproducible
};

// Throws ConfigError on inconsistent settings for the chosen mode.
void validate(const TrainConfig& config);

struct EpochMetrics {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss_total = 0.0;
    double loss_xent = 0.0;
    double loss_mse = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double seconds = 0.0;

    friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct TrainResult {
    ModelState<float> model;
    std::vector<EpochMetrics> history;

    double best_test_accuracy() const;
};

// Plain supervised training of config.teacher with cross-entropy.
TrainResult train_teacher(const TrainConfig& config, const Dataset& train, const Dataset& test);

// Trains config.student in config.mode. `teacher` must be frozen and
// compatible in the teacher modes; it is ignored in student_plain.
TrainResult train_student(const TrainConfig& config, const Dataset& train, const Dataset& test,
                          const ModelState<float>* teacher);
// Same, starting from the given student parameters instead of a fresh init.
TrainResult train_student(const TrainConfig& config, const Dataset& train, const Dataset& test,
                          const ModelState<float>* teacher, ModelState<float> student);

// Fraction of samples whose first maximal logit is the true label.
template <class T>
double evaluate(const ModelState<T>& model, const Dataset& dataset);

inline constexpr const char* kMetricsHeader = "epoch,lr,loss_total,loss_xent,loss_mse,train_acc,test_acc,seconds";

void write_metrics_csv(const std::vector<EpochMetrics>& history, std::ostream& out);
void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::filesystem::path& path);
std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace tsl
