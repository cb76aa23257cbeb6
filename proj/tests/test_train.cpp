#include <doctest.h>

#include <cmath>
#include <sstream>

#include "scratch_dir.hpp"
#include "tslearn/errors.hpp"
#include "tslearn/persist.hpp"
#include "tslearn/train.hpp"

using namespace tsl;

namespace {

const char* kTeacher = "input=3x12x12 layers=conv2d(6,3,1,1);relu;maxpool2d(2,2);conv2d(8,3,1,1);relu;maxpool2d(2,2);flatten;linear(8) features=8 classes=4";
const char* kStudent = "input=3x12x12 layers=conv2d(2,3,1,1);relu;maxpool2d(3,3);flatten;linear(8) features=8 classes=4";

struct Fixture {
    Dataset train = make_synthetic({4, 16, {3, 12, 12}, 1, 0.2, 0.25});
    Dataset test = make_synthetic({4, 8, {3, 12, 12}, 2, 0.2, 0.25});
    ModelState<float> teacher = make_teacher(train, test);

    static ModelState<float> make_teacher(const Dataset& train, const Dataset& test) {
        TrainConfig c;
        c.teacher = parse_spec(kTeacher);
        c.epochs = 3;
        c.batch_size = 16;
        return freeze(train_teacher(c, train, test).model);
    }

    TrainConfig student(TrainMode mode) const {
        TrainConfig c;
        c.mode = mode;
        c.student = parse_spec(kStudent);
        c.epochs = 3;
        c.batch_size = 10;
        c.lambda_mse = mode == TrainMode::StudentPlain ? 0.0 : 1.0;
        c.augment_images = mode == TrainMode::StudentTeacherAug ? 4 : 0;
        c.seeds = {7, 8, 9};
        return c;
    }
};

std::string csv(const std::vector<EpochMetrics>& h) {
    std::ostringstream out;
    write_metrics_csv(h, out);
    return out.str();
}

Dataset tiny(std::vector<float> pixels, std::vector<std::uint32_t> labels, std::size_t classes) {
    const std::size_t n = labels.size();
    const std::size_t w = pixels.size() / n;
    return {Tensor<float>({n, 1, 1, w}, std::move(pixels)), std::move(labels), classes};
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "degenerate student modes reproduce plain training bitwise") {
    const auto plain = train_student(student(TrainMode::StudentPlain), train, test, nullptr);

    TrainConfig as_teacher = student(TrainMode::Teacher);
    as_teacher.teacher = as_teacher.student;
    as_teacher.lambda_mse = 0.0;
    const auto supervised = train_teacher(as_teacher, train, test);
    CHECK(supervised.history == plain.history);
    CHECK(serialize(supervised.model) == serialize(plain.model));

    for (TrainMode mode : {TrainMode::StudentTeacher, TrainMode::StudentTeacherAug}) {
        TrainConfig c = student(mode);
        c.lambda_mse = 0.0;
        c.augment_images = 0;
        const auto r = train_student(c, train, test, &teacher);
        REQUIRE(r.history.size() == plain.history.size());
        for (std::size_t e = 0; e < r.history.size(); ++e) {
            CHECK(r.history[e].loss_total == plain.history[e].loss_total);
            CHECK(r.history[e].loss_xent == plain.history[e].loss_xent);
            CHECK(r.history[e].train_acc == plain.history[e].train_acc);
            CHECK(r.history[e].test_acc == plain.history[e].test_acc);
        }
        CHECK(serialize(r.model) == serialize(plain.model));
    }
}

TEST_CASE_FIXTURE(Fixture, "the teacher is untouched by student training") {
    const auto before = model_checksum(teacher);
    train_student(student(TrainMode::StudentTeacher), train, test, &teacher);
    train_student(student(TrainMode::StudentTeacherAug), train, test, &teacher);
    CHECK(model_checksum(teacher) == before);
    CHECK(teacher.frozen());
}

TEST_CASE_FIXTURE(Fixture, "training is a pure function of config and data") {
    ScratchDir dir;
    for (TrainMode mode : {TrainMode::StudentPlain, TrainMode::StudentTeacher, TrainMode::StudentTeacherAug}) {
        const auto a = train_student(student(mode), train, test, &teacher);
        const auto b = train_student(student(mode), train, test, &teacher);
        save(a.model, dir / "a.ckpt");
        save(b.model, dir / "b.ckpt");
        write_metrics_csv(a.history, dir / "a.csv");
        write_metrics_csv(b.history, dir / "b.csv");
        CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
        CHECK(read_bytes(dir / "a.csv") == read_bytes(dir / "b.csv"));

        TrainConfig other = student(mode);
        other.seeds.shuffle += 1;
        CHECK(serialize(train_student(other, train, test, &teacher).model) != serialize(a.model));
    }
}

TEST_CASE_FIXTURE(Fixture, "reported loss decomposes into its weighted parts") {
    for (TrainMode mode : {TrainMode::StudentTeacher, TrainMode::StudentTeacherAug}) {
        TrainConfig c = student(mode);
        c.lambda_mse = 0.7;
        c.lambda_xent = 1.3;
        for (const auto& m : train_student(c, train, test, &teacher).history) {
            CHECK(std::abs(m.loss_total - (0.7 * m.loss_mse + 1.3 * m.loss_xent)) <= 1e-9);
            CHECK(m.loss_mse > 0.0);
            CHECK(m.loss_xent > 0.0);
            CHECK(m.train_acc >= 0.0);
            CHECK(m.train_acc <= 1.0);
            CHECK(m.test_acc >= 0.0);
            CHECK(m.test_acc <= 1.0);
        }
    }
}

TEST_CASE_FIXTURE(Fixture, "zero learning rate leaves parameters fixed") {
    TrainConfig c = student(TrainMode::StudentPlain);
    c.epochs = 1;
    c.schedule.base_lr = 0.0;
    const auto init = build_model<float>(c.student, c.seeds.init);
    CHECK(serialize(train_student(c, train, test, nullptr).model) == serialize(init));

    // With a zeroed head every logit is 0 and the loss is exactly ln(classes).
    auto start = build_model<float>(c.student, c.seeds.init);
    auto& params = start.mutable_parameters();
    for (auto* p : {&params[params.size() - 2], &params.back()}) p->tensor = Tensor<float>(p->tensor.shape());
    const auto before = serialize(start);
    const auto r = train_student(c, train, test, nullptr, std::move(start));
    CHECK(serialize(r.model) == before);
    CHECK(r.history[0].loss_total == doctest::Approx(std::log(4.0)).epsilon(1e-6));
    CHECK(r.history[0].test_acc == 0.25);
}

TEST_CASE_FIXTURE(Fixture, "feature regression") {
    SUBCASE("a student at the teacher's weights is a fixed point") {
        TrainConfig c = student(TrainMode::StudentTeacher);
        c.student = teacher.spec();
        c.lambda_xent = 0.0;
        auto start = deserialize(serialize(teacher), false);
        const auto r = train_student(c, train, test, &teacher, std::move(start));
        for (const auto& m : r.history) CHECK(m.loss_mse == 0.0);
        CHECK(model_checksum(r.model) == model_checksum(teacher));
    }
    SUBCASE("feature loss does not increase at a small learning rate") {
        TrainConfig c = student(TrainMode::StudentTeacher);
        c.lambda_xent = 0.0;
        c.epochs = 10;
        c.batch_size = train.size();
        c.schedule.base_lr = 1e-4;
        const auto h = train_student(c, train, test, &teacher).history;
        for (std::size_t e = 1; e < h.size(); ++e) CHECK(h[e].loss_mse <= h[e - 1].loss_mse);
        CHECK(h.back().loss_mse < h.front().loss_mse);
    }
}

TEST_CASE("evaluate counts first-max predictions") {
    // Identity head: the prediction is the index of the larger pixel, ties go to class 0.
    auto model = build_model<float>(parse_spec("input=1x1x2 layers=flatten features=2 classes=2"), 1);
    auto& params = model.mutable_parameters();
    params[0].tensor = Tensor<float>({2, 2}, {1, 0, 0, 1});
    params[1].tensor = Tensor<float>({2}, {0, 0});
    const Dataset d = tiny({0.9f, 0.1f, 0.2f, 0.8f, 0.5f, 0.5f, 0.5f, 0.5f, 0.3f, 0.4f, 0.7f, 0.6f, 0.0f, 1.0f, 1.0f, 0.0f},
                           {0, 1, 0, 1, 0, 1, 1, 0}, 2);
    // Predictions 0,1,0,0,1,0,1,0 against labels 0,1,0,1,0,1,1,0.
    CHECK(evaluate(model, d) == 0.625);

    // Only the bias for class 3 is non-zero: a constant predictor.
    auto constant = build_model<float>(parse_spec("input=1x1x2 layers=flatten features=2 classes=10"), 1);
    auto& cp = constant.mutable_parameters();
    cp[0].tensor = Tensor<float>({2, 10});
    cp[1].tensor = Tensor<float>({10});
    cp[1].tensor[3] = 1.0f;
    const auto balanced = make_synthetic({10, 7, {1, 1, 2}, 5, 0.2, 0.25});
    CHECK(evaluate(constant, balanced) == doctest::Approx(0.1));
}

TEST_CASE("a model fit to a small set scores 1.0 on it") {
    const auto d = make_synthetic({3, 4, {1, 4, 4}, 5, 0.0, 0.25});
    TrainConfig c;
    c.teacher = parse_spec("input=1x4x4 layers=flatten;linear(8) features=8 classes=3");
    c.epochs = 200;
    c.batch_size = 12;
    c.schedule.base_lr = 0.01;
    const auto r = train_teacher(c, d, d);
    CHECK(evaluate(r.model, d) == 1.0);
    CHECK(r.history.back().train_acc == 1.0);
}

TEST_CASE("metrics CSV") {
    ScratchDir dir;
    const std::vector<EpochMetrics> h{{0, 0.001, 1.5, 1.25, 0.25, 0.5, 0.375, 0.0},
                                      {1, 0.0001, 0.1 + 0.2, 1.0 / 3.0, 2e-17, 1.0, 0.9999999, 12.5}};
    const std::string text = csv(h);
    CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
    CHECK(text.find("0,0.001,1.5,1.25,0.25,0.5,0.375,0") != std::string::npos);
    write_metrics_csv(h, dir / "m.csv");
    CHECK(read_metrics_csv(dir / "m.csv") == h);
    write_bytes(dir / "bad.csv", {'x', '\n'});
    CHECK_THROWS(read_metrics_csv(dir / "bad.csv"));
}

TEST_CASE_FIXTURE(Fixture, "misconfigured runs are rejected before training") {
    TrainConfig plain = student(TrainMode::StudentPlain);
    plain.lambda_mse = 1.0;
    CHECK_THROWS_AS(train_student(plain, train, test, nullptr), ConfigError);

    CHECK_THROWS_AS(train_student(student(TrainMode::StudentTeacher), train, test, nullptr), UsageError);
    auto thawed = deserialize(serialize(teacher), false);
    CHECK_THROWS_AS(train_student(student(TrainMode::StudentTeacher), train, test, &thawed), UsageError);

    TrainConfig wide = student(TrainMode::StudentTeacher);
    wide.student = parse_spec("input=3x12x12 layers=flatten;linear(9) features=9 classes=4");
    CHECK_THROWS_AS(train_student(wide, train, test, &teacher), CompatibilityError);

    TrainConfig big = student(TrainMode::StudentPlain);
    big.batch_size = train.size() + 1;
    CHECK_THROWS_AS(train_student(big, train, test, nullptr), ConfigError);

    TrainConfig aug = student(TrainMode::StudentTeacher);
    aug.augment_images = 3;
    CHECK_THROWS_AS(train_student(aug, train, test, &teacher), ConfigError);

    TrainConfig shape = student(TrainMode::StudentPlain);
    shape.student = parse_spec("input=3x10x10 layers=flatten;linear(8) features=8 classes=4");
    CHECK_THROWS(train_student(shape, train, test, nullptr));
    CHECK_THROWS_AS(train_teacher(student(TrainMode::StudentPlain), train, test), ConfigError);
}
