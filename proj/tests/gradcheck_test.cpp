#include <gtest/gtest.h>

#include <cstdio>
#include <set>
#include <string>

#include "deepbsde/gradcheck.hpp"

using namespace deepbsde;

namespace {

// Pulls "key=<int>" out of an instance label.
int label_field(const std::string& label, const std::string& key) {
    auto pos = label.find(" " + key + "=");
    if (pos == std::string::npos) return -1;
    return std::atoi(label.c_str() + pos + key.size() + 2);
}

}  // namespace

TEST(Gradcheck, DefaultSweepPassesAtTolerance) {
    GradcheckReport report = run_gradcheck(GradcheckOptions{});
    EXPECT_TRUE(report.passed()) << "max rel error " << report.max_rel_error;
    ASSERT_EQ(report.instances.size(), 24u);
    EXPECT_LE(report.max_rel_error, 1e-5);
    for (const auto& inst : report.instances) {
        EXPECT_LE(inst.max_rel_error, report.max_rel_error);
        EXPECT_FALSE(inst.label.empty());
        EXPECT_FALSE(inst.worst_tensor.empty()) << inst.label;
    }
}

TEST(Gradcheck, SweepCoversGeneratorsStylesAndModes) {
    GradcheckReport report = run_gradcheck(GradcheckOptions{});
    std::set<std::string> problems;
    bool any_plain = false, any_residual = false, any_region = false;
    for (const auto& inst : report.instances) {
        problems.insert(inst.label.substr(0, inst.label.find(' ')));
        if (inst.label.find("residual") != std::string::npos)
            any_residual = true;
        else
            any_plain = true;
        if (inst.label.find("region") != std::string::npos) any_region = true;

        int d = label_field(inst.label, "d");
        int N = label_field(inst.label, "N");
        int H = label_field(inst.label, "H");
        int B = label_field(inst.label, "B");
        EXPECT_GE(d, 1);
        EXPECT_LE(d, 3);
        EXPECT_GE(N, 2);
        EXPECT_LE(N, 4);
        EXPECT_GE(H, 0);
        EXPECT_LE(H, 2);
        EXPECT_TRUE(B == 2 || B == 4) << inst.label;
    }
    EXPECT_EQ(problems.size(), 4u);  // all four benchmark generators
    EXPECT_TRUE(any_plain);
    EXPECT_TRUE(any_residual);
    EXPECT_TRUE(any_region);
}

TEST(Gradcheck, CorruptedGradientsAreCaught) {
    GradcheckOptions opt;
    opt.trials = 4;
    std::size_t hook_calls = 0;
    GradMutationHook shift = [&hook_calls](const std::vector<TensorRef>& refs) {
        ++hook_calls;
        for (const auto& r : refs)
            for (std::size_t i = 0; i < r.tensor->size(); ++i) (*r.tensor)[i] += 1.0;
    };
    GradcheckReport report = run_gradcheck(opt, shift);
    EXPECT_EQ(hook_calls, 4u);
    EXPECT_FALSE(report.passed());
    for (const auto& inst : report.instances)
        EXPECT_GT(inst.max_rel_error, opt.tolerance) << inst.label;
}

TEST(Gradcheck, OptionValidation) {
    auto bad = [](auto mutate) {
        GradcheckOptions opt;
        mutate(opt);
        EXPECT_THROW(run_gradcheck(opt), ConfigError);
    };
    bad([](GradcheckOptions& o) { o.trials = 0; });
    bad([](GradcheckOptions& o) { o.max_dim = 0; });
    bad([](GradcheckOptions& o) { o.max_steps = 1; });
    bad([](GradcheckOptions& o) { o.fd_step = 0.0; });
}

TEST(Gradcheck, DeterministicForFixedSeed) {
    GradcheckOptions opt;
    opt.trials = 6;
    GradcheckReport a = run_gradcheck(opt);
    GradcheckReport b = run_gradcheck(opt);
    ASSERT_EQ(a.instances.size(), b.instances.size());
    EXPECT_EQ(a.max_rel_error, b.max_rel_error);
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        EXPECT_EQ(a.instances[i].label, b.instances[i].label);
        EXPECT_EQ(a.instances[i].max_rel_error, b.instances[i].max_rel_error);
    }
}
