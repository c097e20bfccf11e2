#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"

using namespace pension;
using testing_support::example_config;

namespace {
Config example() { return Config::load(example_config()); }

bool has_error_for(const std::vector<Diagnostic>& d, const std::string& key) {
    for (const auto& x : d)
        if (x.key == key && x.severity == "error") return true;
    return false;
}
}  // namespace

TEST(Config, ShippedExampleIsValid) {
    auto d = example().validate();
    for (const auto& x : d) ADD_FAILURE() << x.key << ": " << x.message;
    auto s = ScenarioConfig::from_config(example());
    EXPECT_EQ(s.seed, 20240917u);
    EXPECT_EQ(s.n_workers, 50000u);
    EXPECT_DOUBLE_EQ(s.behavioral.eps_net_of_tax, 0.38);
    EXPECT_EQ(s.policy.variant, Variant::Chile);
}

TEST(Config, UnknownKeyIsAnError) {
    auto c = example();
    c.set("behavioral.epsilon", "0.3");
    EXPECT_TRUE(has_error_for(c.validate(), "behavioral.epsilon"));
    EXPECT_THROW(ScenarioConfig::from_config(c), Error);
}

TEST(Config, RangeAndTypeChecks) {
    auto c = example();
    c.set("policy.kappa", "1.5");
    c.set("n_workers", "12.5");
    c.set("policy.variant", "swedish");
    c.set("cohort.dob_start", "1944/01");
    auto d = c.validate();
    EXPECT_TRUE(has_error_for(d, "policy.kappa"));
    EXPECT_TRUE(has_error_for(d, "n_workers"));
    EXPECT_TRUE(has_error_for(d, "policy.variant"));
    EXPECT_TRUE(has_error_for(d, "cohort.dob_start"));
}

TEST(Config, MissingRequiredKeyReported) {
    std::string text;
    const Config ex = example();
    for (const auto& [k, e] : ex.entries())
        if (k != "behavioral.gamma") text += k + " = " + e.value + "\n";
    auto d = Config::from_string(text).validate();
    EXPECT_TRUE(has_error_for(d, "behavioral.gamma"));
}

TEST(Config, CrossChecks) {
    auto c = example();
    c.set("policy.tau", "0.95");
    EXPECT_TRUE(has_error_for(c.validate(), "policy.tau"));
    auto e = example();
    e.set("policy.PBS", "0.1");
    EXPECT_TRUE(has_error_for(e.validate(), "policy.PBS"));
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
    std::string path = ::testing::TempDir() + "/bad.cfg";
    std::ofstream(path) << "seed = 1\nthis line has no equals\nseed = 2\n";
    auto d = validate_config(path);
    bool line2 = false, dup = false;
    for (const auto& x : d) {
        line2 = line2 || x.line == 2;
        dup = dup || (x.key == "seed" && x.line == 3);
    }
    EXPECT_TRUE(line2);
    EXPECT_TRUE(dup);
}

TEST(Config, SeedPrecedence) {
    auto c = example();
    EXPECT_EQ(ScenarioConfig::from_config(c, 77).seed, 77u);
    EXPECT_EQ(ScenarioConfig::from_config(c).seed, 20240917u);
    std::string text;
    for (const auto& [k, e] : c.entries())
        if (k != "seed") text += k + " = " + e.value + "\n";
    auto noseed = Config::from_string(text);
    try {
        ScenarioConfig::from_config(noseed);
        FAIL() << "expected a seed error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "seed");
    }
    EXPECT_EQ(ScenarioConfig::from_config(noseed, 5).seed, 5u);
}

TEST(Config, HashIgnoresLayoutAndThreads) {
    std::string a, b;
    const Config ex = example();
    for (const auto& [k, e] : ex.entries()) {
        a += k + " = " + e.value + "\n";
        b = "# comment\n" + k + "=" + e.value + "   # trailing\n" + b;
    }
    auto ca = Config::from_string(a), cb = Config::from_string(b);
    cb.set("threads", "3");
    EXPECT_EQ(ScenarioConfig::from_config(ca).config_hash, ScenarioConfig::from_config(cb).config_hash);
    cb.set("behavioral.mpc", "0.8");
    EXPECT_NE(ScenarioConfig::from_config(ca).config_hash, ScenarioConfig::from_config(cb).config_hash);
}

TEST(Config, OptionalKeysFallBack) {
    auto c = example();
    EXPECT_EQ(c.text("design.pmas_scale"), "1");
}

TEST(Config, SchemaKeysAreUniqueAndDocumented) {
    std::set<std::string> seen;
    for (const auto& k : config_schema()) {
        EXPECT_TRUE(seen.insert(k.key).second) << k.key;
        EXPECT_FALSE(k.help.empty()) << k.key;
        if (!k.required && k.key != "seed") {
            EXPECT_FALSE(k.fallback.empty()) << k.key;
        }
    }
    const Config ex = example();
    for (const auto& [k, e] : ex.entries()) EXPECT_NE(find_key(k), nullptr) << k;
}
