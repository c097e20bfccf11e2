#include <gtest/gtest.h>

#include <filesystem>

#include "helpers.hpp"

using namespace pension;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("pension_io_" + std::to_string(::getpid()))) { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

io::Manifest manifest() { return {"test", 7, "abcdef0123456789"}; }
}  // namespace

TEST(Num, RoundTripsExactly) {
    Stream r(1, 0, Purpose::MonteCarlo);
    for (int i = 0; i < 1000; ++i) {
        double x = std::exp(20 * r.normal());
        EXPECT_EQ(io::to_double(io::num(x)), x);
    }
    EXPECT_EQ(io::num(std::nan("")), "");
}

TEST(Population, CsvRoundTrip) {
    auto cfg = testing_support::small_scenario(300);
    cfg.mortality.simulate = true;
    auto pop = generate_population(cfg);
    TempDir d;
    io::write_file(d.file("pop.csv"), io::population_csv(pop, manifest()));
    auto back = io::read_population(d.file("pop.csv"));
    ASSERT_EQ(back.size(), pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        EXPECT_EQ(back[i].id, pop[i].id);
        EXPECT_EQ(back[i].gender, pop[i].gender);
        EXPECT_EQ(back[i].dob_month, pop[i].dob_month);
        EXPECT_EQ(back[i].z, pop[i].z);
        EXPECT_EQ(back[i].c1, pop[i].c1);
        EXPECT_EQ(back[i].c2, pop[i].c2);
        EXPECT_EQ(back[i].s_pre, pop[i].s_pre);
        EXPECT_EQ(back[i].recipient, pop[i].recipient);
        EXPECT_EQ(back[i].death_age_months, pop[i].death_age_months);
    }
}

TEST(Panel, CsvRoundTrip) {
    auto cfg = testing_support::small_scenario(40);
    auto pop = generate_population(cfg);
    auto p = simulate_panel(pop, cfg, cfg.behavioral, cfg.fee_change_month - 2, cfg.fee_change_month + 1);
    TempDir d;
    io::write_file(d.file("panel.csv"), io::panel_csv(p, manifest()));
    auto back = io::read_panel(d.file("panel.csv"));
    ASSERT_EQ(back.rows.size(), p.rows.size());
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].worker_id, p.rows[i].worker_id);
        EXPECT_EQ(back.rows[i].period, p.rows[i].period);
        EXPECT_EQ(back.rows[i].taxable_earnings, p.rows[i].taxable_earnings);
        EXPECT_EQ(back.rows[i].consumption, p.rows[i].consumption);
    }
}

TEST(Csv, ManifestCommentFirst) {
    auto text = io::population_csv({}, manifest());
    EXPECT_EQ(text.rfind("# command=test seed=7 config_hash=abcdef0123456789", 0), 0u);
}

TEST(Csv, HeaderMismatchAndFieldCount) {
    TempDir d;
    io::write_file(d.file("a.csv"), "x,y\n1,2\n");
    EXPECT_THROW(io::read_population(d.file("a.csv")), Error);
    io::write_file(d.file("b.csv"), std::string(io::kPanelHeader) + "\n1,2008-01,1\n");
    EXPECT_THROW(io::read_panel(d.file("b.csv")), Error);
    EXPECT_THROW(io::read_file(d.file("missing.csv")), Error);
}

TEST(Csv, CrlfAccepted) {
    TempDir d;
    io::write_file(d.file("p.csv"), std::string(io::kPanelHeader) + "\r\n1,2008-01,1.5,1,0.8,\r\n");
    auto p = io::read_panel(d.file("p.csv"));
    ASSERT_EQ(p.rows.size(), 1u);
    EXPECT_EQ(p.rows[0].taxable_earnings, 1.5);
    EXPECT_FALSE(p.rows[0].consumption.has_value());
}

TEST(Json, DumpCarriesManifest) {
    OptimalDesign d;
    d.kappa_star = 0.25;
    auto j = io::json::parse(io::dump(io::to_json(d), manifest()));
    EXPECT_EQ(j["manifest"]["seed"], 7);
    EXPECT_EQ(j["kappa_star"], 0.25);
}
