// Simulate panels with known elasticities and check that the quasi-experimental
// designs get them back.
#include <cstdio>

#include <pension/pension.hpp>

using namespace pension;
using namespace pension::econ;

namespace {
Panel panel(const std::vector<WorkerRecord>& pop, const ScenarioConfig& cfg, DesignKind d) {
    auto [lo, hi] = design_window(d, cfg);
    return simulate_panel(pop, cfg, cfg.behavioral, lo, hi);
}

void row(const char* name, double truth, const Coefficient& c) {
    std::printf("%-16s %8.4f %8.4f %8.4f\n", name, truth, c.estimate, c.se);
}
}  // namespace

int main(int argc, char** argv) {
    const char* path = argc > 1 ? argv[1] : "config/small.cfg";
    auto cfg = ScenarioConfig::from_config(Config::load(path));
    auto pop = generate_population(cfg);
    const auto& b = cfg.behavioral;

    std::printf("%-16s %8s %8s %8s\n", "parameter", "planted", "estimate", "se");
    auto tax = design_net_of_tax(pop, panel(pop, cfg, DesignKind::Tax), cfg);
    row("net-of-tax", b.eps_net_of_tax, tax.did.at("log_net_of_tax"));

    auto link = design_link_elasticity(pop, panel(pop, cfg, DesignKind::Link), cfg);
    std::printf("%-16s %8.4f %8.4f %8.4f\n", "link", b.eps_link, link.link_elasticity, link.link_elasticity_se);

    auto ben = design_benefit_elasticity(pop, panel(pop, cfg, DesignKind::Benefit), cfg);
    const auto& c = ben.second_stage.coefs.front();
    std::printf("%-16s %8.4f %8.4f %8.4f\n", "benefit", b.eps_benefit, -c.estimate, c.se);

    auto mpc = design_mpc(pop, panel(pop, cfg, DesignKind::Mpc), cfg);
    row("mpc", b.mpc, mpc.second_stage.coefs.front());
    return 0;
}
