// Simulate a population, compute the sufficient-statistic moments and print
// the welfare gradient of the two reforms at the status quo.
#include <cstdio>

#include <pension/pension.hpp>

using namespace pension;

int main(int argc, char** argv) {
    const char* path = argc > 1 ? argv[1] : "config/small.cfg";
    auto cfg = ScenarioConfig::from_config(Config::load(path));
    auto pop = generate_population(cfg);
    auto s = WelfareSample::from_population(pop);

    MomentSet M = compute_moments(s, cfg.behavioral, cfg.policy);
    std::printf("%zu workers, %.1f%% below the subsidy ceiling\n", pop.size(), 100 * M.recipient_share);

    std::printf("%-6s %10s %10s %10s %10s %10s %8s\n", "reform", "insurance", "redistrib", "fiscal", "bias", "total",
                "$/$");
    for (Reform r : {Reform::Kappa, Reform::Phi}) {
        auto g = gradient(cfg.policy, cfg.behavioral, M, r);
        auto mm = money_metric(g, M, cfg.policy);
        std::printf("%-6s %10.4f %10.4f %10.4f %10.4f %10.4f %8.3f\n", to_string(r), g.social_insurance, g.inter_worker,
                    g.fiscal_externality, g.bias_correction, g.total, mm.gain_per_dollar);
    }
    return 0;
}
