// Solve for the welfare-maximising contribution rate and benefit link, then
// compare progressivity with the status quo.
#include <cstdio>

#include <pension/pension.hpp>

using namespace pension;

int main(int argc, char** argv) {
    const char* path = argc > 1 ? argv[1] : "config/small.cfg";
    auto cfg = ScenarioConfig::from_config(Config::load(path));
    auto s = WelfareSample::from_population(generate_population(cfg));

    WelfareModel model(s, cfg.policy, cfg.behavioral, cfg.welfare.frisch);
    DesignProblem dp(model);
    Box box{cfg.optimizer.kappa_lo, cfg.optimizer.kappa_hi, cfg.optimizer.phi_lo, cfg.optimizer.phi_hi};
    OptimalDesign d = dp.solve(box);

    std::printf("kappa* = %.4f  phi* = %.4f  (residual %.1e, %d starts)\n", d.kappa_star, d.phi_star,
                d.residual_norm(), d.starts_converged);
    std::printf("Hessian det %.3g, concave: %s\n", d.hessian_det, d.concave ? "yes" : "no");
    std::printf("share of pension income to the bottom half: status quo %.3f, optimum %.3f\n",
                progressivity_share(cfg.policy, s), d.progressivity_share);
    return 0;
}
