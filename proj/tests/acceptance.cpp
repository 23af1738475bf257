// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "ggt/backbone.hpp"
#include "ggt/cli.hpp"
#include "ggt/complexity.hpp"
#include "ggt/verify.hpp"

using namespace ggt;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
    std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  " << detail << std::endl;
    if (!ok) ++failures;
}

struct SuiteRun {
    std::map<std::string, CheckResult> checks;
    double seconds = 0;
    bool all_passed = true;

    bool passed(const std::string& name) const {
        auto it = checks.find(name);
        return it != checks.end() && it->second.passed;
    }
};

SuiteRun run(const std::string& suite) {
    SuiteRun r;
    const auto start = std::chrono::steady_clock::now();
    for (auto& c : run_suite(suite, VerifyOptions{})) {
        r.all_passed = r.all_passed && c.passed;
        r.checks[c.name] = c;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

double dev(double got, double want) { return std::abs(got - want) / want; }

std::string fmt(const char* f, double a, double b = 0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

} // namespace

int main() {
    try {
        const double pt = double(build(ModelVariant::gg_t, 0).parameter_count());
        const double ps = double(build(ModelVariant::gg_s, 0).parameter_count());
        report(1, dev(pt, 28e6) <= 0.03 && dev(ps, 50e6) <= 0.03,
               fmt("gg-t %.0f params, gg-s %.0f params", pt, ps));

        const auto flops = run("flops");
        const double mt = double(count_model(ModelConfig::preset(ModelVariant::gg_t)).total().macs);
        const double ms = double(count_model(ModelConfig::preset(ModelVariant::gg_s)).total().macs);
        report(2, dev(mt, 4.5e9) <= 0.05 && dev(ms, 8.7e9) <= 0.05 && flops.passed("gg-t_executed_equals_symbolic"),
               fmt("gg-t %.0f MACs, gg-s %.0f MACs, executed trace ", mt, ms) +
                   (flops.passed("gg-t_executed_equals_symbolic") ? "equal" : "differs"));

        const bool spots = omega_msa(196, 96) == 14601216ULL && omega_g_msa(3136, 96, 7) == 145108992ULL &&
                           omega_gg_msa(3136, 96, 7, 9) == 169494528ULL;
        report(3, spots && flops.passed("formula_parity_random20"),
               std::string("spot values ") + (spots ? "match" : "differ") + ", 20 random cases " +
                   (flops.passed("formula_parity_random20") ? "exact" : "mismatch"));

        auto oracle = run("oracle");
        const bool sweep = oracle.passed("g_msa_sweep"), degen = oracle.passed("degenerate_h_eq_w_eq_m");
        report(4, sweep && degen && oracle.seconds < 60,
               fmt("sweep max err %.2e, h=w=M max err %.2e", oracle.checks["g_msa_sweep"].metric,
                   oracle.checks["degenerate_h_eq_w_eq_m"].metric) +
                   fmt(", %.2fs", oracle.seconds));

        auto perm = run("perm");
        report(5, perm.passed("random_specs_inverse") && perm.passed("residue_classes_exhaustive"),
               perm.checks["random_specs_inverse"].detail + ", " + perm.checks["residue_classes_exhaustive"].detail);

        const auto grad = run("grad");
        double worst = 0;
        for (const auto& [name, c] : grad.checks)
            if (name != "gg_block_key_bias_zero_grad") worst = std::max(worst, c.metric);
        report(6, grad.all_passed && worst <= 1e-4 && grad.seconds < 120,
               std::to_string(grad.checks.size()) + fmt(" checks, max rel err %.2e", worst) + fmt(", %.2fs", grad.seconds));

        std::string ks;
        bool kernels = true;
        const std::size_t sides[] = {56, 28, 14, 7}, want[] = {9, 5, 3, 3};
        for (int s = 0; s < 4; ++s) {
            const auto k = GazeConfig::adaptive().kernel(PartitionSpec(sides[s], sides[s], 7));
            kernels = kernels && k.first == want[s] && k.second == want[s];
            ks += (s ? "," : "") + std::to_string(k.first);
        }
        report(7, kernels, "adaptive kernels (" + ks + ")");

        std::ostringstream out, err;
        const int code = run_cli({"compare", "--variants", "msa,gmsa", "--channels", "16", "--no-timing"}, out, err);
        std::map<std::string, double> slope;
        std::istringstream lines(out.str());
        for (std::string line; std::getline(lines, line);) {
            if (line.rfind("# fit variant=", 0) != 0) continue;
            std::istringstream f(line.substr(14));
            std::string v, field;
            f >> v >> field;
            slope[v] = std::stod(field.substr(field.find('=') + 1));
        }
        const bool scaling = code == kExitOk && slope.count("gmsa") && slope.count("msa") && slope["gmsa"] >= 0.9 &&
                             slope["gmsa"] <= 1.1 && slope["msa"] >= 1.8 && slope["msa"] <= 2.2;
        report(8, scaling, fmt("log-log slope gmsa %.4f, msa %.4f (C=16, N=49..3136)", slope["gmsa"], slope["msa"]));

        std::ifstream readme(GGT_SOURCE_DIR "/README.md");
        const std::string text{std::istreambuf_iterator<char>(readme), {}};
        const bool stated = text.find("Accuracy results are not reproduced") != std::string::npos;
        report(9, stated, stated ? "accuracy needs full training runs; stated as out of scope in README"
                                 : "out-of-scope statement missing from README");
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    return failures ? 1 : 0;
}
