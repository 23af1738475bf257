#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ggt {

struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = false;
    double metric = 0.0; // max error, count difference, ... (0 when not meaningful)
    std::string detail;
};

enum class Fault { none, merge };

struct VerifyOptions {
    std::uint64_t seed = 0;
    // merge: swaps two entries of the inverse permutation used when merging
    // glance outputs, so oracle comparisons must fail.
    Fault fault = Fault::none;
    // Include the full GG-T forward pass in the flops suite (a few seconds).
    bool full_model = true;
};

const std::vector<std::string>& suite_names(); // oracle, grad, perm, flops

// "all" runs every suite in order. Unknown names throw ConfigError.
std::vector<CheckResult> run_suite(const std::string& suite, const VerifyOptions& opts);

// One machine-readable line: "check suite=<s> name=<n> status=pass|fail metric=<m> <detail>".
std::string format_check(const CheckResult& r);

} // namespace ggt
