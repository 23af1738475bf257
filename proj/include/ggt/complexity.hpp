#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggt/autograd.hpp"
#include "ggt/backbone.hpp"

namespace ggt {

// Checked unsigned 64-bit arithmetic; overflow throws ArithmeticError.
std::uint64_t checked_add(std::uint64_t a, std::uint64_t b);
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b);
std::uint64_t checked_mul(std::initializer_list<std::uint64_t> factors);

// Closed-form attention costs, in multiply-accumulates.
std::uint64_t omega_msa(std::uint64_t n, std::uint64_t c);                   // 4NC^2 + 2N^2C
std::uint64_t omega_g_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m); // 4NC^2 + 2M^2NC
std::uint64_t omega_gg_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m, std::uint64_t k);
std::uint64_t omega_gg_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m, std::uint64_t kh, std::uint64_t kw);
// Window attention has the same cost as the dilated variant.
inline std::uint64_t omega_w_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m) { return omega_g_msa(n, c, m); }
// 2NC^2 + 2(N/R^2)C^2 + 2N(N/R^2)C; N must be divisible by R^2.
std::uint64_t omega_sra(std::uint64_t n, std::uint64_t c, std::uint64_t r);

// Cost of one attention variant on an h x w grid (projections included).
std::uint64_t omega_attention(const AttentionConfig& cfg, std::uint64_t h, std::uint64_t w);

struct LayerCost {
    std::string name;
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    std::uint64_t elementwise = 0; // softmax / LN / GELU outputs, not part of macs

    bool operator==(const LayerCost&) const = default;
};

struct FlopsReport {
    std::vector<LayerCost> entries;
    std::string convention = "1 FLOP = 1 multiply-accumulate; softmax/LN/GELU outputs reported separately as "
                             "elementwise; bias additions and table lookups count 0";

    // Adds into the entry called `name`, creating it at the end if absent.
    void add(const std::string& name, std::uint64_t macs, std::uint64_t params, std::uint64_t elementwise = 0);
    LayerCost total() const;
    // Sum over entries whose name ends with `suffix` (e.g. ".attn.attend").
    LayerCost sum_suffix(const std::string& suffix) const;
    const LayerCost* find(const std::string& name) const;

    // layer,macs,params with a trailing "total" row.
    std::string to_csv() const;
    std::string to_table() const;
    // Parses to_csv output (ignores '#' lines and the total row).
    static FlopsReport from_csv(const std::string& text);
};

// Symbolic walk of the architecture; no tensors are created.
FlopsReport count_model(const ModelConfig& cfg);

// Per-block cost of one GG block on its stage geometry, with entries named
// "<prefix>.norm1", "<prefix>.attn.proj", ... as the executed trace scopes them.
void count_block(FlopsReport& report, const std::string& prefix, const BlockConfig& cfg);

// Groups executed primitives and first-seen parameters by trace scope,
// dropping scopes with nothing to report.
template <typename T>
FlopsReport count_executed(const Trace<T>& trace);

} // namespace ggt
