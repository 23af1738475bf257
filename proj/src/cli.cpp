#include "ggt/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "ggt/backbone.hpp"
#include "ggt/checkpoint.hpp"
#include "ggt/complexity.hpp"
#include "ggt/tensor_io.hpp"
#include "ggt/verify.hpp"

namespace ggt {

namespace {

struct RunConfig {
    std::string command;
    std::string model = "gg-t";
    std::string input;
    std::string output;
    std::string checkpoint;
    std::uint64_t seed = 0;
    std::string seed_source = "default";
    std::string precision = "float";
    std::string format = "table";
};

void echo(std::ostream& out, const RunConfig& rc, const std::vector<std::pair<std::string, std::string>>& extra) {
    out << "# command=" << rc.command << " seed=" << rc.seed << " seed_source=" << rc.seed_source << '\n';
    for (const auto& [k, v] : extra) out << "# " << k << '=' << v << '\n';
}

// Writes to --out when given, else to `out`.
void emit(std::ostream& out, const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw FormatError("write to " + path + " failed");
}

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v == 0 || item[0] == '-') {
            throw ConfigError(std::string(what) + ": '" + item + "' is not a positive integer");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

// ---- forward -----------------------------------------------------------------

template <typename T>
BasicTensor<T> run_forward(const ModelConfig& cfg, const RunConfig& rc, const TensorF& image) {
    ModelWeights<T> weights = rc.checkpoint.empty() ? build_model<T>(cfg, rc.seed) : load_checkpoint<T>(rc.checkpoint);
    weights.config.image_h = cfg.image_h;
    weights.config.image_w = cfg.image_w;
    weights.config.validate();
    return infer(weights, image.template cast<T>());
}

int cmd_forward(const RunConfig& rc, std::ostream& out) {
    if (rc.input.empty()) throw ConfigError("forward: --input is required");
    const TensorF image = load_ggt1<float>(rc.input);
    ModelConfig cfg = ModelConfig::preset(parse_model_variant(rc.model));
    if (image.rank() != 3 || image.dim(0) != cfg.in_channels) {
        throw ConfigError("forward: input must be " + std::to_string(cfg.in_channels) + "xHxW, got " +
                          shape_str(image.shape()));
    }
    cfg.image_h = image.dim(1);
    cfg.image_w = image.dim(2);
    cfg.validate();
    echo(out, rc, {{"model", cfg.describe()},
                   {"input", rc.input + " " + shape_str(image.shape())},
                   {"checkpoint", rc.checkpoint.empty() ? "none (built from seed)" : rc.checkpoint},
                   {"precision", rc.precision},
                   {"out", rc.output.empty() ? "none" : rc.output}});

    TensorF logits = rc.precision == "double" ? run_forward<double>(cfg, rc, image).cast<float>()
                                              : run_forward<float>(cfg, rc, image);
    if (!rc.output.empty()) save_ggt1(rc.output, logits);

    std::vector<std::size_t> order(logits.numel());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t k = std::min<std::size_t>(5, order.size());
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::size_t a, std::size_t b) {
        return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
    });
    out << "logits " << logits.numel() << '\n';
    for (std::size_t i = 0; i < k; ++i) {
        out << "top" << i + 1 << " class=" << order[i] << " logit=" << std::setprecision(9) << logits[order[i]]
            << '\n';
    }
    return kExitOk;
}

// ---- count -------------------------------------------------------------------

int cmd_count(const RunConfig& rc, const std::string& image_size, std::ostream& out) {
    ModelConfig cfg = ModelConfig::preset(parse_model_variant(rc.model));
    const auto dims = parse_list(image_size, "--image-size");
    if (dims.size() > 2) throw ConfigError("--image-size: expected S or H,W");
    cfg.image_h = dims[0];
    cfg.image_w = dims.back();
    if (rc.format != "csv" && rc.format != "table") throw ConfigError("--format must be csv or table");
    const FlopsReport report = count_model(cfg);
    std::ostringstream text;
    echo(text, rc, {{"model", cfg.describe()}, {"format", rc.format}, {"convention", report.convention}});
    text << (rc.format == "csv" ? report.to_csv() : report.to_table());
    emit(out, rc.output, text.str());
    return kExitOk;
}

// ---- compare -----------------------------------------------------------------

struct CompareOptions {
    std::string variants = "msa,gmsa,wmsa,sra";
    std::string grid;
    std::string sweep;
    std::size_t channels = 96;
    std::size_t heads = 1;
    std::size_t m = 7;
    std::size_t reduction = 1;
    bool timing = true;
};

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

int cmd_compare(const RunConfig& rc, const CompareOptions& co, std::ostream& out) {
    std::vector<AttentionVariant> variants;
    std::stringstream ss(co.variants);
    for (std::string item; std::getline(ss, item, ',');) variants.push_back(parse_attention_variant(item));
    if (variants.empty()) throw ConfigError("--variants: empty list");

    std::vector<std::pair<std::size_t, std::size_t>> grids;
    if (!co.grid.empty() && !co.sweep.empty()) throw ConfigError("compare: use either --grid or --sweep");
    if (!co.grid.empty()) {
        const auto g = parse_list(co.grid, "--grid");
        if (g.size() != 2) throw ConfigError("--grid: expected h,w");
        grids.emplace_back(g[0], g[1]);
    } else {
        const std::string sweep = co.sweep.empty() ? "49,196,784,3136" : co.sweep;
        for (std::size_t n : parse_list(sweep, "--sweep")) {
            const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
            if (side * side != n) throw ConfigError("--sweep: N=" + std::to_string(n) + " is not a square grid");
            grids.emplace_back(side, side);
        }
    }

    std::ostringstream text;
    echo(text, rc, {{"variants", co.variants},
                    {"grids", std::to_string(grids.size())},
                    {"channels", std::to_string(co.channels)},
                    {"heads", std::to_string(co.heads)},
                    {"m", std::to_string(co.m)},
                    {"reduction", std::to_string(co.reduction)},
                    {"timing", co.timing ? "on" : "off"}});
    text << "variant,N,h,w,predicted_macs,executed_macs" << (co.timing ? ",wall_ms" : "") << '\n';

    std::mt19937_64 rng(rc.seed);
    for (auto v : variants) {
        AttentionConfig cfg{co.channels, co.heads, co.m, co.reduction, v, false};
        cfg.validate();
        const auto weights = AttentionWeights<double>::init(cfg, rng);
        std::vector<double> log_n, log_macs;
        bool exact = true;
        for (auto [h, w] : grids) {
            const std::uint64_t predicted = omega_attention(cfg, h, w);
            const Tensor x = random_uniform<double>({h * w, co.channels}, rng);
            Trace<double> tr(GradMode::off);
            const auto start = std::chrono::steady_clock::now();
            attention(tr.constant(x), weights, h, w, cfg);
            const auto stop = std::chrono::steady_clock::now();
            const std::uint64_t executed = count_executed(tr).total().macs;
            exact = exact && executed == predicted;
            text << to_string(v) << ',' << h * w << ',' << h << ',' << w << ',' << predicted << ',' << executed;
            if (co.timing) {
                text << ',' << std::fixed << std::setprecision(3)
                     << std::chrono::duration<double, std::milli>(stop - start).count() << std::defaultfloat;
            }
            text << '\n';
            log_n.push_back(std::log(static_cast<double>(h * w)));
            log_macs.push_back(std::log(static_cast<double>(predicted)));
        }
        text << "# fit variant=" << to_string(v);
        if (grids.size() >= 2 && log_n.front() != log_n.back()) {
            text << " loglog_slope=" << std::fixed << std::setprecision(4) << slope(log_n, log_macs)
                 << std::defaultfloat;
        } else {
            text << " loglog_slope=n/a";
        }
        text << " executed_matches_predicted=" << (exact ? "yes" : "no") << '\n';
        if (!exact) {
            emit(out, rc.output, text.str());
            return kExitCheckFailed;
        }
    }
    emit(out, rc.output, text.str());
    return kExitOk;
}

// ---- verify ------------------------------------------------------------------

int cmd_verify(const RunConfig& rc, const std::string& suite, const std::string& fault, bool quick,
               std::ostream& out) {
    VerifyOptions opts;
    opts.seed = rc.seed;
    opts.full_model = !quick;
    if (fault == "merge") {
        opts.fault = Fault::merge;
    } else if (fault != "none") {
        throw ConfigError("--inject-fault: expected none or merge");
    }
    echo(out, rc, {{"suite", suite}, {"inject_fault", fault}, {"full_model", quick ? "no" : "yes"}});
    const auto results = run_suite(suite, opts);
    std::size_t failed = 0;
    for (const auto& r : results) {
        out << format_check(r) << '\n';
        if (!r.passed) ++failed;
    }
    out << "summary suite=" << suite << " checks=" << results.size() << " passed=" << results.size() - failed
        << " failed=" << failed << " status=" << (failed ? "fail" : "pass") << '\n';
    return failed ? kExitCheckFailed : kExitOk;
}

// ---- helpers -----------------------------------------------------------------

int cmd_checkpoint(const RunConfig& rc, std::ostream& out) {
    if (rc.output.empty()) throw ConfigError("checkpoint: --out is required");
    const ModelConfig cfg = ModelConfig::preset(parse_model_variant(rc.model));
    echo(out, rc, {{"model", cfg.describe()}, {"out", rc.output}});
    const auto weights = build_model<float>(cfg, rc.seed);
    save_checkpoint(rc.output, weights);
    const auto back = load_checkpoint<float>(rc.output);
    bool same = true;
    std::vector<const Parameter<float>*> a;
    weights.for_each_parameter([&](const std::string&, const Parameter<float>& p) { a.push_back(&p); });
    std::size_t i = 0;
    back.for_each_parameter([&](const std::string&, const Parameter<float>& p) {
        same = same && bitwise_equal(a[i++]->value, p.value);
    });
    out << "parameters " << weights.parameter_count() << " tensors " << a.size() << " round_trip "
        << (same ? "bit-exact" : "MISMATCH") << '\n';
    return same ? kExitOk : kExitCheckFailed;
}

int cmd_make_input(const RunConfig& rc, const std::string& shape_text, std::ostream& out) {
    if (rc.output.empty()) throw ConfigError("make-input: --out is required");
    const auto dims = parse_list(shape_text, "--shape");
    echo(out, rc, {{"shape", shape_text}, {"out", rc.output}});
    std::mt19937_64 rng(rc.seed);
    save_ggt1(rc.output, random_uniform<float>(Shape(dims.begin(), dims.end()), rng));
    out << "wrote " << rc.output << '\n';
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"GG-Transformer backbone: forward pass, cost accounting and verification"};
    app.name("ggt");
    app.require_subcommand(1);

    RunConfig rc;
    std::string image_size = "224", suite = "all", fault = "none", shape = "3,224,224";
    bool quick = false;
    CompareOptions co;
    std::optional<std::uint64_t> seed;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "RNG seed (falls back to GG_SEED, then 0)");
    };
    auto add_model = [&](CLI::App* cmd) {
        cmd->add_option("--model", rc.model, "gg-t or gg-s")->capture_default_str();
    };

    auto* forward = app.add_subcommand("forward", "Run a forward pass on a GGT1 image tensor");
    add_model(forward);
    add_seed(forward);
    forward->add_option("--input", rc.input, "GGT1 tensor of shape 3xHxW")->required();
    forward->add_option("--out", rc.output, "Write logits as GGT1");
    forward->add_option("--checkpoint", rc.checkpoint, "Load weights from a checkpoint manifest");
    forward->add_option("--precision", rc.precision, "float or double")
        ->check(CLI::IsMember({"float", "double"}))
        ->capture_default_str();

    auto* count = app.add_subcommand("count", "Analytic parameter and MAC counts");
    add_model(count);
    count->add_option("--image-size", image_size, "S or H,W")->capture_default_str();
    count->add_option("--format", rc.format, "csv or table")
        ->check(CLI::IsMember({"csv", "table"}))
        ->capture_default_str();
    count->add_option("--out", rc.output, "Write the report here instead of stdout");

    auto* compare = app.add_subcommand("compare", "Cost of attention variants across grid sizes (CSV)");
    add_seed(compare);
    compare->add_option("--variants", co.variants, "Comma list of msa,gmsa,wmsa,sra")->capture_default_str();
    compare->add_option("--grid", co.grid, "Single grid h,w");
    compare->add_option("--sweep", co.sweep, "Comma list of token counts N (square grids)");
    compare->add_option("--channels", co.channels, "Channels C")->capture_default_str();
    compare->add_option("--heads", co.heads, "Attention heads")->capture_default_str();
    compare->add_option("--m", co.m, "Partition side M")->capture_default_str();
    compare->add_option("--reduction", co.reduction, "SRA reduction R")->capture_default_str();
    compare->add_flag("!--no-timing", co.timing, "Omit the wall-time column (byte-identical reruns)");
    compare->add_option("--out", rc.output, "Write CSV here instead of stdout");

    auto* verify = app.add_subcommand("verify", "Run the invariant suites");
    add_seed(verify);
    verify->add_option("--suite", suite, "oracle, grad, perm, flops or all")
        ->check(CLI::IsMember({"oracle", "grad", "perm", "flops", "all"}))
        ->capture_default_str();
    verify->add_option("--inject-fault", fault, "none or merge")
        ->check(CLI::IsMember({"none", "merge"}))
        ->capture_default_str();
    verify->add_flag("--quick", quick, "Skip the full-model executed-count check");

    auto* ckpt = app.add_subcommand("checkpoint", "Build a model from a seed and save it as manifest + binary");
    add_model(ckpt);
    add_seed(ckpt);
    ckpt->add_option("--out", rc.output, "Manifest path (binary goes next to it as .bin)")->required();

    auto* make_input = app.add_subcommand("make-input", "Write a seeded uniform random GGT1 tensor");
    add_seed(make_input);
    make_input->add_option("--shape", shape, "Comma list of extents")->capture_default_str();
    make_input->add_option("--out", rc.output, "Output path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (seed) {
            rc.seed = *seed;
            rc.seed_source = "flag";
        } else if (const char* env = std::getenv("GG_SEED"); env && *env) {
            std::size_t used = 0;
            try {
                rc.seed = std::stoull(env, &used);
            } catch (const std::logic_error&) {
                used = 0;
            }
            if (used == 0 || env[used] != '\0') throw ConfigError(std::string("GG_SEED is not an integer: ") + env);
            rc.seed_source = "GG_SEED";
        }
        rc.command = app.get_subcommands().front()->get_name();
        if (rc.command == "forward") return cmd_forward(rc, out);
        if (rc.command == "count") return cmd_count(rc, image_size, out);
        if (rc.command == "compare") return cmd_compare(rc, co, out);
        if (rc.command == "verify") return cmd_verify(rc, suite, fault, quick, out);
        if (rc.command == "checkpoint") return cmd_checkpoint(rc, out);
        if (rc.command == "make-input") return cmd_make_input(rc, shape, out);
        err << "unknown command\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

} // namespace ggt
