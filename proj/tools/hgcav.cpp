#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hgcav/scenario.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;

struct Options {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
};

std::optional<fs::path> config_path(const Options& opt) {
    if (!opt.config.empty()) return fs::path(opt.config);
    if (!opt.preset.empty()) {
        fs::path p = opt.preset;
        if (p.extension() != ".json") p += ".json";
        if (p.has_parent_path() || fs::exists(p)) return p;
        return fs::path(HGCAV_PRESET_DIR) / p;
    }
    return std::nullopt;
}

std::optional<hgcav::ScenarioConfig> load(const Options& opt, std::optional<hgcav::ScenarioKind> kind) {
    const auto path = config_path(opt);
    if (!path) {
        std::cerr << "error: one of --config or --preset is required\n";
        return std::nullopt;
    }
    std::ifstream in(*path);
    if (!in) {
        std::cerr << "error: cannot read config '" << path->string() << "'\n";
        return std::nullopt;
    }
    std::stringstream text;
    text << in.rdbuf();
    auto result = hgcav::validate_config(text.str(), path->parent_path(), opt.seed, kind);
    if (!result.ok()) {
        std::cerr << "invalid config '" << path->string() << "':\n";
        for (const auto& e : result.errors) std::cerr << "  " << e << '\n';
        return std::nullopt;
    }
    return std::move(result.config);
}

int run(const Options& opt, hgcav::ScenarioKind kind) {
    auto cfg = load(opt, kind);
    if (!cfg) return kExitValidation;
    const auto result = hgcav::run_scenario(*cfg, opt.out_dir);
    for (const auto& s : result.summaries) std::cout << s << '\n';
    if (result.exit_code != 0) {
        std::cerr << "error: " << result.error << '\n';
        return result.exit_code;
    }
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
    return 0;
}

int validate(const Options& opt) {
    auto cfg = load(opt, std::nullopt);
    if (!cfg) return kExitValidation;
    std::cout << cfg->normalized.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-atom transits through Hermite-Gaussian cavity modes"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&opt](CLI::App* sub) {
        auto* cfg = sub->add_option("--config", opt.config, "Scenario configuration (JSON)");
        auto* pre = sub->add_option("--preset", opt.preset, "Name of a shipped preset, e.g. fig4-hg01");
        cfg->excludes(pre);
        sub->add_option("--seed", opt.seed, "Master seed, overrides the configuration");
        sub->add_option("--out-dir", opt.out_dir, "Directory for result files")->capture_default_str();
    };

    const std::pair<hgcav::ScenarioKind, const char*> commands[] = {
        {hgcav::ScenarioKind::spectrum, "Mode frequencies of transverse families"},
        {hgcav::ScenarioKind::mode_image, "Transverse intensity of a mode or superposition"},
        {hgcav::ScenarioKind::simulate, "Synthesize a transit record, optionally fit it"},
        {hgcav::ScenarioKind::fit, "Fit a trajectory to a recorded transit"},
        {hgcav::ScenarioKind::invert, "Position candidates from two coupling magnitudes"},
        {hgcav::ScenarioKind::g2, "Pooled intensity autocorrelation"},
        {hgcav::ScenarioKind::scaling, "Scaling of HG_N0 intensity maxima with N"},
    };
    std::optional<hgcav::ScenarioKind> chosen;
    for (const auto& [kind, help] : commands) {
        auto* sub = app.add_subcommand(hgcav::to_string(kind), help);
        add_common(sub);
        sub->callback([&chosen, kind = kind] { chosen = kind; });
    }
    auto* val = app.add_subcommand("validate", "Check a configuration and print it with defaults applied");
    add_common(val);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    if (val->parsed()) return validate(opt);
    return run(opt, *chosen);
}
