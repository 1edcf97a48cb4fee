#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "hgcav/scenario.hpp"
#include "json.hpp"

using namespace hgcav;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kPresets = HGCAV_PRESET_DIR;

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json simulate_doc() {
    return json::parse(read_file(kPresets / "fig4-hg01.json"));
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
    return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("hgcav-test-" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(HGCAV_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("scenario kind names") {
    for (auto k : {ScenarioKind::spectrum, ScenarioKind::mode_image, ScenarioKind::simulate, ScenarioKind::fit,
                   ScenarioKind::invert, ScenarioKind::g2, ScenarioKind::scaling}) {
        CHECK(scenario_kind_from_string(to_string(k)) == k);
    }
    CHECK(std::string(to_string(ScenarioKind::mode_image)) == "mode-image");
}

TEST_CASE("empty mode table in a simulate config names the field") {
    auto doc = simulate_doc();
    doc["modes"] = json::object();
    const auto res = validate_config(doc.dump());
    CHECK_FALSE(res.ok());
    CHECK(mentions(res.errors, "modes"));
}

TEST_CASE("cavity longer than the sum of mirror radii is unstable") {
    auto doc = simulate_doc();
    doc["cavity"]["length_um"] = 500000.0;
    const auto res = validate_config(doc.dump());
    CHECK_FALSE(res.ok());
    CHECK(mentions(res.errors, "cavity"));
    CHECK(mentions(res.errors, "unstable"));
}

TEST_CASE("all errors are collected") {
    auto doc = simulate_doc();
    doc["cavity"]["kappa_mhz"] = -1.0;
    doc["simulate"]["probe"]["mode"] = "hg77";
    doc["simulate"]["rate_per_us"] = "fast";
    doc.erase("seed");
    const auto res = validate_config(doc.dump());
    CHECK(res.errors.size() >= 4);
    CHECK(mentions(res.errors, "kappa_mhz"));
    CHECK(mentions(res.errors, "hg77"));
    CHECK(mentions(res.errors, "rate_per_us"));
    CHECK(mentions(res.errors, "seed"));
    // A seed passed from outside satisfies the requirement.
    auto fixed = simulate_doc();
    fixed.erase("seed");
    CHECK(validate_config(fixed.dump(), {}, 99).ok());
    CHECK(validate_config(fixed.dump(), {}, 99).config->seed == 99u);
}

TEST_CASE("malformed documents") {
    CHECK_FALSE(validate_config("{not json").ok());
    CHECK_FALSE(validate_config("[]").ok());
    auto doc = simulate_doc();
    doc["schema"] = "hgcav.config/99";
    CHECK(mentions(validate_config(doc.dump()).errors, "schema"));
    doc = simulate_doc();
    CHECK_FALSE(validate_config(doc.dump(), {}, std::nullopt, ScenarioKind::g2).ok());
}

TEST_CASE("presets validate and echo their defaults") {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(kPresets)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        CAPTURE(entry.path().string());
        const auto res = validate_config(read_file(entry.path()), kPresets);
        for (const auto& e : res.errors) MESSAGE(e);
        REQUIRE(res.ok());
        const auto& norm = res.config->normalized;
        CHECK(norm["cavity"].contains("derived"));
        CHECK(norm["cavity"].contains("kappa_mhz"));
        CHECK(norm["cavity"]["derived"]["waist_um"].get<double>() == doctest::Approx(29.51).epsilon(1e-3));
        // The normalized document validates to the same thing.
        const auto again = validate_config(norm.dump(), kPresets);
        REQUIRE(again.ok());
        CHECK(again.config->normalized == norm);
    }
    CHECK(count == 8);
    const auto sim = validate_config(read_file(kPresets / "fig4-hg01.json"));
    REQUIRE(sim.ok());
    CHECK(sim.config->normalized["simulate"].contains("axial_nodes"));
}

TEST_CASE("runs are deterministic") {
    const auto res = validate_config(read_file(kPresets / "fig4-hg01.json"));
    REQUIRE(res.ok());
    const auto a = scratch_dir("det-a"), b = scratch_dir("det-b");
    const auto ra = run_scenario(*res.config, a), rb = run_scenario(*res.config, b);
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    REQUIRE(ra.files.size() == rb.files.size());
    CHECK(!ra.summaries.empty());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
        CHECK(read_file(ra.files[i]) == read_file(rb.files[i]));
    }
    const auto other = validate_config(read_file(kPresets / "fig4-hg01.json"), {}, 12345);
    const auto c = scratch_dir("det-c");
    const auto rc = run_scenario(*other.config, c);
    CHECK(read_file(rc.files.front()) != read_file(ra.files.front()));
}

TEST_CASE("simulated ensembles are seeded per transit") {
    const auto res = validate_config(read_file(kPresets / "fig6-g2.json"));
    REQUIRE(res.ok());
    auto spec = *res.config->g2.ensemble;
    spec.transits = 4;
    const auto e1 = simulate_ensemble(spec, res.config->modes, res.config->cavity, 7);
    const auto e2 = simulate_ensemble(spec, res.config->modes, res.config->cavity, 7);
    REQUIRE(e1.size() == 4);
    for (std::size_t i = 0; i < e1.size(); ++i) {
        CHECK(e1[i].counts() == e2[i].counts());
        CHECK(e1[i].seed == transit_seed(7, i));
    }
}

TEST_CASE("command-line exit codes") {
    const auto dir = scratch_dir("cli");
    const auto out = (dir / "out").string();
    CHECK(run_cli("spectrum --preset spectrum --out-dir " + out) == 0);
    CHECK(fs::exists(dir / "out" / "spectrum.json"));
    CHECK(fs::exists(dir / "out" / "spectrum.csv"));
    CHECK(run_cli("validate --preset fig6-g2") == 0);

    auto bad = simulate_doc();
    bad["cavity"]["length_um"] = 500000.0;
    const auto bad_path = dir / "bad.json";
    std::ofstream(bad_path) << bad.dump();
    CHECK(run_cli("simulate --config " + bad_path.string() + " --out-dir " + out) == 2);
    CHECK(run_cli("validate --config " + bad_path.string()) == 2);
    CHECK(run_cli("simulate --config " + (dir / "missing.json").string()) == 2);
    CHECK(run_cli("fit --preset spectrum --out-dir " + out) == 2);
    CHECK(run_cli("bogus-command") == 2);

    // Validation passes but the run fails: a flat record has no transit.
    auto flat = simulate_doc();
    flat["simulate"]["trajectory"].erase("x0_w0");
    flat["simulate"]["trajectory"]["x0_um"] = 400.0;
    const auto flat_path = dir / "flat.json";
    std::ofstream(flat_path) << flat.dump();
    CHECK(run_cli("simulate --config " + flat_path.string() + " --out-dir " + out) == 3);
}
