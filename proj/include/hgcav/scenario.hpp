#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgcav/correlation.hpp"
#include "hgcav/inference.hpp"
#include "hgcav/serialization.hpp"

namespace hgcav {

enum class ScenarioKind { spectrum, mode_image, simulate, fit, invert, g2, scaling };

const char* to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_kind_from_string(const std::string& name);

inline constexpr const char* kConfigSchema = "hgcav.config/1";

struct SpectrumSpec {
    std::vector<int> orders;
    int q = 0;
};

struct ModeImageSpec {
    std::vector<SuperpositionTerm> terms;
    double extent = 0.0;  ///< m
    int resolution = 0;
};

struct SimulateSpec {
    Trajectory trajectory;
    ProbeSchedule schedule;
    double rate = 0.0;  ///< counts/s
    int axial_nodes = kDefaultAxialNodes;
    bool fit = false;
    FitOptions fit_options;
    bool switched = false;
    std::string fit_mode;
    std::string companion_mode;
};

struct FitSpec {
    TransitRecord record;
    FitOptions options;
};

struct InvertSpec {
    std::string first_mode;
    std::string second_mode;
    CouplingMeasurement first;
    CouplingMeasurement second;
    std::optional<Point> truth;
};

struct EnsembleSpec {
    int transits = 0;
    std::string mode;
    Detuning detuning;
    double rate = 0.0;       ///< counts/s
    double bin_width = 0.0;  ///< s
    double start = 0.0;      ///< s
    double end = 0.0;        ///< s
    double t0 = 0.0;         ///< s
    double v = 0.0;          ///< m/s
    double v_sd = 0.0;       ///< m/s
    double x0_max = 0.0;     ///< m, offsets drawn uniformly in [-x0_max, x0_max]
    int axial_nodes = kDefaultAxialNodes;
};

struct G2Spec {
    double tau_max = 0.0;
    double tau_limit = -1.0;
    PoolingOptions pooling;
    std::optional<EnsembleSpec> ensemble;
    std::vector<TransitRecord> records;
};

struct ScalingSpec {
    std::vector<int> orders;
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::spectrum;
    std::string name;
    std::optional<std::uint64_t> seed;
    CavityParams cavity;
    DerivedParams derived;
    ModeTable modes;
    nlohmann::json normalized;  ///< input with every default filled in

    SpectrumSpec spectrum;
    ModeImageSpec mode_image;
    SimulateSpec simulate;
    FitSpec fit;
    InvertSpec invert;
    G2Spec g2;
    ScalingSpec scaling;
};

struct ValidationResult {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> errors;  ///< "<field path>: <message>"

    bool ok() const { return errors.empty(); }
};

/// Parses and validates a configuration document. Relative record paths are
/// resolved against `base_dir`; `seed` overrides the document's seed and
/// `expected_kind` must match its scenario field when both are present.
ValidationResult validate_config(const std::string& text, const std::filesystem::path& base_dir = {},
                                 std::optional<std::uint64_t> seed = std::nullopt,
                                 std::optional<ScenarioKind> expected_kind = std::nullopt);

struct RunResult {
    int exit_code = 0;  ///< 0 ok, 3 runtime failure
    std::vector<std::string> summaries;
    std::vector<std::filesystem::path> files;
    std::string error;
};

RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir);

/// Records of a synthetic ensemble, transit i seeded with transit_seed(master, i).
std::vector<TransitRecord> simulate_ensemble(const EnsembleSpec& spec, const ModeTable& modes,
                                             const CavityParams& params, std::uint64_t master_seed);

}  // namespace hgcav
