#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "json.hpp"

#include "irca/estimator.hpp"
#include "irca/simulator.hpp"

namespace irca::cli
{

struct TruthSpec
{
    Eigen::VectorXd gain = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd reflectivity = Eigen::VectorXd::Constant(1, 0.13);
    double phase_shift = 0.0;
    WaveRegime regime = WaveRegime::infinite();
    StaircaseTilt tilt;
};

/// Everything a run can be configured with; every field has a JSON key and the
/// command-line flags override it.
struct RunConfig
{
    std::optional<LayoutConfig> layout;
    std::optional<WavenumberGrid> grid;
    TruthSpec truth;
    NoiseModel noise = NoNoise{};
    PowerProfile power = ConstantPower{};
    IrcaConfig irca;
    ExtractionConfig extraction;
    PixelSelector::Mode pixels = PixelSelector::Mode::Central;
    std::filesystem::path out = ".";
    std::uint64_t seed = 0;
    unsigned jobs = 0;
};

/// Throws ConfigError on unknown keys or invalid values.
RunConfig parse_run_config(const nlohmann::json& j);

/// Entry point shared by the executable and the tests. Exit codes: 0 ok,
/// 2 configuration, 3 I/O, 4 data mismatch.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace irca::cli
