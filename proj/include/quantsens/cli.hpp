#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "quantsens/bootstrap.hpp"
#include "quantsens/estimators.hpp"
#include "quantsens/model.hpp"

namespace qs {

inline constexpr int kConfigVersion = 1;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDisagree = 1;  // oracle outside tolerance
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct TargetStress {
    std::string target;  // factor name; "W" for discrete models
    StressSpec stress;
};

struct RunConfig {
    std::variant<LossModelSpec, DiscreteModelSpec> model;
    std::vector<TargetStress> jobs;  // targets x stresses, expanded
    std::vector<RiskMeasureSpec> risk_measures;
    std::optional<std::string> mode;  // marginal | cascade | discrete
    std::size_t n_scenarios = 1000000;
    std::optional<std::size_t> n_conditional;
    std::uint64_t seed = 0;
    double delta = 0.005;
    BootstrapSpec bootstrap{50, 0.9, {}};
    std::vector<double> eps_grid{0.02, 0.01, 0.005};
    std::string output_dir = "out";
    bool is_discrete() const { return std::holds_alternative<DiscreteModelSpec>(model); }
};

// Throws ConfigError (exit 2) on any schema problem.
RunConfig load_run_config(const std::string& path);

// Full command line, argv[0] included.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qs
