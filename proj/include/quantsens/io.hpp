#pragma once

#include <string>

#include "json.hpp"
#include "quantsens/copula.hpp"
#include "quantsens/distributions.hpp"
#include "quantsens/error.hpp"
#include "quantsens/model.hpp"
#include "quantsens/stress.hpp"

namespace qs {

using nlohmann::json;

// Config problems; the message starts with the offending JSON pointer.
class ConfigError : public InvalidArgument {
public:
    ConfigError(const std::string& pointer, const std::string& msg)
        : InvalidArgument((pointer.empty() ? std::string("/") : pointer) + ": " + msg), pointer_(pointer) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

// Typed access to a JSON object that remembers where it is in the document.
class JsonReader {
public:
    JsonReader(const json& j, std::string pointer);
    const json& raw() const { return j_; }
    const std::string& pointer() const { return ptr_; }
    std::string child_pointer(const std::string& key) const;

    bool has(const std::string& key) const;
    JsonReader at(const std::string& key) const;
    JsonReader at(std::size_t i) const;
    std::size_t size() const;
    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    long integer(const std::string& key) const;
    long integer(const std::string& key, long fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string string(const std::string& key) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    double as_number() const;
    std::string as_string() const;
    void require_object() const;
    void require_array() const;
    // Unknown keys are an error.
    void only(std::initializer_list<const char*> keys) const;
    [[noreturn]] void fail(const std::string& msg) const;
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

private:
    const json& j_;
    std::string ptr_;
};

std::string format_double(double x);  // 17 significant digits

json to_json(const DistributionSpec& d);
DistributionSpec distribution_from_json(const JsonReader& r);

// target_marginal (optional) resolves "t_quantile" and default marginals.
json to_json(const StressSpec& s);
StressSpec stress_from_json(const JsonReader& r, const DistributionSpec* target_marginal = nullptr);

json to_json(const BivariateCopulaSpec& c);
BivariateCopulaSpec copula_from_json(const JsonReader& r);

json to_json(const GFunctionSpec& g);
GFunctionSpec g_from_json(const JsonReader& r);

json to_json(const DependenceSpec& d);
DependenceSpec dependence_from_json(const JsonReader& r, std::size_t m, std::size_t n, const std::string& base_dir);

json to_json(const Matrix& m);
Matrix matrix_from_json(const JsonReader& r);

json to_json(const LossModelSpec& spec);
LossModelSpec loss_model_from_json(const JsonReader& r, const std::string& base_dir = ".");

json to_json(const DiscreteModelSpec& dm);
DiscreteModelSpec discrete_model_from_json(const JsonReader& r);

std::string sha256_hex(const std::string& data);

// Scenario CSV (X1..Xm, Z1..Zn, L) plus a JSON sidecar (<path>.json).
void write_scenarios(const std::string& csv_path, const ScenarioSet& scen);
// Re-reads the CSV; the sidecar's model_hash must match spec. The auxiliary
// uniforms are recomputed from the marginals (W is not stored).
ScenarioSet read_scenarios(const std::string& csv_path, const LossModelSpec& spec);

}  // namespace qs
