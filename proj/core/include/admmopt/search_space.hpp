#pragma once

#include <cstddef>
#include <cstdint>
#include <compare>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace admmopt {

struct ContParam {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
};

/// Integer hyperparameter with inclusive range. Categorical choices are
/// encoded ordinally as [0, k-1].
struct IntParam {
  std::string name;
  std::int64_t lower = 0;
  std::int64_t upper = 0;
};

struct AlgorithmSpec {
  std::string name;
  std::vector<ContParam> cont_params;
  std::vector<IntParam> int_params;
};

struct ModuleSpec {
  std::string name;
  std::vector<AlgorithmSpec> algorithms;
};

/// One algorithm index per module (the one-hot selection z).
struct ZAssignment {
  std::vector<std::size_t> choice;

  auto operator<=>(const ZAssignment&) const = default;
};

/// Relaxed iterate over the whole space. Both active and inactive
/// coordinates are carried; the layout is fixed by the SearchSpace.
struct ThetaVector {
  std::vector<double> cont;
  std::vector<double> relaxed_int;
};

/// Flat indices of the parameters belonging to the selected algorithms.
struct ActiveSet {
  std::vector<std::size_t> cont;
  std::vector<std::size_t> ints;
};

/// Location of one parameter inside the flat layout.
struct ParamRef {
  std::size_t module = 0;
  std::size_t algorithm = 0;
  std::size_t local = 0;
};

/// Immutable mixed continuous/integer search space.
///
/// Flat layout: modules in declaration order, algorithms in declaration
/// order, and within an algorithm its continuous parameters go to the
/// continuous vector and its integer parameters to the integer vector.
class SearchSpace {
 public:
  /// Validates and indexes the given modules. Throws ConfigError naming the
  /// offending path ("modules[1].algorithms[0].cont_params[2]").
  explicit SearchSpace(std::vector<ModuleSpec> modules);

  const std::vector<ModuleSpec>& modules() const noexcept { return modules_; }
  std::size_t num_modules() const noexcept { return modules_.size(); }
  std::size_t num_algorithms(std::size_t module) const { return modules_.at(module).algorithms.size(); }
  std::vector<std::size_t> algorithm_counts() const;

  /// Product of K_i; saturates at SIZE_MAX.
  std::size_t combination_count() const noexcept;

  std::size_t cont_size() const noexcept { return cont_refs_.size(); }
  std::size_t int_size() const noexcept { return int_refs_.size(); }

  const ContParam& cont_param(std::size_t flat) const;
  const IntParam& int_param(std::size_t flat) const;
  const ParamRef& cont_ref(std::size_t flat) const { return cont_refs_.at(flat); }
  const ParamRef& int_ref(std::size_t flat) const { return int_refs_.at(flat); }

  /// First flat continuous / integer index of an algorithm's parameters.
  std::size_t cont_offset(std::size_t module, std::size_t algorithm) const;
  std::size_t int_offset(std::size_t module, std::size_t algorithm) const;

  /// Throws std::invalid_argument when z does not fit the space.
  void validate(const ZAssignment& z) const;
  ActiveSet active_indices(const ZAssignment& z) const;

  const std::string& module_name(std::size_t module) const { return modules_.at(module).name; }
  const std::string& algorithm_name(std::size_t module, std::size_t algorithm) const {
    return modules_.at(module).algorithms.at(algorithm).name;
  }
  /// Index of an algorithm by name, or npos.
  std::size_t find_module(const std::string& name) const;
  std::size_t find_algorithm(std::size_t module, const std::string& name) const;

  /// Box midpoints: the deterministic initial iterate.
  ThetaVector midpoint() const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<ModuleSpec> modules_;
  std::vector<ParamRef> cont_refs_;
  std::vector<ParamRef> int_refs_;
  // offsets_[module][algorithm] = {cont offset, int offset}
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> offsets_;
};

/// Parses the "space" document:
///   {"modules": [{"name": .., "algorithms": [{"name": .., "cont_params":
///   [{"name","lower","upper"}], "int_params": [{"name","lower","upper"}]}]}]}
SearchSpace build_space(const nlohmann::json& document);

nlohmann::json space_to_json(const SearchSpace& space);

/// clamp(value, lower, upper).
double project_box(double value, double lower, double upper) noexcept;

/// Round(clamp(value, lower, upper)) with ties rounded half away from zero.
std::int64_t project_and_round(double value, std::int64_t lower, std::int64_t upper) noexcept;

}  // namespace admmopt
