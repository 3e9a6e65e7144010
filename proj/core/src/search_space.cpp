#include "admmopt/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "admmopt/errors.hpp"

namespace admmopt {

namespace {

std::string module_path(std::size_t i) { return fmt::format("modules[{}]", i); }

std::string algorithm_path(std::size_t i, std::size_t j) {
  return fmt::format("modules[{}].algorithms[{}]", i, j);
}

}  // namespace

SearchSpace::SearchSpace(std::vector<ModuleSpec> modules) : modules_(std::move(modules)) {
  if (modules_.empty()) {
    throw ConfigError("modules", "empty module list");
  }
  std::set<std::string> module_names;
  // parameter name -> module that declares it
  std::map<std::string, std::size_t> param_owner;

  offsets_.resize(modules_.size());
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    const ModuleSpec& mod = modules_[i];
    if (mod.name.empty()) throw ConfigError(module_path(i), "empty module name");
    if (!module_names.insert(mod.name).second) {
      throw ConfigError(module_path(i), fmt::format("duplicate module name '{}'", mod.name));
    }
    if (mod.algorithms.empty()) throw ConfigError(module_path(i), "module has no algorithms");

    std::set<std::string> algorithm_names;
    for (std::size_t j = 0; j < mod.algorithms.size(); ++j) {
      const AlgorithmSpec& alg = mod.algorithms[j];
      const std::string apath = algorithm_path(i, j);
      if (alg.name.empty()) throw ConfigError(apath, "empty algorithm name");
      if (!algorithm_names.insert(alg.name).second) {
        throw ConfigError(apath, fmt::format("duplicate algorithm name '{}'", alg.name));
      }
      offsets_[i].emplace_back(cont_refs_.size(), int_refs_.size());

      std::set<std::string> local_names;
      auto claim = [&](const std::string& name, const std::string& path) {
        if (name.empty()) throw ConfigError(path, "empty parameter name");
        if (!local_names.insert(name).second) {
          throw ConfigError(path, fmt::format("duplicate parameter name '{}'", name));
        }
        auto [it, inserted] = param_owner.emplace(name, i);
        if (!inserted && it->second != i) {
          throw ConfigError(path, fmt::format("parameter name '{}' is also used in module '{}'", name,
                                              modules_[it->second].name));
        }
      };

      for (std::size_t k = 0; k < alg.cont_params.size(); ++k) {
        const ContParam& p = alg.cont_params[k];
        const std::string ppath = fmt::format("{}.cont_params[{}]", apath, k);
        claim(p.name, ppath);
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper)) {
          throw ConfigError(ppath, "non-finite bound");
        }
        if (p.lower == p.upper) throw ConfigError(ppath, "degenerate bound");
        if (p.lower > p.upper) throw ConfigError(ppath, "inverted bound");
        cont_refs_.push_back({i, j, k});
      }
      for (std::size_t k = 0; k < alg.int_params.size(); ++k) {
        const IntParam& p = alg.int_params[k];
        const std::string ppath = fmt::format("{}.int_params[{}]", apath, k);
        claim(p.name, ppath);
        if (p.lower > p.upper) throw ConfigError(ppath, "inverted bound");
        int_refs_.push_back({i, j, k});
      }
    }
  }
}

std::vector<std::size_t> SearchSpace::algorithm_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(modules_.size());
  for (const auto& m : modules_) counts.push_back(m.algorithms.size());
  return counts;
}

std::size_t SearchSpace::combination_count() const noexcept {
  std::size_t total = 1;
  for (const auto& m : modules_) {
    const std::size_t k = m.algorithms.size();
    if (total > std::numeric_limits<std::size_t>::max() / k) return std::numeric_limits<std::size_t>::max();
    total *= k;
  }
  return total;
}

const ContParam& SearchSpace::cont_param(std::size_t flat) const {
  const ParamRef& r = cont_refs_.at(flat);
  return modules_[r.module].algorithms[r.algorithm].cont_params[r.local];
}

const IntParam& SearchSpace::int_param(std::size_t flat) const {
  const ParamRef& r = int_refs_.at(flat);
  return modules_[r.module].algorithms[r.algorithm].int_params[r.local];
}

std::size_t SearchSpace::cont_offset(std::size_t module, std::size_t algorithm) const {
  return offsets_.at(module).at(algorithm).first;
}

std::size_t SearchSpace::int_offset(std::size_t module, std::size_t algorithm) const {
  return offsets_.at(module).at(algorithm).second;
}

void SearchSpace::validate(const ZAssignment& z) const {
  if (z.choice.size() != modules_.size()) {
    throw std::invalid_argument(
        fmt::format("assignment has {} entries, space has {} modules", z.choice.size(), modules_.size()));
  }
  for (std::size_t i = 0; i < z.choice.size(); ++i) {
    if (z.choice[i] >= modules_[i].algorithms.size()) {
      throw std::invalid_argument(fmt::format("module '{}' has no algorithm #{}", modules_[i].name, z.choice[i]));
    }
  }
}

ActiveSet SearchSpace::active_indices(const ZAssignment& z) const {
  validate(z);
  ActiveSet active;
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    const std::size_t j = z.choice[i];
    const AlgorithmSpec& alg = modules_[i].algorithms[j];
    const auto [c0, d0] = offsets_[i][j];
    for (std::size_t k = 0; k < alg.cont_params.size(); ++k) active.cont.push_back(c0 + k);
    for (std::size_t k = 0; k < alg.int_params.size(); ++k) active.ints.push_back(d0 + k);
  }
  return active;
}

std::size_t SearchSpace::find_module(const std::string& name) const {
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    if (modules_[i].name == name) return i;
  }
  return npos;
}

std::size_t SearchSpace::find_algorithm(std::size_t module, const std::string& name) const {
  const auto& algs = modules_.at(module).algorithms;
  for (std::size_t j = 0; j < algs.size(); ++j) {
    if (algs[j].name == name) return j;
  }
  return npos;
}

ThetaVector SearchSpace::midpoint() const {
  ThetaVector theta;
  theta.cont.reserve(cont_size());
  theta.relaxed_int.reserve(int_size());
  for (std::size_t p = 0; p < cont_size(); ++p) {
    const ContParam& c = cont_param(p);
    theta.cont.push_back(0.5 * (c.lower + c.upper));
  }
  for (std::size_t p = 0; p < int_size(); ++p) {
    const IntParam& d = int_param(p);
    theta.relaxed_int.push_back(0.5 * (static_cast<double>(d.lower) + static_cast<double>(d.upper)));
  }
  return theta;
}

namespace {

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(path, fmt::format("missing field '{}'", key));
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + "." + key, e.what());
  }
}

const nlohmann::json& array_field(const nlohmann::json& obj, const char* key, const std::string& path,
                                  bool optional) {
  static const nlohmann::json empty = nlohmann::json::array();
  if (!obj.contains(key)) {
    if (optional) return empty;
    throw ConfigError(path, fmt::format("missing field '{}'", key));
  }
  const auto& value = obj.at(key);
  if (!value.is_array()) throw ConfigError(path + "." + key, "expected an array");
  return value;
}

}  // namespace

SearchSpace build_space(const nlohmann::json& document) {
  if (!document.is_object()) throw ConfigError("", "search space must be an object");
  std::vector<ModuleSpec> modules;
  const auto& mods = array_field(document, "modules", "", false);
  for (std::size_t i = 0; i < mods.size(); ++i) {
    const std::string mpath = module_path(i);
    ModuleSpec mod;
    mod.name = required<std::string>(mods[i], "name", mpath);
    const auto& algs = array_field(mods[i], "algorithms", mpath, false);
    for (std::size_t j = 0; j < algs.size(); ++j) {
      const std::string apath = algorithm_path(i, j);
      AlgorithmSpec alg;
      alg.name = required<std::string>(algs[j], "name", apath);
      const auto& conts = array_field(algs[j], "cont_params", apath, true);
      for (std::size_t k = 0; k < conts.size(); ++k) {
        const std::string ppath = fmt::format("{}.cont_params[{}]", apath, k);
        alg.cont_params.push_back({required<std::string>(conts[k], "name", ppath),
                                   required<double>(conts[k], "lower", ppath),
                                   required<double>(conts[k], "upper", ppath)});
      }
      const auto& ints = array_field(algs[j], "int_params", apath, true);
      for (std::size_t k = 0; k < ints.size(); ++k) {
        const std::string ppath = fmt::format("{}.int_params[{}]", apath, k);
        for (const char* key : {"lower", "upper"}) {
          if (ints[k].contains(key) && !ints[k].at(key).is_number_integer()) {
            throw ConfigError(ppath + "." + key, "integer bound expected");
          }
        }
        alg.int_params.push_back({required<std::string>(ints[k], "name", ppath),
                                  required<std::int64_t>(ints[k], "lower", ppath),
                                  required<std::int64_t>(ints[k], "upper", ppath)});
      }
      mod.algorithms.push_back(std::move(alg));
    }
    modules.push_back(std::move(mod));
  }
  return SearchSpace(std::move(modules));
}

nlohmann::json space_to_json(const SearchSpace& space) {
  nlohmann::json mods = nlohmann::json::array();
  for (const auto& m : space.modules()) {
    nlohmann::json algs = nlohmann::json::array();
    for (const auto& a : m.algorithms) {
      nlohmann::json conts = nlohmann::json::array();
      for (const auto& c : a.cont_params) conts.push_back({{"name", c.name}, {"lower", c.lower}, {"upper", c.upper}});
      nlohmann::json ints = nlohmann::json::array();
      for (const auto& d : a.int_params) ints.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}});
      algs.push_back({{"name", a.name}, {"cont_params", conts}, {"int_params", ints}});
    }
    mods.push_back({{"name", m.name}, {"algorithms", algs}});
  }
  return {{"modules", mods}};
}

double project_box(double value, double lower, double upper) noexcept {
  return std::clamp(value, lower, upper);
}

std::int64_t project_and_round(double value, std::int64_t lower, std::int64_t upper) noexcept {
  const double clamped = std::clamp(value, static_cast<double>(lower), static_cast<double>(upper));
  // std::llround rounds halfway cases away from zero.
  return std::clamp<std::int64_t>(std::llround(clamped), lower, upper);
}

}  // namespace admmopt
