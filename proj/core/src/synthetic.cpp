#include "admmopt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace admmopt {

SyntheticBenchmark::SyntheticBenchmark(std::string name, SearchSpace space, double base_offset,
                                       std::vector<std::vector<double>> module_offsets,
                                       std::vector<SeparableTerm> cont_terms, std::vector<SeparableTerm> int_terms,
                                       std::vector<LinearConstraint> constraints)
    : name_(std::move(name)),
      space_(std::move(space)),
      base_offset_(base_offset),
      module_offsets_(std::move(module_offsets)),
      cont_terms_(std::move(cont_terms)),
      int_terms_(std::move(int_terms)),
      constraints_(std::move(constraints)) {
  if (module_offsets_.size() != space_.num_modules()) throw std::invalid_argument("offset table shape mismatch");
  for (std::size_t i = 0; i < space_.num_modules(); ++i) {
    if (module_offsets_[i].size() != space_.num_algorithms(i)) throw std::invalid_argument("offset table shape mismatch");
  }
  if (cont_terms_.size() != space_.cont_size() || int_terms_.size() != space_.int_size()) {
    throw std::invalid_argument("term table does not match the layout");
  }
  for (std::size_t p = 0; p < int_terms_.size(); ++p) {
    const IntParam& d = space_.int_param(p);
    const double t = int_terms_[p].target;
    if (t != std::round(t) || t < static_cast<double>(d.lower) || t > static_cast<double>(d.upper)) {
      throw std::invalid_argument(fmt::format("integer target of '{}' is not in its range", d.name));
    }
  }
  for (const auto& g : constraints_) {
    if (g.base.size() != space_.num_modules() || g.cont_slope.size() != space_.cont_size() ||
        g.int_slope.size() != space_.int_size()) {
      throw std::invalid_argument("constraint table does not match the layout");
    }
  }
}

double SyntheticBenchmark::offset(const ZAssignment& z) const {
  space_.validate(z);
  double c = base_offset_;
  for (std::size_t i = 0; i < z.choice.size(); ++i) c += module_offsets_[i][z.choice[i]];
  return c;
}

CandidateConfig SyntheticBenchmark::optimum() const {
  CandidateConfig best;
  best.z.choice.resize(space_.num_modules());
  for (std::size_t i = 0; i < space_.num_modules(); ++i) {
    const auto& row = module_offsets_[i];
    best.z.choice[i] = static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
  }
  for (const auto& t : cont_terms_) best.cont.push_back(t.target);
  for (const auto& t : int_terms_) best.ints.push_back(static_cast<std::int64_t>(t.target));
  return best;
}

double SyntheticBenchmark::optimal_loss() const { return std::clamp(offset(optimum().z), 0.0, 1.0); }

EvalOutcome SyntheticBenchmark::score(const ZAssignment& z, const std::vector<ActiveValue<std::int64_t>>& ints,
                                      const std::vector<ActiveValue<double>>& cont) const {
  double loss = offset(z);
  for (const auto& v : cont) {
    const SeparableTerm& t = cont_terms_.at(v.index);
    loss += t.weight * (v.value - t.target) * (v.value - t.target);
  }
  for (const auto& v : ints) {
    const SeparableTerm& t = int_terms_.at(v.index);
    const double diff = static_cast<double>(v.value) - t.target;
    loss += t.weight * diff * diff;
  }
  EvalOutcome out;
  out.loss = std::clamp(loss, 0.0, 1.0);
  out.constraints.reserve(constraints_.size());
  for (const auto& g : constraints_) {
    double value = 0.0;
    for (std::size_t i = 0; i < z.choice.size(); ++i) value += g.base[i][z.choice[i]];
    for (const auto& v : cont) value += g.cont_slope[v.index] * v.value;
    for (const auto& v : ints) value += g.int_slope[v.index] * static_cast<double>(v.value);
    out.constraints.push_back(value);
  }
  return out;
}

EvalOutcome SyntheticBenchmark::evaluate(const EvalRequest& request) {
  EvalOutcome out = score(request.z, request.ints, request.cont);
  out.candidate_id = request.id;
  return out;
}

EvalOutcome SyntheticBenchmark::evaluate(const CandidateConfig& candidate) const {
  const EvalRequest request = make_request(space_, candidate, 0);
  return score(request.z, request.ints, request.cont);
}

namespace {

struct AlgDef {
  std::string name;
  std::vector<std::pair<ContParam, SeparableTerm>> cont;
  std::vector<std::pair<IntParam, SeparableTerm>> ints;
  double offset = 0.0;
};

struct ModDef {
  std::string name;
  std::vector<AlgDef> algorithms;
};

std::unique_ptr<SyntheticBenchmark> assemble(std::string name, double base_offset, const std::vector<ModDef>& defs,
                                             bool with_latency) {
  std::vector<ModuleSpec> modules;
  std::vector<std::vector<double>> offsets;
  std::vector<SeparableTerm> cont_terms;
  std::vector<SeparableTerm> int_terms;
  for (const ModDef& m : defs) {
    ModuleSpec spec{m.name, {}};
    std::vector<double> row;
    for (const AlgDef& a : m.algorithms) {
      AlgorithmSpec alg{a.name, {}, {}};
      for (const auto& [p, t] : a.cont) {
        alg.cont_params.push_back(p);
        cont_terms.push_back(t);
      }
      for (const auto& [p, t] : a.ints) {
        alg.int_params.push_back(p);
        int_terms.push_back(t);
      }
      spec.algorithms.push_back(std::move(alg));
      row.push_back(a.offset);
    }
    modules.push_back(std::move(spec));
    offsets.push_back(std::move(row));
  }
  SearchSpace space(std::move(modules));

  std::vector<LinearConstraint> constraints;
  if (with_latency) {
    // g = latency(estimator) + 0.5 * (estimator's continuous parameter)
    LinearConstraint g;
    g.name = "latency";
    g.base = {std::vector<double>(space.num_algorithms(0), 0.0), std::vector<double>(space.num_algorithms(1), 0.0),
              {0.10, 0.15, 0.20, 0.25}};
    g.cont_slope.assign(space.cont_size(), 0.0);
    g.int_slope.assign(space.int_size(), 0.0);
    for (std::size_t j = 0; j < space.num_algorithms(2); ++j) g.cont_slope[space.cont_offset(2, j)] = 0.5;
    constraints.push_back(std::move(g));
  }
  return std::make_unique<SyntheticBenchmark>(std::move(name), std::move(space), base_offset, std::move(offsets),
                                              std::move(cont_terms), std::move(int_terms), std::move(constraints));
}

constexpr double kContWeight = 0.2;
constexpr double kIntWeight = 0.4;

std::pair<ContParam, SeparableTerm> unit(std::string name, double target, double weight = kContWeight) {
  return {ContParam{std::move(name), 0.0, 1.0}, SeparableTerm{target, weight}};
}

std::pair<IntParam, SeparableTerm> range(std::string name, std::int64_t lo, std::int64_t hi, std::int64_t target,
                                         double weight = kIntWeight) {
  return {IntParam{std::move(name), lo, hi}, SeparableTerm{static_cast<double>(target), weight}};
}

// Integer targets sit at most one step from the rounded box midpoint.
std::vector<ModDef> mixed_defs() {
  return {
      {"scaler",
       {{"standard", {unit("standard_a", 0.312), unit("standard_b", 0.705)}, {range("standard_k", 0, 4, 3)}, 0.50},
        {"robust", {unit("robust_a", 0.641), unit("robust_b", 0.287)}, {range("robust_k", 1, 5, 4)}, 0.0}}},
      {"transformer",
       {{"pca", {unit("pca_a", 0.418), unit("pca_b", 0.733)}, {range("pca_k", 1, 5, 2)}, 0.50},
        {"poly", {unit("poly_a", 0.276), unit("poly_b", 0.55)}, {range("poly_k", 0, 4, 1)}, 0.55},
        {"ica", {unit("ica_a", 0.683), unit("ica_b", 0.374)}, {range("ica_k", 2, 6, 3)}, 0.0}}},
      {"estimator",
       {{"nb", {unit("nb_a", 0.35)}, {range("nb_k", 0, 4, 3)}, 0.55},
        {"gbm", {unit("gbm_a", 0.618)}, {range("gbm_k", 1, 5, 3)}, 0.0},
        {"knn", {unit("knn_a", 0.45)}, {range("knn_k", 1, 5, 4)}, 0.50},
        {"forest", {unit("forest_a", 0.52)}, {range("forest_k", 0, 4, 1)}, 0.52}}},
  };
}

// Deterministic pseudo-random target in [lo, hi] on a 1e-3 grid.
double grid_target(std::size_t seed, double lo, double hi) {
  const double frac = std::fmod(0.5 + 0.6180339887498949 * static_cast<double>(seed + 1), 1.0);
  return std::round((lo + (0.2 + 0.6 * frac) * (hi - lo)) * 1000.0) / 1000.0;
}

std::vector<ModDef> pipeline_defs() {
  std::size_t counter = 0;
  auto c = [&](std::string n) { return unit(std::move(n), grid_target(counter++, 0.0, 1.0), 0.05); };
  auto d = [&](std::string n, std::int64_t lo, std::int64_t hi) {
    const auto mid = static_cast<std::int64_t>(std::llround(0.5 * static_cast<double>(lo + hi)));
    const double width = static_cast<double>(hi - lo);
    return range(std::move(n), lo, hi, std::clamp<std::int64_t>(mid + ((counter++ % 2) ? 1 : -1), lo, hi),
                 0.1 / (width * width));
  };
  return {
      {"scaler",
       {{"none", {}, {}, 0.08},
        {"normalizer", {}, {}, 0.05},
        {"quantile", {}, {d("quantile_n", 1, 10), d("quantile_dist", 0, 1)}, 0.03},
        {"minmax", {}, {}, 0.07},
        {"standard", {}, {}, 0.0},
        {"robust", {c("robust_qlo"), c("robust_qhi")}, {d("robust_center", 0, 1), d("robust_scale", 0, 1)}, 0.02}}},
      {"transformer",
       {{"none", {}, {}, 0.06},
        {"pca", {c("pca_var")}, {d("pca_whiten", 0, 1)}, 0.0},
        {"poly", {c("poly_mix")}, {d("poly_degree", 1, 3), d("poly_inter", 0, 1)}, 0.04}}},
      {"estimator",
       {{"gnb", {}, {}, 0.15},
        {"qda", {c("qda_reg")}, {}, 0.12},
        {"gb",
         {c("gb_lr"), c("gb_sub"), c("gb_frac")},
         {d("gb_depth", 1, 10), d("gb_leaf", 1, 20), d("gb_split", 2, 20), d("gb_trees", 1, 10), d("gb_feat", 1, 4),
          d("gb_loss", 0, 1)},
         0.0},
        {"knn", {}, {d("knn_k", 1, 30), d("knn_p", 1, 2), d("knn_weights", 0, 1)}, 0.09},
        {"rf",
         {c("rf_frac")},
         {d("rf_depth", 1, 10), d("rf_leaf", 1, 20), d("rf_split", 2, 20), d("rf_trees", 1, 10), d("rf_boot", 0, 1)},
         0.03},
        {"et",
         {c("et_frac")},
         {d("et_depth", 1, 10), d("et_leaf", 1, 20), d("et_split", 2, 20), d("et_trees", 1, 10), d("et_boot", 0, 1)},
         0.04}}},
  };
}

}  // namespace

std::unique_ptr<SyntheticBenchmark> make_builtin(const std::string& name) {
  if (name == "mixed") return assemble(name, 0.05, mixed_defs(), false);
  if (name == "mixed_latency") return assemble(name, 0.05, mixed_defs(), true);
  if (name == "pipeline") return assemble(name, 0.05, pipeline_defs(), false);
  throw std::invalid_argument(fmt::format("unknown benchmark '{}'", name));
}

std::vector<std::string> builtin_names() { return {"mixed", "mixed_latency", "pipeline"}; }

}  // namespace admmopt
