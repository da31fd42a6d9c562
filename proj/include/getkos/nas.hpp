#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "getkos/error.hpp"
#include "getkos/nn.hpp"
#include "getkos/rng.hpp"

namespace getkos::nas {

struct SearchSpace {
  std::size_t min_depth = 1;
  std::size_t max_depth = 4;
  std::vector<std::size_t> widths = {16, 32, 64, 128, 256, 512, 1024};
  /// Optional per-position width choices; when set, position i draws from
  /// position_widths[i] instead of `widths`.
  std::vector<std::vector<std::size_t>> position_widths;

  void validate() const {
    if (min_depth < 1 || min_depth > max_depth) {
      throw Error(ErrorKind::search, "depth range must satisfy 1 <= min <= max");
    }
    if (widths.empty()) throw Error(ErrorKind::search, "no width choices");
    for (const auto& p : position_widths) {
      if (p.empty()) throw Error(ErrorKind::search, "empty per-position widths");
    }
  }

  const std::vector<std::size_t>& choices_at(std::size_t position) const {
    return position < position_widths.size() ? position_widths[position] : widths;
  }

  bool contains(const nn::ArchSpec& arch) const {
    const auto d = arch.hidden.size();
    if (d < min_depth || d > max_depth) return false;
    for (std::size_t i = 0; i < d; ++i) {
      const auto& c = choices_at(i);
      if (std::find(c.begin(), c.end(), arch.hidden[i]) == c.end()) return false;
    }
    return true;
  }
};

struct SearchBudget {
  std::size_t n_random = 8;
  std::size_t n_morph = 8;
  std::size_t epochs_per_trial = 30;
  std::uint64_t seed = 42;
  /// Threads for the warm-start phase; results do not depend on it.
  std::size_t workers = 1;
};

struct Trial {
  std::size_t id = 0;
  nn::ArchSpec arch;
  std::uint64_t seed = 0;
  double val_mae = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::size_t> parent;
  std::string morphism;
  std::size_t epochs_spent = 0;
  bool diverged = false;

  bool operator==(const Trial& o) const {
    auto same = [](double a, double b) {
      return a == b || (std::isnan(a) && std::isnan(b));
    };
    return id == o.id && arch == o.arch && seed == o.seed &&
           same(val_mae, o.val_mae) && parent == o.parent &&
           morphism == o.morphism && epochs_spent == o.epochs_spent &&
           diverged == o.diverged;
  }
};

class SearchError : public Error {
 public:
  SearchError(const std::string& what, std::vector<Trial> trials)
      : Error(ErrorKind::search, what), trials_(std::move(trials)) {}
  const std::vector<Trial>& trials() const { return trials_; }

 private:
  std::vector<Trial> trials_;
};

inline nn::ArchSpec random_arch(const SearchSpace& space, Rng& rng,
                                std::size_t input_dim = kNumFeatures) {
  space.validate();
  nn::ArchSpec arch{input_dim, {}};
  const auto depth =
      space.min_depth + rng.below(space.max_depth - space.min_depth + 1);
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& c = space.choices_at(i);
    arch.hidden.push_back(c[rng.below(c.size())]);
  }
  return arch;
}

/// Net2Wider: the first `current` units map to themselves, each extra unit
/// copies a uniformly chosen existing unit; outgoing weights of every
/// replicated unit are divided by its final replication count.
inline nn::MLPModel widen(const nn::MLPModel& model, std::size_t layer_index,
                          std::size_t new_width, Rng& rng) {
  if (layer_index >= model.depth()) {
    throw Error(ErrorKind::morphism,
                "widen: layer " + std::to_string(layer_index) +
                    " is not a hidden layer");
  }
  const auto& layer = model.layers[layer_index];
  const auto& next = model.layers[layer_index + 1];
  const std::size_t old_width = layer.out_dim();
  if (new_width < old_width) {
    throw Error(ErrorKind::morphism,
                "widen: cannot shrink layer " + std::to_string(layer_index) +
                    " from " + std::to_string(old_width) + " to " +
                    std::to_string(new_width));
  }
  if (new_width == old_width) return model;

  std::vector<std::size_t> source(new_width);
  std::vector<std::size_t> count(old_width, 1);
  for (std::size_t j = 0; j < new_width; ++j) {
    source[j] = j < old_width ? j : rng.below(old_width);
    if (j >= old_width) ++count[source[j]];
  }

  nn::MLPModel out = model;
  auto& wide = out.layers[layer_index];
  wide.weights = Matrix(layer.in_dim(), new_width);
  wide.bias.assign(new_width, 0.0);
  for (std::size_t j = 0; j < new_width; ++j) {
    for (std::size_t k = 0; k < layer.in_dim(); ++k) {
      wide.weights(k, j) = layer.weights(k, source[j]);
    }
    wide.bias[j] = layer.bias[source[j]];
  }

  auto& after = out.layers[layer_index + 1];
  after.weights = Matrix(new_width, next.out_dim());
  for (std::size_t j = 0; j < new_width; ++j) {
    const double c = static_cast<double>(count[source[j]]);
    for (std::size_t o = 0; o < next.out_dim(); ++o) {
      after.weights(j, o) = next.weights(source[j], o) / c;
    }
  }
  return out;
}

/// Inserts an identity ReLU layer after hidden layer `insert_after`. Its
/// inputs are ReLU outputs (non-negative), so ReLU(I x) = x.
inline nn::MLPModel deepen(const nn::MLPModel& model, std::size_t insert_after) {
  if (insert_after >= model.depth()) {
    throw Error(ErrorKind::morphism,
                "deepen: position " + std::to_string(insert_after) +
                    " does not follow a ReLU hidden layer");
  }
  const std::size_t w = model.layers[insert_after].out_dim();
  nn::DenseLayer identity{Matrix(w, w), std::vector<double>(w, 0.0),
                          nn::Activation::relu};
  for (std::size_t i = 0; i < w; ++i) identity.weights(i, i) = 1.0;
  nn::MLPModel out = model;
  out.layers.insert(out.layers.begin() + static_cast<std::ptrdiff_t>(insert_after) + 1,
                    std::move(identity));
  return out;
}

struct Morphism {
  enum class Kind { widen, deepen } kind;
  std::size_t layer = 0;
  std::size_t width = 0;  // target width for widen

  std::string describe() const {
    return kind == Kind::widen
               ? "widen(layer=" + std::to_string(layer) +
                     ",width=" + std::to_string(width) + ")"
               : "deepen(after=" + std::to_string(layer) + ")";
  }
};

/// Every morphism of `arch` whose result stays inside the space.
inline std::pair<std::vector<Morphism>, std::vector<Morphism>> legal_morphisms(
    const nn::ArchSpec& arch, const SearchSpace& space) {
  std::vector<Morphism> widens, deepens;
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    for (auto w : space.choices_at(l)) {
      if (w <= arch.hidden[l]) continue;
      auto child = arch;
      child.hidden[l] = w;
      if (space.contains(child)) widens.push_back({Morphism::Kind::widen, l, w});
    }
    auto child = arch;
    child.hidden.insert(child.hidden.begin() + static_cast<std::ptrdiff_t>(l) + 1,
                        arch.hidden[l]);
    if (space.contains(child)) deepens.push_back({Morphism::Kind::deepen, l, 0});
  }
  return {std::move(widens), std::move(deepens)};
}

inline nn::MLPModel apply(const nn::MLPModel& model, const Morphism& m, Rng& rng) {
  return m.kind == Morphism::Kind::widen ? widen(model, m.layer, m.width, rng)
                                         : deepen(model, m.layer);
}

struct SearchResult {
  nn::MLPModel best;
  std::size_t best_trial = 0;
  std::vector<Trial> trials;
};

/// Running minimum of val_mae over the ledger (diverged trials carry the
/// previous incumbent forward).
inline std::vector<double> incumbent_curve(const std::vector<Trial>& trials) {
  std::vector<double> out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    if (!t.diverged && t.val_mae < best) best = t.val_mae;
    out.push_back(best);
  }
  return out;
}

/// Seeded random warm start, then hill-climbing: the incumbent is morphed
/// (widen or deepen, 50/50 over non-empty option sets, parameters uniform)
/// and fine-tuned; a child replaces the incumbent only if strictly better.
inline SearchResult search(const Matrix& X_train, std::span<const double> y_train,
                           const Matrix& X_val, std::span<const double> y_val,
                           const SearchSpace& space, const SearchBudget& budget,
                           nn::TrainConfig base = {}) {
  space.validate();
  if (budget.n_random < 1) throw Error(ErrorKind::search, "n_random must be >= 1");
  if (budget.epochs_per_trial < 1) {
    throw Error(ErrorKind::search, "epochs_per_trial must be >= 1");
  }
  if (X_train.rows() == 0 || X_val.rows() == 0) {
    throw Error(ErrorKind::empty_batch, "search needs training and validation rows");
  }
  base.epochs = budget.epochs_per_trial;

  Rng rng(budget.seed);
  std::vector<Trial> trials(budget.n_random);
  for (std::size_t i = 0; i < budget.n_random; ++i) {
    trials[i].id = i;
    trials[i].arch = random_arch(space, rng, X_train.cols());
    trials[i].seed = mix_seed(budget.seed + i);
  }

  std::vector<std::optional<nn::MLPModel>> models(budget.n_random);
  auto run_trial = [&](std::size_t i) {
    auto cfg = base;
    cfg.seed = trials[i].seed;
    try {
      auto r = nn::train(trials[i].arch, X_train, y_train, X_val, y_val, cfg);
      trials[i].val_mae = r.history.val_mae.back();
      models[i] = std::move(r.model);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::divergence) throw;
      trials[i].diverged = true;
    }
    trials[i].epochs_spent = budget.epochs_per_trial;
  };
  const std::size_t workers = std::max<std::size_t>(1, budget.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < budget.n_random; ++i) run_trial(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < budget.n_random; i += workers) run_trial(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::optional<std::size_t> incumbent;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].diverged) continue;
    if (!incumbent || trials[i].val_mae < trials[*incumbent].val_mae) incumbent = i;
  }
  if (!incumbent) throw SearchError("every warm-start trial diverged", trials);
  nn::MLPModel best = std::move(*models[*incumbent]);
  models.clear();

  for (std::size_t step = 0; step < budget.n_morph; ++step) {
    const auto& parent = trials[*incumbent];
    auto [widens, deepens] = legal_morphisms(parent.arch, space);
    if (widens.empty() && deepens.empty()) break;
    const auto* pool = &widens;
    if (widens.empty()) {
      pool = &deepens;
    } else if (!deepens.empty() && rng.below(2) == 1) {
      pool = &deepens;
    }
    const Morphism m = (*pool)[rng.below(pool->size())];

    Trial child;
    child.id = trials.size();
    child.seed = mix_seed(budget.seed + budget.n_random + step);
    child.parent = parent.id;
    child.morphism = m.describe();
    child.epochs_spent = budget.epochs_per_trial;
    Rng morph_rng(child.seed);
    auto morphed = apply(best, m, morph_rng);
    child.arch = morphed.arch();

    auto cfg = base;
    cfg.seed = child.seed;
    try {
      auto r = nn::fine_tune(std::move(morphed), X_train, y_train, X_val, y_val, cfg);
      child.val_mae = r.history.val_mae.back();
      if (child.val_mae < parent.val_mae) {
        best = std::move(r.model);
        incumbent = child.id;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::divergence) throw;
      child.diverged = true;
    }
    trials.push_back(std::move(child));
  }

  return {std::move(best), *incumbent, std::move(trials)};
}

inline nlohmann::json to_json(const Trial& t) {
  nlohmann::json j = {
      {"id", t.id},
      {"arch", t.arch.hidden},
      {"arch_summary", t.arch.summary()},
      {"seed", t.seed},
      {"epochs_spent", t.epochs_spent},
      {"status", t.diverged ? "diverged" : "completed"},
  };
  j["val_mae"] = t.diverged ? nlohmann::json(nullptr) : nlohmann::json(t.val_mae);
  j["parent"] = t.parent ? nlohmann::json(*t.parent) : nlohmann::json(nullptr);
  j["morphism"] = t.morphism.empty() ? nlohmann::json(nullptr)
                                     : nlohmann::json(t.morphism);
  return j;
}

/// One JSON object per line.
inline void write_ledger(std::ostream& out, const std::vector<Trial>& trials) {
  for (const auto& t : trials) out << to_json(t).dump() << '\n';
}

}  // namespace getkos::nas
