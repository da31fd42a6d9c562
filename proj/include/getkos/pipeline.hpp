#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "getkos/bundle.hpp"
#include "getkos/checkpoint.hpp"
#include "getkos/dataset.hpp"
#include "getkos/encoding.hpp"
#include "getkos/error.hpp"
#include "getkos/nas.hpp"
#include "getkos/nn.hpp"

// End-to-end compositions shared by the CLI and the acceptance suite.
namespace getkos::pipeline {

inline CleanDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  return cleanse(parse_raw_csv(in), path);
}

inline bundle::ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open model '" + path + "'");
  return bundle::load_lite(in);
}

inline std::size_t save_bundle(const bundle::ModelBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  return bundle::export_lite(b, out);
}

struct TrainPlan {
  nn::ArchSpec arch{kNumFeatures, {256, 512, 128}};
  nn::TrainConfig config;
  SplitSpec split;
};

struct TrainOutcome {
  CleanDataset train;
  CleanDataset test;
  nn::TrainHistory history;
  Checkpoint checkpoint;
};

/// split -> fit encoder on the train side -> train with the test side as
/// validation.
inline TrainOutcome train_model(const CleanDataset& data, const TrainPlan& plan) {
  auto [train, test] = split(data, plan.split);
  auto enc = fit_encoder(train);
  const auto tr = encode_matrix(enc, train);
  const auto te = encode_matrix(enc, test);
  auto result = nn::train(plan.arch, tr.X, tr.y, te.X, te.y, plan.config);

  TrainOutcome out{std::move(train), std::move(test), std::move(result.history), {}};
  auto& ck = out.checkpoint;
  ck.config = plan.config;
  ck.split_seed = plan.split.seed;
  ck.bundle.encoder = std::move(enc);
  ck.bundle.model = std::move(result.model);
  ck.bundle.metadata.training_seed = plan.config.seed;
  ck.bundle.metadata.arch_summary = plan.arch.summary();
  ck.bundle.metadata.train_mae = out.history.train_mae.back();
  ck.bundle.metadata.val_mae = out.history.val_mae.back();
  return out;
}

struct SearchOutcome {
  CleanDataset train;
  CleanDataset test;
  nas::SearchResult result;
  Checkpoint checkpoint;
};

inline SearchOutcome search_model(const CleanDataset& data, const SplitSpec& split_spec,
                                  const nas::SearchSpace& space,
                                  const nas::SearchBudget& budget,
                                  const nn::TrainConfig& base) {
  auto [train, test] = split(data, split_spec);
  auto enc = fit_encoder(train);
  const auto tr = encode_matrix(enc, train);
  const auto te = encode_matrix(enc, test);
  auto result = nas::search(tr.X, tr.y, te.X, te.y, space, budget, base);

  SearchOutcome out{std::move(train), std::move(test), std::move(result), {}};
  auto& ck = out.checkpoint;
  const auto& best = out.result.trials[out.result.best_trial];
  ck.config = base;
  ck.config.epochs = best.epochs_spent;
  ck.config.seed = best.seed;
  ck.split_seed = split_spec.seed;
  ck.bundle.encoder = std::move(enc);
  ck.bundle.model = out.result.best;
  ck.bundle.metadata.training_seed = budget.seed;
  ck.bundle.metadata.arch_summary = best.arch.summary();
  ck.bundle.metadata.train_mae =
      nn::mae_loss(nn::forward(out.result.best, tr.X), tr.y).loss;
  ck.bundle.metadata.val_mae = best.val_mae;
  return out;
}

inline bundle::ModelBundle to_bundle(const Checkpoint& ck, std::int64_t timestamp) {
  auto b = ck.bundle;
  b.metadata.created_unix = timestamp;
  b.metadata.format_version = bundle::kFormatVersion;
  return b;
}

}  // namespace getkos::pipeline
