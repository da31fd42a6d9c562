#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "getkos/bundle.hpp"
#include "getkos/checkpoint.hpp"
#include "getkos/dataset.hpp"
#include "getkos/error.hpp"
#include "getkos/nas.hpp"
#include "getkos/pipeline.hpp"
#include "getkos/service.hpp"
#include "getkos/synth.hpp"

namespace getkos::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kModelError = 3,
};

inline constexpr const char* kErrorPrefix = "getkos: error: ";

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::schema:
    case ErrorKind::empty_dataset:
    case ErrorKind::split:
      return kDataError;
    default:
      return kModelError;
  }
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& tok : split_list(s)) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || v == 0) {
      throw CLI::ValidationError("--arch", "'" + tok + "' is not a positive width");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline std::int64_t now_unix() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  return f;
}

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace detail

/// Runs one CLI invocation; args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Boarding-house rent price prediction toolkit", "getkos"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_in, ingest_out;
  bool ingest_json = false;
  auto* ingest = app.add_subcommand("ingest", "Parse and cleanse a raw listing CSV");
  ingest->add_option("--input", ingest_in, "Raw CSV")->required();
  ingest->add_option("--output", ingest_out, "Cleansed CSV")->required();
  ingest->add_flag("--json", ingest_json);

  // stats
  std::string stats_in, stats_out;
  std::size_t top_k = 25;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Descriptive statistics of a dataset");
  stats->add_option("--input", stats_in)->required();
  stats->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  stats->add_option("--output", stats_out, "Write the report as JSON");
  stats->add_flag("--json", stats_json);

  // train
  std::string train_data, train_arch = "256,512,128", train_out, train_ckpt,
                          train_split_train, train_split_test;
  nn::TrainConfig train_cfg;
  SplitSpec train_split;
  bool no_scaling = false, train_json = false;
  std::optional<std::int64_t> train_ts;
  auto* train = app.add_subcommand("train", "Fit encoder, train, export .kosm");
  train->add_option("--data", train_data)->required();
  train->add_option("--arch", train_arch, "Comma list of hidden widths");
  train->add_option("--epochs", train_cfg.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", train_cfg.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--learning-rate", train_cfg.learning_rate)
      ->check(CLI::PositiveNumber);
  train->add_option("--seed", train_cfg.seed);
  train->add_option("--split-seed", train_split.seed);
  train->add_option("--test-fraction", train_split.test_fraction);
  train->add_flag("--no-target-scaling", no_scaling);
  train->add_option("--out", train_out)->required();
  train->add_option("--checkpoint", train_ckpt, "Also write a JSON checkpoint");
  train->add_option("--train-out", train_split_train, "Write the train split CSV");
  train->add_option("--test-out", train_split_test, "Write the test split CSV");
  train->add_option("--timestamp", train_ts, "Fixed creation time (unix seconds)");
  train->add_flag("--json", train_json);

  // search
  std::string search_data, search_out, search_ledger, search_ckpt, search_widths;
  nas::SearchBudget budget;
  nas::SearchSpace space;
  SplitSpec search_split;
  nn::TrainConfig search_cfg;
  std::optional<std::int64_t> search_ts;
  bool search_json = false;
  auto* search = app.add_subcommand("search", "Morphism-based architecture search");
  search->add_option("--data", search_data)->required();
  search->add_option("--random", budget.n_random)->check(CLI::PositiveNumber);
  search->add_option("--morph", budget.n_morph);
  search->add_option("--epochs-per-trial", budget.epochs_per_trial)
      ->check(CLI::PositiveNumber);
  search->add_option("--seed", budget.seed);
  search->add_option("--workers", budget.workers)->check(CLI::PositiveNumber);
  search->add_option("--min-depth", space.min_depth)->check(CLI::PositiveNumber);
  search->add_option("--max-depth", space.max_depth)->check(CLI::PositiveNumber);
  search->add_option("--widths", search_widths, "Comma list of width choices");
  search->add_option("--batch-size", search_cfg.batch_size)->check(CLI::PositiveNumber);
  search->add_option("--learning-rate", search_cfg.learning_rate)
      ->check(CLI::PositiveNumber);
  search->add_option("--split-seed", search_split.seed);
  search->add_option("--test-fraction", search_split.test_fraction);
  search->add_option("--out", search_out)->required();
  search->add_option("--ledger", search_ledger, "Trial ledger (JSON lines)");
  search->add_option("--checkpoint", search_ckpt);
  search->add_option("--timestamp", search_ts);
  search->add_flag("--json", search_json);

  // evaluate
  std::string eval_model, eval_data;
  bool eval_json = false;
  auto* evaluate = app.add_subcommand("evaluate", "MAE of a model on a dataset");
  evaluate->add_option("--model", eval_model)->required();
  evaluate->add_option("--data", eval_data)->required();
  evaluate->add_flag("--json", eval_json);

  // export
  std::string export_ckpt, export_out;
  std::optional<std::int64_t> export_ts;
  auto* exp = app.add_subcommand("export", "Convert a JSON checkpoint to .kosm");
  exp->add_option("--checkpoint", export_ckpt)->required();
  exp->add_option("--out", export_out)->required();
  exp->add_option("--timestamp", export_ts);

  // predict
  std::string pred_model, pred_kota, pred_area, pred_type, pred_fac;
  bool pred_json = false;
  auto* predict = app.add_subcommand("predict", "Predict one monthly rent");
  predict->add_option("--model", pred_model)->required();
  predict->add_option("--kota", pred_kota)->required();
  predict->add_option("--area", pred_area)->required();
  predict->add_option("--type", pred_type)->required();
  predict->add_option("--facilities", pred_fac, "Comma list of facility names");
  predict->add_flag("--json", pred_json);

  // serve
  std::string serve_model, serve_bind = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP inference service");
  serve->add_option("--model", serve_model)->required();
  serve->add_option("--port", serve_port)->check(CLI::Range(0, 65535));
  serve->add_option("--bind", serve_bind);

  // synth
  synth::Options synth_opt;
  std::string synth_out;
  auto* syn = app.add_subcommand("synth", "Generate the synthetic mirror corpus");
  syn->add_option("--seed", synth_opt.seed);
  syn->add_option("--rows", synth_opt.rows)->check(CLI::PositiveNumber);
  syn->add_option("--dirty", synth_opt.dirty_rows, "Extra rows for cleansing to drop");
  syn->add_option("--out", synth_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << kErrorPrefix << e.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    if (*ingest) {
      std::ifstream in(ingest_in, std::ios::binary);
      if (!in) throw Error(ErrorKind::io, "cannot open '" + ingest_in + "'");
      const auto data = cleanse(parse_raw_csv(in), ingest_in);
      auto f = detail::open_out(ingest_out);
      write_csv(f, data.records);
      const auto& p = data.provenance;
      if (ingest_json) {
        out << nlohmann::json{{"rows_read", p.rows_read},
                              {"kept", data.size()},
                              {"duplicates_dropped", p.duplicates_dropped},
                              {"nulls_dropped", p.nulls_dropped}}
                   .dump()
            << '\n';
      } else {
        out << "rows_read: " << p.rows_read << "\nkept: " << data.size()
            << "\nduplicates_dropped: " << p.duplicates_dropped
            << "\nnulls_dropped: " << p.nulls_dropped << '\n';
      }
    } else if (*stats) {
      const auto data = pipeline::load_dataset(stats_in);
      const auto report = to_json(describe(data, top_k));
      if (!stats_out.empty()) {
        auto f = detail::open_out(stats_out);
        f << report.dump(2) << '\n';
      }
      if (stats_json || stats_out.empty()) {
        out << report.dump(2) << '\n';
      } else {
        out << "total_records: " << report["total_records"] << '\n';
      }
    } else if (*train) {
      pipeline::TrainPlan plan;
      plan.arch.hidden = detail::parse_widths(train_arch);
      plan.config = train_cfg;
      plan.config.target_scaling = !no_scaling;
      plan.split = train_split;
      const auto data = pipeline::load_dataset(train_data);
      auto outcome = pipeline::train_model(data, plan);
      if (!train_split_train.empty()) {
        auto f = detail::open_out(train_split_train);
        write_csv(f, outcome.train.records);
      }
      if (!train_split_test.empty()) {
        auto f = detail::open_out(train_split_test);
        write_csv(f, outcome.test.records);
      }
      if (!train_ckpt.empty()) {
        auto f = detail::open_out(train_ckpt);
        write_checkpoint(f, outcome.checkpoint);
      }
      const auto b =
          pipeline::to_bundle(outcome.checkpoint, train_ts.value_or(detail::now_unix()));
      const auto bytes = pipeline::save_bundle(b, train_out);
      if (train_json) {
        out << nlohmann::json{{"arch", b.metadata.arch_summary},
                              {"train_mae", b.metadata.train_mae},
                              {"val_mae", b.metadata.val_mae},
                              {"bytes", bytes}}
                   .dump()
            << '\n';
      } else {
        out << "arch: " << b.metadata.arch_summary << '\n'
            << "train MAE: " << detail::fixed3(b.metadata.train_mae) << '\n'
            << "validation MAE: " << detail::fixed3(b.metadata.val_mae) << '\n'
            << "wrote " << train_out << " (" << bytes << " bytes)\n";
      }
    } else if (*search) {
      if (!search_widths.empty()) space.widths = detail::parse_widths(search_widths);
      const auto data = pipeline::load_dataset(search_data);
      auto outcome =
          pipeline::search_model(data, search_split, space, budget, search_cfg);
      if (!search_ledger.empty()) {
        auto f = detail::open_out(search_ledger);
        nas::write_ledger(f, outcome.result.trials);
      }
      if (!search_ckpt.empty()) {
        auto f = detail::open_out(search_ckpt);
        write_checkpoint(f, outcome.checkpoint);
      }
      const auto b =
          pipeline::to_bundle(outcome.checkpoint, search_ts.value_or(detail::now_unix()));
      const auto bytes = pipeline::save_bundle(b, search_out);
      const auto& best = outcome.result.trials[outcome.result.best_trial];
      if (search_json) {
        out << nlohmann::json{{"best_trial", best.id},
                              {"arch", best.arch.summary()},
                              {"val_mae", best.val_mae},
                              {"trials", outcome.result.trials.size()},
                              {"bytes", bytes}}
                   .dump()
            << '\n';
      } else {
        for (const auto& t : outcome.result.trials) {
          out << "trial " << t.id << "  " << t.arch.summary() << "  "
              << (t.diverged ? std::string("diverged") : detail::fixed3(t.val_mae))
              << (t.morphism.empty() ? "" : "  " + t.morphism) << '\n';
        }
        out << "best: trial " << best.id << " " << best.arch.summary()
            << " validation MAE: " << detail::fixed3(best.val_mae) << '\n'
            << "wrote " << search_out << " (" << bytes << " bytes)\n";
      }
    } else if (*evaluate) {
      const auto b = pipeline::load_bundle(eval_model);
      const auto data = pipeline::load_dataset(eval_data);
      const double mae = nn::evaluate(b.model, b.encoder, data);
      if (eval_json) {
        out << nlohmann::json{{"mae", mae}, {"records", data.size()}}.dump() << '\n';
      } else {
        out << "MAE: " << detail::fixed3(mae) << '\n';
      }
    } else if (*exp) {
      std::ifstream in(export_ckpt, std::ios::binary);
      if (!in) throw Error(ErrorKind::io, "cannot open '" + export_ckpt + "'");
      const auto ck = read_checkpoint(in);
      const auto b = pipeline::to_bundle(ck, export_ts.value_or(detail::now_unix()));
      const auto bytes = pipeline::save_bundle(b, export_out);
      out << "wrote " << export_out << " (" << bytes << " bytes)\n";
    } else if (*predict) {
      const auto b = pipeline::load_bundle(pred_model);
      const auto p = bundle::predict(b, pred_kota, pred_area, pred_type,
                                     detail::split_list(pred_fac));
      if (pred_json) {
        out << bundle::to_json(p).dump() << '\n';
      } else {
        out << bundle::format_rupiah(p.display_price) << " / month\n";
        out << "facility_score: " << p.facility_score_used << '\n';
        for (const auto& f : p.unknown_facilities) {
          out << "note: unknown facility '" << f << "' ignored\n";
        }
        for (const auto& f : p.oov_fields) {
          out << "note: " << f << " not seen during training\n";
        }
      }
    } else if (*serve) {
      const auto b = pipeline::load_bundle(serve_model);
      auto server = service::make_server(b);
      if (!server->bind_to_port(serve_bind, serve_port)) {
        throw Error(ErrorKind::io, "cannot bind " + serve_bind + ":" +
                                       std::to_string(serve_port));
      }
      out << "listening on http://" << serve_bind << ':' << serve_port << std::endl;
      server->listen_after_bind();
    } else if (*syn) {
      const auto rows = synth::generate(synth_opt);
      auto f = detail::open_out(synth_out);
      write_csv(f, rows);
      out << "wrote " << rows.size() << " rows to " << synth_out << '\n';
    }
  } catch (const Error& e) {
    err << kErrorPrefix << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const CLI::Error& e) {
    err << kErrorPrefix << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << kErrorPrefix << e.what() << '\n';
    return kModelError;
  }
  return kOk;
}

}  // namespace getkos::cli
