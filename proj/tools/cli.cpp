// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "banet/analysis.hpp"
#include "banet/checkpoint.hpp"
#include "banet/cost.hpp"
#include "banet/io.hpp"
#include "banet/kernels.hpp"
#include "banet/training.hpp"

namespace banet::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetOptions {
  std::string arch = "resnet20";
  std::string attention = "ba";
  std::string sources = "all";
};

struct NetChoice {
  ArchSpec arch;
  AttentionKind attention = AttentionKind::none;
  BridgeSourceConfig sources;
};

void add_net_options(CLI::App* cmd, NetOptions& o) {
  cmd->add_option("--arch", o.arch, "resnet20 | resnet50 | resnet101 | path to an architecture JSON")
      ->capture_default_str();
  cmd->add_option("--attention", o.attention, "none | se | ba")->capture_default_str();
  cmd->add_option("--bridge-sources", o.sources, "all | conv1 | conv2 | conv1&2")->capture_default_str();
}

ArchSpec arch_or_usage(const std::string& name) {
  try {
    return resolve_arch(name);
  } catch (const ConfigurationError& e) {
    throw UsageError(e.what());
  }
}

NetChoice resolve(const NetOptions& o) {
  NetChoice c;
  c.arch = arch_or_usage(o.arch);
  try {
    c.attention = parse_attention_kind(o.attention);
    c.sources = BridgeSourceConfig::parse(o.sources);
  } catch (const ConfigurationError& e) {
    throw UsageError(e.what());
  }
  return c;
}

Shape parse_shape(const std::string& text) {
  Shape s;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, text.find('x') != std::string::npos ? 'x' : ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(token, &used);
      if (used != token.size() || v <= 0) throw std::invalid_argument(token);
      s.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad --input-shape '" + text + "'");
    }
  }
  if (s.size() != 4) throw UsageError("--input-shape needs B,C,H,W, got '" + text + "'");
  return s;
}

std::vector<int> parse_classes(const std::string& text) {
  std::vector<int> out;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad class '" + token + "'");
    }
  }
  return out;
}

std::string format_cost(const Cost& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << static_cast<double>(c.params) / 1e6 << "M / "
     << static_cast<double>(c.flops) / 1e9 << "G";
  return os.str();
}

struct DataOptions {
  std::string dir;
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;
};

std::pair<Dataset, Dataset> load_data(const DataOptions& d) {
  auto [train, test] = load_cifar10(d.dir);
  if (d.train_limit > 0) train = train.head(d.train_limit);
  if (d.test_limit > 0) test = test.head(d.test_limit);
  return {std::move(train), std::move(test)};
}

TrainConfig load_config(const std::string& path, const CLI::Option* seed_opt, std::uint64_t seed,
                        const CLI::Option* epochs_opt, int epochs) {
  TrainConfig cfg;
  if (!path.empty()) cfg = TrainConfig::from_json(read_file(path));
  if (seed_opt && seed_opt->count() > 0) cfg.seed = seed;
  if (epochs_opt && epochs_opt->count() > 0) cfg.epochs = epochs;
  cfg.validate();
  return cfg;
}

void check_input(const ArchSpec& arch, const Dataset& d) {
  if (arch.input_shape != Shape{d.channels, d.height, d.width}) {
    throw ConfigurationError("architecture '" + arch.name + "' expects input " + to_string(arch.input_shape) +
                             ", data is " + to_string(Shape{d.channels, d.height, d.width}));
  }
}

template <typename T>
History train_one(const NetChoice& choice, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  const fs::path& checkpoint, const std::string& label, std::ostream& out) {
  auto net = Network<T>::build(choice.arch, choice.attention, choice.sources, cfg.seed);
  TrainOptions opts;
  opts.checkpoint = checkpoint;
  opts.on_epoch = [&](const EpochRecord& r) {
    out << label << "epoch " << r.epoch << '/' << cfg.epochs << "  lr " << r.lr << "  loss " << r.train_loss
        << "  top1 " << r.test_top1 << "  top5 " << r.test_top5 << std::endl;
  };
  return train(net, train_set, test_set, cfg, opts);
}

History train_dispatch(const NetChoice& choice, const Dataset& train_set, const Dataset& test_set,
                       const TrainConfig& cfg, const fs::path& checkpoint, const std::string& label,
                       std::ostream& out) {
  check_input(choice.arch, train_set);
  if (cfg.precision == Precision::float64) {
    return train_one<double>(choice, train_set, test_set, cfg, checkpoint, label, out);
  }
  return train_one<float>(choice, train_set, test_set, cfg, checkpoint, label, out);
}

// Analysis commands run at 64-bit; checkpoint values widen exactly.
Network<double> load_network(const NetChoice& choice, const std::string& checkpoint) {
  auto net = Network<double>::build(choice.arch, choice.attention, choice.sources, 0);
  load_checkpoint(net, checkpoint);
  return net;
}

struct CompareEntry {
  std::string label;
  NetChoice choice;
};

CompareEntry parse_compare_entry(const std::string& text, const ArchSpec& arch) {
  CompareEntry e;
  e.label = text;
  e.choice.arch = arch;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  try {
    e.choice.attention = parse_attention_kind(kind);
    if (colon != std::string::npos) {
      if (e.choice.attention != AttentionKind::ba) throw UsageError("bridge sources only apply to ba: '" + text + "'");
      e.choice.sources = BridgeSourceConfig::parse(text.substr(colon + 1));
    }
  } catch (const ConfigurationError& ex) {
    throw UsageError(ex.what());
  }
  return e;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

void apply_thread_env() {
  if (const char* env = std::getenv("BANET_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) kernels::set_num_threads(n);
    } catch (const std::exception&) {
      throw UsageError(std::string("BANET_THREADS must be a positive integer, got '") + env + "'");
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channel-attention networks: cost accounting, training and attention analysis", "banet"};
  app.require_subcommand(1);

  // count
  NetOptions count_net;
  count_net.attention = "all";
  std::string input_shape;
  auto* count = app.add_subcommand("count", "Print parameter and FLOP counts");
  add_net_options(count, count_net);
  count->add_option("--input-shape", input_shape, "B,C,H,W (default: 1 and the architecture's input)");

  // train
  NetOptions train_net;
  DataOptions train_data;
  std::string train_config, train_out;
  std::uint64_t train_seed = 0;
  int train_epochs = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a network and write history.csv and model.ckpt");
  add_net_options(train_cmd, train_net);
  train_cmd->add_option("--data", train_data.dir, "Directory with CIFAR-10 binary batches")->required();
  train_cmd->add_option("--config", train_config, "Training configuration JSON");
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Overrides the configured seed");
  auto* train_epochs_opt = train_cmd->add_option("--epochs", train_epochs, "Overrides the configured epochs");
  train_cmd->add_option("--train-limit", train_data.train_limit, "Use only the first N training samples");
  train_cmd->add_option("--test-limit", train_data.test_limit, "Use only the first N test samples");

  // eval
  NetOptions eval_net;
  DataOptions eval_data;
  std::string eval_ckpt;
  auto* eval_cmd = app.add_subcommand("eval", "Top-1/top-5 accuracy of a checkpoint on the test split");
  add_net_options(eval_cmd, eval_net);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data.dir, "Directory with CIFAR-10 binary batches")->required();
  eval_cmd->add_option("--test-limit", eval_data.test_limit, "Use only the first N test samples");

  // compare
  std::string compare_archs, compare_arch = "resnet20", compare_config, compare_out;
  DataOptions compare_data;
  std::uint64_t compare_seed = 0;
  int compare_epochs = 0;
  auto* compare = app.add_subcommand("compare", "Train several attention configurations on identical data order");
  compare->add_option("--archs", compare_archs, "Comma list such as se,ba:conv1,ba:conv2,ba:conv1&2")->required();
  compare->add_option("--arch", compare_arch, "Backbone shared by every configuration")->capture_default_str();
  compare->add_option("--data", compare_data.dir, "Directory with CIFAR-10 binary batches")->required();
  compare->add_option("--config", compare_config, "Training configuration JSON");
  compare->add_option("--out", compare_out, "Output directory")->required();
  auto* compare_seed_opt = compare->add_option("--seed", compare_seed, "Overrides the configured seed");
  auto* compare_epochs_opt = compare->add_option("--epochs", compare_epochs, "Overrides the configured epochs");
  compare->add_option("--train-limit", compare_data.train_limit, "Use only the first N training samples");
  compare->add_option("--test-limit", compare_data.test_limit, "Use only the first N test samples");

  // export-attention
  NetOptions export_net;
  DataOptions export_data;
  std::string export_ckpt, export_classes, export_out;
  auto* export_cmd = app.add_subcommand("export-attention", "Per-class mean attention weights as CSV");
  add_net_options(export_cmd, export_net);
  export_cmd->add_option("--checkpoint", export_ckpt, "Checkpoint file")->required();
  export_cmd->add_option("--data", export_data.dir, "Directory with CIFAR-10 binary batches")->required();
  export_cmd->add_option("--classes", export_classes, "Comma list of class labels (default: all)");
  export_cmd->add_option("--out", export_out, "Output CSV file")->required();
  export_cmd->add_option("--test-limit", export_data.test_limit, "Use only the first N test samples");

  // importance
  NetOptions imp_net;
  DataOptions imp_data;
  imp_data.test_limit = 1000;
  std::string imp_ckpt, imp_out;
  ForestConfig forest;
  std::uint64_t imp_seed = 0;
  auto* importance = app.add_subcommand("importance", "Random-forest importance of each bridged branch as CSV");
  add_net_options(importance, imp_net);
  importance->add_option("--checkpoint", imp_ckpt, "Checkpoint file")->required();
  importance->add_option("--data", imp_data.dir, "Directory with CIFAR-10 binary batches")->required();
  importance->add_option("--out", imp_out, "Output CSV file")->required();
  importance->add_option("--test-limit", imp_data.test_limit, "Samples used for fitting")->capture_default_str();
  importance->add_option("--trees", forest.trees, "Trees per forest")->capture_default_str();
  importance->add_option("--max-depth", forest.max_depth, "Maximum tree depth")->capture_default_str();
  importance->add_option("--min-leaf", forest.min_leaf, "Minimum samples per leaf")->capture_default_str();
  importance->add_option("--seed", imp_seed, "Forest seed")->capture_default_str();

  // CLI11 consumes arguments from the back.
  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    apply_thread_env();

    if (*count) {
      const ArchSpec arch = arch_or_usage(count_net.arch);
      BridgeSourceConfig sources;
      std::vector<AttentionKind> kinds;
      try {
        sources = BridgeSourceConfig::parse(count_net.sources);
        if (count_net.attention == "all") {
          kinds = {AttentionKind::none, AttentionKind::se, AttentionKind::ba};
        } else {
          kinds = {parse_attention_kind(count_net.attention)};
        }
      } catch (const ConfigurationError& e) {
        throw UsageError(e.what());
      }
      Shape shape{1};
      shape.insert(shape.end(), arch.input_shape.begin(), arch.input_shape.end());
      if (!input_shape.empty()) shape = parse_shape(input_shape);
      for (const auto kind : kinds) {
        const Cost c = network_cost(arch, kind, sources, shape);
        out << arch.name << ' ' << std::left << std::setw(5) << to_string(kind) << ' ' << format_cost(c) << "  ("
            << c.params << " params, " << c.flops << " FLOPs)\n";
      }
      return kExitOk;
    }

    if (*train_cmd) {
      const NetChoice choice = resolve(train_net);
      const TrainConfig cfg = load_config(train_config, train_seed_opt, train_seed, train_epochs_opt, train_epochs);
      const auto [train_set, test_set] = load_data(train_data);
      const fs::path dir(train_out);
      fs::create_directories(dir);
      const History h = train_dispatch(choice, train_set, test_set, cfg, dir / "model.ckpt", "", out);
      write_file_atomic(dir / "history.csv", h.to_csv());
      write_file_atomic(dir / "config.json", cfg.to_json() + "\n");
      const auto& last = h.epochs.back();
      out << "final  loss " << last.train_loss << "  top1 " << last.test_top1 << "  top5 " << last.test_top5 << '\n';
      return kExitOk;
    }

    if (*eval_cmd) {
      const NetChoice choice = resolve(eval_net);
      auto net = load_network(choice, eval_ckpt);
      const auto test = load_data(eval_data).second;
      check_input(choice.arch, test);
      const auto acc = evaluate(net, test);
      out << "top1 " << acc.top1 << "  top5 " << acc.top5 << "  (" << test.size() << " samples)\n";
      return kExitOk;
    }

    if (*compare) {
      const ArchSpec arch = arch_or_usage(compare_arch);
      std::vector<CompareEntry> entries;
      for (const auto& item : split_list(compare_archs)) entries.push_back(parse_compare_entry(item, arch));
      if (entries.size() < 2) throw UsageError("compare needs at least two configurations");
      for (const auto& e : entries) {
        for (const auto& block : e.choice.arch.expand(e.choice.attention, e.choice.sources)) block.validate();
      }
      const TrainConfig cfg =
          load_config(compare_config, compare_seed_opt, compare_seed, compare_epochs_opt, compare_epochs);
      const auto [train_set, test_set] = load_data(compare_data);
      const fs::path dir(compare_out);
      fs::create_directories(dir);

      std::vector<History> histories;
      for (const auto& e : entries) {
        histories.push_back(train_dispatch(e.choice, train_set, test_set, cfg, {}, "[" + e.label + "] ", out));
      }
      const auto& reference = histories.front().batch_hashes;
      for (std::size_t i = 1; i < histories.size(); ++i) {
        if (histories[i].batch_hashes != reference) {
          throw NumericError("compare: data order of '" + entries[i].label + "' differs from '" +
                             entries.front().label + "'");
        }
      }

      std::ostringstream report;
      report << "config,top1\n";
      for (std::size_t i = 0; i < entries.size(); ++i) {
        report << entries[i].label << ',' << histories[i].epochs.back().test_top1 << '\n';
      }
      std::ostringstream hashes;
      hashes << "step";
      for (const auto& e : entries) hashes << ',' << e.label;
      hashes << '\n';
      for (std::size_t s = 0; s < reference.size(); ++s) {
        hashes << s + 1;
        for (const auto& h : histories) hashes << ',' << std::hex << h.batch_hashes[s] << std::dec;
        hashes << '\n';
      }
      write_file_atomic(dir / "compare.csv", report.str());
      write_file_atomic(dir / "batch_hashes.csv", hashes.str());
      out << report.str() << "data order identical across " << entries.size() << " configurations ("
          << reference.size() << " steps)\n";
      return kExitOk;
    }

    if (*export_cmd) {
      const NetChoice choice = resolve(export_net);
      const auto classes = parse_classes(export_classes);
      auto net = load_network(choice, export_ckpt);
      const auto test = load_data(export_data).second;
      check_input(choice.arch, test);
      const auto traces = capture_traces(net, test, classes);
      const auto rows = class_mean_weights(traces, classes);
      write_file_atomic(export_out, class_means_csv(rows));
      std::map<int, std::pair<double, int>> per_block;
      for (const auto& s : class_mean_spread(rows)) {
        per_block[s.block].first += s.variance;
        per_block[s.block].second += 1;
      }
      for (const auto& [block, acc] : per_block) {
        out << "block " << block << "  mean per-class channel variance " << acc.first / acc.second << '\n';
      }
      out << "wrote " << rows.size() << " rows to " << export_out << '\n';
      return kExitOk;
    }

    if (*importance) {
      const NetChoice choice = resolve(imp_net);
      auto net = load_network(choice, imp_ckpt);
      const auto test = load_data(imp_data).second;
      check_input(choice.arch, test);
      const auto traces = capture_traces(net, test);
      const auto report = branch_importance(traces, forest, imp_seed);
      write_file_atomic(imp_out, report.to_csv());
      for (const auto& b : report.blocks) {
        out << "block " << b.block;
        for (std::size_t i = 0; i < b.shares.size(); ++i) out << "  S" << b.sources[i] << ' ' << b.shares[i];
        if (b.degenerate) out << "  (degenerate)";
        out << '\n';
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace banet::cli
