#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lqgcn/digest.hpp"
#include "lqgcn/io.hpp"
#include "lqgcn/metrics.hpp"
#include "lqgcn/record.hpp"
#include "lqgcn/synthetic.hpp"
#include "lqgcn/trainer.hpp"

// Command-line front end: train / eval / synth / sweep.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

namespace lqgcn {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output file names written by `train`.
namespace train_outputs {
inline constexpr const char* affiliations = "affiliations.tsv";
inline constexpr const char* cover = "cover.txt";
inline constexpr const char* log = "train_log.jsonl";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* checkpoint = "checkpoint.txt";
}  // namespace train_outputs

/// Output file names written by `synth`.
namespace synth_outputs {
inline constexpr const char* edges = "edges.tsv";
inline constexpr const char* attributes = "attributes.txt";
inline constexpr const char* truth = "truth.txt";
inline constexpr const char* affiliations = "affiliations_true.tsv";
}  // namespace synth_outputs

/// Parses whitespace-separated key=value tokens, as printed by eval and sweep.
inline std::map<std::string, double> parse_metric_report(std::string_view text) {
  std::map<std::string, double> out;
  for (auto tok : detail::split_ws(text)) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0) throw DataError("malformed metric token '" + std::string(tok) + "'");
    auto v = detail::parse_number<double>(tok.substr(eq + 1));
    if (!v) throw DataError("malformed metric value in '" + std::string(tok) + "'");
    out[std::string(tok.substr(0, eq))] = *v;
  }
  return out;
}

inline std::string format_metric_report(double onmi_v, double recall_v) {
  return "onmi=" + format_fixed(onmi_v) + "\nrecall=" + format_fixed(recall_v) + "\n";
}

namespace detail {

struct TrainArgs {
  std::string edges, attrs, truth, out, manifest;
  std::string variant = "main", input = "x", lq = "on";
  std::string outer{to_string(TrainConfig{}.outer)};
  std::string scaling{to_string(TrainConfig{}.lq_scaling)};
  std::string contrast{to_string(TrainConfig{}.contrast)};
  TrainConfig cfg;
};

inline std::vector<double> default_sweep_thresholds() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

inline void check_digest(const std::string& role, const InputFile& f) {
  const std::string now = sha256_file(f.path);
  if (now != f.sha256)
    throw DataError("input '" + role + "' (" + f.path + ") changed since the manifest was written: sha256 " + now +
                    " != " + f.sha256);
}

inline int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  RunManifest manifest;

  if (!a.manifest.empty()) {
    manifest = parse_manifest(a.manifest);
    for (const auto& [role, f] : manifest.inputs) check_digest(role, f);
  } else {
    if (a.edges.empty()) throw UsageError("train: --edges is required");
    const InputMode mode = parse_enum(kInputNames, a.input, "input mode");
    if (mode != InputMode::adjacency && a.attrs.empty())
      throw UsageError("train: --input " + a.input + " requires --attrs");
    if (a.lq != "on" && a.lq != "off") throw UsageError("train: --lq must be 'on' or 'off'");
    manifest.input = mode;
    manifest.config = a.cfg;
    manifest.config.variant = parse_enum(kVariantNames, a.variant, "variant");
    manifest.config.outer = parse_enum(kOuterNames, a.outer, "outer propagation");
    manifest.config.lq_scaling = parse_enum(kScalingNames, a.scaling, "scaling");
    manifest.config.contrast = parse_enum(kContrastNames, a.contrast, "contrast rule");
    manifest.config.lq_enabled = a.lq == "on";
    manifest.inputs["edges"] = {a.edges, sha256_file(a.edges)};
    if (!a.attrs.empty() && mode != InputMode::adjacency) manifest.inputs["attributes"] = {a.attrs, sha256_file(a.attrs)};
    if (!a.truth.empty()) manifest.inputs["truth"] = {a.truth, sha256_file(a.truth)};
  }
  manifest.outputs = {{"affiliations", train_outputs::affiliations},
                      {"cover", train_outputs::cover},
                      {"log", train_outputs::log},
                      {"checkpoint", train_outputs::checkpoint}};

  EdgeListStats stats;
  const Graph g = parse_edge_list(manifest.inputs.at("edges").path, &stats);
  if (stats.self_loops) err << "warning: dropped " << stats.self_loops << " self-loop(s)\n";
  if (stats.duplicates) err << "warning: merged " << stats.duplicates << " duplicate edge(s)\n";

  std::optional<FeatureMatrix> attrs;
  if (auto it = manifest.inputs.find("attributes"); it != manifest.inputs.end())
    attrs = parse_attributes(it->second.path);
  std::optional<Cover> truth;
  if (auto it = manifest.inputs.find("truth"); it != manifest.inputs.end())
    truth = parse_cover(it->second.path, g.n_nodes());

  TrainConfig& cfg = manifest.config;
  if (cfg.k == 0) {
    if (!truth) throw UsageError("train: --k is required without --truth");
    cfg.k = truth->size();
  }
  try {
    cfg.validate();
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }

  const FeatureMatrix x = assemble_input(g, attrs ? &*attrs : nullptr, manifest.input);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_manifest(dir / train_outputs::manifest, manifest);

  TrainResult result = [&] {
    try {
      return train(g, x, cfg);
    } catch (const DivergenceError& e) {
      write_checkpoint(dir / train_outputs::checkpoint, e.last_finite());
      write_train_log(dir / train_outputs::log, e.log());
      throw;
    }
  }();

  const Cover cover = threshold_assign(result.f, cfg.threshold);
  write_affiliations(dir / train_outputs::affiliations, result.f);
  write_cover(dir / train_outputs::cover, cover);
  write_train_log(dir / train_outputs::log, result.log);
  write_checkpoint(dir / train_outputs::checkpoint, result.params);

  if (truth) out << format_metric_report(onmi(*truth, cover), recall_best_match(*truth, cover));
  return kExitOk;
}

inline std::size_t cover_extent(const std::filesystem::path& p) { return parse_cover(p).n_nodes(); }

inline int cmd_eval(const std::string& pred_path, const std::string& truth_path, std::size_t n, std::ostream& out) {
  if (n == 0) n = std::max(cover_extent(pred_path), cover_extent(truth_path));
  const Cover pred = parse_cover(pred_path, n);
  const Cover truth = parse_cover(truth_path, n);
  out << format_metric_report(onmi(truth, pred), recall_best_match(truth, pred));
  return kExitOk;
}

inline int cmd_synth(const PlantedSpec& spec, std::uint64_t seed, const std::string& dir, std::ostream& out) {
  namespace fs = std::filesystem;
  const PlantedInstance inst = make_planted(spec, seed);
  const fs::path d = dir;
  write_edge_list(d / synth_outputs::edges, inst.graph);
  write_attributes(d / synth_outputs::attributes, membership_features(inst.cover_true));
  write_cover(d / synth_outputs::truth, inst.cover_true);
  write_affiliations(d / synth_outputs::affiliations, inst.f_true);
  out << "nodes=" << inst.graph.n_nodes() << "\nedges=" << inst.graph.n_edges() << "\n";
  return kExitOk;
}

inline int cmd_sweep(const std::string& aff_path, const std::string& truth_path, std::vector<double> ps, bool raw,
                     std::ostream& out) {
  if (ps.empty()) ps = default_sweep_thresholds();
  for (double p : ps)
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("sweep: thresholds must lie in [0, 1]");
  const AffiliationMatrix f = parse_affiliations(aff_path);
  const Cover truth = parse_cover(truth_path, f.n_nodes());
  for (const auto& [p, cover] : threshold_sweep(f, ps, raw ? ThresholdMode::raw : ThresholdMode::column_max))
    out << "p=" << format_double(p) << "\tonmi=" << format_fixed(onmi(truth, cover))
        << "\trecall=" << format_fixed(recall_best_match(truth, cover)) << "\n";
  return kExitOk;
}

}  // namespace detail

/// Runs the command line; never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Overlapping community detection with a local-modularity-regularized GCN", "lqgcn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  detail::TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train on a graph and write affiliations, cover, log, manifest");
  train_cmd->add_option("--edges", ta.edges, "Edge list file");
  train_cmd->add_option("--attrs", ta.attrs, "Attribute file (sparse or dense CSV)");
  train_cmd->add_option("--truth", ta.truth, "Ground-truth cover; prints onmi/recall when given");
  train_cmd->add_option("--k", ta.cfg.k, "Number of communities (defaults to the truth size)");
  train_cmd->add_option("--variant", ta.variant, "Encoder variant")->check(CLI::IsMember({"main", "ablation"}));
  train_cmd->add_option("--input", ta.input, "Encoder input: x attributes, g adjacency rows, u both")
      ->check(CLI::IsMember({"x", "g", "u"}));
  train_cmd->add_option("--alpha", ta.cfg.alpha, "Weight of the reconstruction loss");
  train_cmd->add_option("--beta", ta.cfg.beta, "Weight of the local-modularity loss");
  train_cmd->add_option("--lr", ta.cfg.lr, "Adam learning rate");
  train_cmd->add_option("--weight-decay", ta.cfg.weight_decay, "L2 penalty on the weights");
  train_cmd->add_option("--hidden", ta.cfg.hidden, "Hidden width");
  train_cmd->add_option("--dropout", ta.cfg.dropout, "Dropout rate");
  train_cmd->add_option("--threshold", ta.cfg.threshold, "Membership threshold p");
  train_cmd->add_option("--iters", ta.cfg.max_iters, "Maximum iterations");
  train_cmd->add_option("--seed", ta.cfg.seed, "Random seed");
  train_cmd->add_option("--lq", ta.lq, "Local-modularity term")->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--outer", ta.outer, "Outer propagation matrix")
      ->check(CLI::IsMember({"renormalized", "augmented", "raw"}));
  train_cmd->add_option("--scaling", ta.scaling, "Null-model scaling of B")->check(CLI::IsMember({"newman", "literal"}));
  train_cmd->add_option("--contrast", ta.contrast, "Contrast partner rule")
      ->check(CLI::IsMember({"successor", "strongest"}));
  train_cmd->add_option("--bp-samples", ta.cfg.bp_samples, "Sampled pairs per class for the reconstruction loss (0 = exact)");
  train_cmd->add_option("--manifest", ta.manifest, "Re-run the configuration recorded in a manifest");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();

  std::string pred_path, truth_path;
  std::size_t eval_n = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Compare a predicted cover with the ground truth");
  eval_cmd->add_option("--pred", pred_path, "Predicted cover")->required();
  eval_cmd->add_option("--truth", truth_path, "Ground-truth cover")->required();
  eval_cmd->add_option("--n", eval_n, "Node count (default: 1 + largest id in either file)");

  PlantedSpec ps;
  ps.n = 200;
  ps.k = 4;
  ps.overlap_fraction = 0.1;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Sample a planted overlapping-community graph");
  synth_cmd->add_option("--n", ps.n, "Nodes");
  synth_cmd->add_option("--k", ps.k, "Communities");
  synth_cmd->add_option("--overlap", ps.overlap_fraction, "Fraction of nodes with a second community");
  synth_cmd->add_option("--strength", ps.strength, "Affiliation strength c");
  synth_cmd->add_option("--eta", ps.background, "Background edge probability");
  synth_cmd->add_option("--seed", synth_seed, "Random seed");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  std::string aff_path, sweep_truth;
  std::vector<double> thresholds;
  bool raw = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a range of membership thresholds");
  sweep_cmd->add_option("--affiliations", aff_path, "Affiliation TSV")->required();
  sweep_cmd->add_option("--truth", sweep_truth, "Ground-truth cover")->required();
  sweep_cmd->add_option("--thresholds", thresholds, "Comma-separated thresholds (default 0.1..0.9)")->delimiter(',');
  sweep_cmd->add_flag("--raw", raw, "Compare raw values instead of column-rescaled ones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return detail::cmd_train(std::move(ta), out, err);
    if (*eval_cmd) return detail::cmd_eval(pred_path, truth_path, eval_n, out);
    if (*synth_cmd) return detail::cmd_synth(ps, synth_seed, synth_out, out);
    if (*sweep_cmd) return detail::cmd_sweep(aff_path, sweep_truth, thresholds, raw, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lqgcn
